#include "sdpuf/error.hpp"
#include "sdpuf/separatrix.hpp"
#include "sdpuf/variation.hpp"

#include <doctest.h>

#include <cmath>

using namespace sdpuf;

namespace {

const CellEnvironment kEnv{1.2, 1.2};
const RampSpec kRamp;
constexpr double kTol = kDefaultBisectionTolerance;

CellInstance nominal()
{
    return DeviceConfig{}.nominal_cell();
}

std::vector<CellInstance> population(std::size_t n, std::uint64_t seed)
{
    return sample_population(nominal(), MismatchSpec{}, n, seed);
}

} // namespace

TEST_CASE("axis points for each bias")
{
    CHECK(flip_axis_point(StateLabel::S1, 0.2) == StateVector{0.2, 0.0});
    CHECK(flip_axis_point(StateLabel::S0, 0.2) == StateVector{0.0, 0.2});
    CHECK_THROWS_AS(flip_axis_point(StateLabel::Unsettled, 0.2), Error);
}

TEST_CASE("symmetric cell has zero SD")
{
    const SdRecord r = compute_sd(nominal(), kEnv, kRamp);
    CHECK(r.sd == 0.0);
    CHECK(r.bias == StateLabel::Unsettled);
    CHECK(r.converged);
    CHECK(sd_oracle(nominal(), kEnv, kRamp, 1e-4) == 0.0);
}

TEST_CASE("flip search agrees with the brute-force scan near 31 mV")
{
    // Cell 10 of seed 1 sits close to a 31 mV axis intercept.
    const CellInstance c = sample_cell(nominal(), MismatchSpec{}, 1, 10);
    const double oracle = sd_oracle(c, kEnv, kRamp, 1e-4);
    CHECK(oracle == doctest::Approx(-0.0315).epsilon(1e-9));
    const SdRecord r = compute_sd(c, kEnv, kRamp);
    CHECK(std::abs(r.sd - oracle) <= 1e-4 + kTol);
    CHECK(std::abs(std::abs(oracle) - r.flip_voltage) <= 2.0 * kTol + 1e-4);

    const FlipSearchResult f = flip_search(c, kEnv, r.bias, kRamp);
    CHECK(f.converged);
    CHECK(f.flip_voltage - f.kept_voltage <= kTol);
    const auto flips = [&](double v) {
        return integrate_from(c, kEnv, flip_axis_point(r.bias, v), kRamp).label == opposite(r.bias);
    };
    CHECK(flips(f.flip_voltage + 10 * kTol));
    CHECK(!flips(f.flip_voltage - 10 * kTol));
}

TEST_CASE("a 1 mV imbalance gives a small SD")
{
    CellInstance c = nominal();
    c.n1.vth_offset = 0.001;
    const SdRecord r = compute_sd(c, kEnv, kRamp);
    CHECK(r.bias != StateLabel::Unsettled);
    CHECK(r.flip_voltage < 0.005);
}

TEST_CASE("SD record invariants on a population")
{
    const auto pop = population(60, 5);
    for (const auto& c : pop) {
        const SdRecord r = compute_sd(c, kEnv, kRamp);
        CHECK(r.cell_id == c.cell_id);
        CHECK(r.converged);
        CHECK(std::abs(r.sd) == r.flip_voltage);
        CHECK(r.flip_voltage <= kEnv.vdd);
        CHECK(r.flip_voltage >= 0.0);
        CHECK((r.sd > 0) == (r.bias == StateLabel::S1));
        CHECK((r.sd < 0) == (r.bias == StateLabel::S0));
        CHECK(startup_test0(c, kEnv, kRamp) == r.bias);
    }
}

TEST_CASE("mirroring a cell negates its SD")
{
    const auto pop = population(100, 11);
    for (const auto& c : pop) {
        const double a = compute_sd(c, kEnv, kRamp).sd;
        const double b = compute_sd(c.mirrored(), kEnv, kRamp).sd;
        CHECK(std::abs(a + b) <= 2.0 * kTol);
    }
}

TEST_CASE("coarse and fine oracle grids nest")
{
    const auto pop = population(50, 17);
    for (const auto& c : pop) {
        const double fine = sd_oracle(c, kEnv, kRamp, 1e-4);
        const double coarse = sd_oracle(c, kEnv, kRamp, 1e-3);
        CHECK(std::abs(coarse - fine) <= 1e-3 + 1e-12);
        CHECK(std::abs(coarse) >= std::abs(fine) - 1e-12);
    }
}

TEST_CASE("SD moves monotonically with the n1 threshold")
{
    // With p1 at +10 mV the sweep stays on the S0 side; SD falls as n1 weakens.
    double prev = INFINITY;
    for (double o : {-0.04, -0.02, 0.0, 0.02, 0.04}) {
        CellInstance c = nominal();
        c.p1.vth_offset = 0.01;
        c.n1.vth_offset = o;
        const double sd = compute_sd(c, kEnv, kRamp).sd;
        CHECK(sd < prev);
        prev = sd;
    }
}

TEST_CASE("a cell that never flips is reported, not thrown")
{
    // A huge pull-down imbalance keeps the cell in S0 from every axis point.
    CellInstance c = nominal();
    c.n2.vth_offset = -1.0;
    c.p1.vth_offset = -1.0;
    const SdRecord r = compute_sd(c, kEnv, kRamp);
    if (!r.converged) {
        CHECK(r.flip_voltage == kEnv.vdd);
        CHECK_THROWS_AS(sd_oracle(c, kEnv, kRamp, 1e-2), Error);
    } else {
        CHECK(r.flip_voltage <= kEnv.vdd);
    }
}

TEST_CASE("invalid searches")
{
    CHECK_THROWS_AS(flip_search(nominal(), kEnv, StateLabel::Unsettled, kRamp), Error);
    CHECK_THROWS_AS(flip_search(nominal(), kEnv, StateLabel::S1, kRamp, {}, 0.0), Error);
    CHECK_THROWS_AS(sd_oracle(nominal(), kEnv, kRamp, 0.0), Error);
}
