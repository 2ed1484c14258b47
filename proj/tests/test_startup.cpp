#include "sdpuf/error.hpp"
#include "sdpuf/startup.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace sdpuf;

namespace {

const CellEnvironment kEnv{1.2, 1.2};

CellInstance nominal()
{
    return DeviceConfig{}.nominal_cell();
}

std::string temp_path(const char* name)
{
    return (std::filesystem::temp_directory_path() / name).string();
}

void write_file(const std::string& path, const std::string& text)
{
    std::ofstream(path) << text;
}

StartupDataset dataset_from_sup(const std::vector<std::pair<std::int64_t, std::int64_t>>& counts, std::size_t rows,
                                std::size_t cols)
{
    StartupDataset ds;
    ds.rows = rows;
    ds.cols = cols;
    for (std::size_t i = 0; i < counts.size(); ++i)
        ds.records.push_back(StartupRecord::from_counts(static_cast<std::int64_t>(i), counts[i].first, counts[i].second));
    return ds;
}

} // namespace

TEST_CASE("records follow the count definitions")
{
    const StartupRecord r = StartupRecord::from_counts(3, 990, 1000);
    CHECK(r.n_zeros == 10);
    CHECK(r.sup1 == 0.99);
    CHECK(r.sup0 == 0.01);
    CHECK(r.sup0 + r.sup1 == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(cell_ber(r) == 0.01);
    CHECK(cell_ber(StartupRecord::from_counts(0, 10, 1000)) == 0.01);
    CHECK(cell_ber(StartupRecord::from_counts(0, 500, 1000)) == 0.5);
    CHECK_THROWS_AS(StartupRecord::from_counts(0, 11, 10), Error);
    CHECK_THROWS_AS(StartupRecord::from_counts(0, 0, 0), Error);
}

TEST_CASE("noiseless power-ups repeat exactly")
{
    CellInstance c = nominal();
    c.n1.vth_offset = -0.05;
    const auto s = simulate_sup(c, kEnv, RampSpec{}, NoiseSpec{0.0}, 50, 1);
    CHECK(s.record.sup1 == 1.0);
    CHECK(s.record.n_trials == 50);
    CHECK(s.transients == 1);
    const auto m = simulate_sup(c.mirrored(), kEnv, RampSpec{}, NoiseSpec{0.0}, 50, 1);
    CHECK(m.record.sup1 == 0.0);
}

TEST_CASE("symmetric cell with noise starts up at random")
{
    const auto s = simulate_sup(nominal(), kEnv, RampSpec{}, NoiseSpec{2e-3}, 1000, 8);
    CHECK(std::abs(s.record.sup1 - 0.5) <= 4.0 * std::sqrt(0.25 / 1000.0));
}

TEST_CASE("strongly biased cell ignores small noise")
{
    // |SD| of this cell is about 5 mV, well beyond 5 sigma of 0.8 mV.
    CellInstance c = nominal();
    c.n1.vth_offset = -0.05;
    const auto s = simulate_sup(c, kEnv, RampSpec{}, NoiseSpec{0.8e-3}, 1000, 2);
    CHECK(s.record.sup1 >= 0.999);
}

TEST_CASE("order certificates reproduce exhaustive simulation")
{
    const auto pop = sample_population(nominal(), {0.004, 0.004}, 12, 21);
    for (const auto& c : pop) {
        SupOptions fast, full;
        fast.keep_trial_bits = full.keep_trial_bits = true;
        full.exhaustive = true;
        const auto a = simulate_sup(c, kEnv, RampSpec{}, NoiseSpec{2.5e-3}, 200, 4, {}, fast);
        const auto b = simulate_sup(c, kEnv, RampSpec{}, NoiseSpec{2.5e-3}, 200, 4, {}, full);
        CHECK(a.record == b.record);
        CHECK(a.trial_bits == b.trial_bits);
        CHECK(a.transients <= b.transients);
    }
}

TEST_CASE("more noise moves a biased cell towards one half")
{
    CellInstance c = nominal();
    c.n1.vth_offset = -0.05; // SD about +5 mV
    double prev = 1.0 + 1e-9;
    for (double sigma : {0.0, 2.5e-3, 5e-3, 7.5e-3, 10e-3}) {
        const double sup1 = simulate_sup(c, kEnv, RampSpec{}, NoiseSpec{sigma}, 5000, 3).record.sup1;
        CHECK(sup1 > 0.5);
        CHECK(sup1 <= prev + 2.0 * std::sqrt(0.25 / 5000.0));
        prev = sup1;
    }
    CHECK(prev < 0.999);
}

TEST_CASE("dataset emulation is deterministic for any worker count")
{
    const auto pop = sample_population(nominal(), MismatchSpec{}, 16, 6);
    const auto a = simulate_dataset(pop, 4, 4, kEnv, RampSpec{}, NoiseSpec{2.5e-3}, 100, 5, {}, {}, 1);
    const auto b = simulate_dataset(pop, 4, 4, kEnv, RampSpec{}, NoiseSpec{2.5e-3}, 100, 5, {}, {}, 3);
    CHECK(a.dataset.records == b.dataset.records);
    CHECK_NOTHROW(a.dataset.validate());
    CHECK_THROWS_AS(simulate_dataset(pop, 3, 4, kEnv, RampSpec{}, NoiseSpec{}, 10, 5), Error);
}

TEST_CASE("ingesting counts files")
{
    const std::string p = temp_path("sdpuf_counts.csv");
    write_file(p, "cell_id,n_ones,n_trials\n0,990,1000\n1,10,1000\n");
    const StartupDataset ds = ingest_dataset(p);
    CHECK(ds.size() == 2);
    CHECK(ds.records[0].sup1 == 0.99);
    CHECK(cell_ber(ds.records[0]) == 0.01);
    CHECK(ds.source == DataSource::Measured);
    CHECK(ds.rows == 2);
    CHECK(ds.cols == 1);
    CHECK(ingest_dataset(p, Geometry{1, 2}).cols == 2);
    CHECK_THROWS_AS(ingest_dataset(p, Geometry{3, 1}), Error);

    write_file(p, "cell_id,n_ones,n_trials\n0,990,1000\n1,1001,1000\n");
    try {
        ingest_dataset(p);
        FAIL("expected MALFORMED");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Malformed);
        CHECK(std::string(e.what()).find(":3:") != std::string::npos);
    }
    write_file(p, "cell_id,n_ones,n_trials\n0,5,10\n2,5,10\n");
    CHECK_THROWS_AS(ingest_dataset(p), Error);
    write_file(p, "cell_id,n_ones,n_trials\n0,5\n");
    CHECK_THROWS_AS(ingest_dataset(p), Error);
    std::filesystem::remove(p);
    CHECK_THROWS_AS(ingest_dataset(p), Error);
}

TEST_CASE("ingesting bitmaps")
{
    const std::string p = temp_path("sdpuf_bitmap.txt");
    write_file(p, "1 2 2\n01\n11\n");
    const StartupDataset ds = ingest_dataset(p);
    CHECK(ds.rows == 1);
    CHECK(ds.cols == 2);
    CHECK(ds.records[0].n_ones == 1);
    CHECK(ds.records[0].sup1 == 0.5);
    CHECK(ds.records[1].sup1 == 1.0);
    write_file(p, "1 2 2\n01\n");
    CHECK_THROWS_AS(ingest_dataset(p), Error);
    write_file(p, "1 2 2\n01\n1x\n");
    CHECK_THROWS_AS(ingest_dataset(p), Error);
    write_file(p, "1 2 2\n01\n111\n");
    CHECK_THROWS_AS(ingest_dataset(p), Error);
    std::filesystem::remove(p);
}

TEST_CASE("simulated datasets survive export and re-ingestion")
{
    const auto pop = sample_population(nominal(), MismatchSpec{}, 6, 8);
    SupOptions opts;
    opts.keep_trial_bits = true;
    const auto sim = simulate_dataset(pop, 2, 3, kEnv, RampSpec{}, NoiseSpec{2.5e-3}, 40, 1, {}, opts);
    const std::string counts = temp_path("sdpuf_sim_counts.csv");
    const std::string bitmap = temp_path("sdpuf_sim_bitmap.txt");
    write_counts_csv(sim.dataset, counts);
    write_bitmap(2, 3, sim.trial_bits, bitmap);
    const auto a = ingest_dataset(counts, Geometry{2, 3});
    const auto b = ingest_dataset(bitmap);
    CHECK(a.records == sim.dataset.records);
    CHECK(b.records == sim.dataset.records);
    CHECK(b.rows == 2);
    std::filesystem::remove(counts);
    std::filesystem::remove(bitmap);
}

TEST_CASE("regions")
{
    const auto all_one = dataset_from_sup({{10, 10}, {10, 10}}, 2, 1);
    const RegionFractions r = classify_regions(all_one);
    CHECK(r.a0 == 0.0);
    CHECK(r.b == 0.0);
    CHECK(r.a1 == 1.0);

    // 100 cells: 46 at 0, 46 at 1, 8 in between -> 92 % outside (0.09, 0.91).
    std::vector<std::pair<std::int64_t, std::int64_t>> c;
    for (int i = 0; i < 46; ++i)
        c.push_back({0, 1000});
    for (int i = 0; i < 46; ++i)
        c.push_back({1000, 1000});
    for (int i = 0; i < 8; ++i)
        c.push_back({500, 1000});
    const auto ds = dataset_from_sup(c, 10, 10);
    const RegionFractions f = classify_regions(ds);
    CHECK(f.a0 + f.a1 == 0.92);
    CHECK(f.a0 + f.b + f.a1 == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(classify_regions(dataset_from_sup({{90, 1000}, {910, 1000}}, 2, 1)).b == 0.0);

    CHECK_THROWS_AS(classify_regions(StartupDataset{}), Error);
    CHECK_THROWS_AS(classify_regions(ds, 0.6, 0.4), Error);
}

TEST_CASE("mean bit error rate")
{
    CHECK(mean_ber(dataset_from_sup({{0, 10}, {10, 10}}, 2, 1)) == 0.0);
    CHECK(mean_ber(dataset_from_sup({{10, 1000}, {970, 1000}}, 2, 1)) == doctest::Approx(0.02).epsilon(1e-14));
    CHECK_THROWS_AS(mean_ber(StartupDataset{}), Error);
}

TEST_CASE("spatial maps")
{
    const auto ds = dataset_from_sup({{1, 4}, {2, 4}, {3, 4}, {4, 4}}, 2, 2);
    const std::string p = temp_path("sdpuf_map.csv");
    write_spatial_map(ds, p);
    std::ifstream in(p);
    std::string l1, l2, l3;
    std::getline(in, l1);
    std::getline(in, l2);
    CHECK(l1 == "0.25,0.5");
    CHECK(l2 == "0.75,1");
    CHECK(!std::getline(in, l3));
    const auto m = read_spatial_map(p);
    REQUIRE(m.size() == 2);
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t col = 0; col < 2; ++col)
            CHECK(m[r][col] == ds.records[r * 2 + col].sup1);

    const auto flat = dataset_from_sup({{3, 4}, {3, 4}, {3, 4}}, 1, 3);
    write_spatial_map(flat, p);
    const auto flat_map = read_spatial_map(p);
    REQUIRE(flat_map.size() == 1);
    for (double v : flat_map[0])
        CHECK(v == 0.75);
    std::filesystem::remove(p);
    CHECK_THROWS_AS(write_spatial_map(ds, "/nonexistent-dir/map.csv"), Error);
}

TEST_CASE("noise calibration hits a B-region target")
{
    const auto pop = sample_population(nominal(), MismatchSpec{}, 100, 1);
    const NoiseCalibration n = calibrate_sigma_init(pop, kEnv, RampSpec{}, 200, 1, kDefaultRegionLow,
                                                    kDefaultRegionHigh, 0.1, {}, 1, 0.011, 30);
    CHECK(std::abs(n.achieved_b - 0.1) <= 0.011);
    CHECK(n.sigma_init > 0.0);
}
