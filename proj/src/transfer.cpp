#include "sdpuf/transfer.hpp"

#include "sdpuf/error.hpp"
#include "sdpuf/io.hpp"
#include "sdpuf/rng.hpp"
#include "sdpuf/variation.hpp"

#include <json.hpp>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <sstream>

namespace sdpuf {

void SingleLogistic::validate() const
{
    if (!(a > 0.0 && a <= 1.0) || !(k > 0.0) || !std::isfinite(k))
        throw Error(ErrorCode::InvalidArgument, "single logistic needs 0 < a <= 1 and k > 0");
}

void DoubleLogistic::validate() const
{
    if (!(m > 0.0 && m < 1.0))
        throw Error(ErrorCode::InvalidArgument, "double logistic weight m must lie in (0, 1)");
    if (!(k1 > 0.0) || !(k2 > 0.0) || !std::isfinite(k1) || !std::isfinite(k2))
        throw Error(ErrorCode::InvalidArgument, "double logistic steepnesses must be > 0");
}

double logistic(double x) noexcept
{
    if (x >= 0.0)
        return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double eval_single(const SingleLogistic& model, double sd)
{
    return model.a * logistic(model.k * sd);
}

double eval_double(const DoubleLogistic& model, double sd)
{
    return model.m * logistic(model.k1 * sd) + (1.0 - model.m) * logistic(model.k2 * sd);
}

double eval(const TransferModel& model, double sd)
{
    return std::visit(
        [sd](const auto& m) {
            if constexpr (std::is_same_v<std::decay_t<decltype(m)>, SingleLogistic>)
                return eval_single(m, sd);
            else
                return eval_double(m, sd);
        },
        model);
}

double slope_at_zero(const SingleLogistic& model)
{
    return model.a * model.k / 4.0;
}

double slope_at_zero(const DoubleLogistic& model)
{
    return (model.m * model.k1 + (1.0 - model.m) * model.k2) / 4.0;
}

std::vector<CurvePoint> quantile_pairs(std::span<const double> sd_samples, std::span<const double> sup_samples)
{
    if (sd_samples.size() != sup_samples.size())
        throw Error(ErrorCode::SizeMismatch, "SD and SUP samples differ in size ("
                                                 + std::to_string(sd_samples.size()) + " vs "
                                                 + std::to_string(sup_samples.size()) + ")");
    std::vector<double> a(sd_samples.begin(), sd_samples.end());
    std::vector<double> b(sup_samples.begin(), sup_samples.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<CurvePoint> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        out[i] = {a[i], b[i]};
    return out;
}

namespace {

/// Relative frequencies over [0, 1] in `bins` cells. Each value is shared
/// linearly between the two nearest bin centres, so the result moves
/// continuously with the values.
std::vector<double> soft_histogram(std::span<const double> values, std::size_t bins)
{
    std::vector<double> h(bins, 0.0);
    const double nb = static_cast<double>(bins);
    for (double v : values) {
        const double x = std::clamp(v, 0.0, 1.0) * nb - 0.5;
        const double lo = std::floor(x);
        const double w = x - lo;
        const auto i = static_cast<long>(lo);
        const long last = static_cast<long>(bins) - 1;
        h[static_cast<std::size_t>(std::clamp(i, 0L, last))] += 1.0 - w;
        h[static_cast<std::size_t>(std::clamp(i + 1, 0L, last))] += w;
    }
    const double n = values.empty() ? 1.0 : static_cast<double>(values.size());
    for (double& c : h)
        c /= n;
    return h;
}

class ResidualFunction {
public:
    ResidualFunction(std::span<const CurvePoint> points, const FitOptions& options)
        : points_(points), options_(options)
    {
        if (options.objective == FitObjective::Histogram) {
            if (options.histogram_bins < 1)
                throw Error(ErrorCode::InvalidArgument, "histogram objective needs >= 1 bin");
            std::vector<double> sup(points.size());
            std::transform(points.begin(), points.end(), sup.begin(), [](CurvePoint p) { return p.sup; });
            target_ = soft_histogram(sup, options.histogram_bins);
        }
    }

    double operator()(const TransferModel& model) const
    {
        if (options_.objective == FitObjective::Pairs) {
            double sum = 0.0;
            for (const CurvePoint& p : points_) {
                const double d = eval(model, p.sd) - p.sup;
                sum += d * d;
            }
            return sum;
        }
        std::vector<double> predicted(points_.size());
        std::transform(points_.begin(), points_.end(), predicted.begin(),
                       [&](CurvePoint p) { return eval(model, p.sd); });
        const std::vector<double> h = soft_histogram(predicted, options_.histogram_bins);
        double sum = 0.0;
        for (std::size_t i = 0; i < h.size(); ++i)
            sum += (h[i] - target_[i]) * (h[i] - target_[i]);
        return sum;
    }

private:
    std::span<const CurvePoint> points_;
    const FitOptions& options_;
    std::vector<double> target_;
};

struct SimplexOutcome {
    std::vector<double> x;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};

using Objective = std::function<double(const double*)>;

double gsl_trampoline(const gsl_vector* v, void* params)
{
    const auto& f = *static_cast<const Objective*>(params);
    const double r = f(v->data);
    return std::isfinite(r) ? r : std::numeric_limits<double>::max();
}

SimplexOutcome nelder_mead(const Objective& f, std::span<const double> start, double step, int max_iterations,
                           double tolerance)
{
    const std::size_t n = start.size();
    gsl_multimin_function fn{&gsl_trampoline, n, const_cast<Objective*>(&f)};
    std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> x(gsl_vector_alloc(n), &gsl_vector_free);
    std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> steps(gsl_vector_alloc(n), &gsl_vector_free);
    for (std::size_t i = 0; i < n; ++i)
        gsl_vector_set(x.get(), i, start[i]);
    gsl_vector_set_all(steps.get(), step);
    std::unique_ptr<gsl_multimin_fminimizer, decltype(&gsl_multimin_fminimizer_free)> s(
        gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n), &gsl_multimin_fminimizer_free);
    gsl_multimin_fminimizer_set(s.get(), &fn, x.get(), steps.get());

    SimplexOutcome out;
    while (out.iterations < max_iterations) {
        ++out.iterations;
        if (gsl_multimin_fminimizer_iterate(s.get()) != GSL_SUCCESS)
            break;
        if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s.get()), tolerance) == GSL_SUCCESS) {
            out.converged = true;
            break;
        }
    }
    out.x.assign(s->x->data, s->x->data + n);
    out.value = s->fval;
    return out;
}

struct GslErrorsOff {
    GslErrorsOff() { gsl_set_error_handler_off(); }
};
const GslErrorsOff gsl_errors_off;

double logit(double p)
{
    return std::log(p / (1.0 - p));
}

} // namespace

double fit_residual(const TransferModel& model, std::span<const CurvePoint> points, const FitOptions& options)
{
    return ResidualFunction(points, options)(model);
}

FitResult fit_single(std::span<const CurvePoint> points, const FitOptions& options)
{
    if (points.size() < 2 && !(points.size() == 1 && points[0].sd == 0.0))
        throw Error(ErrorCode::InvalidArgument, "single fit needs at least 2 points");
    const ResidualFunction residual(points, options);
    const Objective f = [&](const double* x) { return residual(SingleLogistic{1.0, std::exp(x[0])}); };
    const double start[] = {std::log(100.0)};
    const SimplexOutcome r = nelder_mead(f, start, 0.5, options.max_iterations, options.simplex_tolerance);

    FitResult out;
    const SingleLogistic model{1.0, std::exp(r.x[0])};
    out.model = model;
    out.residual = r.value;
    out.iterations = r.iterations;
    out.converged = r.converged;
    const double lo = residual(SingleLogistic{1.0, model.k * 0.5});
    const double hi = residual(SingleLogistic{1.0, model.k * 2.0});
    out.degenerate = lo == r.value && hi == r.value;
    if (out.degenerate)
        out.converged = false;
    else if (!out.converged)
        throw Error(ErrorCode::NoConvergence, "single logistic fit hit the iteration cap");
    return out;
}

FitResult fit_double(std::span<const CurvePoint> points, const FitOptions& options)
{
    if (points.size() < 3)
        throw Error(ErrorCode::InvalidArgument, "double fit needs at least 3 points");
    const ResidualFunction residual(points, options);
    const Objective f = [&](const double* x) {
        return residual(DoubleLogistic{logistic(x[0]), std::exp(x[1]), std::exp(x[2])});
    };
    static constexpr std::array<std::array<double, 3>, 4> starts{{
        {0.2, 100.0, 2000.0},
        {0.5, 50.0, 500.0},
        {0.1, 200.0, 5000.0},
        {0.3, 150.0, 1000.0},
    }};

    FitResult best;
    best.residual = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool any_converged = false;
    for (const auto& s : starts) {
        const double x0[] = {logit(s[0]), std::log(s[1]), std::log(s[2])};
        const SimplexOutcome r = nelder_mead(f, x0, 0.5, options.max_iterations, options.simplex_tolerance);
        iterations += r.iterations;
        any_converged = any_converged || r.converged;
        if (r.value < best.residual) {
            DoubleLogistic m{logistic(r.x[0]), std::exp(r.x[1]), std::exp(r.x[2])};
            if (m.k1 > m.k2)
                m = {1.0 - m.m, m.k2, m.k1};
            best.model = m;
            best.residual = r.value;
            best.converged = r.converged;
        }
    }
    best.iterations = iterations;
    if (!any_converged)
        throw Error(ErrorCode::NoConvergence, "double logistic fit hit the iteration cap from every start");
    return best;
}

double invert_threshold(const TransferModel& model, double p, double upper)
{
    if (!(p > 0.5 && p < 1.0))
        throw Error(ErrorCode::InvalidArgument, "probability must satisfy 0.5 < p < 1");
    if (!(upper > 0.0))
        throw Error(ErrorCode::InvalidArgument, "upper bound must be > 0");
    if (eval(model, upper) < p)
        throw Error(ErrorCode::Unreachable, "the model never reaches p = " + io::format_double(p)
                                                + " below " + io::format_double(upper) + " V");
    double lo = 0.0;
    double hi = upper;
    while (hi - lo > 1e-5) {
        const double mid = 0.5 * (lo + hi);
        if (eval(model, mid) >= p)
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

double reliable_fraction(std::span<const double> sd_values, const TransferModel& model, double p, double upper)
{
    return exceedance(sd_values, invert_threshold(model, p, upper));
}

double reliable_fraction(std::span<const SdRecord> records, const TransferModel& model, double p, double upper)
{
    const std::vector<double> v = sd_values(records);
    return reliable_fraction(std::span<const double>(v), model, p, upper);
}

std::vector<ThresholdRow> threshold_table(const TransferModel& model, std::span<const double> probabilities,
                                          std::span<const double> sd_values, double upper)
{
    std::vector<double> ps(probabilities.begin(), probabilities.end());
    std::sort(ps.begin(), ps.end(), std::greater<>());
    std::vector<ThresholdRow> rows;
    rows.reserve(ps.size());
    for (double p : ps) {
        ThresholdRow r;
        r.p = p;
        r.sd_threshold = invert_threshold(model, p, upper);
        r.fraction = sd_values.empty() ? std::numeric_limits<double>::quiet_NaN()
                                       : exceedance(sd_values, r.sd_threshold);
        rows.push_back(r);
    }
    return rows;
}

void write_threshold_csv(std::span<const ThresholdRow> rows, const std::string& path)
{
    auto out = io::open_output(path);
    out << "p,sd_th_v,cells_percent\n";
    for (const ThresholdRow& r : rows) {
        out << io::format_double(r.p) << ',' << io::format_double(r.sd_threshold) << ',';
        if (!std::isnan(r.fraction))
            out << io::format_double(100.0 * r.fraction);
        out << '\n';
    }
    if (!out)
        throw Error(ErrorCode::Io, "write failed for '" + path + "'");
}

std::vector<ThresholdRow> read_threshold_csv(const std::string& path)
{
    const auto lines = io::read_lines(path);
    if (lines.empty() || lines[0] != "p,sd_th_v,cells_percent")
        throw Error(ErrorCode::Malformed, path + ":1: expected header p,sd_th_v,cells_percent");
    std::vector<ThresholdRow> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (io::trim(lines[i]).empty())
            continue;
        const auto f = io::split(lines[i], ',');
        ThresholdRow r;
        bool ok = f.size() == 3 && io::parse_double(f[0], r.p) && io::parse_double(f[1], r.sd_threshold);
        if (ok && io::trim(f[2]).empty())
            r.fraction = std::numeric_limits<double>::quiet_NaN();
        else if (ok && io::parse_double(f[2], r.fraction))
            r.fraction /= 100.0;
        else
            ok = false;
        if (!ok)
            throw Error(ErrorCode::Malformed, path + ":" + std::to_string(i + 1) + ": bad threshold row");
        rows.push_back(r);
    }
    return rows;
}

std::vector<double> synthetic_sd_samples(std::size_t n, double sigma, std::uint64_t seed)
{
    if (!(sigma >= 0.0))
        throw Error(ErrorCode::InvalidArgument, "sigma must be >= 0");
    std::vector<double> out(n);
    std::normal_distribution<double> z(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        CounterRng rng(seed, StreamTag::Synthetic, {0, i});
        out[i] = sigma * z(rng);
    }
    return out;
}

std::vector<double> synthetic_sup_samples(const TransferModel& model, std::span<const double> sd,
                                          std::int64_t n_trials, std::uint64_t seed)
{
    if (n_trials < 0)
        throw Error(ErrorCode::InvalidArgument, "n_trials must be >= 0");
    std::vector<double> out(sd.size());
    for (std::size_t i = 0; i < sd.size(); ++i) {
        const double p = eval(model, sd[i]);
        if (n_trials == 0) {
            out[i] = p;
            continue;
        }
        CounterRng rng(seed, StreamTag::Synthetic, {1, i});
        std::binomial_distribution<std::int64_t> b(n_trials, p);
        out[i] = static_cast<double>(b(rng)) / static_cast<double>(n_trials);
    }
    return out;
}

std::string model_to_json(const FitResult& fit)
{
    nlohmann::ordered_json j;
    if (const auto* s = std::get_if<SingleLogistic>(&fit.model)) {
        j["type"] = "single";
        j["a"] = s->a;
        j["k"] = s->k;
    } else {
        const auto& d = std::get<DoubleLogistic>(fit.model);
        j["type"] = "double";
        j["m"] = d.m;
        j["k1"] = d.k1;
        j["k2"] = d.k2;
    }
    j["residual"] = fit.residual;
    return j.dump(2) + "\n";
}

FitResult model_from_json(const std::string& text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Malformed, std::string("model JSON: ") + e.what());
    }
    auto number = [&](const char* key) {
        if (!j.contains(key) || !j[key].is_number())
            throw Error(ErrorCode::Malformed, std::string("model JSON: missing number '") + key + "'");
        return j[key].get<double>();
    };
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
        throw Error(ErrorCode::Malformed, "model JSON: missing 'type'");
    const std::string type = j["type"].get<std::string>();
    static const std::vector<std::string> single_keys{"type", "a", "k", "residual"};
    static const std::vector<std::string> double_keys{"type", "m", "k1", "k2", "residual"};
    const auto& allowed = type == "single" ? single_keys : double_keys;
    for (const auto& [key, _] : j.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw Error(ErrorCode::Malformed, "model JSON: unknown key '" + key + "'");

    FitResult fit;
    fit.converged = true;
    if (type == "single") {
        SingleLogistic s{j.contains("a") ? number("a") : 1.0, number("k")};
        s.validate();
        fit.model = s;
    } else if (type == "double") {
        DoubleLogistic d{number("m"), number("k1"), number("k2")};
        d.validate();
        fit.model = d;
    } else {
        throw Error(ErrorCode::Malformed, "model JSON: type must be 'single' or 'double'");
    }
    fit.residual = j.contains("residual") ? number("residual") : 0.0;
    return fit;
}

void save_model(const FitResult& fit, const std::string& path)
{
    auto out = io::open_output(path);
    out << model_to_json(fit);
    if (!out)
        throw Error(ErrorCode::Io, "write failed for '" + path + "'");
}

FitResult load_model(const std::string& path)
{
    auto in = io::open_input(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str());
}

} // namespace sdpuf
