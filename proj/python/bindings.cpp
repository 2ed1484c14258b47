// Python bindings: configs travel as JSON text, cells as six threshold offsets
// (n1, n2, p1, p2, nx1, nx2) applied to the configured nominal cell.
#include "sdpuf/commands.hpp"
#include "sdpuf/config.hpp"
#include "sdpuf/error.hpp"
#include "sdpuf/metrics.hpp"
#include "sdpuf/separatrix.hpp"
#include "sdpuf/startup.hpp"
#include "sdpuf/transfer.hpp"
#include "sdpuf/variation.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <array>
#include <optional>

namespace py = pybind11;
using namespace sdpuf;

namespace {

RunConfig config_of(const std::optional<std::string>& json)
{
    return json ? config_from_json(*json) : RunConfig{};
}

CellInstance cell_of(const RunConfig& c, const std::array<double, 6>& offsets, std::int64_t cell_id)
{
    CellInstance cell = c.device.nominal_cell();
    TransistorInstance* ts[] = {&cell.n1, &cell.n2, &cell.p1, &cell.p2, &cell.nx1, &cell.nx2};
    for (std::size_t i = 0; i < 6; ++i)
        ts[i]->vth_offset = offsets[i];
    cell.cell_id = cell_id;
    cell.validate();
    return cell;
}

py::dict sd_dict(const SdRecord& r)
{
    py::dict d;
    d["cell_id"] = r.cell_id;
    d["sd"] = r.sd;
    d["bias"] = to_string(r.bias);
    d["flip_voltage"] = r.flip_voltage;
    d["iterations"] = r.iterations;
    d["converged"] = r.converged;
    return d;
}

py::dict fit_dict(const FitResult& f)
{
    py::dict d;
    if (const auto* s = std::get_if<SingleLogistic>(&f.model)) {
        d["type"] = "single";
        d["a"] = s->a;
        d["k"] = s->k;
    } else {
        const auto& m = std::get<DoubleLogistic>(f.model);
        d["type"] = "double";
        d["m"] = m.m;
        d["k1"] = m.k1;
        d["k2"] = m.k2;
    }
    d["residual"] = f.residual;
    d["iterations"] = f.iterations;
    d["converged"] = f.converged;
    d["degenerate"] = f.degenerate;
    return d;
}

FitOptions fit_options(const std::string& objective)
{
    FitOptions o;
    if (objective == "pairs")
        o.objective = FitObjective::Pairs;
    else if (objective == "histogram")
        o.objective = FitObjective::Histogram;
    else
        throw Error(ErrorCode::InvalidArgument, "objective must be 'pairs' or 'histogram'");
    return o;
}

std::vector<PufResponse> responses_of(const std::vector<std::vector<std::uint8_t>>& bits)
{
    std::vector<PufResponse> out;
    for (std::size_t i = 0; i < bits.size(); ++i)
        out.push_back({std::to_string(i), bits[i]});
    return out;
}

std::vector<CurvePoint> pairs_of(const std::vector<double>& sd, const std::vector<double>& sup)
{
    return quantile_pairs(sd, sup);
}

std::string summary(const CommandResult& r)
{
    return r.summary_json;
}

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Separatrix-distance SRAM PUF modelling core";

    static py::exception<Error> error(m, "SdpufError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p)
                std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object exc = py::handle(error.ptr())(py::str(e.what()));
            exc.attr("code") = to_string(e.code());
            PyErr_SetObject(error.ptr(), exc.ptr());
        }
    });

    m.def("default_config", [] { return config_to_json(RunConfig{}); }, "Default run configuration as JSON text.");
    m.def("normalize_config", [](const std::string& json) { return config_to_json(config_from_json(json)); },
          py::arg("config"));

    m.def("eval_single", py::vectorize([](double x, double k, double a) { return eval_single({a, k}, x); }),
          py::arg("sd"), py::arg("k"), py::arg("a") = 1.0);
    m.def("eval_double",
          py::vectorize([](double x, double mm, double k1, double k2) { return eval_double({mm, k1, k2}, x); }),
          py::arg("sd"), py::arg("m") = kReferenceDouble.m, py::arg("k1") = kReferenceDouble.k1,
          py::arg("k2") = kReferenceDouble.k2);
    m.def("slope_at_zero", [](double mm, double k1, double k2) { return slope_at_zero(DoubleLogistic{mm, k1, k2}); },
          py::arg("m") = kReferenceDouble.m, py::arg("k1") = kReferenceDouble.k1,
          py::arg("k2") = kReferenceDouble.k2);
    m.def(
        "invert_threshold",
        [](double p, double mm, double k1, double k2, double upper) {
            return invert_threshold(DoubleLogistic{mm, k1, k2}, p, upper);
        },
        py::arg("p"), py::arg("m") = kReferenceDouble.m, py::arg("k1") = kReferenceDouble.k1,
        py::arg("k2") = kReferenceDouble.k2, py::arg("upper") = 1.2);
    m.def(
        "fit_double",
        [](const std::vector<double>& sd, const std::vector<double>& sup, const std::string& objective) {
            return fit_dict(fit_double(pairs_of(sd, sup), fit_options(objective)));
        },
        py::arg("sd"), py::arg("sup"), py::arg("objective") = "pairs");
    m.def(
        "fit_single",
        [](const std::vector<double>& sd, const std::vector<double>& sup, const std::string& objective) {
            return fit_dict(fit_single(pairs_of(sd, sup), fit_options(objective)));
        },
        py::arg("sd"), py::arg("sup"), py::arg("objective") = "pairs");
    m.def("synthetic_sd_samples", &synthetic_sd_samples, py::arg("n"), py::arg("sigma"), py::arg("seed"));
    m.def(
        "synthetic_sup_samples",
        [](const std::vector<double>& sd, std::int64_t n_trials, std::uint64_t seed, double mm, double k1, double k2) {
            return synthetic_sup_samples(DoubleLogistic{mm, k1, k2}, sd, n_trials, seed);
        },
        py::arg("sd"), py::arg("n_trials"), py::arg("seed"), py::arg("m") = kReferenceDouble.m,
        py::arg("k1") = kReferenceDouble.k1, py::arg("k2") = kReferenceDouble.k2);

    m.def(
        "compute_sd",
        [](const std::array<double, 6>& offsets, const std::optional<std::string>& config) {
            const RunConfig c = config_of(config);
            py::gil_scoped_release release;
            const SdRecord r =
                compute_sd(cell_of(c, offsets, 0), c.device.environment(), c.ramp, c.integrator, c.bisection_tol);
            py::gil_scoped_acquire acquire;
            return sd_dict(r);
        },
        py::arg("offsets"), py::arg("config") = py::none());
    m.def(
        "sd_sweep",
        [](std::size_t n_cells, const std::optional<std::string>& config) {
            const RunConfig c = config_of(config);
            std::vector<SdRecord> recs;
            {
                py::gil_scoped_release release;
                const auto pop = sample_population(c.device.nominal_cell(), c.mismatch, n_cells, c.seed);
                recs = sd_sweep(pop, c.device.environment(), c.ramp, c.integrator, c.bisection_tol, c.workers);
            }
            py::list out;
            for (const auto& r : recs)
                out.append(sd_dict(r));
            return out;
        },
        py::arg("n_cells"), py::arg("config") = py::none());
    m.def(
        "startup_test0",
        [](const std::array<double, 6>& offsets, const std::optional<std::string>& config) {
            const RunConfig c = config_of(config);
            return std::string(to_string(startup_test0(cell_of(c, offsets, 0), c.device.environment(), c.ramp,
                                                       c.integrator)));
        },
        py::arg("offsets"), py::arg("config") = py::none());
    m.def(
        "simulate_sup",
        [](const std::array<double, 6>& offsets, std::int64_t n_trials, std::int64_t cell_id,
           const std::optional<std::string>& config) {
            const RunConfig c = config_of(config);
            SupSimulation s;
            {
                py::gil_scoped_release release;
                s = simulate_sup(cell_of(c, offsets, cell_id), c.device.environment(), c.ramp, c.noise, n_trials,
                                 c.seed, c.integrator);
            }
            py::dict d;
            d["n_ones"] = s.record.n_ones;
            d["n_trials"] = s.record.n_trials;
            d["sup1"] = s.record.sup1;
            d["ber"] = cell_ber(s.record);
            return d;
        },
        py::arg("offsets"), py::arg("n_trials"), py::arg("cell_id") = 0, py::arg("config") = py::none());
    m.def("cell_ber", [](std::int64_t n_ones, std::int64_t n_trials) {
        return cell_ber(StartupRecord::from_counts(0, n_ones, n_trials));
    }, py::arg("n_ones"), py::arg("n_trials"));

    m.def("uniqueness", [](const std::vector<std::vector<std::uint8_t>>& r) { return uniqueness(responses_of(r)); },
          py::arg("responses"));
    m.def("uniformity", [](const std::vector<std::uint8_t>& r) { return uniformity(PufResponse{"0", r}); },
          py::arg("response"));
    m.def("bit_aliasing", [](const std::vector<std::vector<std::uint8_t>>& r) { return bit_aliasing(responses_of(r)); },
          py::arg("responses"));
    m.def(
        "reliability",
        [](const std::vector<std::uint8_t>& ref, const std::vector<std::vector<std::uint8_t>>& reads) {
            return reliability(PufResponse{"ref", ref}, responses_of(reads));
        },
        py::arg("reference"), py::arg("reads"));

    m.def(
        "cmd_population",
        [](const std::string& config, const std::string& out) { return summary(cmd_population(config_from_json(config), out)); },
        py::arg("config"), py::arg("out"), py::call_guard<py::gil_scoped_release>());
    m.def(
        "cmd_startup",
        [](const std::string& config, const std::string& out, std::optional<std::string> ingest, std::size_t reads) {
            StartupOptions o;
            o.ingest_path = std::move(ingest);
            o.reads = reads;
            return summary(cmd_startup(config_from_json(config), o, out));
        },
        py::arg("config"), py::arg("out"), py::arg("ingest") = py::none(), py::arg("reads") = 0,
        py::call_guard<py::gil_scoped_release>());
    m.def(
        "cmd_fit",
        [](const std::string& config, const std::string& sd_file, const std::string& sup_file, const std::string& out) {
            return summary(cmd_fit(config_from_json(config), sd_file, sup_file, out));
        },
        py::arg("config"), py::arg("sd_file"), py::arg("sup_file"), py::arg("out"),
        py::call_guard<py::gil_scoped_release>());
    m.def(
        "cmd_thresholds",
        [](const std::string& model_file, const std::vector<double>& probabilities, std::optional<std::string> sd_file,
           const std::string& out, double upper) {
            return cmd_thresholds(model_file, probabilities, sd_file, upper, out).files;
        },
        py::arg("model_file"), py::arg("probabilities"), py::arg("sd_file") = py::none(), py::arg("out") = ".",
        py::arg("upper") = 1.2, py::call_guard<py::gil_scoped_release>());
    m.def(
        "cmd_metrics",
        [](const std::vector<std::string>& files, const std::string& out) { return summary(cmd_metrics(files, out)); },
        py::arg("files"), py::arg("out"), py::call_guard<py::gil_scoped_release>());
    m.def(
        "cmd_calibrate",
        [](const std::string& config, const std::string& out) { return summary(cmd_calibrate(config_from_json(config), out)); },
        py::arg("config"), py::arg("out"), py::call_guard<py::gil_scoped_release>());
}
