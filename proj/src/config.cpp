#include "sdpuf/config.hpp"

#include "sdpuf/error.hpp"
#include "sdpuf/io.hpp"

#include <json.hpp>

#include <set>
#include <sstream>

namespace sdpuf {

using Json = nlohmann::ordered_json;

namespace {

/// Reads optional fields from one JSON object and rejects anything unread.
class ObjectReader {
public:
    ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j.is_object())
            throw Error(ErrorCode::Malformed, "config: '" + path_ + "' must be an object");
    }

    ~ObjectReader() noexcept(false)
    {
        if (std::uncaught_exceptions() > 0)
            return;
        for (const auto& [key, _] : j_.items())
            if (!seen_.count(key))
                throw Error(ErrorCode::Malformed, "config: unknown key '" + where(key) + "'");
    }

    template <class T>
    void get(const char* key, T& out)
    {
        seen_.insert(key);
        if (!j_.contains(key))
            return;
        try {
            out = j_.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw Error(ErrorCode::Malformed, "config: '" + where(key) + "' has the wrong type");
        }
    }

    const Json* child(const char* key)
    {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    const Json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void read_mos(const Json& j, const std::string& path, MosParams& p)
{
    ObjectReader r(j, path);
    r.get("vth_nominal", p.vth_nominal);
    r.get("transconductance_factor", p.transconductance_factor);
    r.get("width", p.width);
    r.get("length", p.length);
    r.get("channel_length_modulation", p.channel_length_modulation);
    r.get("subthreshold_slope_factor", p.subthreshold_slope_factor);
    r.get("off_leakage_scale", p.off_leakage_scale);
}

Json write_mos(const MosParams& p)
{
    Json j;
    j["vth_nominal"] = p.vth_nominal;
    j["transconductance_factor"] = p.transconductance_factor;
    j["width"] = p.width;
    j["length"] = p.length;
    j["channel_length_modulation"] = p.channel_length_modulation;
    j["subthreshold_slope_factor"] = p.subthreshold_slope_factor;
    j["off_leakage_scale"] = p.off_leakage_scale;
    return j;
}

const char* to_string(RampShape s)
{
    return s == RampShape::Step ? "step" : "linear";
}

const char* to_string(FitObjective o)
{
    return o == FitObjective::Pairs ? "pairs" : "histogram";
}

} // namespace

void RunConfig::validate() const
{
    if (rows < 1 || cols < 1)
        throw Error(ErrorCode::Malformed, "config: rows and cols must be >= 1");
    if (n_trials < 1)
        throw Error(ErrorCode::Malformed, "config: n_trials must be >= 1");
    if (!(bisection_tol > 0.0))
        throw Error(ErrorCode::Malformed, "config: bisection_tol must be > 0");
    if (!(region_low >= 0.0 && region_low < region_high && region_high <= 1.0))
        throw Error(ErrorCode::Malformed, "config: need 0 <= regions.low < regions.high <= 1");
    if (histogram_bins < 1 || !(histogram_range > 0.0))
        throw Error(ErrorCode::Malformed, "config: histogram needs bins >= 1 and range > 0");
    for (double p : threshold_probabilities)
        if (!(p > 0.5 && p < 1.0))
            throw Error(ErrorCode::Malformed, "config: threshold probabilities must lie in (0.5, 1)");
    if (calibration.cells < 1 || calibration.noise_trials < 1)
        throw Error(ErrorCode::Malformed, "config: calibration sizes must be >= 1");
    if (!(calibration.target_within > 0.0 && calibration.target_within < 1.0)
        || !(calibration.target_b_mass > 0.0 && calibration.target_b_mass < 1.0)
        || !(calibration.sd_threshold > 0.0))
        throw Error(ErrorCode::Malformed, "config: calibration targets out of range");
    try {
        device.validate();
        mismatch.validate();
        ramp.validate();
        integrator.validate();
        noise.validate();
    } catch (const Error& e) {
        throw Error(ErrorCode::Malformed, "config: " + e.detail());
    }
}

RunConfig config_from_json(const std::string& text)
{
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Malformed, std::string("config: ") + e.what());
    }
    RunConfig c;
    {
        ObjectReader r(j, "");
        r.get("seed", c.seed);
        r.get("rows", c.rows);
        r.get("cols", c.cols);
        r.get("n_trials", c.n_trials);
        r.get("bisection_tol", c.bisection_tol);
        r.get("output_dir", c.output_dir);
        r.get("workers", c.workers);
        if (const Json* d = r.child("device")) {
            ObjectReader dr(*d, "device");
            dr.get("vdd", c.device.vdd);
            dr.get("node_capacitance", c.device.node_capacitance);
            if (const Json* n = dr.child("nmos"))
                read_mos(*n, "device.nmos", c.device.nmos);
            if (const Json* p = dr.child("pmos"))
                read_mos(*p, "device.pmos", c.device.pmos);
        }
        if (const Json* m = r.child("mismatch")) {
            ObjectReader mr(*m, "mismatch");
            mr.get("sigma_vth_n", c.mismatch.sigma_vth_n);
            mr.get("sigma_vth_p", c.mismatch.sigma_vth_p);
        }
        if (const Json* rp = r.child("ramp")) {
            ObjectReader rr(*rp, "ramp");
            std::string shape = to_string(c.ramp.shape);
            rr.get("shape", shape);
            if (shape == "step")
                c.ramp.shape = RampShape::Step;
            else if (shape == "linear")
                c.ramp.shape = RampShape::Linear;
            else
                throw Error(ErrorCode::Malformed, "config: ramp.shape must be 'step' or 'linear'");
            rr.get("ramp_time", c.ramp.ramp_time);
            rr.get("hold_time", c.ramp.hold_time);
        }
        if (const Json* in = r.child("integrator")) {
            ObjectReader ir(*in, "integrator");
            ir.get("time_step", c.integrator.time_step);
            ir.get("settle_voltage", c.integrator.settle_voltage);
            ir.get("settle_derivative", c.integrator.settle_derivative);
            ir.get("equilibrium_tolerance", c.integrator.equilibrium_tolerance);
            ir.get("jacobian_step", c.integrator.jacobian_step);
            ir.get("max_newton_iterations", c.integrator.max_newton_iterations);
            ir.get("trajectory_decimation", c.integrator.trajectory_decimation);
        }
        if (const Json* n = r.child("noise")) {
            ObjectReader nr(*n, "noise");
            nr.get("sigma_init", c.noise.sigma_init);
        }
        if (const Json* g = r.child("regions")) {
            ObjectReader gr(*g, "regions");
            gr.get("low", c.region_low);
            gr.get("high", c.region_high);
        }
        if (const Json* f = r.child("fit")) {
            ObjectReader fr(*f, "fit");
            std::string objective = to_string(c.fit.objective);
            fr.get("objective", objective);
            if (objective == "pairs")
                c.fit.objective = FitObjective::Pairs;
            else if (objective == "histogram")
                c.fit.objective = FitObjective::Histogram;
            else
                throw Error(ErrorCode::Malformed, "config: fit.objective must be 'pairs' or 'histogram'");
            fr.get("histogram_bins", c.fit.histogram_bins);
            fr.get("max_iterations", c.fit.max_iterations);
            fr.get("simplex_tolerance", c.fit.simplex_tolerance);
        }
        if (const Json* h = r.child("histogram")) {
            ObjectReader hr(*h, "histogram");
            hr.get("bins", c.histogram_bins);
            hr.get("range", c.histogram_range);
        }
        if (const Json* t = r.child("thresholds")) {
            ObjectReader tr(*t, "thresholds");
            tr.get("probabilities", c.threshold_probabilities);
        }
        if (const Json* k = r.child("calibration")) {
            ObjectReader kr(*k, "calibration");
            kr.get("cells", c.calibration.cells);
            kr.get("sd_threshold", c.calibration.sd_threshold);
            kr.get("target_within", c.calibration.target_within);
            kr.get("target_b_mass", c.calibration.target_b_mass);
            kr.get("noise_trials", c.calibration.noise_trials);
        }
    }
    c.validate();
    return c;
}

std::string config_to_json(const RunConfig& c)
{
    Json j;
    j["seed"] = c.seed;
    j["rows"] = c.rows;
    j["cols"] = c.cols;
    j["device"] = {{"vdd", c.device.vdd},
                   {"node_capacitance", c.device.node_capacitance},
                   {"nmos", write_mos(c.device.nmos)},
                   {"pmos", write_mos(c.device.pmos)}};
    j["mismatch"] = {{"sigma_vth_n", c.mismatch.sigma_vth_n}, {"sigma_vth_p", c.mismatch.sigma_vth_p}};
    j["ramp"] = {{"shape", to_string(c.ramp.shape)},
                 {"ramp_time", c.ramp.ramp_time},
                 {"hold_time", c.ramp.hold_time}};
    j["integrator"] = {{"time_step", c.integrator.time_step},
                       {"settle_voltage", c.integrator.settle_voltage},
                       {"settle_derivative", c.integrator.settle_derivative},
                       {"equilibrium_tolerance", c.integrator.equilibrium_tolerance},
                       {"jacobian_step", c.integrator.jacobian_step},
                       {"max_newton_iterations", c.integrator.max_newton_iterations},
                       {"trajectory_decimation", c.integrator.trajectory_decimation}};
    j["noise"] = {{"sigma_init", c.noise.sigma_init}};
    j["n_trials"] = c.n_trials;
    j["bisection_tol"] = c.bisection_tol;
    j["regions"] = {{"low", c.region_low}, {"high", c.region_high}};
    j["fit"] = {{"objective", to_string(c.fit.objective)},
                {"histogram_bins", c.fit.histogram_bins},
                {"max_iterations", c.fit.max_iterations},
                {"simplex_tolerance", c.fit.simplex_tolerance}};
    j["histogram"] = {{"bins", c.histogram_bins}, {"range", c.histogram_range}};
    j["thresholds"] = {{"probabilities", c.threshold_probabilities}};
    j["calibration"] = {{"cells", c.calibration.cells},
                        {"sd_threshold", c.calibration.sd_threshold},
                        {"target_within", c.calibration.target_within},
                        {"target_b_mass", c.calibration.target_b_mass},
                        {"noise_trials", c.calibration.noise_trials}};
    j["output_dir"] = c.output_dir;
    j["workers"] = c.workers;
    return j.dump(2) + "\n";
}

RunConfig load_config(const std::string& path)
{
    auto in = io::open_input(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return config_from_json(ss.str());
    } catch (const Error& e) {
        throw Error(e.code(), path + ": " + e.detail());
    }
}

void save_config(const RunConfig& config, const std::string& path)
{
    auto out = io::open_output(path);
    out << config_to_json(config);
    if (!out)
        throw Error(ErrorCode::Io, "write failed for '" + path + "'");
}

} // namespace sdpuf
