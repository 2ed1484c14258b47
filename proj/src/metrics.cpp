#include "sdpuf/metrics.hpp"

#include "sdpuf/error.hpp"
#include "sdpuf/io.hpp"
#include "sdpuf/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>
#include <random>

namespace sdpuf {

namespace {

void require_same_length(std::span<const PufResponse> responses)
{
    if (responses.empty())
        throw Error(ErrorCode::EmptySet, "no responses");
    const std::size_t n = responses.front().bits.size();
    if (n == 0)
        throw Error(ErrorCode::EmptySet, "responses have no bits");
    for (const auto& r : responses)
        if (r.bits.size() != n)
            throw Error(ErrorCode::SizeMismatch, "response '" + r.chip_id + "' has " + std::to_string(r.bits.size())
                                                     + " bits, expected " + std::to_string(n));
}

} // namespace

double CellMask::selected_fraction() const noexcept
{
    return selected.empty() ? 0.0 : static_cast<double>(selected_count) / static_cast<double>(selected.size());
}

std::size_t hamming_distance(const PufResponse& a, const PufResponse& b)
{
    if (a.bits.size() != b.bits.size())
        throw Error(ErrorCode::SizeMismatch, "responses differ in length");
    std::size_t d = 0;
    for (std::size_t i = 0; i < a.bits.size(); ++i)
        d += (a.bits[i] != 0) != (b.bits[i] != 0);
    return d;
}

double uniqueness(std::span<const PufResponse> responses)
{
    require_same_length(responses);
    if (responses.size() < 2)
        throw Error(ErrorCode::EmptySet, "uniqueness needs at least 2 responses");
    const auto len = static_cast<double>(responses.front().bits.size());
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < responses.size(); ++i)
        for (std::size_t j = i + 1; j < responses.size(); ++j, ++pairs)
            sum += static_cast<double>(hamming_distance(responses[i], responses[j])) / len;
    return 100.0 * sum / static_cast<double>(pairs);
}

double uniformity(const PufResponse& response)
{
    if (response.bits.empty())
        throw Error(ErrorCode::EmptySet, "response has no bits");
    const auto ones = std::count_if(response.bits.begin(), response.bits.end(), [](auto b) { return b != 0; });
    return 100.0 * static_cast<double>(ones) / static_cast<double>(response.bits.size());
}

double mean_uniformity(std::span<const PufResponse> responses)
{
    require_same_length(responses);
    // Integer counts first, so this equals bit_aliasing bit for bit.
    std::uint64_t ones = 0;
    for (const auto& r : responses)
        ones += static_cast<std::uint64_t>(std::count_if(r.bits.begin(), r.bits.end(), [](auto b) { return b != 0; }));
    const double cells = static_cast<double>(responses.size()) * static_cast<double>(responses.front().bits.size());
    return 100.0 * static_cast<double>(ones) / cells;
}

double bit_aliasing(std::span<const PufResponse> responses)
{
    if (responses.size() < 2)
        throw Error(ErrorCode::SizeMismatch, "bit aliasing needs at least 2 responses");
    return mean_uniformity(responses);
}

double reliability(const PufResponse& reference, std::span<const PufResponse> repeats)
{
    if (repeats.empty())
        throw Error(ErrorCode::EmptySet, "reliability needs at least 1 repeat");
    if (reference.bits.empty())
        throw Error(ErrorCode::EmptySet, "reference response has no bits");
    const auto len = static_cast<double>(reference.bits.size());
    double sum = 0.0;
    for (const auto& r : repeats)
        sum += static_cast<double>(hamming_distance(reference, r)) / len;
    return 100.0 * (1.0 - sum / static_cast<double>(repeats.size()));
}

CellMask select_mask(const StartupDataset& dataset, double p_threshold)
{
    if (!(p_threshold > 0.5 && p_threshold <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "p_threshold must satisfy 0.5 < p <= 1");
    CellMask mask;
    mask.selected.reserve(dataset.records.size());
    for (const auto& r : dataset.records) {
        const bool keep = std::max(r.sup1, r.sup0) >= p_threshold;
        mask.selected.push_back(keep ? 1 : 0);
        mask.selected_count += keep ? 1 : 0;
    }
    return mask;
}

CellMask select_mask(std::span<const SdRecord> records, const TransferModel& model, double p_threshold,
                     double upper)
{
    const double th = invert_threshold(model, p_threshold, upper);
    CellMask mask;
    mask.selected.reserve(records.size());
    for (const auto& r : records) {
        const bool keep = std::abs(r.sd) >= th;
        mask.selected.push_back(keep ? 1 : 0);
        mask.selected_count += keep ? 1 : 0;
    }
    return mask;
}

PufResponse apply_mask(const PufResponse& response, const CellMask& mask)
{
    if (mask.selected.size() != response.bits.size())
        throw Error(ErrorCode::SizeMismatch, "mask and response differ in length");
    PufResponse out{response.chip_id, {}};
    out.bits.reserve(mask.selected_count);
    for (std::size_t i = 0; i < mask.selected.size(); ++i)
        if (mask.selected[i])
            out.bits.push_back(response.bits[i]);
    return out;
}

PufResponse sample_response(const StartupDataset& dataset, std::uint64_t seed, std::uint64_t read_index,
                            std::string chip_id)
{
    PufResponse out{std::move(chip_id), {}};
    out.bits.reserve(dataset.records.size());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < dataset.records.size(); ++i) {
        CounterRng rng(seed, StreamTag::Synthetic, {read_index, static_cast<std::uint64_t>(i)});
        out.bits.push_back(u(rng) < dataset.records[i].sup1 ? 1 : 0);
    }
    return out;
}

std::vector<PufResponse> read_responses(const std::string& path)
{
    const auto lines = io::read_lines(path);
    if (lines.empty() || io::trim(lines[0]) != "chip_id,bits")
        throw Error(ErrorCode::Malformed, path + ":1: expected header chip_id,bits");
    std::vector<PufResponse> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (io::trim(lines[i]).empty())
            continue;
        const auto f = io::split(lines[i], ',');
        const std::string where = path + ":" + std::to_string(i + 1) + ": ";
        if (f.size() != 2 || io::trim(f[0]).empty())
            throw Error(ErrorCode::Malformed, where + "expected chip_id,bits");
        PufResponse r{std::string(io::trim(f[0])), {}};
        for (char c : io::trim(f[1])) {
            if (c != '0' && c != '1')
                throw Error(ErrorCode::Malformed, where + "bits must be '0' or '1'");
            r.bits.push_back(c == '1' ? 1 : 0);
        }
        if (r.bits.empty())
            throw Error(ErrorCode::Malformed, where + "empty bit string");
        if (!out.empty() && r.bits.size() != out.front().bits.size())
            throw Error(ErrorCode::Malformed, where + "bit string length differs from the first row");
        out.push_back(std::move(r));
    }
    if (out.empty())
        throw Error(ErrorCode::Malformed, path + ": no responses");
    return out;
}

void write_responses(std::span<const PufResponse> responses, const std::string& path)
{
    auto out = io::open_output(path);
    out << "chip_id,bits\n";
    for (const auto& r : responses) {
        if (r.chip_id.find(',') != std::string::npos)
            throw Error(ErrorCode::InvalidArgument, "chip_id must not contain ','");
        out << r.chip_id << ',';
        for (auto b : r.bits)
            out << (b ? '1' : '0');
        out << '\n';
    }
    if (!out)
        throw Error(ErrorCode::Io, "write failed for '" + path + "'");
}

MetricsReport metrics_report(std::span<const PufResponse> responses)
{
    require_same_length(responses);
    MetricsReport rep;
    rep.responses = responses.size();
    rep.bits = responses.front().bits.size();

    rep.uniformity.value = mean_uniformity(responses);

    std::map<std::string, std::vector<const PufResponse*>> by_chip;
    std::vector<std::string> order;
    for (const auto& r : responses) {
        auto& v = by_chip[r.chip_id];
        if (v.empty())
            order.push_back(r.chip_id);
        v.push_back(&r);
    }
    std::vector<PufResponse> firsts;
    for (const auto& id : order)
        firsts.push_back(*by_chip[id].front());
    if (firsts.size() >= 2) {
        rep.uniqueness.value = uniqueness(firsts);
        rep.bit_aliasing.value = bit_aliasing(firsts);
    }
    double rel = 0.0;
    std::size_t chips_with_repeats = 0;
    for (const auto& id : order) {
        const auto& v = by_chip[id];
        if (v.size() < 2)
            continue;
        std::vector<PufResponse> repeats;
        for (std::size_t i = 1; i < v.size(); ++i)
            repeats.push_back(*v[i]);
        rel += reliability(*v.front(), repeats);
        ++chips_with_repeats;
    }
    if (chips_with_repeats > 0)
        rep.reliability.value = rel / static_cast<double>(chips_with_repeats);
    return rep;
}

std::string metrics_report_json(const MetricsReport& report)
{
    nlohmann::ordered_json j;
    j["responses"] = report.responses;
    j["bits"] = report.bits;
    auto put = [&](const char* name, const MetricValue& m) {
        nlohmann::ordered_json e;
        if (m.value)
            e["value"] = *m.value;
        else
            e["value"] = "N/A";
        e["ideal"] = m.ideal;
        j["metrics"][name] = e;
    };
    put("uniqueness", report.uniqueness);
    put("uniformity", report.uniformity);
    put("bit_aliasing", report.bit_aliasing);
    put("reliability", report.reliability);
    return j.dump(2) + "\n";
}

} // namespace sdpuf
