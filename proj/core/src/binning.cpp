#include "segdiag/binning.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace segdiag {
namespace {

using nlohmann::json;

PercentileThresholds fit_thresholds(std::vector<double>& values) {
    std::sort(values.begin(), values.end());
    PercentileThresholds thr;
    thr.p10 = nearest_rank_percentile(values, 10);
    thr.p30 = nearest_rank_percentile(values, 30);
    thr.p70 = nearest_rank_percentile(values, 70);
    thr.p90 = nearest_rank_percentile(values, 90);
    return thr;
}

json thresholds_to_json(const PercentileThresholds& thr) {
    return json{{"p10", thr.p10}, {"p30", thr.p30}, {"p70", thr.p70}, {"p90", thr.p90}};
}

PercentileThresholds thresholds_from_json(const json& j) {
    PercentileThresholds thr;
    thr.p10 = j.at("p10").get<double>();
    thr.p30 = j.at("p30").get<double>();
    thr.p70 = j.at("p70").get<double>();
    thr.p90 = j.at("p90").get<double>();
    return thr;
}

json threshold_map_to_json(const std::map<ClassId, PercentileThresholds>& m) {
    json out = json::object();
    for (const auto& [id, thr] : m) {
        out[std::to_string(id)] = thresholds_to_json(thr);
    }
    return out;
}

std::map<ClassId, PercentileThresholds> threshold_map_from_json(const json& j) {
    std::map<ClassId, PercentileThresholds> m;
    for (const auto& [key, value] : j.items()) {
        m[static_cast<ClassId>(std::stoul(key))] = thresholds_from_json(value);
    }
    return m;
}

}  // namespace

const PercentileThresholds& BinScheme::size_thresholds(ClassId id) const {
    if (scope == BinScope::global) {
        if (!global_size) throw std::out_of_range("bin scheme has no global size thresholds");
        return *global_size;
    }
    auto it = size.find(id);
    if (it == size.end()) {
        throw std::out_of_range("bin scheme has no size thresholds for class " +
                                std::to_string(id));
    }
    return it->second;
}

const PercentileThresholds& BinScheme::aspect_thresholds(ClassId id) const {
    if (scope == BinScope::global) {
        if (!global_aspect) throw std::out_of_range("bin scheme has no global aspect thresholds");
        return *global_aspect;
    }
    auto it = aspect.find(id);
    if (it == aspect.end()) {
        throw std::out_of_range("bin scheme has no aspect thresholds for class " +
                                std::to_string(id));
    }
    return it->second;
}

double nearest_rank_percentile(std::span<const double> sorted_values, int k) {
    if (sorted_values.empty()) {
        throw std::invalid_argument("nearest_rank_percentile: empty input");
    }
    if (k < 0 || k > 100) {
        throw std::invalid_argument("nearest_rank_percentile: k out of range");
    }
    std::size_t n = sorted_values.size();
    std::size_t rank = (static_cast<std::size_t>(k) * n + 99) / 100;  // ceil(k*n/100)
    rank = std::clamp<std::size_t>(rank, 1, n);
    return sorted_values[rank - 1];
}

BinScheme fit_bins(std::span<const InstanceRecord> records, BinScope scope) {
    BinScheme scheme;
    scheme.scope = scope;
    if (scope == BinScope::global) {
        std::vector<double> sizes;
        std::vector<double> aspects;
        for (const auto& rec : records) {
            sizes.push_back(static_cast<double>(rec.pixel_count));
            aspects.push_back(rec.aspect_ratio);
        }
        if (sizes.empty()) {
            throw std::invalid_argument("fit_bins: no instances");
        }
        scheme.global_size = fit_thresholds(sizes);
        scheme.global_aspect = fit_thresholds(aspects);
        return scheme;
    }
    std::map<ClassId, std::vector<double>> sizes;
    std::map<ClassId, std::vector<double>> aspects;
    for (const auto& rec : records) {
        sizes[rec.class_id].push_back(static_cast<double>(rec.pixel_count));
        aspects[rec.class_id].push_back(rec.aspect_ratio);
    }
    for (auto& [id, values] : sizes) {
        scheme.size[id] = fit_thresholds(values);
    }
    for (auto& [id, values] : aspects) {
        scheme.aspect[id] = fit_thresholds(values);
    }
    return scheme;
}

SizeBin size_bin_for(double value, const PercentileThresholds& thr) {
    if (value <= thr.p10) return SizeBin::XS;
    if (value <= thr.p30) return SizeBin::S;
    if (value <= thr.p70) return SizeBin::M;
    if (value <= thr.p90) return SizeBin::L;
    return SizeBin::XL;
}

AspectBin aspect_bin_for(double value, const PercentileThresholds& thr) {
    if (value <= thr.p10) return AspectBin::XT;
    if (value <= thr.p30) return AspectBin::T;
    if (value <= thr.p70) return AspectBin::M;
    if (value <= thr.p90) return AspectBin::W;
    return AspectBin::XW;
}

void assign_bins(std::span<InstanceRecord> records, const BinScheme& scheme) {
    for (auto& rec : records) {
        rec.size_bin = size_bin_for(static_cast<double>(rec.pixel_count),
                                    scheme.size_thresholds(rec.class_id));
        rec.aspect_bin = aspect_bin_for(rec.aspect_ratio, scheme.aspect_thresholds(rec.class_id));
    }
}

std::string bin_scheme_to_json(const BinScheme& scheme) {
    json j;
    j["method"] = scheme.method;
    j["scope"] = scheme.scope == BinScope::global ? "global" : "per_class";
    if (scheme.scope == BinScope::global) {
        j["size"] = scheme.global_size ? thresholds_to_json(*scheme.global_size) : json();
        j["aspect"] = scheme.global_aspect ? thresholds_to_json(*scheme.global_aspect) : json();
    } else {
        j["size"] = threshold_map_to_json(scheme.size);
        j["aspect"] = threshold_map_to_json(scheme.aspect);
    }
    return j.dump(2);
}

BinScheme bin_scheme_from_json(const std::string& text) {
    json j = json::parse(text);
    BinScheme scheme;
    scheme.method = j.value("method", std::string("nearest_rank"));
    std::string scope = j.value("scope", std::string("per_class"));
    if (scope == "global") {
        scheme.scope = BinScope::global;
        if (!j.at("size").is_null()) scheme.global_size = thresholds_from_json(j.at("size"));
        if (!j.at("aspect").is_null()) scheme.global_aspect = thresholds_from_json(j.at("aspect"));
    } else if (scope == "per_class") {
        scheme.scope = BinScope::per_class;
        scheme.size = threshold_map_from_json(j.at("size"));
        scheme.aspect = threshold_map_from_json(j.at("aspect"));
    } else {
        throw std::runtime_error("bin scheme scope must be per_class or global");
    }
    return scheme;
}

void save_bin_scheme(const std::filesystem::path& path, const BinScheme& scheme) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write bin scheme: " + path.string());
    }
    out << bin_scheme_to_json(scheme) << '\n';
}

BinScheme load_bin_scheme(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open bin scheme: " + path.string());
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return bin_scheme_from_json(text);
    } catch (const json::exception& e) {
        throw std::runtime_error("invalid bin scheme " + path.string() + ": " + e.what());
    }
}

}  // namespace segdiag
