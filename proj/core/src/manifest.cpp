#include "segdiag/manifest.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <stdexcept>
#include <unordered_set>

namespace segdiag {
namespace {

using nlohmann::json;

json parse_file(const std::filesystem::path& path, const char* what) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error(std::string("cannot open ") + what + " file: " + path.string());
    }
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("invalid JSON in ") + what + " file " +
                                 path.string() + ": " + e.what());
    }
    return j;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& rel) {
    std::filesystem::path p(rel);
    if (p.is_absolute()) return p;
    return base / p;
}

std::optional<std::filesystem::path> optional_path(const json& rec, const char* key,
                                                   const std::filesystem::path& base,
                                                   const std::string& image_id) {
    if (!rec.contains(key)) return std::nullopt;
    std::filesystem::path p = resolve(base, rec.at(key).get<std::string>());
    if (!std::filesystem::exists(p)) {
        throw std::runtime_error("manifest record '" + image_id + "': " + key +
                                 " file does not exist: " + p.string());
    }
    return p;
}

}  // namespace

Manifest load_manifest(const std::filesystem::path& path) {
    json j = parse_file(path, "manifest");
    std::filesystem::path base = std::filesystem::absolute(path).parent_path();

    Manifest m;
    m.source = std::filesystem::absolute(path);
    m.dataset = j.value("dataset", std::string{});
    if (!j.contains("taxonomy_path")) {
        throw std::runtime_error("manifest is missing taxonomy_path: " + path.string());
    }
    m.taxonomy_path = resolve(base, j.at("taxonomy_path").get<std::string>());
    if (!std::filesystem::exists(m.taxonomy_path)) {
        throw std::runtime_error("taxonomy file does not exist: " + m.taxonomy_path.string());
    }
    if (!j.contains("records") || !j.at("records").is_array()) {
        throw std::runtime_error("manifest is missing a records array: " + path.string());
    }

    std::unordered_set<std::string> seen_ids;
    for (const json& rec : j.at("records")) {
        ManifestRecord r;
        if (!rec.contains("image_id")) {
            throw std::runtime_error("manifest record is missing image_id");
        }
        r.image_id = rec.at("image_id").get<std::string>();
        if (!seen_ids.insert(r.image_id).second) {
            throw std::runtime_error("duplicate image_id in manifest: " + r.image_id);
        }
        if (!rec.contains("gt")) {
            throw std::runtime_error("manifest record '" + r.image_id + "' is missing gt");
        }
        r.gt = resolve(base, rec.at("gt").get<std::string>());
        if (!std::filesystem::exists(r.gt)) {
            throw std::runtime_error("manifest record '" + r.image_id +
                                     "': gt file does not exist: " + r.gt.string());
        }
        r.instances = optional_path(rec, "instances", base, r.image_id);
        r.instance_classes = optional_path(rec, "instance_classes", base, r.image_id);
        r.pred = optional_path(rec, "pred", base, r.image_id);
        r.scores = optional_path(rec, "scores", base, r.image_id);
        r.image = optional_path(rec, "image", base, r.image_id);
        if (r.pred.has_value() == r.scores.has_value()) {
            throw std::runtime_error("manifest record '" + r.image_id +
                                     "' must carry exactly one of pred and scores");
        }
        m.records.push_back(std::move(r));
    }
    return m;
}

Taxonomy load_taxonomy(const std::filesystem::path& path) {
    json j = parse_file(path, "taxonomy");
    if (!j.contains("classes") || !j.at("classes").is_array()) {
        throw std::runtime_error("taxonomy is missing a classes array: " + path.string());
    }
    std::vector<ClassDef> classes;
    for (const json& c : j.at("classes")) {
        ClassDef def;
        def.id = static_cast<ClassId>(c.at("id").get<int>());
        def.name = c.at("name").get<std::string>();
        classes.push_back(std::move(def));
    }
    std::optional<ClassId> background;
    if (j.contains("background_id")) {
        background = static_cast<ClassId>(j.at("background_id").get<int>());
    }
    ClassId ignore = Taxonomy::kDefaultIgnoreId;
    if (j.contains("ignore_id")) {
        ignore = static_cast<ClassId>(j.at("ignore_id").get<int>());
    }
    std::vector<SemanticGroup> groups;
    if (j.contains("groups")) {
        for (const auto& [name, members] : j.at("groups").items()) {
            SemanticGroup g;
            g.name = name;
            for (const json& id : members) {
                g.members.push_back(static_cast<ClassId>(id.get<int>()));
            }
            groups.push_back(std::move(g));
        }
    }
    try {
        return Taxonomy(std::move(classes), background, ignore, std::move(groups));
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error("invalid taxonomy " + path.string() + ": " + e.what());
    }
}

InstanceClassOverrides load_instance_class_overrides(const std::filesystem::path& path) {
    json j = parse_file(path, "instance-class sidecar");
    if (!j.is_object()) {
        throw std::runtime_error("instance-class sidecar must be a JSON object: " + path.string());
    }
    InstanceClassOverrides overrides;
    for (const auto& [key, value] : j.items()) {
        std::uint32_t instance_id;
        try {
            instance_id = static_cast<std::uint32_t>(std::stoul(key));
        } catch (const std::exception&) {
            throw std::runtime_error("instance-class sidecar key is not an integer: " + key);
        }
        overrides[instance_id] = static_cast<ClassId>(value.get<int>());
    }
    return overrides;
}

}  // namespace segdiag
