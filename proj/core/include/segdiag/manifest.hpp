#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "segdiag/instances.hpp"
#include "segdiag/taxonomy.hpp"

namespace segdiag {

/// One evaluated image. Paths are absolute after loading (resolved against
/// the manifest's directory). Exactly one of `pred` and `scores` is set.
struct ManifestRecord {
    std::string image_id;
    std::filesystem::path gt;
    std::optional<std::filesystem::path> instances;
    std::optional<std::filesystem::path> instance_classes;
    std::optional<std::filesystem::path> pred;
    std::optional<std::filesystem::path> scores;
    std::optional<std::filesystem::path> image;
};

struct Manifest {
    std::string dataset;
    std::filesystem::path source;  // the manifest file itself
    std::filesystem::path taxonomy_path;
    std::vector<ManifestRecord> records;
};

/// Parses and validates a manifest: unique image_ids, gt present, exactly one
/// of pred/scores, all referenced files exist. Relative paths are resolved
/// against the manifest's directory.
Manifest load_manifest(const std::filesystem::path& path);

/// Parses a taxonomy JSON file:
///   {"classes": [{"id": int, "name": str}, ...],
///    "background_id": int?, "ignore_id": int?, "groups": {name: [ids]}?}
Taxonomy load_taxonomy(const std::filesystem::path& path);

/// Parses an instance-class sidecar: a JSON object mapping instance id
/// (as a string key) to class id.
InstanceClassOverrides load_instance_class_overrides(const std::filesystem::path& path);

}  // namespace segdiag
