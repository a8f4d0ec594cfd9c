#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "segdiag/image.hpp"

namespace segdiag {

struct ClassDef {
    ClassId id;
    std::string name;
};

/// A named set of semantically similar classes (e.g. VOC "Vehicles").
struct SemanticGroup {
    std::string name;
    std::vector<ClassId> members;
};

/// The class list, optional background class, ignore label and the
/// semantic-similarity groups used by the error taxonomy. The constructor
/// validates every invariant (unique ids, disjoint groups, no background in
/// a group, ...) and throws std::invalid_argument on the first violation;
/// instances are immutable afterwards.
class Taxonomy {
public:
    static constexpr ClassId kDefaultIgnoreId = 255;

    Taxonomy(std::vector<ClassDef> classes, std::optional<ClassId> background_id,
             ClassId ignore_id, std::vector<SemanticGroup> groups);

    std::size_t num_classes() const { return classes_.size(); }
    const std::vector<ClassDef>& classes() const { return classes_; }
    std::optional<ClassId> background_id() const { return background_id_; }
    ClassId ignore_id() const { return ignore_id_; }
    const std::vector<SemanticGroup>& groups() const { return groups_; }

    bool is_class(ClassId id) const { return class_index_[id] >= 0; }
    bool is_background(ClassId id) const {
        return background_id_.has_value() && *background_id_ == id;
    }

    /// Dense index in [0, num_classes()), the confusion-matrix axis order.
    std::size_t index_of(ClassId id) const;
    ClassId id_at(std::size_t index) const { return classes_[index].id; }
    const std::string& name_of(ClassId id) const;

    std::optional<std::size_t> group_of(ClassId id) const;
    bool same_group(ClassId a, ClassId b) const;

private:
    std::vector<ClassDef> classes_;
    std::optional<ClassId> background_id_;
    ClassId ignore_id_ = kDefaultIgnoreId;
    std::vector<SemanticGroup> groups_;
    std::vector<std::int32_t> class_index_;  // ClassId -> dense index, -1 if absent
    std::vector<std::int32_t> group_index_;  // ClassId -> group index, -1 if none
};

}  // namespace segdiag
