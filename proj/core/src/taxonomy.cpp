#include "segdiag/taxonomy.hpp"

#include <limits>
#include <stdexcept>

namespace segdiag {

namespace {
constexpr std::size_t kIdSpace =
    static_cast<std::size_t>(std::numeric_limits<ClassId>::max()) + 1;
}

Taxonomy::Taxonomy(std::vector<ClassDef> classes, std::optional<ClassId> background_id,
                   ClassId ignore_id, std::vector<SemanticGroup> groups)
    : classes_(std::move(classes)),
      background_id_(background_id),
      ignore_id_(ignore_id),
      groups_(std::move(groups)),
      class_index_(kIdSpace, -1),
      group_index_(kIdSpace, -1) {
    if (classes_.empty())
        throw std::invalid_argument("taxonomy: class list is empty");

    for (std::size_t i = 0; i < classes_.size(); ++i) {
        const ClassId id = classes_[i].id;
        if (class_index_[id] >= 0)
            throw std::invalid_argument("taxonomy: duplicate class id " + std::to_string(id));
        if (id == ignore_id_)
            throw std::invalid_argument("taxonomy: ignore id " + std::to_string(id) +
                                        " listed as a class");
        class_index_[id] = static_cast<std::int32_t>(i);
    }

    if (background_id_ && !is_class(*background_id_))
        throw std::invalid_argument("taxonomy: background id " +
                                    std::to_string(*background_id_) + " is not a class");

    for (std::size_t g = 0; g < groups_.size(); ++g) {
        for (ClassId member : groups_[g].members) {
            if (!is_class(member))
                throw std::invalid_argument("taxonomy: group '" + groups_[g].name +
                                            "' member " + std::to_string(member) +
                                            " is not a class");
            if (background_id_ && member == *background_id_)
                throw std::invalid_argument("taxonomy: background class cannot belong to group '" +
                                            groups_[g].name + "'");
            if (group_index_[member] >= 0)
                throw std::invalid_argument("taxonomy: class " + std::to_string(member) +
                                            " belongs to more than one group");
            group_index_[member] = static_cast<std::int32_t>(g);
        }
    }
}

std::size_t Taxonomy::index_of(ClassId id) const {
    const std::int32_t idx = class_index_[id];
    if (idx < 0)
        throw std::out_of_range("taxonomy: unknown class id " + std::to_string(id));
    return static_cast<std::size_t>(idx);
}

const std::string& Taxonomy::name_of(ClassId id) const {
    return classes_[index_of(id)].name;
}

std::optional<std::size_t> Taxonomy::group_of(ClassId id) const {
    if (!is_class(id)) return std::nullopt;
    const std::int32_t g = group_index_[id];
    if (g < 0) return std::nullopt;
    return static_cast<std::size_t>(g);
}

bool Taxonomy::same_group(ClassId a, ClassId b) const {
    const auto ga = group_of(a);
    return ga.has_value() && ga == group_of(b);
}

}  // namespace segdiag
