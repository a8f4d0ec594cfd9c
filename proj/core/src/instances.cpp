#include "segdiag/instances.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace segdiag {

const char* to_string(SizeBin b) {
    switch (b) {
        case SizeBin::XS: return "XS";
        case SizeBin::S: return "S";
        case SizeBin::M: return "M";
        case SizeBin::L: return "L";
        case SizeBin::XL: return "XL";
    }
    return "?";
}

const char* to_string(AspectBin b) {
    switch (b) {
        case AspectBin::XT: return "XT";
        case AspectBin::T: return "T";
        case AspectBin::M: return "M";
        case AspectBin::W: return "W";
        case AspectBin::XW: return "XW";
    }
    return "?";
}

namespace {

struct Accum {
    std::uint64_t pixels = 0;
    BBox bbox;
    std::map<ClassId, std::uint64_t> votes;  // ordered: ties resolve to smaller id
};

}  // namespace

std::vector<InstanceRecord> extract_instances(const InstanceMap& inst, const LabelMap& gt,
                                              const Taxonomy& t, std::string image_id,
                                              const InstanceClassOverrides* overrides) {
    if (!(inst.height() == gt.height() && inst.width() == gt.width()))
        throw std::invalid_argument("instances: instance map and label map shapes differ");

    std::map<std::uint32_t, Accum> by_id;
    for (int r = 0; r < inst.height(); ++r) {
        for (int c = 0; c < inst.width(); ++c) {
            const std::uint32_t id = inst.at(r, c);
            if (id == 0) continue;
            auto [it, inserted] = by_id.try_emplace(id);
            Accum& a = it->second;
            if (inserted) {
                a.bbox = BBox{r, c, r, c};
            } else {
                a.bbox.row_min = std::min(a.bbox.row_min, r);
                a.bbox.col_min = std::min(a.bbox.col_min, c);
                a.bbox.row_max = std::max(a.bbox.row_max, r);
                a.bbox.col_max = std::max(a.bbox.col_max, c);
            }
            ++a.pixels;
            const ClassId label = gt.at(r, c);
            if (label != t.ignore_id()) ++a.votes[label];
        }
    }

    std::vector<InstanceRecord> records;
    records.reserve(by_id.size());
    for (const auto& [id, a] : by_id) {
        InstanceRecord rec;
        rec.instance_id = id;
        rec.pixel_count = a.pixels;
        rec.bbox = a.bbox;
        rec.aspect_ratio = static_cast<double>(a.bbox.width()) / a.bbox.height();
        rec.image_id = image_id;

        const InstanceClassOverrides::const_iterator ov =
            overrides ? overrides->find(id) : InstanceClassOverrides::const_iterator{};
        if (overrides && ov != overrides->end()) {
            if (!t.is_class(ov->second))
                throw std::invalid_argument("instances: class override " +
                                            std::to_string(ov->second) + " for instance " +
                                            std::to_string(id) + " is not in the taxonomy");
            rec.class_id = ov->second;
        } else {
            if (a.votes.empty())
                throw std::runtime_error("instances: instance " + std::to_string(id) +
                                         " has only ignore-labeled pixels");
            const auto best = std::max_element(
                a.votes.begin(), a.votes.end(),
                [](const auto& x, const auto& y) { return x.second < y.second; });
            if (!t.is_class(best->first))
                throw std::invalid_argument("instances: majority label " +
                                            std::to_string(best->first) +
                                            " is not in the taxonomy");
            rec.class_id = best->first;
        }
        records.push_back(std::move(rec));
    }
    return records;
}

}  // namespace segdiag
