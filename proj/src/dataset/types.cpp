#include "hazard/dataset/types.hpp"

#include <algorithm>

namespace hazard::data {

namespace {

constexpr std::array<std::string_view, 9> kHazardNames = {
    "Pedestrian",      "StationaryObject", "TrafficSignal",   "UnusualCondition", "SpeedingBraking",
    "Sideswipe",       "MergingManeuver",  "UnexpectedEvent", "ChainReaction",
};

}  // namespace

std::string_view to_string(Source s) {
    switch (s) {
        case Source::BDD: return "BDD";
        case Source::ECP: return "ECP";
        case Source::SYNTH: return "SYNTH";
    }
    return "SYNTH";
}

std::string_view to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "train";
}

std::string_view to_string(HazardType t) { return kHazardNames[static_cast<std::size_t>(t)]; }

Source parse_source(std::string_view s) {
    if (s == "BDD") return Source::BDD;
    if (s == "ECP") return Source::ECP;
    if (s == "SYNTH") return Source::SYNTH;
    throw DataError("unknown source '" + std::string(s) + "'");
}

Split parse_split(std::string_view s) {
    if (s == "train") return Split::Train;
    if (s == "val") return Split::Val;
    if (s == "test") return Split::Test;
    throw DataError("unknown split '" + std::string(s) + "'");
}

HazardType parse_hazard_type(std::string_view s) {
    for (std::size_t i = 0; i < kHazardNames.size(); ++i) {
        if (kHazardNames[i] == s) return kHazardTypes[i];
    }
    throw DataError("unknown hazard type '" + std::string(s) + "'");
}

const EntityAnnotation* Sample::entity(int index) const {
    auto it = std::find_if(entities.begin(), entities.end(), [&](const auto& e) { return e.index == index; });
    return it == entities.end() ? nullptr : &*it;
}

bool Sample::operator==(const Sample& o) const {
    auto dims_eq = [](const std::optional<ImageDims>& a, const std::optional<ImageDims>& b) {
        if (a.has_value() != b.has_value()) return false;
        return !a || (a->width == b->width && a->height == b->height);
    };
    return id == o.id && image_ref == o.image_ref && source == o.source && speed_kmh == o.speed_kmh &&
           entities == o.entities && hazard == o.hazard && hazard_type == o.hazard_type && split == o.split &&
           dims_eq(image_dims, o.image_dims);
}

std::map<Split, int> Corpus::split_counts() const {
    std::map<Split, int> counts{{Split::Train, 0}, {Split::Val, 0}, {Split::Test, 0}};
    for (const auto& s : samples) ++counts[s.split];
    return counts;
}

std::vector<const Sample*> Corpus::in_split(Split split) const {
    std::vector<const Sample*> out;
    for (const auto& s : samples) {
        if (s.split == split) out.push_back(&s);
    }
    return out;
}

const Sample* Corpus::find(std::string_view id) const {
    auto it = std::find_if(samples.begin(), samples.end(), [&](const Sample& s) { return s.id == id; });
    return it == samples.end() ? nullptr : &*it;
}

std::map<HazardType, int> balanced_subset_counts() {
    return {
        {HazardType::Pedestrian, 10},      {HazardType::StationaryObject, 10}, {HazardType::TrafficSignal, 10},
        {HazardType::UnusualCondition, 10}, {HazardType::SpeedingBraking, 20},  {HazardType::Sideswipe, 10},
        {HazardType::MergingManeuver, 20}, {HazardType::UnexpectedEvent, 5},   {HazardType::ChainReaction, 5},
    };
}

}  // namespace hazard::data
