#pragma once

#include <array>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hazard::data {

struct BBox {
    int x_min = 0;
    int y_min = 0;
    int x_max = 0;
    int y_max = 0;

    int width() const { return x_max - x_min; }
    int height() const { return y_max - y_min; }
    bool contains(int x, int y) const { return x >= x_min && x < x_max && y >= y_min && y < y_max; }
    bool operator==(const BBox&) const = default;
};

struct EntityAnnotation {
    int index = 0;  // 1..3
    BBox bbox;
    std::string description;

    bool operator==(const EntityAnnotation&) const = default;
};

enum class Source { BDD, ECP, SYNTH };
enum class Split { Train, Val, Test };

enum class HazardType {
    Pedestrian,
    StationaryObject,
    TrafficSignal,
    UnusualCondition,
    SpeedingBraking,
    Sideswipe,
    MergingManeuver,
    UnexpectedEvent,
    ChainReaction,
};

inline constexpr std::array<HazardType, 9> kHazardTypes = {
    HazardType::Pedestrian,      HazardType::StationaryObject, HazardType::TrafficSignal,
    HazardType::UnusualCondition, HazardType::SpeedingBraking, HazardType::Sideswipe,
    HazardType::MergingManeuver, HazardType::UnexpectedEvent,  HazardType::ChainReaction,
};

inline constexpr std::array<int, 3> kSpeedsKmh = {15, 45, 75};
inline constexpr int kMaxEntities = 3;
inline constexpr int kMinHazardWords = 5;

std::string_view to_string(Source s);
std::string_view to_string(Split s);
std::string_view to_string(HazardType t);
Source parse_source(std::string_view s);
Split parse_split(std::string_view s);
HazardType parse_hazard_type(std::string_view s);

struct ImageDims {
    int width = 0;
    int height = 0;
};

struct Sample {
    std::string id;
    std::string image_ref;
    Source source = Source::SYNTH;
    int speed_kmh = 15;
    std::vector<EntityAnnotation> entities;
    std::string hazard;
    std::optional<HazardType> hazard_type;
    Split split = Split::Train;
    // Pixel size of the referenced image, when recorded in the corpus file.
    std::optional<ImageDims> image_dims;

    const EntityAnnotation* entity(int index) const;
    bool operator==(const Sample& o) const;
};

struct Corpus {
    std::vector<Sample> samples;

    std::map<Split, int> split_counts() const;
    std::vector<const Sample*> in_split(Split s) const;
    const Sample* find(std::string_view id) const;
};

// Malformed corpus input (parse failures, schema violations).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Retrieval candidate counts per hazard type for the val and test subsets.
std::map<HazardType, int> balanced_subset_counts();

}  // namespace hazard::data
