#include "hazard/dataset/dataset.hpp"
#include "hazard/tensor/rng.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <stdexcept>

namespace hazard::data {

namespace {

struct EntityKind {
    const char* name;
};

struct ObjectColor {
    const char* name;
    Rgb rgb;
};

const std::vector<EntityKind> kKinds = {
    {"car"}, {"truck"}, {"bus"}, {"cyclist"}, {"pedestrian"}, {"motorbike"}, {"van"}, {"taxi"}, {"child"},
    {"traffic light"}, {"parked car"}, {"delivery truck"},
};

const std::vector<ObjectColor> kColors = {
    {"red", {200, 30, 30}},     {"blue", {30, 60, 200}},     {"white", {240, 240, 240}}, {"black", {20, 20, 20}},
    {"orange", {240, 130, 20}}, {"silver", {170, 170, 180}}, {"brown", {120, 70, 30}},   {"pink", {240, 120, 170}},
};

const std::vector<Rgb> kSkies = {{135, 190, 235}, {180, 200, 215}, {90, 110, 150}, {230, 180, 120}, {60, 60, 90}};

// {A}, {B}, {C} are replaced by entity references.
struct Phrasebook {
    std::vector<std::string> leads;
    std::vector<std::string> links;
    std::vector<std::string> outcomes;
};

const std::map<HazardType, Phrasebook>& phrasebooks() {
    static const std::map<HazardType, Phrasebook> books = {
        {HazardType::Pedestrian,
         {{"{A} steps into the road without looking", "{A} runs across the street toward the bus stop",
           "{A} walks out from behind a stopped vehicle", "{A} starts crossing against the signal",
           "{A} waves at a friend and drifts off the curb"},
          {"while {B} blocks my view of the crosswalk", "as {B} slows down next to the curb",
           "just as {B} pulls away from the corner", "while {B} waits near the edge of the road"},
          {"so my car cannot stop in time and hits {A}", "and my car brushes {A} before I can brake",
           "and I have to swerve hard to avoid {A}", "so my car strikes {A} in the crossing",
           "and my car knocks {A} over"}}},
        {HazardType::StationaryObject,
         {{"{A} is left partly in my lane", "{A} sits just past the bend where I cannot see it",
           "{A} blocks half of the road ahead", "{A} is stopped without any warning lights",
           "{A} sticks out from the shoulder into traffic"},
          {"while {B} hides it from my view", "as {B} squeezes past on the other side",
           "while {B} leaves me no room to move over", "as {B} distracts me from the road"},
          {"so my car runs into {A}", "and my car scrapes along {A}", "and I crash into the back of {A}",
           "so my car clips the corner of {A}", "and my car hits {A} head on"}}},
        {HazardType::TrafficSignal,
         {{"{A} turns red just as I reach the junction", "{A} is hard to see in the glare",
           "{A} changes while I am already committed", "{A} shows a green arrow that I misread",
           "{A} flickers and goes dark at the crossing"},
          {"while {B} enters the junction from the side", "as {B} starts to cross in front of me",
           "while {B} brakes hard at the stop line", "as {B} follows the signal and pulls out"},
          {"so my car enters the junction and is struck from the side", "and my car runs through the junction",
           "and I stop late past the line", "so my car collides with cross traffic",
           "and my car skids into the crossing"}}},
        {HazardType::UnusualCondition,
         {{"{A} appears suddenly out of the heavy fog", "{A} is hidden by the low sun glare",
           "{A} slides on the wet road surface", "{A} emerges from the dark without lights",
           "{A} loses grip on the icy patch"},
          {"while {B} sprays water across my windshield", "as {B} swerves to avoid a puddle",
           "while {B} blinds me with high beams", "as {B} kicks up snow in front of me"},
          {"so my car hits {A} before I notice it", "and my car slides into {A}",
           "and I cannot stop before reaching {A}", "so my car spins and strikes {A}",
           "and my car hits {A} on the slippery road"}}},
        {HazardType::SpeedingBraking,
         {{"{A} brakes hard in front of me", "{A} slows down suddenly for no clear reason",
           "{A} stops abruptly to pick up a passenger", "{A} suddenly speeds up and then brakes",
           "{A} stops short at the yellow light"},
          {"while {B} tailgates right behind my car", "as {B} cuts in between us",
           "while {B} also brakes in the next lane", "as {B} pulls out from the curb ahead"},
          {"and my car rear ends {A}", "so my car cannot stop in time and hits {A}",
           "and my car crashes into the back of {A}", "so I slam into {A}",
           "and my car bumps into the rear of {A}"}}},
        {HazardType::Sideswipe,
         {{"{A} drifts into my lane while passing", "{A} changes lanes without signaling",
           "{A} swerves to avoid a pothole", "{A} drives too close to the center line",
           "{A} squeezes past me on a narrow street"},
          {"while {B} boxes me in from the other side", "as {B} suddenly moves over",
           "while {B} drives right alongside my car", "as {B} opens a door into the lane"},
          {"and scrapes the side of my car", "so my car and {A} sideswipe each other",
           "and my car is clipped by {A}", "so {A} hits my mirror and side panel",
           "and my car touches {A} along its side"}}},
        {HazardType::MergingManeuver,
         {{"{A} merges into my lane from the ramp", "{A} pulls out from the side road",
           "{A} turns left across my path", "{A} cuts in from the parking lane",
           "{A} forces its way into the merge"},
          {"while {B} refuses to give way", "as {B} speeds up to close the gap",
           "while {B} hesitates at the yield sign", "as {B} follows closely behind it"},
          {"and my car hits {A} from the side", "so my car collides with {A}", "and my car runs into {A}",
           "so I crash into the rear corner of {A}", "and my car strikes {A} in the merge"}}},
        {HazardType::UnexpectedEvent,
         {{"{A} stops in the middle of its turn", "{A} suddenly reverses toward me",
           "{A} changes its mind halfway through the turn", "{A} makes a sudden u turn",
           "{A} loses part of its load onto the road"},
          {"while {B} hides the move from my view", "as {B} honks and swerves",
           "while {B} stops to let it go", "as {B} brakes to avoid it"},
          {"and my car hits {A}", "so my car cannot avoid {A}", "and I collide with {A}",
           "so my car swerves and hits {A}", "and my car runs into {A} before I react"}}},
        {HazardType::ChainReaction,
         {{"{A} brakes suddenly in the dense traffic", "{A} is hit from behind and pushed forward",
           "{A} stops hard and causes a pileup", "{A} swerves and makes others brake",
           "{A} crashes and blocks all lanes"},
          {"then {B} slams into it", "and {B} cannot stop in time",
           "while {B} is pushed into my lane", "then {B} spins across the road"},
          {"and my car is caught in the chain of collisions with {A}", "so my car hits the wreck of {A}",
           "and my car joins the pileup behind {A}", "so I crash into {A}",
           "and my car is struck after hitting {A}"}}},
    };
    return books;
}

std::string fill(std::string text, const std::vector<int>& order) {
    static const char* kSlots[] = {"{A}", "{B}", "{C}"};
    for (std::size_t i = 0; i < 3; ++i) {
        const std::string ref = i < order.size() ? "Entity #" + std::to_string(order[i]) : "the vehicle";
        for (auto pos = text.find(kSlots[i]); pos != std::string::npos; pos = text.find(kSlots[i], pos)) {
            text.replace(pos, 3, ref);
            pos += ref.size();
        }
    }
    return text;
}

// Entity #1..N in random roles; every role appears at least once.
std::string make_hazard(HazardType type, int n, Rng& rng) {
    const Phrasebook& book = phrasebooks().at(type);
    std::vector<int> order;
    for (int i = 1; i <= n; ++i) order.push_back(i);
    rng.shuffle(order);
    std::string text = rng.pick(book.leads);
    for (int role = 1; role < n; ++role) {
        std::string link = rng.pick(book.links);
        // Links name the role they introduce as {B}; rebind to the current role.
        const std::string target = role == 1 ? "{B}" : "{C}";
        for (auto pos = link.find("{B}"); pos != std::string::npos; pos = link.find("{B}", pos + 3)) {
            link.replace(pos, 3, target);
        }
        text += (role == 1 ? ", " : " and ") + link;
    }
    text += " " + rng.pick(book.outcomes);
    return fill(text, order);
}

std::vector<HazardType> balanced_cycle() {
    const auto counts = balanced_subset_counts();
    std::vector<HazardType> cycle;
    int max_count = 0;
    for (const auto& [t, c] : counts) max_count = std::max(max_count, c);
    for (int round = 0; round < max_count; ++round) {
        for (HazardType t : kHazardTypes) {
            if (round < counts.at(t)) cycle.push_back(t);
        }
    }
    return cycle;
}

std::string position_phrase(const BBox& b, ImageDims dims) {
    const double cx = (b.x_min + b.x_max) / 2.0 / dims.width;
    const double cy = (b.y_min + b.y_max) / 2.0 / dims.height;
    if (cx < 0.35) return "on the left side";
    if (cx > 0.65) return "on the right side";
    return cy > 0.5 ? "in front of my car" : "further ahead in my lane";
}

bool overlaps(const BBox& a, const BBox& b) {
    return a.x_min < b.x_max && b.x_min < a.x_max && a.y_min < b.y_max && b.y_min < a.y_max;
}

Image render_scene(ImageDims dims, const std::vector<std::pair<BBox, Rgb>>& patches, Rng& rng) {
    const Rgb sky = rng.pick(kSkies);
    const int tone = rng.uniform_int(70, 130);
    const int horizon = static_cast<int>(dims.height * rng.uniform(0.35, 0.5));
    Image img(dims.width, dims.height);
    for (int y = 0; y < dims.height; ++y) {
        for (int x = 0; x < dims.width; ++x) {
            Rgb c;
            if (y < horizon) {
                c = sky;
            } else {
                const auto t = static_cast<std::uint8_t>(std::clamp(tone + (y - horizon) / 4, 0, 255));
                c = {t, t, static_cast<std::uint8_t>(std::min(255, t + 8))};
                const int lane_x = dims.width / 2;
                if (std::abs(x - lane_x) <= 1 && (y / 4) % 2 == 0) c = {230, 230, 230};
            }
            for (int ch = 0; ch < 3; ++ch) {
                c[ch] = static_cast<std::uint8_t>(std::clamp(static_cast<int>(c[ch]) + rng.uniform_int(-6, 6), 0, 255));
            }
            img.set(x, y, c);
        }
    }
    for (const auto& [box, color] : patches) {
        for (int y = box.y_min; y < box.y_max; ++y) {
            for (int x = box.x_min; x < box.x_max; ++x) img.set(x, y, color);
        }
    }
    return img;
}

}  // namespace

SynthResult synthesize_corpus(const SynthSpec& spec, std::uint64_t seed) {
    if (spec.train < 0 || spec.val < 0 || spec.test < 0) throw std::invalid_argument("split sizes must be >= 0");
    if (spec.dims.width < 32 || spec.dims.height < 32) throw std::invalid_argument("synthetic images must be >= 32x32");

    SynthResult result;
    Rng master(seed);
    const auto cycle = balanced_cycle();
    std::set<std::string> used_texts;
    const ImageDims dims = spec.dims;

    auto make_split = [&](Split split, int count) {
        for (int i = 0; i < count; ++i) {
            Rng rng = master.fork();
            Sample s;
            char id[64];
            std::snprintf(id, sizeof(id), "synth-%s-%04d", std::string(to_string(split)).c_str(), i);
            s.id = id;
            s.image_ref = "images/" + s.id + ".png";
            s.source = Source::SYNTH;
            s.split = split;
            s.image_dims = dims;
            s.speed_kmh = kSpeedsKmh[rng.below(kSpeedsKmh.size())];
            const HazardType type = split == Split::Train ? cycle[rng.below(cycle.size())]
                                                          : cycle[static_cast<std::size_t>(i) % cycle.size()];
            s.hazard_type = type;
            const int n = rng.uniform_int(1, kMaxEntities);

            std::vector<std::size_t> color_ids(kColors.size());
            for (std::size_t c = 0; c < color_ids.size(); ++c) color_ids[c] = c;
            rng.shuffle(color_ids);
            std::vector<std::pair<BBox, Rgb>> patches;
            for (int e = 1; e <= n; ++e) {
                BBox box;
                for (int attempt = 0; attempt < 30; ++attempt) {
                    const int w = std::max(4, static_cast<int>(dims.width * rng.uniform(0.15, 0.32)));
                    const int h = std::max(4, static_cast<int>(dims.height * rng.uniform(0.15, 0.32)));
                    const int x0 = rng.uniform_int(0, dims.width - w);
                    const int y0 = rng.uniform_int(0, dims.height - h);
                    box = {x0, y0, x0 + w, y0 + h};
                    bool clash = false;
                    for (const auto& p : patches) clash = clash || overlaps(p.first, box);
                    if (!clash) break;
                }
                const ObjectColor& color = kColors[color_ids[static_cast<std::size_t>(e - 1)]];
                const EntityKind& kind = rng.pick(kKinds);
                s.entities.push_back(
                    {e, box, std::string(color.name) + " " + kind.name + " " + position_phrase(box, dims)});
                patches.emplace_back(box, color.rgb);
            }

            std::string text = make_hazard(type, n, rng);
            for (int attempt = 0; attempt < 64 && used_texts.contains(text); ++attempt) text = make_hazard(type, n, rng);
            used_texts.insert(text);
            s.hazard = text;

            result.images.emplace(s.image_ref, render_scene(dims, patches, rng));
            result.corpus.samples.push_back(std::move(s));
        }
    };
    make_split(Split::Train, spec.train);
    make_split(Split::Val, spec.val);
    make_split(Split::Test, spec.test);
    return result;
}

std::filesystem::path write_synthetic(const SynthResult& result, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& [ref, img] : result.images) write_png(dir / ref, img);
    const auto path = dir / "corpus.jsonl";
    save_corpus(path, result.corpus);
    return path;
}

}  // namespace hazard::data
