#include "hazard/dataset/dataset.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

using namespace hazard;
using namespace hazard::data;

namespace {

Sample two_entity_sample() {
    Sample s;
    s.id = "s1";
    s.image_ref = "images/s1.png";
    s.speed_kmh = 45;
    s.hazard = "Entity #1 brakes hard and my car hits Entity #2";
    s.entities = {{1, {2, 2, 20, 20}, "white car in front of my car"}, {2, {30, 30, 50, 60}, "cyclist on the right"}};
    s.hazard_type = HazardType::SpeedingBraking;
    s.split = Split::Test;
    s.image_dims = ImageDims{64, 64};
    return s;
}

bool has_rule(const ValidationReport& r, const std::string& rule) {
    for (const auto& v : r.violations) {
        if (v.rule == rule) return true;
    }
    return false;
}

std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("hazard_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("validate_sample accepts a well-formed sample") {
    const auto report = validate_sample(two_entity_sample(), {64, 64});
    CHECK(report.ok);
    CHECK(report.violations.empty());
}

TEST_CASE("validate_sample rejects short hazards") {
    Sample s = two_entity_sample();
    s.entities.pop_back();
    s.hazard = "Entity #1 stops now";
    const auto report = validate_sample(s, {64, 64});
    CHECK_FALSE(report.ok);
    CHECK(report.summary().find("hazard shorter than 5 words") != std::string::npos);
}

TEST_CASE("validate_sample names unreferenced entities") {
    Sample s = two_entity_sample();
    s.hazard = "Entity #1 brakes hard and my car hits it";
    const auto report = validate_sample(s, {64, 64});
    CHECK_FALSE(report.ok);
    CHECK(report.summary().find("entity 2 unreferenced") != std::string::npos);
}

TEST_CASE("validate_sample flags references without annotations and bad boxes") {
    Sample s = two_entity_sample();
    s.hazard = "Entity #1 brakes hard, Entity #3 swerves and my car hits Entity #2";
    s.entities[1].bbox.x_max = 70;
    s.speed_kmh = 50;
    const auto report = validate_sample(s, {64, 64});
    CHECK(has_rule(report, "reference_annotated"));
    CHECK(has_rule(report, "bbox_bounds"));
    CHECK(has_rule(report, "speed_bucket"));
}

TEST_CASE("entity references tolerate case and spacing") {
    CHECK(referenced_entities("ENTITY #1 and entity #  2 but not nonentity #3 or Entity#4") == std::vector<int>{1, 2});
}

TEST_CASE("hazard type is only required on request") {
    Sample s = two_entity_sample();
    s.hazard_type.reset();
    CHECK(validate_sample(s, {64, 64}).ok);
    CHECK(has_rule(validate_sample(s, {64, 64}, {.require_hazard_type = true}), "hazard_type_present"));
}

TEST_CASE("load_corpus reads records in order") {
    const auto dir = temp_dir("load");
    Corpus c;
    for (int i = 0; i < 3; ++i) {
        Sample s = two_entity_sample();
        s.id = "s" + std::to_string(i);
        c.samples.push_back(s);
    }
    save_corpus(dir / "corpus.jsonl", c);
    const Corpus loaded = load_corpus(dir / "corpus.jsonl");
    REQUIRE(loaded.samples.size() == 3);
    CHECK(loaded.samples[2].id == "s2");
    CHECK(loaded.samples[0] == c.samples[0]);
}

TEST_CASE("load_corpus reports duplicate ids and bbox violations") {
    const auto dir = temp_dir("dup");
    Corpus c;
    c.samples = {two_entity_sample(), two_entity_sample()};
    save_corpus(dir / "dup.jsonl", c);
    try {
        load_corpus(dir / "dup.jsonl");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("s1: duplicate id") != std::string::npos);
    }

    c.samples.pop_back();
    c.samples[0].entities[0].bbox.x_max = 65;
    save_corpus(dir / "bbox.jsonl", c);
    try {
        load_corpus(dir / "bbox.jsonl");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("x_max<=64") != std::string::npos);
    }
}

TEST_CASE("load_corpus reports the line of a parse error") {
    const auto dir = temp_dir("parse");
    {
        std::ofstream out(dir / "bad.jsonl");
        out << sample_to_json_line(two_entity_sample()) << "\n{not json\n";
    }
    try {
        load_corpus(dir / "bad.jsonl");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("bad.jsonl:2") != std::string::npos);
    }
}

TEST_CASE("image dimensions come from the PNG when not recorded") {
    const auto dir = temp_dir("png");
    Sample s = two_entity_sample();
    s.image_dims.reset();
    write_png(dir / s.image_ref, Image(40, 40));
    Corpus c;
    c.samples = {s};
    save_corpus(dir / "corpus.jsonl", c);
    // Entity 2 extends to x=50 which exceeds the 40px image.
    CHECK_THROWS_AS(load_corpus(dir / "corpus.jsonl"), DataError);
}

TEST_CASE("select_retrieval_subset honours counts and is deterministic") {
    const auto synth = synthesize_corpus({0, 0, 100, {48, 48}}, 3);
    const auto counts = balanced_subset_counts();
    const auto ids = select_retrieval_subset(synth.corpus, Split::Test, counts, 5);
    CHECK(ids.size() == 100);
    CHECK(ids == select_retrieval_subset(synth.corpus, Split::Test, counts, 5));

    std::map<HazardType, int> zero;
    CHECK(select_retrieval_subset(synth.corpus, Split::Test, zero, 5).empty());

    std::map<HazardType, int> too_many{{HazardType::ChainReaction, 6}};
    try {
        select_retrieval_subset(synth.corpus, Split::Test, too_many, 5);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("ChainReaction") != std::string::npos);
    }
}

TEST_CASE("subset draws differ across seeds when the pool is larger") {
    const auto synth = synthesize_corpus({0, 0, 200, {40, 40}}, 9);
    std::map<HazardType, int> counts{{HazardType::SpeedingBraking, 10}};
    CHECK(select_retrieval_subset(synth.corpus, Split::Test, counts, 1) !=
          select_retrieval_subset(synth.corpus, Split::Test, counts, 2));
}

TEST_CASE("synthesized corpora validate and are reproducible") {
    const SynthSpec spec{32, 8, 8, {64, 64}};
    const auto a = synthesize_corpus(spec, 7);
    const auto b = synthesize_corpus(spec, 7);
    CHECK(corpus_to_jsonl(a.corpus) == corpus_to_jsonl(b.corpus));
    CHECK(a.images == b.images);
    CHECK(a.corpus.samples.size() == 48);

    std::set<std::string> texts;
    for (const auto& s : a.corpus.samples) {
        CHECK(validate_sample(s, spec.dims).ok);
        CHECK((s.speed_kmh == 15 || s.speed_kmh == 45 || s.speed_kmh == 75));
        for (const auto& e : s.entities) {
            CHECK(referenced_entities(s.hazard).size() >= 1);
            const auto refs = referenced_entities(s.hazard);
            CHECK(std::find(refs.begin(), refs.end(), e.index) != refs.end());
        }
        texts.insert(s.hazard);
    }
    CHECK(texts.size() == a.corpus.samples.size());
    CHECK(corpus_to_jsonl(synthesize_corpus(spec, 8).corpus) != corpus_to_jsonl(a.corpus));
}

TEST_CASE("synthesized images carry a solid patch per entity") {
    const auto synth = synthesize_corpus({4, 0, 0, {64, 64}}, 1);
    for (const auto& s : synth.corpus.samples) {
        const Image& img = synth.images.at(s.image_ref);
        for (const auto& e : s.entities) {
            const Rgb c = img.pixel(e.bbox.x_min, e.bbox.y_min);
            CHECK(img.pixel(e.bbox.x_max - 1, e.bbox.y_max - 1) == c);
        }
    }
}

TEST_CASE("write_synthetic output loads back") {
    const auto dir = temp_dir("synth_io");
    const auto synth = synthesize_corpus({6, 2, 2, {48, 48}}, 4);
    const auto path = write_synthetic(synth, dir);
    const Corpus loaded = load_corpus(path);
    CHECK(loaded.samples.size() == 10);
    CHECK(load_sample_image(loaded.samples[0], dir) == synth.images.at(loaded.samples[0].image_ref));
}
