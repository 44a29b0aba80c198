#include "hazard/zeroshot/zeroshot.hpp"

#include <doctest.h>

#include <filesystem>
#include <stdexcept>

using namespace hazard;
using namespace hazard::zeroshot;

namespace {

struct Fixture {
    data::SynthResult synth = data::synthesize_corpus({24, 0, 0, {64, 64}}, 31);

    const data::Sample& with_entities(std::size_t n) const {
        for (const auto& s : synth.corpus.samples) {
            if (s.entities.size() == n) return s;
        }
        throw std::logic_error("no synthetic sample with that entity count");
    }
    const Image& image(const data::Sample& s) const { return data::memory_image_source(synth)(s); }
};

std::filesystem::path fresh_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    return dir;
}

bool on_stroke(const data::BBox& b, int x, int y, int s) {
    return b.contains(x, y) && (x - b.x_min < s || b.x_max - 1 - x < s || y - b.y_min < s || b.y_max - 1 - y < s);
}

}  // namespace

TEST_CASE("zero-shot prompt carries speed, entity count and colors") {
    Fixture f;
    data::Sample s = f.with_entities(2);
    s.speed_kmh = 45;
    const auto p = build_zeroshot_prompt(s, f.image(s), ZeroShotContext::from_sample(s));
    CHECK(p.text.starts_with(kZeroShotTemplate));
    CHECK(p.text.find("45 km/h") != std::string::npos);
    CHECK(p.text.find("2 entities are involved") != std::string::npos);
    CHECK(p.text.find("Entity #1 is highlighted by the magenta box.") != std::string::npos);
    CHECK(p.text.find("Entity #2 is highlighted by the cyan box.") != std::string::npos);
    CHECK(p.text.find("yellow") == std::string::npos);
    CHECK_FALSE(p.degraded);
    CHECK(p.image.provenance == s.id);
}

TEST_CASE("zero-shot template snapshot") {
    CHECK(kZeroShotTemplate ==
          "You are shown a dashcam image taken from the driver's seat of a car. "
          "Colored boxes outline the objects that matter for the situation. "
          "Describe the hazard that may happen a few seconds later, from the driver's point of view, "
          "referring to each highlighted object as Entity #n. Answer in one or two sentences.");
    CHECK(kZeroShotTemplateVersion == "zs-v1");
    CHECK(outline_color_name(3) == "yellow");
    CHECK_THROWS_AS(outline_color_name(4), std::invalid_argument);
}

TEST_CASE("outline image keeps box interiors bit-identical") {
    Fixture f;
    const auto& s = f.with_entities(3);
    const Image& base = f.image(s);
    const auto p = build_zeroshot_prompt(s, base, ZeroShotContext::from_sample(s));
    const int stroke = prep::RenderStyle::outline().stroke;
    int changed = 0;
    for (int y = 0; y < base.height; ++y) {
        for (int x = 0; x < base.width; ++x) {
            bool edge = false;
            for (const auto& e : s.entities) edge = edge || on_stroke(e.bbox, x, y, stroke);
            if (!edge) {
                for (int c = 0; c < 3; ++c) REQUIRE(p.image.pixels.at(x, y, c) == base.at(x, y, c));
            } else {
                changed += p.image.pixels.at(x, y, 0) != base.at(x, y, 0) || p.image.pixels.at(x, y, 1) != base.at(x, y, 1) ||
                           p.image.pixels.at(x, y, 2) != base.at(x, y, 2);
            }
        }
    }
    CHECK(changed > 0);
}

TEST_CASE("context must agree with the sample") {
    Fixture f;
    const auto& s = f.with_entities(2);
    auto ctx = ZeroShotContext::from_sample(s);
    ctx.n_entities = 3;
    CHECK_THROWS_AS(build_zeroshot_prompt(s, f.image(s), ctx), std::invalid_argument);
    CHECK_THROWS_AS(build_zeroshot_prompt(s, f.image(s), std::nullopt), std::invalid_argument);
    const auto degraded = build_zeroshot_prompt(s, f.image(s), std::nullopt, true);
    CHECK(degraded.degraded);
    CHECK(degraded.text == kZeroShotTemplate);

    data::Sample empty = s;
    empty.entities.clear();
    CHECK_THROWS_AS(build_zeroshot_prompt(empty, f.image(s), ZeroShotContext::from_sample(empty)), data::DataError);
}

TEST_CASE("prompt construction is pure") {
    Fixture f;
    const auto& s = f.with_entities(1);
    const auto a = build_zeroshot_prompt(s, f.image(s), ZeroShotContext::from_sample(s));
    const auto b = build_zeroshot_prompt(s, f.image(s), ZeroShotContext::from_sample(s));
    CHECK(a.text == b.text);
    CHECK(a.image.pixels.data == b.image.pixels.data);
    CHECK(a.text.find("1 entity is involved") != std::string::npos);
}

TEST_CASE("VLM queries are cached by prompt, image and model") {
    Fixture f;
    const auto& s = f.with_entities(2);
    const auto p = build_zeroshot_prompt(s, f.image(s), ZeroShotContext::from_sample(s));
    const auto dir = fresh_dir("hazard_vlm_cache_test");
    eval::ScriptedClient echo("echo-vlm", [](const eval::ChatRequest& r, int) { return "echo: " + r.user.substr(0, 12); });
    VlmRunConfig cfg{dir, {}};
    const auto first = query_external_vlm(echo, p, cfg);
    REQUIRE(first.text.has_value());
    CHECK(*first.text == "echo: " + p.text.substr(0, 12));
    CHECK_FALSE(first.cache_hit);
    CHECK(echo.requests().front().image_png == encode_png(p.image.pixels));
    CHECK(echo.requests().front().temperature == 0.0);

    const auto second = query_external_vlm(echo, p, cfg);
    CHECK(second.cache_hit);
    CHECK(second.text == first.text);
    CHECK(echo.calls() == 1);

    eval::ScriptedClient other("other-vlm", [](const eval::ChatRequest&, int) { return std::string("x"); });
    CHECK_FALSE(query_external_vlm(other, p, cfg).cache_hit);
    CHECK(vlm_cache_key(p, "a") != vlm_cache_key(p, "b"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("empty VLM replies become per-sample failures") {
    Fixture f;
    const auto& s = f.with_entities(1);
    const auto p = build_zeroshot_prompt(s, f.image(s), ZeroShotContext::from_sample(s));
    const auto dir = fresh_dir("hazard_vlm_empty_test");
    eval::ScriptedClient blank("blank", [](const eval::ChatRequest&, int) { return std::string("  \n"); });
    VlmRunConfig cfg{dir, {2, std::chrono::milliseconds(1), 2.0}};
    const auto r = query_external_vlm(blank, p, cfg);
    CHECK_FALSE(r.text.has_value());
    CHECK(r.error.find("empty") != std::string::npos);
    CHECK(blank.calls() == 2);
    std::filesystem::remove_all(dir);
}

TEST_CASE("mock VLM names the highlighted entities") {
    eval::ChatRequest r;
    r.user = "x\nEntity #1 is highlighted by the magenta box.\nEntity #2 is highlighted by the cyan box.";
    CHECK(mock_vlm_response(r) == "Entity #1 may move into my path while Entity #2 blocks my escape, and I could hit it.");
}
