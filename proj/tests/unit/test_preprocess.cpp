#include "hazard/dataset/dataset.hpp"
#include "hazard/preprocess/preprocess.hpp"
#include "hazard/tensor/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace hazard;
using namespace hazard::prep;
using data::BBox;
using data::EntityAnnotation;

namespace {

Image noise_image(int w, int h, Rng& rng) {
    Image img(w, h);
    for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.below(256));
    return img;
}

bool inside_any(const std::vector<EntityAnnotation>& es, int x, int y) {
    return std::any_of(es.begin(), es.end(), [&](const auto& e) { return e.bbox.contains(x, y); });
}

data::Sample sample_with(std::string hazard, std::vector<EntityAnnotation> entities) {
    data::Sample s;
    s.id = "x";
    s.hazard = std::move(hazard);
    s.entities = std::move(entities);
    s.speed_kmh = 15;
    return s;
}

}  // namespace

TEST_CASE("filled rendering blends white with purple to the worked value") {
    Image img(10, 10, {255, 255, 255});
    const std::vector<EntityAnnotation> es{{1, {2, 2, 6, 6}, "car"}};
    const Image out = render_entity_boxes(img, es, RenderStyle{});
    CHECK(out.pixel(3, 3) == Rgb{179, 102, 179});
    CHECK(out.pixel(0, 0) == Rgb{255, 255, 255});
    CHECK(out.pixel(6, 6) == Rgb{255, 255, 255});
}

TEST_CASE("alpha zero is the identity") {
    Rng rng(1);
    const Image img = noise_image(20, 20, rng);
    RenderStyle style;
    style.alpha = 0.0;
    const std::vector<EntityAnnotation> es{{1, {0, 0, 20, 20}, "a"}, {2, {3, 3, 9, 9}, "b"}};
    CHECK(render_entity_boxes(img, es, style) == img);
}

TEST_CASE("overlapping boxes composite in ascending index order") {
    Image img(10, 10, {0, 0, 0});
    // Listed out of order on purpose.
    const std::vector<EntityAnnotation> es{{2, {0, 0, 5, 5}, "b"}, {1, {0, 0, 5, 5}, "a"}};
    const Image out = render_entity_boxes(img, es, RenderStyle{});
    const Rgb after_first = blend({0, 0, 0}, trained_palette()[1], 0.6);
    CHECK(out.pixel(1, 1) == blend(after_first, trained_palette()[2], 0.6));
}

TEST_CASE("rendering leaves out-of-box pixels bit-identical in both modes") {
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        const Image img = noise_image(32, 24, rng);
        std::vector<EntityAnnotation> es;
        const int n = rng.uniform_int(1, 3);
        for (int i = 1; i <= n; ++i) {
            const int x0 = rng.uniform_int(0, 28);
            const int y0 = rng.uniform_int(0, 20);
            es.push_back({i, {x0, y0, rng.uniform_int(x0 + 1, 32), rng.uniform_int(y0 + 1, 24)}, "e"});
        }
        const Image filled = render_entity_boxes(img, es, RenderStyle{});
        const Image outline = render_entity_boxes(img, es, RenderStyle::outline());
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                if (inside_any(es, x, y)) continue;
                REQUIRE(filled.pixel(x, y) == img.pixel(x, y));
                REQUIRE(outline.pixel(x, y) == img.pixel(x, y));
            }
        }
    }
}

TEST_CASE("outline strokes the perimeter and keeps the interior") {
    Rng rng(5);
    const Image img = noise_image(30, 30, rng);
    const std::vector<EntityAnnotation> es{{2, {5, 5, 25, 20}, "e"}};
    const Image out = render_entity_boxes(img, es, RenderStyle::outline());
    const Rgb cyan = outline_palette()[2];
    CHECK(out.pixel(5, 5) == cyan);
    CHECK(out.pixel(7, 12) == cyan);
    CHECK(out.pixel(24, 19) == cyan);
    for (int y = 8; y < 17; ++y) {
        for (int x = 8; x < 22; ++x) REQUIRE(out.pixel(x, y) == img.pixel(x, y));
    }
}

TEST_CASE("unknown palette index is rejected") {
    Image img(8, 8);
    const std::vector<EntityAnnotation> es{{4, {0, 0, 2, 2}, "e"}};
    CHECK_THROWS_AS(render_entity_boxes(img, es, RenderStyle{}), std::out_of_range);
}

TEST_CASE("blend matches a scalar oracle on random triples") {
    Rng rng(17);
    for (int i = 0; i < 2000; ++i) {
        const auto p = static_cast<std::uint8_t>(rng.below(256));
        const auto c = static_cast<std::uint8_t>(rng.below(256));
        const double a = rng.uniform();
        const long double exact = static_cast<long double>(a) * c + (1.0L - static_cast<long double>(a)) * p;
        REQUIRE(blend_channel(p, c, a) == static_cast<int>(std::floor(exact + 0.5L)));
    }
}

TEST_CASE("ablation modes follow their pixel definitions") {
    Rng rng(6);
    const Image img = noise_image(24, 24, rng);
    const std::vector<EntityAnnotation> es{{1, {2, 2, 8, 8}, "a"}, {2, {12, 12, 20, 22}, "b"}};

    const Image pos = apply_ablation_mode(img, es, AblationMode::PositionOnly);
    CHECK(pos.pixel(0, 0) == kNeutralGray);
    CHECK(pos.pixel(22, 2) == kNeutralGray);
    CHECK(pos.pixel(3, 3) == trained_palette()[1]);

    const Image no_entity = apply_ablation_mode(img, es, AblationMode::NoEntity);
    CHECK(no_entity.pixel(0, 0) == img.pixel(0, 0));
    CHECK(no_entity.pixel(15, 15) == trained_palette()[2]);

    const Image no_context = apply_ablation_mode(img, es, AblationMode::NoContext);
    const Image full = render_entity_boxes(img, es, RenderStyle{});
    CHECK(no_context.pixel(15, 15) == full.pixel(15, 15));
    CHECK(no_context.pixel(15, 15) == blend(img.pixel(15, 15), trained_palette()[2], 0.6));
    CHECK(no_context.pixel(0, 23) == kNeutralGray);

    const Image only_context = apply_ablation_mode(img, es, AblationMode::OnlyContext);
    CHECK(only_context.pixel(4, 4) == kNeutralGray);
    CHECK(only_context.pixel(10, 4) == img.pixel(10, 4));
    CHECK(apply_ablation_mode(img, {}, AblationMode::OnlyContext) == img);

    CHECK(apply_ablation_mode(img, es, AblationMode::Full) == full);
}

TEST_CASE("ablation mode names round-trip") {
    for (auto m : {AblationMode::Full, AblationMode::PositionOnly, AblationMode::NoEntity, AblationMode::NoContext,
                   AblationMode::OnlyContext}) {
        CHECK(parse_ablation_mode(to_string(m)) == m);
    }
    CHECK_THROWS(parse_ablation_mode("nothing"));
}

TEST_CASE("geometric pipeline: eval is a deterministic center crop") {
    Rng rng(2);
    const Image img = noise_image(480, 480, rng);
    GeomConfig cfg;
    cfg.crop_side = 224;
    CHECK(cfg.resize_side() == 240);
    Rng a(9);
    const std::string before = a.save_state();
    const Image out = geometric_pipeline(img, cfg, a, false);
    CHECK(out.width == 224);
    CHECK(out.height == 224);
    CHECK(a.save_state() == before);
    CHECK(out == crop(resize_bilinear(img, 240, 240), 8, 8, 224, 224));
}

TEST_CASE("geometric pipeline: train mode is seed-deterministic") {
    Rng rng(3);
    const Image img = noise_image(64, 48, rng);
    GeomConfig cfg;
    cfg.crop_side = 32;
    Rng a(5), b(5);
    const Image x = geometric_pipeline(img, cfg, a, true);
    const Image y = geometric_pipeline(img, cfg, b, true);
    CHECK(x == y);
    CHECK(x.width == 32);
    CHECK_FALSE(GeomConfig::kHorizontalFlip);
}

TEST_CASE("box rescale follows the resize ratio") {
    CHECK(rescale_box({0, 0, 240, 240}, {480, 480}, 240) == BBox{0, 0, 120, 120});
    CHECK(rescale_box({100, 50, 300, 250}, {400, 200}, 100) == BBox{25, 25, 75, 100});
}

TEST_CASE("model input renders boxes after jitter") {
    Rng rng(3);
    const Image base(64, 64, {40, 40, 40});
    const std::vector<EntityAnnotation> es{{1, {0, 0, 64, 64}, "all"}};
    GeomConfig cfg;
    cfg.crop_side = 32;
    Rng a(1);
    const Image eval = prepare_model_input(base, es, RenderStyle{}, cfg, a, false);
    CHECK(eval.pixel(10, 10) == blend({40, 40, 40}, trained_palette()[1], 0.6));
    Rng b(1);
    const Image train = prepare_model_input(base, es, RenderStyle{}, cfg, b, true);
    CHECK(train.width == 32);
}

TEST_CASE("shuffle rewrites references and swaps palette assignment") {
    const auto s = sample_with("Entity #1 brakes and my car hits Entity #2",
                               {{1, {0, 0, 4, 4}, "white car"}, {2, {5, 5, 9, 9}, "cyclist"}});
    const Permutation swap{{1, 2}, {2, 1}};
    const auto out = shuffle_entities(s, swap);
    CHECK(out.hazard == "Entity #2 brakes and my car hits Entity #1");
    CHECK(out.entities[0].index == 2);
    CHECK(out.entities[0].description == "white car");
    CHECK(out.entities[0].bbox == s.entities[0].bbox);

    Image img(10, 10, {255, 255, 255});
    const Image rendered = render_entity_boxes(img, out.entities, RenderStyle{});
    CHECK(rendered.pixel(1, 1) == blend({255, 255, 255}, trained_palette()[2], 0.6));
}

TEST_CASE("shuffle identity, inverse and bijection checks") {
    const auto s = sample_with("ENTITY #  1 cuts in and entity #3 brakes so I hit Entity #1",
                               {{1, {0, 0, 4, 4}, "a"}, {3, {5, 5, 9, 9}, "b"}});
    const Permutation id{{1, 1}, {3, 3}};
    CHECK(shuffle_entities(s, id) == s);
    const Permutation p{{1, 3}, {3, 1}};
    const auto once = shuffle_entities(s, p);
    CHECK(once.hazard == "ENTITY #  3 cuts in and entity #1 brakes so I hit Entity #3");
    CHECK(shuffle_entities(once, inverse(p)) == s);
    CHECK_THROWS(shuffle_entities(s, Permutation{{1, 3}, {3, 3}}));
    CHECK_THROWS(shuffle_entities(s, Permutation{{1, 2}, {3, 1}}));
}

TEST_CASE("shuffle preserves token counts, descriptions and validity on random samples") {
    const auto synth = data::synthesize_corpus({60, 0, 0, {48, 48}}, 21);
    Rng rng(8);
    for (const auto& s : synth.corpus.samples) {
        const auto p = random_permutation(s, rng);
        const auto out = shuffle_entities(s, p);
        CHECK(data::validate_sample(out, {48, 48}).ok);
        CHECK(data::find_entity_refs(out.hazard).size() == data::find_entity_refs(s.hazard).size());
        CHECK(shuffle_entities(out, inverse(p)) == s);
    }
}

TEST_CASE("comprehensive text reproduces the worked example") {
    const auto s = sample_with(
        "Entity #1 decides to go behind of Entity #2 to cross street misjudges my speed, can't stop in time and hits "
        "Entity #1",
        {{1, {0, 0, 4, 4}, "cyclist on right side by sidewalk"}, {2, {5, 5, 9, 9}, "white car in front of my car"}});
    const auto out = make_comprehensive_text(s);
    CHECK(out.text ==
          "Entity #1, cyclist on right side by sidewalk, decides to go behind of Entity #2, white car in front of my "
          "car, to cross street misjudges my speed, can't stop in time and hits Entity #1.");
}

TEST_CASE("comprehensive text expands only the first mention") {
    const auto s = sample_with("Entity #1 stops and then Entity #1 turns around.", {{1, {0, 0, 4, 4}, "red bus"}});
    CHECK(make_comprehensive_text(s).text == "Entity #1, red bus, stops and then Entity #1 turns around.");
}

TEST_CASE("deleting inserted spans recovers the original hazard") {
    const auto synth = data::synthesize_corpus({40, 0, 0, {48, 48}}, 5);
    for (const auto& s : synth.corpus.samples) {
        const auto out = make_comprehensive_text(s);
        std::string stripped;
        std::size_t cursor = 0;
        for (const auto& [b, e] : out.inserted) {
            stripped.append(out.text, cursor, b - cursor);
            cursor = e;
        }
        stripped.append(out.text, cursor, std::string::npos);
        CHECK(stripped == s.hazard);
    }
}
