#include "hazard/cli/pipeline.hpp"
#include "hazard/common/io.hpp"
#include "hazard/evaluation/predictions.hpp"

#include <doctest.h>

#include <filesystem>
#include <sstream>

using namespace hazard;
using namespace hazard::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Smallest configuration that still exercises every stage.
json tiny_config(const fs::path& corpus, const fs::path& out) {
    return {{"seed", 3},
            {"corpus", {{"root", corpus.string()}, {"synth", {{"train", 8}, {"val", 0}, {"test", 4}}}}},
            {"output_dir", out.string()},
            {"retrieval_train", {{"epochs", 1}, {"batch_size", 4}}},
            {"decoder_pretrain", {{"epochs", 1}}},
            {"generation_train", {{"epochs", 1}, {"effective_batch", 4}, {"augment", false}}},
            {"decode", {{"max_new_tokens", 6}}}};
}

}  // namespace

TEST_CASE("config without corpus root is a usage error") {
    CHECK_THROWS_AS(RunConfig::from_json(json{{"seed", 1}}, "."), UsageError);
    CHECK_THROWS_AS(RunConfig::from_json(json{{"corpus", json::object()}}, "."), UsageError);
}

TEST_CASE("unknown stages and keys are usage errors") {
    CHECK_THROWS_AS(RunConfig::from_json(json{{"corpus", {{"root", "c"}}}, {"stages", {"report", "gen.tune"}}}, "."),
                    UsageError);
    CHECK_THROWS_AS(RunConfig::from_json(json{{"corpus", {{"root", "c"}}}, {"sead", 1}}, "."), UsageError);
    CHECK_THROWS_AS(RunConfig::from_json(json{{"corpus", {{"root", "c"}}}, {"judge", {{"client", "maybe"}}}}, "."),
                    UsageError);
    CHECK_THROWS_AS(RunConfig::from_json(json{{"corpus", {{"root", "c"}}}, {"split", "dev"}}, "."), UsageError);
}

TEST_CASE("config round-trips and the hash ignores locations") {
    const auto a = RunConfig::from_json(tiny_config("/a/corpus", "/a/out"), "/");
    const auto b = RunConfig::from_json(tiny_config("/b/corpus", "/b/out"), "/");
    CHECK(a.hash() == b.hash());
    CHECK(a.stage_hash("retrieval") == b.stage_hash("retrieval"));
    CHECK(a.retrieval_train.seed == 3);
    CHECK(a.generation_train.epochs == 1);

    auto c_json = tiny_config("/a/corpus", "/a/out");
    c_json["seed"] = 4;
    const auto c = RunConfig::from_json(c_json, "/");
    CHECK(c.hash() != a.hash());
    CHECK(c.stage_hash("judge") == a.stage_hash("judge"));

    const auto again = RunConfig::from_json(a.to_json(), "/");
    CHECK(again.to_json() == a.to_json());
}

TEST_CASE("relative paths resolve against the config directory") {
    const auto c = RunConfig::from_json(json{{"corpus", {{"root", "data"}}}, {"output_dir", "out"}}, "/cfg");
    CHECK(c.corpus_root == fs::path("/cfg/data"));
    CHECK(c.output_dir == fs::path("/cfg/out"));
}

TEST_CASE("predictions TSV round-trips and sanitizes separators") {
    const eval::TextById preds = {{"a", "Entity #1 brakes"}, {"b", "two\tcolumns\nand lines"}, {"c", ""}};
    const auto back = eval::parse_predictions_tsv(eval::format_predictions_tsv(preds));
    CHECK(back.size() == 3);
    CHECK(back.at("a") == "Entity #1 brakes");
    CHECK(back.at("b") == "two columns and lines");
    CHECK(back.at("c").empty());
    CHECK_THROWS(eval::parse_predictions_tsv("id\tprediction\na\tx\na\ty\n"));
    CHECK_THROWS(eval::parse_predictions_tsv("wrong header\n"));
}

TEST_CASE("a stage without its upstream artifact halts the run") {
    const auto dir = fresh_dir("hazard_cli_missing");
    auto cfg = RunConfig::from_json(tiny_config(dir / "corpus", dir / "out"), dir);
    cfg.stages = {"gen.infer", "report"};
    std::ostringstream log;
    try {
        run_pipeline(cfg, log);
        FAIL("expected StageError");
    } catch (const StageError& e) {
        CHECK(e.stage() == "gen.infer");
        CHECK(std::string(e.what()).find("missing upstream artifact") != std::string::npos);
    }
    CHECK_FALSE(fs::exists(dir / "out" / "report.md"));
    CHECK(log.str().find("[report]") == std::string::npos);
}

TEST_CASE("a tiny pipeline produces identical reports in two directories") {
    const auto dir = fresh_dir("hazard_cli_pipeline");
    std::string reports[2];
    for (int i = 0; i < 2; ++i) {
        const auto root = dir / ("run" + std::to_string(i));
        const auto cfg = RunConfig::from_json(tiny_config(root / "corpus", root / "out"), dir);
        std::ostringstream log;
        const auto result = run_pipeline(cfg, log);
        CHECK(result.stages_run == kKnownStages);
        reports[i] = read_file(root / "out" / "report.md");
        const auto snapshot = json::parse(read_file(root / "out" / "run_config.json"));
        CHECK(snapshot.at("config_sha256").get<std::string>() == cfg.hash());
    }
    CHECK(reports[0] == reports[1]);
    CHECK(reports[0].find("## Retrieval") != std::string::npos);
    CHECK(reports[0].find("adapter-decoder") != std::string::npos);
    CHECK(reports[0].find("zeroshot:") != std::string::npos);
    CHECK(read_file(dir / "run0" / "out" / "report.tsv") == read_file(dir / "run1" / "out" / "report.tsv"));
}
