// Acceptance runner: prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails. Usage: acceptance <hazardbench> <toy config> [criterion...]

#include "../support/caption_oracle.hpp"
#include "../support/gradcheck.hpp"
#include "hazard/common/io.hpp"
#include "hazard/evaluation/caption_metrics.hpp"
#include "hazard/evaluation/judge.hpp"
#include "hazard/evaluation/retrieval_metrics.hpp"
#include "hazard/generation/prompts.hpp"
#include "hazard/generation/train.hpp"
#include "hazard/preprocess/preprocess.hpp"
#include "hazard/retrieval/cross_encoder.hpp"
#include "hazard/retrieval/train.hpp"
#include "hazard/tensor/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace hazard;
using ad::Matrix;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* pattern, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, pattern, a);
    return buf;
}

class Stopwatch {
public:
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

private:
    std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

Matrix random_matrix(int rows, int cols, Rng& rng) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform() * 2.0 - 1.0;
    return m;
}

// 1. Blend exactness through the renderer.
Outcome blend_exactness() {
    Rng rng(101);
    int mismatches = 0;
    for (int i = 0; i < 10000; ++i) {
        const Rgb p{static_cast<std::uint8_t>(rng.below(256)), static_cast<std::uint8_t>(rng.below(256)),
                    static_cast<std::uint8_t>(rng.below(256))};
        const Rgb c{static_cast<std::uint8_t>(rng.below(256)), static_cast<std::uint8_t>(rng.below(256)),
                    static_cast<std::uint8_t>(rng.below(256))};
        prep::RenderStyle style;
        style.alpha = rng.uniform();
        style.palette = {{1, c}};
        const Image out = prep::render_entity_boxes(Image(1, 1, p), {{1, {0, 0, 1, 1}, "x"}}, style);
        const auto oracle = [&](std::uint8_t pc, std::uint8_t cc) {
            const long double a = style.alpha;
            return static_cast<std::uint8_t>(std::floor(a * cc + (1.0L - a) * pc + 0.5L));
        };
        const Rgb want{oracle(p[0], c[0]), oracle(p[1], c[1]), oracle(p[2], c[2])};
        if (!(out.pixel(0, 0) == want)) ++mismatches;
    }
    const Image worked = prep::render_entity_boxes(Image(4, 4, {255, 255, 255}), {{1, {0, 0, 4, 4}, "car"}}, {});
    const Rgb w = worked.pixel(1, 1);
    const bool worked_ok = w == Rgb{179, 102, 179};
    std::ostringstream d;
    d << mismatches << "/10000 mismatches; white+purple@0.6 -> (" << int(w[0]) << "," << int(w[1]) << "," << int(w[2])
      << ")";
    return {mismatches == 0 && worked_ok, d.str()};
}

// 2. Retrieval metrics against a full-sort oracle, plus the uniform baseline.
int sorted_rank(std::vector<double> row, int gold) {
    const double g = row[static_cast<std::size_t>(gold)];
    std::sort(row.begin(), row.end(), std::greater<>());
    return static_cast<int>(std::find(row.begin(), row.end(), g) - row.begin()) + 1;
}

Outcome metric_oracle() {
    Rng rng(202);
    int mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int q = rng.uniform_int(1, 20);
        const int c = rng.uniform_int(1, 20);
        eval::ScoreMatrix m;
        m.scores.resize(q, c);
        for (Eigen::Index i = 0; i < m.scores.size(); ++i) m.scores.data()[i] = rng.uniform_int(0, 8) / 8.0;
        for (int i = 0; i < q; ++i) m.gold.push_back(rng.uniform_int(0, c - 1));
        std::vector<int> ks;
        for (int k = 1; k <= c; ++k) ks.push_back(k);
        const auto got = eval::retrieval_metrics(m, ks);
        std::vector<int> ranks;
        double sum = 0.0;
        for (int i = 0; i < q; ++i) {
            std::vector<double> row;
            for (int j = 0; j < c; ++j) row.push_back(m.scores(i, j));
            ranks.push_back(sorted_rank(row, m.gold[static_cast<std::size_t>(i)]));
            sum += ranks.back();
        }
        bool ok = got.mean_rank == sum / q;
        for (int k : ks) {
            const double want = static_cast<double>(std::count_if(ranks.begin(), ranks.end(), [k](int r) { return r <= k; })) / q;
            ok = ok && got.recall_at.at(k) == want;
        }
        if (!ok) ++mismatches;
    }
    double total = 0.0;
    const int trials = 200;
    for (int t = 0; t < trials; ++t) {
        eval::ScoreMatrix m;
        m.scores.resize(100, 100);
        for (Eigen::Index i = 0; i < m.scores.size(); ++i) m.scores.data()[i] = rng.uniform();
        for (int i = 0; i < 100; ++i) m.gold.push_back(i);
        total += eval::retrieval_metrics(m, eval::kDefaultRecallKs).mean_rank;
    }
    const double mean = total / trials;
    return {mismatches == 0 && std::abs(mean - 50.5) <= 1.0,
            std::to_string(mismatches) + "/1000 oracle mismatches; uniform mean rank " + fmt("%.3f", mean) +
                " over 200 trials"};
}

// 3. Loss closed forms and gradient checks.
Outcome loss_correctness() {
    const double itc = retrieval::itc_loss(ad::constant(Matrix::Identity(2, 2)), ad::constant(Matrix::Identity(2, 2)), 1.0)
                           .item();
    const std::vector<double> one{1.0};
    const double itm = retrieval::itm_loss(ad::constant(Matrix::Zero(1, 1)), one).item();

    Rng rng(303);
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        const int b = rng.uniform_int(2, 6);
        const int d = rng.uniform_int(3, 10);
        const auto g1 = testing::gradcheck(
            [](const auto& v) {
                return retrieval::itc_loss(ad::l2_normalize_rows(v[0]), ad::l2_normalize_rows(v[1]), ad::exp(v[2]));
            },
            {random_matrix(b, d, rng), random_matrix(b, d, rng), Matrix::Constant(1, 1, 1.0 + rng.uniform())});
        std::vector<double> labels;
        for (int i = 0; i < b; ++i) labels.push_back(static_cast<double>(rng.below(2)));
        const auto g2 = testing::gradcheck([&](const auto& v) { return retrieval::itm_loss(v[0], labels); },
                                           {random_matrix(b, 1, rng) * 3.0});
        worst = std::max({worst, g1.max_rel_error, g2.max_rel_error});
    }
    const bool ok = std::abs(itc - 0.3133) <= 1e-4 && std::abs(itm - std::log(2.0)) <= 1e-6 && worst < 1e-4;
    return {ok, "ITC identity " + fmt("%.6f", itc) + "; ITM logit-0 " + fmt("%.9f", itm) + "; worst grad rel err " +
                    fmt("%.2e", worst)};
}

// 4. Retrieval overfit and the auxiliary-loss ablation.
retrieval::TrainConfig overfit_config(std::uint64_t seed) {
    retrieval::TrainConfig tc;
    tc.epochs = 200;
    tc.batch_size = 8;
    tc.learning_rate = 5e-4;
    tc.seed = seed;
    tc.augment = false;
    return tc;
}

Outcome retrieval_overfit() {
    std::ostringstream d;
    bool ok = true;
    {
        const auto synth = data::synthesize_corpus({32, 0, 0, {64, 64}}, 100);
        const auto images = data::memory_image_source(synth);
        retrieval::RetrievalModel model(retrieval::RetrievalConfig{}, 0);
        auto tc = overfit_config(0);
        tc.stop_at_train_recall = 0.9;
        tc.eval_every = 5;
        const Stopwatch sw;
        const auto result = retrieval::train_retrieval(model, synth.corpus, images, tc);
        const double secs = sw.seconds();
        const auto [tr, ir] = retrieval::training_recall_at_1(model, synth.corpus, images);
        const bool pass = std::min(tr, ir) >= 0.9 && result.log.size() <= 200 && secs < 300.0;
        ok = ok && pass;
        d << "overfit R@1 TR " << fmt("%.3f", tr) << " IR " << fmt("%.3f", ir) << " after " << result.log.size()
          << " epochs in " << fmt("%.1f", secs) << " s";
    }
    // Fixed budget per arm; the comparison is on mean final training R@1.
    const int epochs = 40;
    double full_sum = 0.0;
    double no_itm_sum = 0.0;
    const std::vector<std::uint64_t> seeds{0, 1, 2};
    for (const auto seed : seeds) {
        const auto synth = data::synthesize_corpus({32, 0, 0, {64, 64}}, 100 + seed);
        const auto images = data::memory_image_source(synth);
        for (const bool use_itm : {true, false}) {
            retrieval::RetrievalModel model(retrieval::RetrievalConfig{}, seed);
            auto tc = overfit_config(seed);
            tc.epochs = epochs;
            tc.use_itm = use_itm;
            retrieval::train_retrieval(model, synth.corpus, images, tc);
            const auto [tr, ir] = retrieval::training_recall_at_1(model, synth.corpus, images);
            (use_itm ? full_sum : no_itm_sum) += (tr + ir) / 2.0;
        }
    }
    const double full = full_sum / static_cast<double>(seeds.size());
    const double no_itm = no_itm_sum / static_cast<double>(seeds.size());
    ok = ok && no_itm <= full;
    d << "; ablation over seeds 0-2 at " << epochs << " epochs: full " << fmt("%.4f", full) << ", without ITM "
      << fmt("%.4f", no_itm);
    return {ok, d.str()};
}

// 5. Entity shuffle round trips.
Outcome shuffle_identity() {
    const data::ImageDims dims{64, 64};
    const auto synth = data::synthesize_corpus({1000, 0, 0, dims}, 505);
    Rng rng(55);
    int failures = 0;
    for (const auto& s : synth.corpus.samples) {
        const auto perm = prep::random_permutation(s, rng);
        const auto out = prep::shuffle_entities(s, perm);
        std::multiset<std::string> before;
        std::multiset<std::string> after;
        for (const auto& e : s.entities) before.insert(e.description);
        for (const auto& e : out.entities) after.insert(e.description);
        const bool ok = prep::shuffle_entities(out, prep::inverse(perm)) == s &&
                        data::word_count(out.hazard) == data::word_count(s.hazard) &&
                        data::find_entity_refs(out.hazard).size() == data::find_entity_refs(s.hazard).size() &&
                        before == after && data::validate_sample(out, dims).ok;
        if (!ok) ++failures;
    }
    return {failures == 0, std::to_string(failures) + "/1000 samples violate identity, counts or validity"};
}

// 6. Generation contracts: freeze, taps and memorization.
Outcome generation_contracts() {
    std::ostringstream d;
    bool ok = true;
    {
        const auto synth = data::synthesize_corpus({4, 0, 0, {48, 48}}, 606);
        gen::GenerationModel model(gen::GenerationConfig{}, gen::corpus_vocab(synth.corpus), 6);
        gen::GenTrainConfig cfg;
        cfg.epochs = 2;
        cfg.effective_batch = 2;
        const auto r = gen::train_generation(model, synth.corpus, data::memory_image_source(synth), cfg);
        const bool frozen = r.frozen_hash_before == r.frozen_hash_after &&
                            gen::frozen_parameter_hash(model) == r.frozen_hash_before;
        ok = ok && frozen;
        d << "freeze hash " << (frozen ? "unchanged" : "CHANGED") << " over 2 epochs";
    }
    const bool taps = gen::tap_layers(24, {8, 3}) == std::vector<int>{8, 16, 24} &&
                      gen::tap_layers(6, {2, 3}) == std::vector<int>{2, 4, 6};
    ok = ok && taps;
    d << "; taps " << (taps ? "{8,16,24} and {2,4,6}" : "WRONG");

    // The decoder is first pretrained as a language model on disjoint texts,
    // then only adapters, projector and router train on the 8 samples.
    const Stopwatch sw;
    const auto target = data::synthesize_corpus({8, 0, 0, {64, 64}}, 100);
    const auto lm = data::synthesize_corpus({200, 0, 0, {64, 64}}, 5000);
    std::vector<std::string> texts{std::string(gen::kInstructionTemplate)};
    std::vector<std::string> lm_texts;
    for (const auto& s : target.corpus.samples) texts.push_back(s.hazard);
    for (const auto& s : lm.corpus.samples) {
        texts.push_back(s.hazard);
        lm_texts.push_back(s.hazard);
    }
    gen::GenerationConfig gc;
    gen::GenerationModel model(gc, gen::WordVocab::build(texts), 0);
    gen::DecoderPretrainConfig pc;
    pc.epochs = 15;
    gen::pretrain_decoder(model, lm_texts, pc);
    const auto images = data::memory_image_source(target);
    std::vector<Image> rendered;
    for (const auto& s : target.corpus.samples) rendered.push_back(gen::render_for_generation(gc, s, images(s)));
    auto exact = [&] {
        int n = 0;
        for (std::size_t i = 0; i < rendered.size(); ++i) {
            n += gen::generate_explanation(model, rendered[i]) == target.corpus.samples[i].hazard ? 1 : 0;
        }
        return n;
    };
    gen::GenTrainConfig tc;
    tc.epochs = 300;
    tc.effective_batch = 8;
    tc.learning_rate = 1e-3;
    tc.augment = false;
    int memorized_at = -1;
    struct Done {};
    try {
        gen::train_generation(model, target.corpus, images, tc, [&](const gen::GenEpochLog& l) {
            if (l.epoch % 10 == 0 && exact() == 8) {
                memorized_at = l.epoch;
                throw Done{};
            }
        });
    } catch (const Done&) {
    }
    const int final_exact = exact();
    const double secs = sw.seconds();
    const bool memo = final_exact == 8 && memorized_at > 0 && secs < 600.0;
    ok = ok && memo;
    d << "; memorization " << final_exact << "/8 exact";
    if (memorized_at > 0) d << " at epoch " << memorized_at;
    d << " in " << fmt("%.1f", secs) << " s";
    return {ok, d.str()};
}

// 7. Caption metric extremes and the BLEU reference value.
Outcome caption_metrics() {
    eval::TextById preds;
    eval::TextById refs;
    for (std::size_t i = 0; i < testing::kCaptionPairs.size(); ++i) {
        const auto id = "s" + std::to_string(i);
        preds[id] = testing::kCaptionPairs[i].first;
        refs[id] = testing::kCaptionPairs[i].second;
    }
    const auto same = eval::caption_metrics(refs, refs);
    const auto disjoint = eval::caption_metrics({{"a", "blue sky over quiet hills"}, {"b", "green grass grows slowly"}},
                                                {{"a", "my car hits Entity #1"}, {"b", "the truck brakes hard"}});
    const auto pairs = eval::caption_metrics(preds, refs);
    const bool ok = std::abs(same.bleu4 - 100.0) < 1e-9 && std::abs(same.rouge_l - 100.0) < 1e-9 &&
                    disjoint.bleu4 == 0.0 && disjoint.rouge_l == 0.0 && disjoint.cider_d == 0.0 &&
                    std::abs(pairs.bleu4 - testing::kCaptionPairsBleu4) <= 0.1;
    return {ok, "identity BLEU-4 " + fmt("%.4f", same.bleu4) + " ROUGE-L " + fmt("%.4f", same.rouge_l) +
                    "; disjoint BLEU-4 " + fmt("%.1f", disjoint.bleu4) + " ROUGE-L " + fmt("%.1f", disjoint.rouge_l) +
                    "; 20 pairs BLEU-4 " + fmt("%.4f", pairs.bleu4) + " vs reference " +
                    fmt("%.4f", testing::kCaptionPairsBleu4)};
}

std::size_t count_queries(const std::string& user_prompt) {
    std::size_t n = 0;
    std::istringstream in(user_prompt);
    std::string line;
    while (std::getline(in, line)) n += line.starts_with("Query ") ? 1 : 0;
    return n;
}

// 8. Judge batching, temperature, averaging and cache idempotence.
Outcome judge_harness() {
    std::vector<eval::JudgePair> pairs;
    for (int i = 0; i < 60; ++i) {
        pairs.push_back({"p" + std::to_string(100 + i), "Entity #1 stops suddenly case " + std::to_string(i),
                         "Entity #1 stops case " + std::to_string(i)});
    }
    // Query n of every batch scores (7n) mod 101.
    auto script = [](const eval::ChatRequest& req, int) {
        std::ostringstream out;
        std::istringstream in(req.user);
        std::string line;
        int n = 0;
        while (std::getline(in, line)) {
            if (line.starts_with("Query ")) {
                ++n;
                out << n << ": " << (7 * n) % 101 << "\n";
            }
        }
        return out.str();
    };
    const auto dir = fresh_dir("hazard_acceptance_judge");
    eval::JudgeConfig cfg;
    cfg.cache_dir = dir;
    eval::ScriptedClient first_client("scripted-judge", script);
    const auto first = eval::run_judge(first_client, pairs, cfg);
    std::vector<std::size_t> sizes;
    for (const auto& b : eval::build_judge_batches(pairs)) sizes.push_back(b.pairs.size());
    std::vector<std::size_t> sent;
    bool temperature_zero = first.temperature == 0.0;
    for (const auto& r : first_client.requests()) {
        temperature_zero = temperature_zero && r.temperature == 0.0;
        sent.push_back(count_queries(r.user));
    }
    double expected = 0.0;
    for (int i = 0; i < 60; ++i) expected += (7 * (i % 25 + 1)) % 101;
    expected /= 60.0;
    eval::ScriptedClient second_client("scripted-judge", script);
    const auto second = eval::run_judge(second_client, pairs, cfg);
    const std::vector<std::size_t> want{25, 25, 10};
    const bool ok = sizes == want && sent == want && temperature_zero && first.mean &&
                    std::abs(*first.mean - expected) < 1e-12 && first.failures.empty() && second_client.calls() == 0 &&
                    second.mean == first.mean;
    std::ostringstream d;
    d << "batches";
    for (auto s : sent) d << " " << s;
    d << "; temperature " << first.temperature << "; mean " << fmt("%.4f", first.mean.value_or(-1.0)) << " (expected "
      << fmt("%.4f", expected) << "); second run calls " << second_client.calls();
    fs::remove_all(dir);
    return {ok, d.str()};
}

// 9. Balanced subset construction.
Outcome subset_construction() {
    using data::HazardType;
    const std::map<HazardType, int> table = {
        {HazardType::Pedestrian, 10},      {HazardType::StationaryObject, 10}, {HazardType::TrafficSignal, 10},
        {HazardType::UnusualCondition, 10}, {HazardType::SpeedingBraking, 20}, {HazardType::Sideswipe, 10},
        {HazardType::MergingManeuver, 20}, {HazardType::UnexpectedEvent, 5},  {HazardType::ChainReaction, 5}};
    const auto synth = data::synthesize_corpus({0, 0, 300, {32, 32}}, 909);
    const auto ids = data::select_retrieval_subset(synth.corpus, data::Split::Test, data::balanced_subset_counts(), 9);
    std::map<HazardType, int> got;
    for (const auto& id : ids) ++got[*synth.corpus.find(id)->hazard_type];
    const std::set<std::string> unique(ids.begin(), ids.end());
    const bool deterministic =
        ids == data::select_retrieval_subset(synth.corpus, data::Split::Test, data::balanced_subset_counts(), 9);
    const bool ok = data::balanced_subset_counts() == table && ids.size() == 100 && unique.size() == 100 && got == table &&
                    deterministic;
    return {ok, std::to_string(ids.size()) + " ids from a 300-sample pool, distribution " +
                    (got == table ? "matches" : "differs") + ", " + (deterministic ? "deterministic" : "NOT deterministic")};
}

// 10. Two full toy pipeline runs through the CLI.
Outcome pipeline_determinism(const std::string& hazardbench, const std::string& config) {
    const auto dir = fresh_dir("hazard_acceptance_pipeline");
    const Stopwatch sw;
    int status[2] = {-1, -1};
    for (int i = 0; i < 2; ++i) {
        // Corpus and outputs live under a per-run directory.
        auto j = nlohmann::json::parse(read_file(config));
        const auto root = dir / ("run" + std::to_string(i));
        j["corpus"]["root"] = (root / "corpus").string();
        j["output_dir"] = (root / "out").string();
        const auto cfg_file = dir / ("config" + std::to_string(i) + ".json");
        write_file_atomic(cfg_file, j.dump(2));
        const std::string cmd = "\"" + hazardbench + "\" run --config \"" + cfg_file.string() + "\" > \"" +
                                (dir / ("log" + std::to_string(i) + ".txt")).string() + "\" 2>&1";
        status[i] = std::system(cmd.c_str());
    }
    const double secs = sw.seconds();
    if (status[0] != 0 || status[1] != 0) {
        return {false, "hazardbench exited with " + std::to_string(status[0]) + " / " + std::to_string(status[1]) +
                           "; logs in " + dir.string()};
    }
    const bool md = read_file(dir / "run0/out/report.md") == read_file(dir / "run1/out/report.md");
    const bool tsv = read_file(dir / "run0/out/report.tsv") == read_file(dir / "run1/out/report.tsv");
    return {md && tsv && secs < 600.0, std::string("report.md ") + (md ? "identical" : "DIFFERS") + ", report.tsv " +
                                           (tsv ? "identical" : "DIFFERS") + "; two runs in " + fmt("%.1f", secs) + " s"};
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 3) {
        std::cerr << "usage: acceptance <hazardbench> <toy config> [criterion...]\n";
        return 2;
    }
    const std::string hazardbench = argv[1];
    const std::string config = argv[2];
    std::set<int> only;
    for (int i = 3; i < argc; ++i) only.insert(std::atoi(argv[i]));

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"blend exactness", blend_exactness},
        {"metric oracle equivalence", metric_oracle},
        {"loss correctness", loss_correctness},
        {"retrieval overfit and ablation", retrieval_overfit},
        {"shuffle correctness", shuffle_identity},
        {"generation contracts", generation_contracts},
        {"caption metrics", caption_metrics},
        {"judge harness", judge_harness},
        {"subset construction", subset_construction},
        {"end-to-end determinism", [&] { return pipeline_determinism(hazardbench, config); }},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int n = static_cast<int>(i) + 1;
        if (!only.empty() && !only.contains(n)) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << " (" << criteria[i].first << "): " << o.detail
                  << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
