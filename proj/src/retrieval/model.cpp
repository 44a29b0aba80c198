#include "hazard/retrieval/model.hpp"

#include "hazard/common/io.hpp"
#include "hazard/tensor/rng.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace hazard::retrieval {

namespace {

Rng& init_rng(std::uint64_t seed) {
    thread_local Rng rng;
    rng = Rng(seed);
    return rng;
}

}  // namespace

std::unique_ptr<TextTokenizer> RetrievalModel::make_tokenizer(const RetrievalConfig& config) {
    if (config.backbone.kind == BackboneKind::Pretrained && !config.backbone.vocab_path.empty()) {
        return std::make_unique<WordPieceTokenizer>(config.backbone.vocab_path);
    }
    return std::make_unique<HashedTokenizer>(config.backbone.text.vocab_size);
}

// Members are initialized in declaration order, all drawing from one seeded stream.
RetrievalModel::RetrievalModel(const RetrievalConfig& config, std::uint64_t init_seed)
    : vision((config.backbone.validate(), params), "vision", config.backbone.vision, init_rng(init_seed)),
      text(params, "text", config.backbone.text, init_rng(init_seed ^ 0x1111)),
      image_proj(params, "image_proj", config.backbone.vision.width, config.backbone.embed_dim,
                 init_rng(init_seed ^ 0x2222), false),
      text_proj(params, "text_proj", config.backbone.text.width, config.backbone.embed_dim,
                init_rng(init_seed ^ 0x3333), false),
      t2i(params, "t2i", config.aux, config.backbone.text.width, config.backbone.vision.width,
          init_rng(init_seed ^ 0x4444)),
      i2t(params, "i2t", config.aux, config.backbone.vision.width, config.backbone.text.width,
          init_rng(init_seed ^ 0x5555)),
      config_(config),
      tokenizer_(make_tokenizer(config)),
      log_scale_(&params.create("logit_scale", Matrix::Constant(1, 1, std::log(1.0 / kInitialTau)))) {
    if (tokenizer_->vocab_size() > config.backbone.text.vocab_size) {
        throw std::invalid_argument("tokenizer vocabulary exceeds the text backbone's embedding table");
    }
    if (config.backbone.kind == BackboneKind::Pretrained && !config.backbone.weights_path.empty()) {
        params.load_matching(read_file(config.backbone.weights_path), "", "");
    }
}

Var RetrievalModel::logit_scale() const { return ad::exp(ad::param(*log_scale_)); }

double RetrievalModel::tau() const { return std::exp(-log_scale_->value(0, 0)); }

void RetrievalModel::clamp_temperature() {
    const double max_log = std::log(1.0 / kMinTau);
    if (log_scale_->value(0, 0) > max_log) log_scale_->value(0, 0) = max_log;
}

Encoded encode_image(const RetrievalModel& model, const Image& rendered) {
    Encoded out;
    out.tokens = model.vision.forward(rendered).tokens;
    out.pooled = ad::l2_normalize_rows(model.image_proj.forward(ad::slice_rows(out.tokens, 0, 1)));
    return out;
}

EncodedText encode_text(const RetrievalModel& model, std::string_view text) {
    const auto tok = model.tokenizer().encode(text, model.config().backbone.text.max_len);
    EncodedText out;
    out.truncated = tok.truncated;
    out.warning = tok.warning;
    out.tokens = model.text.forward(tok.ids);
    out.pooled = ad::l2_normalize_rows(model.text_proj.forward(ad::slice_rows(out.tokens, 0, 1)));
    return out;
}

double retrieval_score(const RetrievalModel& model, const Image& rendered, std::string_view text) {
    ad::NoGradGuard guard;
    const Encoded img = encode_image(model, rendered);
    const EncodedText txt = encode_text(model, text);
    return img.pooled.value().row(0).dot(txt.pooled.value().row(0));
}

Image render_for_model(const RetrievalConfig& config, const data::Sample& sample, const Image& base) {
    Rng unused(0);
    return prep::prepare_model_input(base, sample.entities, config.style, config.geom(), unused, false);
}

std::vector<ScoringItem> scoring_items(const RetrievalModel& model, const data::Corpus& corpus,
                                       const std::vector<std::string>& ids, const data::ImageSource& images) {
    std::vector<ScoringItem> items;
    items.reserve(ids.size());
    for (const auto& id : ids) {
        const data::Sample* s = corpus.find(id);
        if (s == nullptr) throw data::DataError("unknown sample id " + id);
        items.push_back({id, render_for_model(model.config(), *s, images(*s)), s->hazard});
    }
    return items;
}

eval::ScoreMatrix score_matrix(const RetrievalModel& model, const std::vector<ScoringItem>& items,
                               eval::Direction direction) {
    if (items.empty()) throw std::invalid_argument("score_matrix needs at least one item");
    ad::NoGradGuard guard;
    const auto n = static_cast<Eigen::Index>(items.size());
    const Eigen::Index d = model.config().backbone.embed_dim;
    Eigen::MatrixXd img(n, d), txt(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& it = items[static_cast<std::size_t>(i)];
        img.row(i) = encode_image(model, it.rendered).pooled.value().row(0);
        txt.row(i) = encode_text(model, it.text).pooled.value().row(0);
    }
    eval::ScoreMatrix m;
    m.direction = direction;
    m.scores = direction == eval::Direction::TR ? Eigen::MatrixXd(img * txt.transpose())
                                                : Eigen::MatrixXd(txt * img.transpose());
    m.gold.resize(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
        m.gold[i] = static_cast<int>(i);
        m.query_ids.push_back(items[i].id);
        m.candidate_ids.push_back(items[i].id);
    }
    return m;
}

void write_score_tsv(const std::filesystem::path& path, const eval::ScoreMatrix& matrix) {
    matrix.validate();
    if (matrix.query_ids.empty() || matrix.candidate_ids.empty()) {
        throw std::invalid_argument("score TSV needs query and candidate ids");
    }
    std::ostringstream out;
    out << "# direction=" << eval::to_string(matrix.direction) << "\n";
    out << "query\tcandidate\tscore\tgold\n";
    char buf[64];
    for (Eigen::Index q = 0; q < matrix.queries(); ++q) {
        const auto gold = static_cast<Eigen::Index>(matrix.gold[static_cast<std::size_t>(q)]);
        for (Eigen::Index c = 0; c < matrix.candidates(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", matrix.scores(q, c));
            out << matrix.query_ids[static_cast<std::size_t>(q)] << '\t'
                << matrix.candidate_ids[static_cast<std::size_t>(c)] << '\t' << buf << '\t' << (c == gold ? 1 : 0)
                << '\n';
        }
    }
    write_file_atomic(path, out.str());
}

eval::ScoreMatrix read_score_tsv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw data::DataError("cannot open score file " + path.string());
    eval::ScoreMatrix m;
    std::map<std::string, int> qidx, cidx;
    struct Cell {
        int q, c;
        double score;
        bool gold;
    };
    std::vector<Cell> cells;
    std::string line;
    int lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line.rfind("# direction=", 0) == 0) {
            m.direction = eval::parse_direction(line.substr(12));
            continue;
        }
        if (!header) {
            if (line != "query\tcandidate\tscore\tgold") {
                throw data::DataError(path.string() + ":" + std::to_string(lineno) + ": unexpected header");
            }
            header = true;
            continue;
        }
        std::istringstream fields(line);
        std::string q, c, s, g;
        if (!std::getline(fields, q, '\t') || !std::getline(fields, c, '\t') || !std::getline(fields, s, '\t') ||
            !std::getline(fields, g, '\t')) {
            throw data::DataError(path.string() + ":" + std::to_string(lineno) + ": expected 4 fields");
        }
        auto intern = [](std::map<std::string, int>& idx, std::vector<std::string>& names, const std::string& k) {
            const auto [it, inserted] = idx.emplace(k, static_cast<int>(names.size()));
            if (inserted) names.push_back(k);
            return it->second;
        };
        double score = 0.0;
        try {
            score = std::stod(s);
        } catch (const std::exception&) {
            throw data::DataError(path.string() + ":" + std::to_string(lineno) + ": bad score '" + s + "'");
        }
        cells.push_back({intern(qidx, m.query_ids, q), intern(cidx, m.candidate_ids, c), score, g == "1"});
    }
    if (cells.empty()) throw data::DataError(path.string() + ": no scores");
    m.scores = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(m.query_ids.size()),
                                         static_cast<Eigen::Index>(m.candidate_ids.size()), std::nan(""));
    m.gold.assign(m.query_ids.size(), -1);
    for (const auto& cell : cells) {
        m.scores(cell.q, cell.c) = cell.score;
        if (cell.gold) m.gold[static_cast<std::size_t>(cell.q)] = cell.c;
    }
    if (m.scores.hasNaN()) throw data::DataError(path.string() + ": score matrix is incomplete");
    for (int g : m.gold) {
        if (g < 0) throw data::DataError(path.string() + ": a query has no gold candidate");
    }
    m.validate();
    return m;
}

void save_checkpoint(const RetrievalModel& model, const std::filesystem::path& dir, const std::string& rng_state,
                     const nlohmann::json& extra) {
    std::filesystem::create_directories(dir);
    nlohmann::json cfg = {{"model", model.config()}};
    for (const auto& [k, v] : extra.items()) cfg[k] = v;
    write_file_atomic(dir / "config.json", cfg.dump(2) + "\n");
    write_file_atomic(dir / "params.bin", model.params.serialize());
    write_file_atomic(dir / "rng_state", rng_state);
}

RetrievalConfig read_checkpoint_config(const std::filesystem::path& dir) {
    const auto path = dir / "config.json";
    if (!std::filesystem::exists(path)) throw data::DataError("checkpoint lacks " + path.string());
    return nlohmann::json::parse(read_file(path)).at("model").get<RetrievalConfig>();
}

std::unique_ptr<RetrievalModel> load_checkpoint(const std::filesystem::path& dir) {
    RetrievalConfig cfg = read_checkpoint_config(dir);
    // Weights come from params.bin; do not re-import pretrained blobs.
    cfg.backbone.weights_path.clear();
    auto model = std::make_unique<RetrievalModel>(cfg, 0);
    model->params.deserialize(read_file(dir / "params.bin"));
    return model;
}

}  // namespace hazard::retrieval
