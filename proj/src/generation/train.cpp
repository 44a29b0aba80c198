#include "hazard/generation/train.hpp"

#include "hazard/common/hash.hpp"
#include "hazard/generation/prompts.hpp"
#include "hazard/nn/optim.hpp"
#include "hazard/tensor/rng.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace hazard::gen {

void GenTrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (effective_batch < 1) throw std::invalid_argument("effective_batch must be >= 1");
    if (learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be positive");
}

std::string frozen_parameter_hash(const GenerationModel& model) {
    return sha256_hex(model.params.serialize_where([](const std::string& n) { return !GenerationModel::is_adapter_param(n); }));
}

WordVocab corpus_vocab(const data::Corpus& corpus) {
    std::vector<std::string> texts{std::string(kInstructionTemplate)};
    for (const auto* s : corpus.in_split(data::Split::Train)) texts.push_back(s->hazard);
    return WordVocab::build(texts);
}

namespace {

struct TokenLoss {
    Var loss;  // summed over target tokens
    int tokens = 0;
};

TokenLoss sequence_loss(const GenerationModel& model, const Var& visual, const std::string& text) {
    const std::vector<int> words = model.vocab().encode(text);
    if (words.empty()) throw std::invalid_argument("empty training explanation");
    const auto seq = forward_sequence(model, visual, words);
    std::vector<int> labels(static_cast<std::size_t>(seq.logits.rows()), -1);
    for (std::size_t i = 0; i <= words.size(); ++i) {
        labels[static_cast<std::size_t>(seq.prompt_len) - 1 + i] = i < words.size() ? words[i] : WordVocab::kEos;
    }
    const int n = static_cast<int>(words.size()) + 1;
    return {ad::scale(ad::cross_entropy_rows(seq.logits, labels), n), n};
}

template <typename LossFn>
GenTrainResult run_epochs(GenerationModel& model, int n_items, int epochs, int batch, double lr, int warmup,
                          std::uint64_t seed, const LossFn& loss_fn,
                          const std::function<void(const GenEpochLog&)>& on_epoch) {
    GenTrainResult result;
    result.frozen_hash_before = frozen_parameter_hash(model);
    Rng rng(seed);
    nn::AdamW opt(model.params.trainable(), {.lr = lr, .weight_decay = 0.0});
    const long steps_per_epoch = (n_items + batch - 1) / batch;
    const long total = steps_per_epoch * epochs;
    std::vector<int> order(static_cast<std::size_t>(n_items));
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 1; epoch <= epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        long token_sum = 0;
        for (int start = 0; start < n_items; start += batch) {
            const int b = std::min(batch, n_items - start);
            std::vector<Var> losses;
            int tokens = 0;
            for (int i = 0; i < b; ++i) {
                const TokenLoss tl = loss_fn(order[static_cast<std::size_t>(start + i)], rng);
                losses.push_back(tl.loss);
                tokens += tl.tokens;
            }
            Var sum = losses.front();
            for (std::size_t i = 1; i < losses.size(); ++i) sum = ad::add(sum, losses[i]);
            const Var mean = ad::scale(sum, 1.0 / tokens);
            if (!std::isfinite(mean.item())) {
                std::ostringstream msg;
                msg << "non-finite generation loss at epoch " << epoch << ", batch starting " << start;
                throw TrainingError(msg.str());
            }
            opt.zero_grad();
            ad::backward(mean);
            opt.step(nn::warmup_cosine(opt.steps_taken(), total, warmup, lr));
            loss_sum += mean.item() * tokens;
            token_sum += tokens;
        }
        GenEpochLog log;
        log.epoch = epoch;
        log.loss = loss_sum / static_cast<double>(token_sum);
        log.perplexity = std::exp(log.loss);
        result.log.push_back(log);
        if (on_epoch) on_epoch(log);
    }
    result.frozen_hash_after = frozen_parameter_hash(model);
    return result;
}

}  // namespace

GenTrainResult pretrain_decoder(GenerationModel& model, const std::vector<std::string>& texts,
                                const DecoderPretrainConfig& config,
                                const std::function<void(const GenEpochLog&)>& on_epoch) {
    if (texts.empty()) throw data::DataError("decoder pretraining needs at least one text");
    model.params.set_trainable(GenerationModel::is_decoder_param);
    const Var zeros = ad::constant(Matrix::Zero(model.config().tap.expected_taps, model.config().decoder.width));
    auto loss_fn = [&](int i, Rng&) { return sequence_loss(model, zeros, texts[static_cast<std::size_t>(i)]); };
    auto result = run_epochs(model, static_cast<int>(texts.size()), config.epochs, config.batch_size,
                             config.learning_rate, 0, config.seed, loss_fn, on_epoch);
    model.params.set_trainable(GenerationModel::is_adapter_param);
    return result;
}

GenTrainResult train_generation(GenerationModel& model, const data::Corpus& corpus, const data::ImageSource& images,
                                const GenTrainConfig& config,
                                const std::function<void(const GenEpochLog&)>& on_epoch) {
    config.validate();
    const auto train = corpus.in_split(data::Split::Train);
    if (train.empty()) throw data::DataError("training corpus has no train-split samples");
    model.params.set_trainable(GenerationModel::is_adapter_param);
    const auto geom = model.config().geom();
    auto loss_fn = [&](int i, Rng& rng) {
        const data::Sample& s = *train[static_cast<std::size_t>(i)];
        const Image input = prep::prepare_model_input(images(s), s.entities, model.config().style, geom, rng,
                                                      config.augment);
        return sequence_loss(model, visual_prefix(model, input), s.hazard);
    };
    auto result = run_epochs(model, static_cast<int>(train.size()), config.epochs, config.effective_batch,
                             config.learning_rate, config.warmup_steps, config.seed, loss_fn, on_epoch);
    if (result.frozen_hash_after != result.frozen_hash_before) {
        throw TrainingError("frozen parameters changed during adapter training");
    }
    return result;
}

}  // namespace hazard::gen
