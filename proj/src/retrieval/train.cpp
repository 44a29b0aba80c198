#include "hazard/retrieval/train.hpp"

#include "hazard/nn/optim.hpp"
#include "hazard/tensor/rng.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace hazard::retrieval {

std::vector<int> itm_pairing(int batch, double rate, Rng& rng) {
    std::vector<int> pair(static_cast<std::size_t>(batch));
    std::iota(pair.begin(), pair.end(), 0);
    int m = static_cast<int>(std::lround(rate * batch));
    if (batch >= 2) m = std::max(m, 2);
    if (m < 2) return pair;
    std::vector<int> order = pair;
    rng.shuffle(order);
    order.resize(static_cast<std::size_t>(m));
    // Cyclic shift over distinct positions: no selected position keeps its own text.
    for (int i = 0; i < m; ++i) {
        pair[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] =
            order[static_cast<std::size_t>((i + 1) % m)];
    }
    return pair;
}

std::pair<double, double> training_recall_at_1(const RetrievalModel& model, const data::Corpus& corpus,
                                               const data::ImageSource& images) {
    const auto train = corpus.in_split(data::Split::Train);
    std::vector<std::string> ids;
    for (const auto* s : train) ids.push_back(s->id);
    const auto items = scoring_items(model, corpus, ids, images);
    const std::vector<int> k1{1};
    const auto tr = eval::retrieval_metrics(score_matrix(model, items, eval::Direction::TR), k1);
    const auto ir = eval::retrieval_metrics(score_matrix(model, items, eval::Direction::IR), k1);
    return {tr.recall_at.at(1), ir.recall_at.at(1)};
}

TrainResult train_retrieval(RetrievalModel& model, const data::Corpus& corpus, const data::ImageSource& images,
                            const TrainConfig& config, const std::function<void(const EpochLog&)>& on_epoch) {
    config.validate();
    const auto train = corpus.in_split(data::Split::Train);
    if (train.empty()) throw data::DataError("training corpus has no train-split samples");

    Rng rng(config.seed);
    Rng dropout_rng = rng.fork();
    nn::AdamW opt(model.params.trainable(), {.lr = config.learning_rate, .weight_decay = config.weight_decay});
    const int n = static_cast<int>(train.size());
    const long steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
    const long total_steps = steps_per_epoch * config.epochs;
    const auto& rc = model.config();
    const auto geom = rc.geom();

    TrainResult result;
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        rng.shuffle(order);
        EpochLog log;
        log.epoch = epoch;
        double weight = 0.0;
        for (int start = 0; start < n; start += config.batch_size) {
            const int b = std::min(config.batch_size, n - start);
            std::vector<Encoded> imgs;
            std::vector<EncodedText> txts;
            for (int i = 0; i < b; ++i) {
                const data::Sample& base = *train[static_cast<std::size_t>(order[static_cast<std::size_t>(start + i)])];
                const data::Sample s =
                    config.entity_shuffle ? prep::shuffle_entities(base, prep::random_permutation(base, rng)) : base;
                const Image input = prep::prepare_model_input(images(base), s.entities, rc.style, geom, rng, config.augment);
                imgs.push_back(encode_image(model, input));
                txts.push_back(encode_text(model, s.hazard));
                log.truncated_texts += txts.back().truncated ? 1 : 0;
            }
            std::vector<Var> ip, tp;
            for (int i = 0; i < b; ++i) {
                ip.push_back(imgs[static_cast<std::size_t>(i)].pooled);
                tp.push_back(txts[static_cast<std::size_t>(i)].pooled);
            }
            const Var itc = itc_loss(ad::concat_rows(ip), ad::concat_rows(tp), model.logit_scale());
            Var total = itc;
            double t2i_value = 0.0;
            double i2t_value = 0.0;
            if (config.use_itm) {
                const auto pair = itm_pairing(b, config.itm_mismatch_rate, rng);
                std::vector<Var> t2i_logits, i2t_logits;
                std::vector<double> labels;
                for (int i = 0; i < b; ++i) {
                    const auto& img_tokens = imgs[static_cast<std::size_t>(i)].tokens;
                    const auto& txt_tokens = txts[static_cast<std::size_t>(pair[static_cast<std::size_t>(i)])].tokens;
                    t2i_logits.push_back(model.t2i.forward(txt_tokens, img_tokens, &dropout_rng).logit);
                    i2t_logits.push_back(model.i2t.forward(img_tokens, txt_tokens, &dropout_rng).logit);
                    labels.push_back(pair[static_cast<std::size_t>(i)] == i ? 1.0 : 0.0);
                }
                const Var t2i = itm_loss(ad::concat_rows(t2i_logits), labels);
                const Var i2t = itm_loss(ad::concat_rows(i2t_logits), labels);
                t2i_value = t2i.item();
                i2t_value = i2t.item();
                total = ad::add(ad::add(total, t2i), i2t);
            }
            if (!std::isfinite(total.item())) {
                std::ostringstream msg;
                msg << "non-finite retrieval loss at epoch " << epoch << ", batch starting " << start
                    << ": itc=" << itc.item() << " itm_t2i=" << t2i_value << " itm_i2t=" << i2t_value
                    << " tau=" << model.tau();
                throw TrainingError(msg.str());
            }
            opt.zero_grad();
            ad::backward(total);
            const double lr = nn::warmup_cosine(opt.steps_taken(), total_steps, config.warmup_steps,
                                                config.learning_rate);
            opt.step(lr);
            model.clamp_temperature();

            log.itc += itc.item() * b;
            log.itm_t2i += t2i_value * b;
            log.itm_i2t += i2t_value * b;
            log.total += total.item() * b;
            weight += b;
        }
        log.itc /= weight;
        log.itm_t2i /= weight;
        log.itm_i2t /= weight;
        log.total /= weight;

        const bool check = config.stop_at_train_recall > 0.0 &&
                           (epoch % std::max(1, config.eval_every) == 0 || epoch == config.epochs);
        if (check) {
            const auto [tr, ir] = training_recall_at_1(model, corpus, images);
            log.train_r1_tr = tr;
            log.train_r1_ir = ir;
        }
        result.log.push_back(log);
        if (on_epoch) on_epoch(log);
        if (check && std::min(*log.train_r1_tr, *log.train_r1_ir) >= config.stop_at_train_recall) {
            result.stopped_early = epoch < config.epochs;
            break;
        }
    }
    result.rng_state = rng.save_state();
    return result;
}

}  // namespace hazard::retrieval
