#pragma once

#include "hazard/retrieval/model.hpp"

#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

namespace hazard::retrieval {

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EpochLog {
    int epoch = 0;  // 1-based
    double itc = 0.0;
    double itm_t2i = 0.0;
    double itm_i2t = 0.0;
    double total = 0.0;
    int truncated_texts = 0;
    std::optional<double> train_r1_tr;
    std::optional<double> train_r1_ir;
};

struct TrainResult {
    std::vector<EpochLog> log;
    bool stopped_early = false;
    std::string rng_state;  // trainer RNG after the last step
};

// Trains on the train split. Each epoch re-draws an entity permutation per
// sample, re-renders with augmentation, and mixes ITC with both ITM losses
// (ITM skipped when use_itm is false). Throws TrainingError on non-finite loss.
TrainResult train_retrieval(RetrievalModel& model, const data::Corpus& corpus, const data::ImageSource& images,
                            const TrainConfig& config, const std::function<void(const EpochLog&)>& on_epoch = {});

// Training-split R@1 in both directions under eval rendering.
std::pair<double, double> training_recall_at_1(const RetrievalModel& model, const data::Corpus& corpus,
                                               const data::ImageSource& images);

// Mismatch plan for ITM: for each batch position, the index of the text it is
// paired with. A random `rate` share of positions (at least two, when the batch
// allows) receive another position's text via a cyclic derangement.
std::vector<int> itm_pairing(int batch, double rate, Rng& rng);

}  // namespace hazard::retrieval
