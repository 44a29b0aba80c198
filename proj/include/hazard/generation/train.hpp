#pragma once

#include "hazard/generation/model.hpp"

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hazard::gen {

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DecoderPretrainConfig {
    int epochs = 60;
    int batch_size = 8;
    double learning_rate = 2e-3;
    std::uint64_t seed = 0;
};

struct GenTrainConfig {
    int epochs = 20;
    int effective_batch = 32;
    double learning_rate = 1e-3;
    int warmup_steps = 0;
    std::uint64_t seed = 0;
    bool augment = true;

    void validate() const;
};

struct GenEpochLog {
    int epoch = 0;
    double loss = 0.0;  // mean token cross-entropy
    double perplexity = 0.0;
};

struct GenTrainResult {
    std::vector<GenEpochLog> log;
    std::string frozen_hash_before;
    std::string frozen_hash_after;
};

// SHA-256 over every parameter outside the adapter/projector/router set.
std::string frozen_parameter_hash(const GenerationModel& model);

// Trains only decoder.* as a language model on `texts`, with zero vectors in
// the visual slots of the prompt. Stands in for loading a pretrained decoder.
GenTrainResult pretrain_decoder(GenerationModel& model, const std::vector<std::string>& texts,
                                const DecoderPretrainConfig& config,
                                const std::function<void(const GenEpochLog&)>& on_epoch = {});

// Next-token cross-entropy on train-split explanations; only adapters,
// projector and router move. Throws TrainingError on non-finite loss or if the
// frozen-parameter hash changes.
GenTrainResult train_generation(GenerationModel& model, const data::Corpus& corpus, const data::ImageSource& images,
                                const GenTrainConfig& config,
                                const std::function<void(const GenEpochLog&)>& on_epoch = {});

// Builds a vocabulary from the instruction template and the train-split texts.
WordVocab corpus_vocab(const data::Corpus& corpus);

}  // namespace hazard::gen
