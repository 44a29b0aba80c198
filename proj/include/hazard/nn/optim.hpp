#pragma once

#include "hazard/tensor/autodiff.hpp"

#include <vector>

namespace hazard::nn {

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    double grad_clip = 1.0;  // global L2 norm; <= 0 disables
};

class AdamW {
public:
    AdamW(std::vector<ad::Parameter*> params, AdamWConfig config);

    // Applies one update with learning rate `lr` and returns the pre-clip gradient norm.
    double step(double lr);
    double step() { return step(config_.lr); }
    void zero_grad();
    long steps_taken() const { return t_; }

private:
    std::vector<ad::Parameter*> params_;
    std::vector<ad::Matrix> m_, v_;
    AdamWConfig config_;
    long t_ = 0;
};

// Linear warmup followed by cosine decay to `floor * peak`.
double warmup_cosine(long step, long total, long warmup, double peak, double floor = 0.1);

}  // namespace hazard::nn
