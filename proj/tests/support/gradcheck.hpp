#pragma once

// Central finite-difference oracle for scalar functions of matrices.

#include "hazard/tensor/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace hazard::testing {

using ad::Matrix;
using ad::Parameter;
using ad::Var;

using ScalarFn = std::function<Var(const std::vector<Var>&)>;

struct GradCheck {
    double max_rel_error = 0.0;  // worst over inputs of |a - n|_2 / max(|a|_2 + |n|_2, 1e-12)
    std::vector<Matrix> analytic;
    std::vector<Matrix> numeric;
};

inline GradCheck gradcheck(const ScalarFn& fn, std::vector<Matrix> inputs, double h = 1e-5) {
    std::vector<Parameter> params(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) params[i].value = inputs[i];

    std::vector<Var> vars;
    for (auto& p : params) vars.push_back(ad::param(p));
    ad::backward(fn(vars));

    GradCheck out;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        Matrix a = params[i].grad.size() ? params[i].grad : Matrix::Zero(inputs[i].rows(), inputs[i].cols());
        Matrix n(inputs[i].rows(), inputs[i].cols());
        for (Eigen::Index k = 0; k < inputs[i].size(); ++k) {
            auto eval = [&](double delta) {
                ad::NoGradGuard guard;
                std::vector<Var> cs;
                for (std::size_t j = 0; j < inputs.size(); ++j) {
                    Matrix m = inputs[j];
                    if (j == i) m.data()[k] += delta;
                    cs.push_back(ad::constant(m));
                }
                return fn(cs).item();
            };
            n.data()[k] = (eval(h) - eval(-h)) / (2.0 * h);
        }
        const double denom = std::max(a.norm() + n.norm(), 1e-12);
        out.max_rel_error = std::max(out.max_rel_error, (a - n).norm() / denom);
        out.analytic.push_back(std::move(a));
        out.numeric.push_back(std::move(n));
    }
    return out;
}

}  // namespace hazard::testing
