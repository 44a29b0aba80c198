#pragma once

// Reverse-mode automatic differentiation over dense row-major matrices.
//
// Every value is a 2-D matrix of doubles. Operations record a closure on a
// dynamically built graph; `backward` walks the graph in reverse topological
// order. Parameters are leaves whose gradients are accumulated into
// `Parameter::grad` so optimizers can read them after the graph is dropped.

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace hazard {
class Rng;
}

namespace hazard::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using IndexMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;
    bool trainable = true;

    void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

struct Node {
    Matrix value;
    Matrix grad;  // empty until something flows into it
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward_fn;
    Parameter* param = nullptr;
    bool requires_grad = false;

    void accumulate(const Matrix& g);
};

class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    const Matrix& value() const { return node_->value; }
    const Matrix& grad() const { return node_->grad; }
    Eigen::Index rows() const { return node_->value.rows(); }
    Eigen::Index cols() const { return node_->value.cols(); }
    double item() const;
    bool requires_grad() const { return node_->requires_grad; }
    bool defined() const { return static_cast<bool>(node_); }

    const std::shared_ptr<Node>& node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

// Graph recording is enabled by default; NoGradGuard disables it for the
// current thread (inference paths).
bool grad_enabled();

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

Var constant(Matrix value);
Var scalar(double v);
// Leaf bound to a parameter. Frozen parameters become constants.
Var param(Parameter& p);

// Seeds d(loss)/d(loss) = 1 and propagates. `loss` must be 1x1.
void backward(const Var& loss);

// --- linear algebra ---
Var matmul(const Var& a, const Var& b);
Var matmul_nt(const Var& a, const Var& b);  // a * b^T
Var transpose(const Var& a);

// --- elementwise ---
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var add_row(const Var& a, const Var& row);  // broadcast 1xC over rows
Var add_constant(const Var& a, const Matrix& c);
Var scale(const Var& a, double s);
Var scale_by(const Var& a, const Var& s);  // s is 1x1
Var exp(const Var& a);
Var gelu(const Var& a);
Var relu(const Var& a);

// --- row-wise ---
Var softmax_rows(const Var& a);
Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
Var l2_normalize_rows(const Var& x, double eps = 1e-12);

// --- structure ---
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var gather_rows(const Var& table, std::span<const int> ids);
// out(i, j) = row(0, idx(i, j)); used for bucketed position biases.
Var gather_elements(const Var& row, const IndexMatrix& idx);

// --- reductions and losses ---
Var sum(const Var& a);
Var mean(const Var& a);
// Mean token cross-entropy; rows whose target is negative are ignored.
Var cross_entropy_rows(const Var& logits, std::span<const int> targets);
// Mean binary cross-entropy over an Nx1 logit column.
Var bce_with_logits(const Var& logits, std::span<const double> labels);

Var dropout(const Var& a, double p, Rng& rng);

}  // namespace hazard::ad
