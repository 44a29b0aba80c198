#include "hazard/tensor/autodiff.hpp"

#include "hazard/tensor/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <unordered_set>

namespace hazard::ad {

namespace {

thread_local bool g_grad_enabled = true;

void require(bool cond, const char* what) {
    if (!cond) throw std::invalid_argument(what);
}

// Builds a node; the closure and input links are kept only when some input
// participates in differentiation.
Var make(Matrix value, std::vector<std::shared_ptr<Node>> inputs, std::function<void(Node&)> fn) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    bool needs = false;
    if (g_grad_enabled) {
        for (const auto& in : inputs) needs = needs || in->requires_grad;
    }
    if (needs) {
        node->requires_grad = true;
        node->inputs = std::move(inputs);
        node->backward_fn = std::move(fn);
    }
    return Var(std::move(node));
}

Node& in(Node& n, std::size_t i) { return *n.inputs[i]; }

}  // namespace

void Node::accumulate(const Matrix& g) {
    if (!requires_grad) return;
    if (grad.size() == 0) {
        grad = g;
    } else {
        grad += g;
    }
}

double Var::item() const {
    require(rows() == 1 && cols() == 1, "Var::item on non-scalar");
    return value()(0, 0);
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var constant(Matrix value) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    return Var(std::move(node));
}

Var scalar(double v) {
    Matrix m(1, 1);
    m(0, 0) = v;
    return constant(std::move(m));
}

Var param(Parameter& p) {
    auto node = std::make_shared<Node>();
    node->value = p.value;
    if (p.trainable && g_grad_enabled) {
        node->requires_grad = true;
        node->param = &p;
    }
    return Var(std::move(node));
}

void backward(const Var& loss) {
    require(loss.rows() == 1 && loss.cols() == 1, "backward: loss must be scalar");
    if (!loss.requires_grad()) return;

    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            Node* child = node->inputs[next++].get();
            if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss.node()->grad = Matrix::Ones(1, 1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->grad.size() == 0) continue;
        if (n->backward_fn) n->backward_fn(*n);
        if (n->param != nullptr) {
            if (n->param->grad.size() == 0) n->param->zero_grad();
            n->param->grad += n->grad;
        }
    }
}

Var matmul(const Var& a, const Var& b) {
    require(a.cols() == b.rows(), "matmul: inner dimensions differ");
    return make(a.value() * b.value(), {a.node(), b.node()}, [](Node& n) {
        Node& x = in(n, 0);
        Node& y = in(n, 1);
        if (x.requires_grad) x.accumulate(n.grad * y.value.transpose());
        if (y.requires_grad) y.accumulate(x.value.transpose() * n.grad);
    });
}

Var matmul_nt(const Var& a, const Var& b) {
    require(a.cols() == b.cols(), "matmul_nt: inner dimensions differ");
    return make(a.value() * b.value().transpose(), {a.node(), b.node()}, [](Node& n) {
        Node& x = in(n, 0);
        Node& y = in(n, 1);
        if (x.requires_grad) x.accumulate(n.grad * y.value);
        if (y.requires_grad) y.accumulate(n.grad.transpose() * x.value);
    });
}

Var transpose(const Var& a) {
    return make(a.value().transpose(), {a.node()},
                [](Node& n) { in(n, 0).accumulate(n.grad.transpose()); });
}

Var add(const Var& a, const Var& b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
    return make(a.value() + b.value(), {a.node(), b.node()}, [](Node& n) {
        in(n, 0).accumulate(n.grad);
        in(n, 1).accumulate(n.grad);
    });
}

Var sub(const Var& a, const Var& b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shape mismatch");
    return make(a.value() - b.value(), {a.node(), b.node()}, [](Node& n) {
        in(n, 0).accumulate(n.grad);
        in(n, 1).accumulate(-n.grad);
    });
}

Var mul(const Var& a, const Var& b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), "mul: shape mismatch");
    return make(a.value().cwiseProduct(b.value()), {a.node(), b.node()}, [](Node& n) {
        Node& x = in(n, 0);
        Node& y = in(n, 1);
        if (x.requires_grad) x.accumulate(n.grad.cwiseProduct(y.value));
        if (y.requires_grad) y.accumulate(n.grad.cwiseProduct(x.value));
    });
}

Var add_row(const Var& a, const Var& row) {
    require(row.rows() == 1 && row.cols() == a.cols(), "add_row: shape mismatch");
    Matrix out = a.value();
    out.rowwise() += row.value().row(0);
    return make(std::move(out), {a.node(), row.node()}, [](Node& n) {
        in(n, 0).accumulate(n.grad);
        Node& r = in(n, 1);
        if (r.requires_grad) r.accumulate(n.grad.colwise().sum());
    });
}

Var add_constant(const Var& a, const Matrix& c) {
    require(a.rows() == c.rows() && a.cols() == c.cols(), "add_constant: shape mismatch");
    return make(a.value() + c, {a.node()}, [](Node& n) { in(n, 0).accumulate(n.grad); });
}

Var scale(const Var& a, double s) {
    return make(a.value() * s, {a.node()}, [s](Node& n) { in(n, 0).accumulate(n.grad * s); });
}

Var scale_by(const Var& a, const Var& s) {
    require(s.rows() == 1 && s.cols() == 1, "scale_by: scale must be 1x1");
    const double k = s.value()(0, 0);
    return make(a.value() * k, {a.node(), s.node()}, [k](Node& n) {
        Node& x = in(n, 0);
        Node& f = in(n, 1);
        if (x.requires_grad) x.accumulate(n.grad * k);
        if (f.requires_grad) {
            Matrix g(1, 1);
            g(0, 0) = n.grad.cwiseProduct(x.value).sum();
            f.accumulate(g);
        }
    });
}

Var exp(const Var& a) {
    Matrix out = a.value().array().exp().matrix();
    return make(out, {a.node()}, [](Node& n) { in(n, 0).accumulate(n.grad.cwiseProduct(n.value)); });
}

Var gelu(const Var& a) {
    const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
    const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    Matrix out = a.value().unaryExpr([=](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); });
    return make(std::move(out), {a.node()}, [=](Node& n) {
        Node& x = in(n, 0);
        Matrix d = x.value.unaryExpr([=](double v) {
            return 0.5 * (1.0 + std::erf(v * inv_sqrt2)) + v * inv_sqrt2pi * std::exp(-0.5 * v * v);
        });
        x.accumulate(n.grad.cwiseProduct(d));
    });
}

Var relu(const Var& a) {
    Matrix out = a.value().cwiseMax(0.0);
    return make(std::move(out), {a.node()}, [](Node& n) {
        Node& x = in(n, 0);
        Matrix mask = (x.value.array() > 0.0).cast<double>().matrix();
        x.accumulate(n.grad.cwiseProduct(mask));
    });
}

Var softmax_rows(const Var& a) {
    Matrix out(a.rows(), a.cols());
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
        const double m = a.value().row(r).maxCoeff();
        out.row(r) = (a.value().row(r).array() - m).exp().matrix();
        out.row(r) /= out.row(r).sum();
    }
    return make(std::move(out), {a.node()}, [](Node& n) {
        Matrix g(n.value.rows(), n.value.cols());
        for (Eigen::Index r = 0; r < n.value.rows(); ++r) {
            const double dot = n.grad.row(r).dot(n.value.row(r));
            g.row(r) = n.value.row(r).cwiseProduct((n.grad.row(r).array() - dot).matrix());
        }
        in(n, 0).accumulate(g);
    });
}

Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps) {
    require(gamma.rows() == 1 && gamma.cols() == x.cols(), "layer_norm: gamma shape");
    require(beta.rows() == 1 && beta.cols() == x.cols(), "layer_norm: beta shape");
    const Eigen::Index rows = x.rows();
    const Eigen::Index cols = x.cols();
    auto xhat = std::make_shared<Matrix>(rows, cols);
    auto inv_std = std::make_shared<Eigen::VectorXd>(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const double mu = x.value().row(r).mean();
        const double var = (x.value().row(r).array() - mu).square().mean();
        (*inv_std)(r) = 1.0 / std::sqrt(var + eps);
        xhat->row(r) = (x.value().row(r).array() - mu).matrix() * (*inv_std)(r);
    }
    Matrix out = xhat->array().rowwise() * gamma.value().row(0).array();
    out.rowwise() += beta.value().row(0);
    return make(std::move(out), {x.node(), gamma.node(), beta.node()}, [xhat, inv_std](Node& n) {
        Node& xn = in(n, 0);
        Node& gn = in(n, 1);
        Node& bn = in(n, 2);
        if (gn.requires_grad) gn.accumulate(n.grad.cwiseProduct(*xhat).colwise().sum());
        if (bn.requires_grad) bn.accumulate(n.grad.colwise().sum());
        if (xn.requires_grad) {
            Matrix dxhat = n.grad.array().rowwise() * gn.value.row(0).array();
            Matrix dx(dxhat.rows(), dxhat.cols());
            for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
                const double m1 = dxhat.row(r).mean();
                const double m2 = dxhat.row(r).dot(xhat->row(r)) / static_cast<double>(dxhat.cols());
                dx.row(r) = ((dxhat.row(r).array() - m1) - xhat->row(r).array() * m2) * (*inv_std)(r);
            }
            xn.accumulate(dx);
        }
    });
}

Var l2_normalize_rows(const Var& x, double eps) {
    auto norms = std::make_shared<Eigen::VectorXd>(x.rows());
    Matrix out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        (*norms)(r) = std::sqrt(x.value().row(r).squaredNorm() + eps);
        out.row(r) = x.value().row(r) / (*norms)(r);
    }
    return make(std::move(out), {x.node()}, [norms](Node& n) {
        Matrix g(n.value.rows(), n.value.cols());
        for (Eigen::Index r = 0; r < n.value.rows(); ++r) {
            const double dot = n.grad.row(r).dot(n.value.row(r));
            g.row(r) = (n.grad.row(r) - n.value.row(r) * dot) / (*norms)(r);
        }
        in(n, 0).accumulate(g);
    });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
    require(start >= 0 && count >= 0 && start + count <= a.rows(), "slice_rows: out of range");
    Matrix out = a.value().middleRows(start, count);
    return make(std::move(out), {a.node()}, [start, count](Node& n) {
        Node& x = in(n, 0);
        Matrix g = Matrix::Zero(x.value.rows(), x.value.cols());
        g.middleRows(start, count) = n.grad;
        x.accumulate(g);
    });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
    require(start >= 0 && count >= 0 && start + count <= a.cols(), "slice_cols: out of range");
    Matrix out = a.value().middleCols(start, count);
    return make(std::move(out), {a.node()}, [start, count](Node& n) {
        Node& x = in(n, 0);
        Matrix g = Matrix::Zero(x.value.rows(), x.value.cols());
        g.middleCols(start, count) = n.grad;
        x.accumulate(g);
    });
}

Var concat_rows(std::span<const Var> parts) {
    require(!parts.empty(), "concat_rows: no inputs");
    Eigen::Index total = 0;
    const Eigen::Index cols = parts.front().cols();
    std::vector<std::shared_ptr<Node>> inputs;
    for (const auto& p : parts) {
        require(p.cols() == cols, "concat_rows: column mismatch");
        total += p.rows();
        inputs.push_back(p.node());
    }
    Matrix out(total, cols);
    Eigen::Index off = 0;
    for (const auto& p : parts) {
        out.middleRows(off, p.rows()) = p.value();
        off += p.rows();
    }
    return make(std::move(out), std::move(inputs), [](Node& n) {
        Eigen::Index o = 0;
        for (auto& child : n.inputs) {
            const Eigen::Index r = child->value.rows();
            if (child->requires_grad) child->accumulate(n.grad.middleRows(o, r));
            o += r;
        }
    });
}

Var concat_cols(std::span<const Var> parts) {
    require(!parts.empty(), "concat_cols: no inputs");
    Eigen::Index total = 0;
    const Eigen::Index rows = parts.front().rows();
    std::vector<std::shared_ptr<Node>> inputs;
    for (const auto& p : parts) {
        require(p.rows() == rows, "concat_cols: row mismatch");
        total += p.cols();
        inputs.push_back(p.node());
    }
    Matrix out(rows, total);
    Eigen::Index off = 0;
    for (const auto& p : parts) {
        out.middleCols(off, p.cols()) = p.value();
        off += p.cols();
    }
    return make(std::move(out), std::move(inputs), [](Node& n) {
        Eigen::Index o = 0;
        for (auto& child : n.inputs) {
            const Eigen::Index c = child->value.cols();
            if (child->requires_grad) child->accumulate(n.grad.middleCols(o, c));
            o += c;
        }
    });
}

Var gather_rows(const Var& table, std::span<const int> ids) {
    Matrix out(static_cast<Eigen::Index>(ids.size()), table.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        require(ids[i] >= 0 && ids[i] < table.rows(), "gather_rows: id out of range");
        out.row(static_cast<Eigen::Index>(i)) = table.value().row(ids[i]);
    }
    std::vector<int> idx(ids.begin(), ids.end());
    return make(std::move(out), {table.node()}, [idx = std::move(idx)](Node& n) {
        Node& t = in(n, 0);
        Matrix g = Matrix::Zero(t.value.rows(), t.value.cols());
        for (std::size_t i = 0; i < idx.size(); ++i) g.row(idx[i]) += n.grad.row(static_cast<Eigen::Index>(i));
        t.accumulate(g);
    });
}

Var gather_elements(const Var& row, const IndexMatrix& idx) {
    require(row.rows() == 1, "gather_elements: source must be a row");
    Matrix out(idx.rows(), idx.cols());
    for (Eigen::Index i = 0; i < idx.rows(); ++i) {
        for (Eigen::Index j = 0; j < idx.cols(); ++j) {
            require(idx(i, j) >= 0 && idx(i, j) < row.cols(), "gather_elements: index out of range");
            out(i, j) = row.value()(0, idx(i, j));
        }
    }
    return make(std::move(out), {row.node()}, [idx](Node& n) {
        Node& r = in(n, 0);
        Matrix g = Matrix::Zero(1, r.value.cols());
        for (Eigen::Index i = 0; i < idx.rows(); ++i) {
            for (Eigen::Index j = 0; j < idx.cols(); ++j) g(0, idx(i, j)) += n.grad(i, j);
        }
        r.accumulate(g);
    });
}

Var sum(const Var& a) {
    Matrix out(1, 1);
    out(0, 0) = a.value().sum();
    return make(std::move(out), {a.node()}, [](Node& n) {
        Node& x = in(n, 0);
        x.accumulate(Matrix::Constant(x.value.rows(), x.value.cols(), n.grad(0, 0)));
    });
}

Var mean(const Var& a) {
    require(a.value().size() > 0, "mean: empty input");
    return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var cross_entropy_rows(const Var& logits, std::span<const int> targets) {
    require(static_cast<Eigen::Index>(targets.size()) == logits.rows(), "cross_entropy: target count");
    const Eigen::Index rows = logits.rows();
    auto probs = std::make_shared<Matrix>(rows, logits.cols());
    double total = 0.0;
    int counted = 0;
    for (Eigen::Index r = 0; r < rows; ++r) {
        const double m = logits.value().row(r).maxCoeff();
        probs->row(r) = (logits.value().row(r).array() - m).exp().matrix();
        const double z = probs->row(r).sum();
        probs->row(r) /= z;
        const int t = targets[static_cast<std::size_t>(r)];
        if (t < 0) continue;
        require(t < logits.cols(), "cross_entropy: target out of range");
        total += -(logits.value()(r, t) - m - std::log(z));
        ++counted;
    }
    require(counted > 0, "cross_entropy: no counted targets");
    Matrix out(1, 1);
    out(0, 0) = total / counted;
    std::vector<int> tg(targets.begin(), targets.end());
    return make(std::move(out), {logits.node()}, [probs, tg = std::move(tg), counted](Node& n) {
        Matrix g = Matrix::Zero(probs->rows(), probs->cols());
        const double k = n.grad(0, 0) / counted;
        for (Eigen::Index r = 0; r < probs->rows(); ++r) {
            const int t = tg[static_cast<std::size_t>(r)];
            if (t < 0) continue;
            g.row(r) = probs->row(r) * k;
            g(r, t) -= k;
        }
        in(n, 0).accumulate(g);
    });
}

Var bce_with_logits(const Var& logits, std::span<const double> labels) {
    require(logits.cols() == 1, "bce_with_logits: logits must be a column");
    require(static_cast<Eigen::Index>(labels.size()) == logits.rows(), "bce_with_logits: label count");
    require(!labels.empty(), "bce_with_logits: empty batch");
    const auto count = static_cast<double>(labels.size());
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double z = logits.value()(static_cast<Eigen::Index>(i), 0);
        // max(z,0) - z*y + log(1 + exp(-|z|))
        total += std::max(z, 0.0) - z * labels[i] + std::log1p(std::exp(-std::abs(z)));
    }
    Matrix out(1, 1);
    out(0, 0) = total / count;
    std::vector<double> lb(labels.begin(), labels.end());
    return make(std::move(out), {logits.node()}, [lb = std::move(lb), count](Node& n) {
        Node& x = in(n, 0);
        Matrix g(x.value.rows(), 1);
        for (Eigen::Index i = 0; i < x.value.rows(); ++i) {
            const double z = x.value(i, 0);
            const double s = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
            g(i, 0) = (s - lb[static_cast<std::size_t>(i)]) * n.grad(0, 0) / count;
        }
        x.accumulate(g);
    });
}

Var dropout(const Var& a, double p, Rng& rng) {
    require(p >= 0.0 && p < 1.0, "dropout: p must be in [0,1)");
    if (p == 0.0) return a;
    auto mask = std::make_shared<Matrix>(a.rows(), a.cols());
    const double keep = 1.0 / (1.0 - p);
    for (Eigen::Index i = 0; i < mask->size(); ++i) mask->data()[i] = rng.uniform() < p ? 0.0 : keep;
    return make(a.value().cwiseProduct(*mask), {a.node()},
                [mask](Node& n) { in(n, 0).accumulate(n.grad.cwiseProduct(*mask)); });
}

}  // namespace hazard::ad
