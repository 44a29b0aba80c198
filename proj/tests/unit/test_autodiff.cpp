#include "../support/gradcheck.hpp"
#include "hazard/nn/layers.hpp"
#include "hazard/nn/optim.hpp"
#include "hazard/tensor/rng.hpp"

#include <doctest.h>

using namespace hazard;
using hazard::testing::gradcheck;
using ad::Matrix;
using ad::Var;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
}

// Random fixed weights turn any matrix-valued op into a scalar test function.
Var weighted_sum(const Var& v, std::uint64_t seed) {
    Rng rng(seed);
    return ad::sum(ad::mul(v, ad::constant(random_matrix(v.rows(), v.cols(), rng))));
}

}  // namespace

TEST_CASE("elementwise and matrix ops match finite differences") {
    Rng rng(11);
    const Matrix a = random_matrix(3, 4, rng);
    const Matrix b = random_matrix(4, 5, rng);
    const Matrix c = random_matrix(3, 4, rng);
    const Matrix row = random_matrix(1, 4, rng);

    CHECK(gradcheck([](const auto& v) { return weighted_sum(ad::matmul(v[0], v[1]), 1); }, {a, b}).max_rel_error < 1e-6);
    CHECK(gradcheck([](const auto& v) { return weighted_sum(ad::matmul_nt(v[0], v[1]), 2); }, {a, c}).max_rel_error < 1e-6);
    CHECK(gradcheck([](const auto& v) { return weighted_sum(ad::mul(v[0], v[1]), 3); }, {a, c}).max_rel_error < 1e-6);
    CHECK(gradcheck([](const auto& v) { return weighted_sum(ad::sub(v[0], v[1]), 4); }, {a, c}).max_rel_error < 1e-6);
    CHECK(gradcheck([](const auto& v) { return weighted_sum(ad::add_row(v[0], v[1]), 5); }, {a, row}).max_rel_error < 1e-6);
    CHECK(gradcheck([](const auto& v) { return weighted_sum(ad::transpose(v[0]), 6); }, {a}).max_rel_error < 1e-6);
    CHECK(gradcheck([](const auto& v) { return weighted_sum(ad::gelu(v[0]), 7); }, {a}).max_rel_error < 1e-6);
    CHECK(gradcheck([](const auto& v) { return weighted_sum(ad::exp(v[0]), 8); }, {a}).max_rel_error < 1e-6);
    CHECK(gradcheck([](const auto& v) { return weighted_sum(ad::softmax_rows(v[0]), 9); }, {a}).max_rel_error < 1e-6);
    CHECK(gradcheck([](const auto& v) { return weighted_sum(ad::l2_normalize_rows(v[0]), 10); }, {a}).max_rel_error <
          1e-6);
    CHECK(gradcheck([](const auto& v) { return weighted_sum(ad::scale_by(v[0], v[1]), 12); },
                    {a, Matrix::Constant(1, 1, 1.7)})
              .max_rel_error < 1e-6);
}

TEST_CASE("layer norm gradient covers input, gain and shift") {
    Rng rng(3);
    const Matrix x = random_matrix(4, 6, rng);
    const Matrix g = random_matrix(1, 6, rng);
    const Matrix b = random_matrix(1, 6, rng);
    auto check = gradcheck([](const auto& v) { return weighted_sum(ad::layer_norm_rows(v[0], v[1], v[2]), 21); },
                           {x, g, b});
    CHECK(check.max_rel_error < 1e-6);
}

TEST_CASE("structural ops route gradients to the right slots") {
    Rng rng(5);
    const Matrix a = random_matrix(4, 6, rng);
    const Matrix b = random_matrix(2, 6, rng);
    CHECK(gradcheck([](const auto& v) { return weighted_sum(ad::slice_rows(v[0], 1, 2), 31); }, {a}).max_rel_error <
          1e-6);
    CHECK(gradcheck([](const auto& v) { return weighted_sum(ad::slice_cols(v[0], 2, 3), 32); }, {a}).max_rel_error <
          1e-6);
    CHECK(gradcheck(
              [](const auto& v) {
                  std::vector<Var> parts{v[0], v[1], v[0]};
                  return weighted_sum(ad::concat_rows(parts), 33);
              },
              {a, b})
              .max_rel_error < 1e-6);
    CHECK(gradcheck(
              [](const auto& v) {
                  std::vector<Var> parts{ad::transpose(v[0]), ad::transpose(v[1])};
                  return weighted_sum(ad::concat_cols(parts), 34);
              },
              {a, b})
              .max_rel_error < 1e-6);
    const std::vector<int> ids{3, 0, 3, 1};
    CHECK(gradcheck([&](const auto& v) { return weighted_sum(ad::gather_rows(v[0], ids), 35); }, {a}).max_rel_error <
          1e-6);
    ad::IndexMatrix idx(2, 3);
    idx << 0, 5, 5, 2, 1, 0;
    CHECK(gradcheck([&](const auto& v) { return weighted_sum(ad::gather_elements(v[0], idx), 36); },
                    {random_matrix(1, 6, rng)})
              .max_rel_error < 1e-6);
}

TEST_CASE("cross entropy ignores negative targets and matches finite differences") {
    Rng rng(8);
    const Matrix logits = random_matrix(4, 7, rng);
    const std::vector<int> targets{2, -1, 6, 0};
    auto check = gradcheck([&](const auto& v) { return ad::cross_entropy_rows(v[0], targets); }, {logits});
    CHECK(check.max_rel_error < 1e-6);
    CHECK(check.analytic[0].row(1).norm() == 0.0);
}

TEST_CASE("bce with logits is stable at large magnitudes") {
    Matrix z(2, 1);
    z << 800.0, -800.0;
    const std::vector<double> labels{1.0, 0.0};
    const Var loss = ad::bce_with_logits(ad::constant(z), labels);
    CHECK(std::isfinite(loss.item()));
    CHECK(loss.item() < 1e-12);
}

TEST_CASE("no-grad guard skips graph recording") {
    ad::Parameter p{"w", Matrix::Ones(2, 2), Matrix(), true};
    {
        ad::NoGradGuard guard;
        const Var y = ad::sum(ad::param(p));
        CHECK_FALSE(y.requires_grad());
    }
    const Var y = ad::sum(ad::param(p));
    CHECK(y.requires_grad());
    ad::backward(y);
    CHECK(p.grad.isApprox(Matrix::Ones(2, 2)));
}

TEST_CASE("frozen parameters receive no gradient") {
    ad::Parameter p{"w", Matrix::Ones(2, 2), Matrix(), false};
    ad::Parameter q{"v", Matrix::Ones(2, 2), Matrix(), true};
    ad::backward(ad::sum(ad::mul(ad::param(p), ad::param(q))));
    CHECK(p.grad.size() == 0);
    CHECK(q.grad.isApprox(Matrix::Ones(2, 2)));
}

TEST_CASE("parameter blobs round-trip and reject mismatched shapes") {
    Rng rng(1);
    nn::ParamSet a;
    nn::Linear la(a, "lin", 3, 2, rng);
    nn::ParamSet b;
    nn::Linear lb(b, "lin", 3, 2, rng);
    CHECK_FALSE(a.get("lin.weight").value.isApprox(b.get("lin.weight").value));
    b.deserialize(a.serialize());
    CHECK(a.serialize() == b.serialize());

    nn::ParamSet c;
    nn::Linear lc(c, "lin", 4, 2, rng);
    CHECK_THROWS(c.deserialize(a.serialize()));
}

TEST_CASE("adamw reduces a quadratic") {
    ad::Parameter p{"x", Matrix::Constant(1, 3, 5.0), Matrix(), true};
    nn::AdamW opt({&p}, {.lr = 0.1, .weight_decay = 0.0});
    double first = 0.0;
    double last = 0.0;
    for (int i = 0; i < 200; ++i) {
        opt.zero_grad();
        const Var x = ad::param(p);
        const Var loss = ad::sum(ad::mul(x, x));
        if (i == 0) first = loss.item();
        last = loss.item();
        ad::backward(loss);
        opt.step();
    }
    CHECK(last < first * 1e-3);
}

TEST_CASE("attention block output shape follows the query") {
    Rng rng(2);
    nn::ParamSet ps;
    nn::TransformerBlock block(ps, "blk", 8, 2, 16, true, rng);
    const Var q = ad::constant(random_matrix(5, 8, rng));
    const Var ctx = ad::constant(random_matrix(3, 8, rng));
    nn::BlockInputs in;
    in.context = &ctx;
    CHECK(block.forward(q, in).rows() == 5);
    const Var empty = ad::constant(Matrix(0, 8));
    in.context = &empty;
    CHECK_THROWS(block.forward(q, in));
}

TEST_CASE("rng state round-trips") {
    Rng a(99);
    a.normal();
    Rng b(1);
    b.load_state(a.save_state());
    for (int i = 0; i < 10; ++i) CHECK(a.normal() == b.normal());
}
