#include "hazard/nn/layers.hpp"

#include "hazard/tensor/rng.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace hazard::nn {

namespace {

constexpr char kBlobMagic[] = "HZPARAM1";

void append_u64(std::string& out, std::uint64_t v) {
    char buf[8];
    std::memcpy(buf, &v, 8);
    out.append(buf, 8);
}

std::uint64_t read_u64(const std::string& blob, std::size_t& pos) {
    if (pos + 8 > blob.size()) throw std::runtime_error("parameter blob truncated");
    std::uint64_t v = 0;
    std::memcpy(&v, blob.data() + pos, 8);
    pos += 8;
    return v;
}

struct BlobEntry {
    std::string name;
    Matrix value;
};

std::vector<BlobEntry> parse_blob(const std::string& blob) {
    std::size_t pos = 0;
    if (blob.compare(0, sizeof(kBlobMagic) - 1, kBlobMagic) != 0) throw std::runtime_error("bad parameter blob magic");
    pos = sizeof(kBlobMagic) - 1;
    const std::uint64_t count = read_u64(blob, pos);
    std::vector<BlobEntry> entries;
    entries.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint64_t name_len = read_u64(blob, pos);
        if (pos + name_len > blob.size()) throw std::runtime_error("parameter blob truncated");
        BlobEntry e;
        e.name = blob.substr(pos, name_len);
        pos += name_len;
        const auto rows = static_cast<Eigen::Index>(read_u64(blob, pos));
        const auto cols = static_cast<Eigen::Index>(read_u64(blob, pos));
        const std::size_t bytes = static_cast<std::size_t>(rows * cols) * sizeof(double);
        if (pos + bytes > blob.size()) throw std::runtime_error("parameter blob truncated");
        e.value.resize(rows, cols);
        std::memcpy(e.value.data(), blob.data() + pos, bytes);
        pos += bytes;
        entries.push_back(std::move(e));
    }
    return entries;
}

}  // namespace

Parameter& ParamSet::create(const std::string& name, Matrix init, bool trainable) {
    if (index_.contains(name)) throw std::invalid_argument("duplicate parameter " + name);
    index_[name] = params_.size();
    params_.push_back(Parameter{name, std::move(init), Matrix(), trainable});
    return params_.back();
}

Parameter& ParamSet::get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown parameter " + name);
    return params_[it->second];
}

const Parameter& ParamSet::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown parameter " + name);
    return params_[it->second];
}

std::vector<Parameter*> ParamSet::all() {
    std::vector<Parameter*> out;
    for (auto& p : params_) out.push_back(&p);
    return out;
}

std::vector<Parameter*> ParamSet::trainable() {
    std::vector<Parameter*> out;
    for (auto& p : params_) {
        if (p.trainable) out.push_back(&p);
    }
    return out;
}

std::size_t ParamSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
}

void ParamSet::zero_grad() {
    for (auto& p : params_) p.grad.resize(0, 0);
}

void ParamSet::set_trainable(const std::function<bool(const std::string&)>& pred) {
    for (auto& p : params_) p.trainable = pred(p.name);
}

std::string ParamSet::serialize() const {
    return serialize_where([](const std::string&) { return true; });
}

std::string ParamSet::serialize_where(const std::function<bool(const std::string&)>& pred) const {
    std::string out(kBlobMagic, sizeof(kBlobMagic) - 1);
    std::uint64_t count = 0;
    for (const auto& p : params_) count += pred(p.name) ? 1 : 0;
    append_u64(out, count);
    for (const auto& p : params_) {
        if (!pred(p.name)) continue;
        append_u64(out, p.name.size());
        out += p.name;
        append_u64(out, static_cast<std::uint64_t>(p.value.rows()));
        append_u64(out, static_cast<std::uint64_t>(p.value.cols()));
        out.append(reinterpret_cast<const char*>(p.value.data()),
                   static_cast<std::size_t>(p.value.size()) * sizeof(double));
    }
    return out;
}

void ParamSet::deserialize(const std::string& blob) {
    auto entries = parse_blob(blob);
    if (entries.size() != params_.size()) {
        throw std::runtime_error("parameter blob has " + std::to_string(entries.size()) + " entries, model has " +
                                 std::to_string(params_.size()));
    }
    for (auto& e : entries) {
        Parameter& p = get(e.name);
        if (p.value.rows() != e.value.rows() || p.value.cols() != e.value.cols()) {
            throw std::runtime_error("shape mismatch for parameter " + e.name);
        }
        p.value = std::move(e.value);
    }
}

std::size_t ParamSet::load_matching(const std::string& blob, const std::string& source_prefix,
                                    const std::string& target_prefix) {
    std::size_t loaded = 0;
    for (auto& e : parse_blob(blob)) {
        if (e.name.compare(0, source_prefix.size(), source_prefix) != 0) continue;
        const std::string target = target_prefix + e.name.substr(source_prefix.size());
        if (!contains(target)) continue;
        Parameter& p = get(target);
        if (p.value.rows() != e.value.rows() || p.value.cols() != e.value.cols()) {
            throw std::runtime_error("shape mismatch loading " + e.name + " into " + target);
        }
        p.value = std::move(e.value);
        ++loaded;
    }
    return loaded;
}

Matrix init_normal(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal() * stddev;
    return m;
}

Matrix init_xavier(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-limit, limit);
    return m;
}

Linear::Linear(ParamSet& ps, const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng, bool with_bias)
    : weight(&ps.create(name + ".weight", init_xavier(in, out, rng))) {
    if (with_bias) bias = &ps.create(name + ".bias", Matrix::Zero(1, out));
}

Var Linear::forward(const Var& x) const {
    Var y = ad::matmul(x, ad::param(*weight));
    return bias != nullptr ? ad::add_row(y, ad::param(*bias)) : y;
}

LayerNorm::LayerNorm(ParamSet& ps, const std::string& name, Eigen::Index width)
    : gamma(&ps.create(name + ".gamma", Matrix::Ones(1, width))),
      beta(&ps.create(name + ".beta", Matrix::Zero(1, width))) {}

Var LayerNorm::forward(const Var& x) const {
    return ad::layer_norm_rows(x, ad::param(*gamma), ad::param(*beta));
}

Embedding::Embedding(ParamSet& ps, const std::string& name, Eigen::Index count, Eigen::Index width, Rng& rng)
    : table(&ps.create(name + ".table", init_normal(count, width, 0.02, rng))) {}

Var Embedding::forward(std::span<const int> ids) const { return ad::gather_rows(ad::param(*table), ids); }

MultiHeadAttention::MultiHeadAttention(ParamSet& ps, const std::string& name, Eigen::Index width, int heads_,
                                       Rng& rng)
    : q(ps, name + ".q", width, width, rng),
      k(ps, name + ".k", width, width, rng),
      v(ps, name + ".v", width, width, rng),
      o(ps, name + ".o", width, width, rng),
      heads(heads_) {
    if (heads <= 0 || width % heads != 0) throw std::invalid_argument("attention width not divisible by heads");
}

Var MultiHeadAttention::forward(const Var& query, const Var& context, const std::vector<Var>* head_bias,
                                const Matrix* mask) const {
    if (context.rows() == 0) throw std::invalid_argument("attention over empty context");
    const Var qs = q.forward(query);
    const Var ks = k.forward(context);
    const Var vs = v.forward(context);
    const Eigen::Index width = qs.cols();
    const Eigen::Index head_dim = width / heads;
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
    if (head_bias != nullptr && static_cast<int>(head_bias->size()) != heads) {
        throw std::invalid_argument("attention bias count differs from head count");
    }
    std::vector<Var> outs;
    outs.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        const Var qh = ad::slice_cols(qs, h * head_dim, head_dim);
        const Var kh = ad::slice_cols(ks, h * head_dim, head_dim);
        const Var vh = ad::slice_cols(vs, h * head_dim, head_dim);
        Var scores = ad::scale(ad::matmul_nt(qh, kh), inv_scale);
        if (head_bias != nullptr) scores = ad::add(scores, (*head_bias)[static_cast<std::size_t>(h)]);
        if (mask != nullptr) scores = ad::add_constant(scores, *mask);
        outs.push_back(ad::matmul(ad::softmax_rows(scores), vh));
    }
    return o.forward(heads == 1 ? outs.front() : ad::concat_cols(outs));
}

FeedForward::FeedForward(ParamSet& ps, const std::string& name, Eigen::Index width, Eigen::Index hidden, Rng& rng)
    : fc1(ps, name + ".fc1", width, hidden, rng), fc2(ps, name + ".fc2", hidden, width, rng) {}

Var FeedForward::forward(const Var& x) const { return fc2.forward(ad::gelu(fc1.forward(x))); }

Adapter::Adapter(ParamSet& ps, const std::string& name, Eigen::Index width, Eigen::Index bottleneck, Rng& rng)
    : down(ps, name + ".down", width, bottleneck, rng), up(ps, name + ".up", bottleneck, width, rng) {
    up.weight->value.setZero();
}

Var Adapter::forward(const Var& x) const { return up.forward(ad::gelu(down.forward(x))); }

TransformerBlock::TransformerBlock(ParamSet& ps, const std::string& name, Eigen::Index width, int heads,
                                   Eigen::Index ffn_hidden, bool with_cross, Rng& rng)
    : ln_self(ps, name + ".ln_self", width),
      self_attn(ps, name + ".self_attn", width, heads, rng),
      ln_ffn(ps, name + ".ln_ffn", width),
      ffn(ps, name + ".ffn", width, ffn_hidden, rng) {
    if (with_cross) {
        ln_cross.emplace(ps, name + ".ln_cross", width);
        cross_attn.emplace(ps, name + ".cross_attn", width, heads, rng);
    }
}

Var TransformerBlock::forward(const Var& x, const BlockInputs& in) const {
    auto drop = [&](const Var& v) {
        if (in.dropout <= 0.0) return v;
        if (in.rng == nullptr) throw std::invalid_argument("dropout requested without an rng");
        return ad::dropout(v, in.dropout, *in.rng);
    };
    const Var normed = ln_self.forward(x);
    Var h = ad::add(x, drop(self_attn.forward(normed, normed, in.self_bias, in.self_mask)));
    if (cross_attn) {
        if (in.context == nullptr) throw std::invalid_argument("cross-attention block needs a context");
        h = ad::add(h, drop(cross_attn->forward(ln_cross->forward(h), *in.context)));
    }
    return ad::add(h, drop(ffn.forward(ln_ffn.forward(h))));
}

Matrix causal_mask(Eigen::Index length) {
    Matrix m = Matrix::Zero(length, length);
    for (Eigen::Index i = 0; i < length; ++i) {
        for (Eigen::Index j = i + 1; j < length; ++j) m(i, j) = -1e9;
    }
    return m;
}

}  // namespace hazard::nn
