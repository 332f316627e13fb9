#include "ovg/nn.hpp"

#include <algorithm>
#include <cmath>

#include "ovg/errors.hpp"

namespace ovg::nn {

Var ParamStore::add(const std::string& name, Matrix init) {
    if (find(name)) throw ConfigError("duplicate parameter name '" + name + "'");
    Var v = ad::parameter(std::move(init));
    entries_.emplace_back(name, v);
    return v;
}

const Var* ParamStore::find(const std::string& name) const {
    for (const auto& [n, v] : entries_)
        if (n == name) return &v;
    return nullptr;
}

void ParamStore::zero_grad() {
    for (auto& [n, v] : entries_) v.zero_grad();
}

std::size_t ParamStore::num_scalars() const {
    std::size_t total = 0;
    for (const auto& [n, v] : entries_) total += static_cast<std::size_t>(v.value().size());
    return total;
}

void ParamStore::perturb(Rng& rng, double stddev) {
    for (auto& [n, v] : entries_) {
        Matrix& m = v.mutable_value();
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] += normal(rng, 0.0, stddev);
    }
}

Matrix xavier_uniform(Rng& rng, int fan_in, int fan_out) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix m(fan_in, fan_out);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, -a, a);
    return m;
}

Linear::Linear(ParamStore& store, const std::string& name, int in, int out, Rng& rng, bool zero_init) {
    weight_ = store.add(name + ".weight", zero_init ? Matrix::Zero(in, out) : xavier_uniform(rng, in, out));
    bias_ = store.add(name + ".bias", Matrix::Zero(1, out));
}

Var Linear::operator()(const Var& x) const { return ad::add(ad::matmul(x, weight_), bias_); }

LayerNorm::LayerNorm(ParamStore& store, const std::string& name, int dim) {
    gamma_ = store.add(name + ".gamma", Matrix::Ones(1, dim));
    beta_ = store.add(name + ".beta", Matrix::Zero(1, dim));
}

Var LayerNorm::operator()(const Var& x) const { return ad::layer_norm_rows(x, gamma_, beta_); }

FeedForward::FeedForward(ParamStore& store, const std::string& name, int dim, int hidden, Rng& rng,
                         bool zero_output)
    : in_(store, name + ".fc1", dim, hidden, rng), out_(store, name + ".fc2", hidden, dim, rng, zero_output) {}

Var FeedForward::operator()(const Var& x) const { return out_(ad::relu(in_(x))); }

MultiHeadAttention::MultiHeadAttention(ParamStore& store, const std::string& name, int dim, int heads,
                                       Rng& rng, bool zero_output)
    : dim_(dim),
      heads_(heads),
      q_(store, name + ".q", dim, dim, rng),
      k_(store, name + ".k", dim, dim, rng),
      v_(store, name + ".v", dim, dim, rng),
      o_(store, name + ".o", dim, dim, rng, zero_output) {
    if (heads <= 0 || dim % heads != 0) throw ConfigError("attention dim must be divisible by heads");
}

Var MultiHeadAttention::operator()(const Var& query, const Var& key, const Var& value, const KeyMask* key_mask,
                                   std::vector<Matrix>* weights) const {
    if (query.cols() != dim_ || key.cols() != dim_ || value.cols() != dim_)
        throw InputError("attention: feature dimension mismatch");
    if (key.rows() != value.rows()) throw InputError("attention: key/value length mismatch");
    if (key.rows() == 0) throw InputError("attention: empty key set");
    if (key_mask) {
        if (static_cast<Eigen::Index>(key_mask->size()) != key.rows())
            throw InputError("attention: key mask length mismatch");
        if (std::none_of(key_mask->begin(), key_mask->end(), [](bool b) { return b; }))
            throw InputError("attention: every key is masked");
    }
    const Var q = q_(query);
    const Var k = k_(key);
    const Var v = v_(value);
    const int head_dim = dim_ / heads_;
    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
    std::vector<Var> outs;
    outs.reserve(static_cast<std::size_t>(heads_));
    if (weights) weights->clear();
    for (int h = 0; h < heads_; ++h) {
        const Var qh = ad::slice_cols(q, h * head_dim, head_dim);
        const Var kh = ad::slice_cols(k, h * head_dim, head_dim);
        const Var vh = ad::slice_cols(v, h * head_dim, head_dim);
        const Var p = ad::softmax_rows(ad::scale(ad::matmul_nt(qh, kh), scale), key_mask);
        if (weights) weights->push_back(p.value());
        outs.push_back(ad::matmul(p, vh));
    }
    const Var merged = heads_ == 1 ? outs.front() : ad::concat_cols(outs);
    return o_(merged);
}

}  // namespace ovg::nn
