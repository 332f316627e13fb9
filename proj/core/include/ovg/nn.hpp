#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ovg/autodiff.hpp"
#include "ovg/rng.hpp"

namespace ovg::nn {

using ad::KeyMask;
using ad::Matrix;
using ad::Var;

/// Ordered registry of named trainable parameters. Layers keep shared handles
/// to the Vars they register, so the store is the single place optimizers and
/// checkpoints look.
class ParamStore {
public:
    Var add(const std::string& name, Matrix init);

    const std::vector<std::pair<std::string, Var>>& entries() const { return entries_; }
    const Var* find(const std::string& name) const;

    void zero_grad();
    std::size_t num_scalars() const;

    /// Adds N(0, stddev) noise to every parameter; used to leave the
    /// zero-initialized identity regime in gradient tests.
    void perturb(Rng& rng, double stddev);

private:
    std::vector<std::pair<std::string, Var>> entries_;
};

Matrix xavier_uniform(Rng& rng, int fan_in, int fan_out);

class Linear {
public:
    Linear() = default;
    Linear(ParamStore& store, const std::string& name, int in, int out, Rng& rng, bool zero_init = false);

    Var operator()(const Var& x) const;

    const Var& weight() const { return weight_; }
    const Var& bias() const { return bias_; }

private:
    Var weight_;  // (in, out)
    Var bias_;    // (1, out)
};

class LayerNorm {
public:
    LayerNorm() = default;
    LayerNorm(ParamStore& store, const std::string& name, int dim);

    Var operator()(const Var& x) const;

private:
    Var gamma_;
    Var beta_;
};

/// Two linear layers with a ReLU in between.
class FeedForward {
public:
    FeedForward() = default;
    FeedForward(ParamStore& store, const std::string& name, int dim, int hidden, Rng& rng,
                bool zero_output = false);

    Var operator()(const Var& x) const;

private:
    Linear in_;
    Linear out_;
};

/// Standard scaled dot-product multi-head attention. `zero_output` zero-initializes
/// the output projection so a residual block built on it starts as identity.
class MultiHeadAttention {
public:
    MultiHeadAttention() = default;
    MultiHeadAttention(ParamStore& store, const std::string& name, int dim, int heads, Rng& rng,
                       bool zero_output = false);

    /// `key_mask[j] == false` excludes key j. Throws InputError if every key
    /// is masked. When `weights` is given it receives one (queries x keys)
    /// probability matrix per head.
    Var operator()(const Var& query, const Var& key, const Var& value, const KeyMask* key_mask = nullptr,
                   std::vector<Matrix>* weights = nullptr) const;

    int heads() const { return heads_; }

private:
    int dim_ = 0;
    int heads_ = 1;
    Linear q_, k_, v_, o_;
};

}  // namespace ovg::nn
