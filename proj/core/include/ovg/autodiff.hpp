#pragma once

// Minimal tape-free reverse-mode automatic differentiation over dense
// double-precision matrices. Every op returns a Var that owns its parents, so
// a computation graph lives exactly as long as the Vars that reference it.

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace ovg::ad {

using Matrix = Eigen::MatrixXd;

/// Per-column key mask for attention; `true` marks a valid (attendable) key.
using KeyMask = std::vector<bool>;

struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    /// Gradient buffer, zero-initialized on first access.
    Matrix& grad_ref();
};

class Var {
public:
    Var() = default;
    explicit Var(Matrix value, bool requires_grad = false);

    const Matrix& value() const { return node_->value; }
    /// Direct access for optimizers and weight loading; never use on interior nodes.
    Matrix& mutable_value() { return node_->value; }

    /// Zero matrix if no gradient has been accumulated yet.
    Matrix grad() const;
    void zero_grad();

    bool requires_grad() const { return node_ && node_->requires_grad; }
    bool defined() const { return static_cast<bool>(node_); }
    Eigen::Index rows() const { return node_->value.rows(); }
    Eigen::Index cols() const { return node_->value.cols(); }
    double item() const;

    const std::shared_ptr<Node>& node() const { return node_; }

private:
    friend Var make_result(Matrix value, std::vector<Var> parents,
                           std::function<void(Node&)> backward);
    std::shared_ptr<Node> node_;
};

Var constant(Matrix value);
Var parameter(Matrix value);

/// Internal: builds a result node; drops the graph edge when no parent
/// requires a gradient or when gradients are globally disabled.
Var make_result(Matrix value, std::vector<Var> parents, std::function<void(Node&)> backward);

/// Backpropagates d(root)/d(.) into every reachable leaf. `root` must be 1x1.
void backward(const Var& root);

/// Disables graph construction on this thread for the guard's lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

// ---- linear algebra -------------------------------------------------------
Var matmul(const Var& a, const Var& b);
/// a * b^T
Var matmul_nt(const Var& a, const Var& b);
Var transpose(const Var& a);

// ---- elementwise / broadcasting ------------------------------------------
// `b` may be 1x1, rows x 1, 1 x cols, or the same shape as `a`.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator-(const Var& a);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);

Var relu(const Var& a);
Var sigmoid(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var square(const Var& a);
Var abs(const Var& a);
Var reciprocal(const Var& a);
Var softplus(const Var& a);
Var maximum(const Var& a, const Var& b);
Var minimum(const Var& a, const Var& b);

// ---- reductions -----------------------------------------------------------
Var sum(const Var& a);
Var mean(const Var& a);
/// Row-wise dot product of two equally shaped matrices -> (rows x 1).
Var row_dot(const Var& a, const Var& b);
/// Row-wise log-sum-exp -> (rows x 1), max-subtracted.
Var logsumexp_rows(const Var& a);

// ---- normalization ----------------------------------------------------------
/// Softmax along each row; masked columns receive probability exactly 0.
Var softmax_rows(const Var& a, const KeyMask* mask = nullptr);
Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
/// x / max(||x||, eps) per row; zero rows stay zero.
Var l2_normalize_rows(const Var& x, double eps = 1e-12);

// ---- indexing -------------------------------------------------------------
Var gather_rows(const Var& x, std::span<const int> indices);
Var slice_rows(const Var& x, Eigen::Index start, Eigen::Index count);
Var slice_cols(const Var& x, Eigen::Index start, Eigen::Index count);
Var element(const Var& x, Eigen::Index r, Eigen::Index c);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
/// Zeroes rows whose mask entry is false.
Var mask_rows(const Var& x, const KeyMask& mask);

/// Rearranges an (H*W, channels) pixel matrix into non-overlapping p x p
/// patches: ((H/p)*(W/p), p*p*channels), row-major over patches and
/// (dy, dx, channel) within a patch.
Var patchify(const Var& image, int height, int width, int channels, int patch);

}  // namespace ovg::ad
