#include "ovg/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "ovg/errors.hpp"

namespace ovg::ad {

namespace {

thread_local bool g_grad_enabled = true;

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
    std::ostringstream msg;
    msg << op << ": incompatible shapes (" << a.rows() << "x" << a.cols() << ") and ("
        << b.rows() << "x" << b.cols() << ")";
    throw DimensionError(msg.str());
}

enum class Bcast { same, scalar, column, row };

Bcast broadcast_kind(const char* op, const Matrix& a, const Matrix& b) {
    if (a.rows() == b.rows() && a.cols() == b.cols()) return Bcast::same;
    if (b.rows() == 1 && b.cols() == 1) return Bcast::scalar;
    if (b.cols() == 1 && b.rows() == a.rows()) return Bcast::column;
    if (b.rows() == 1 && b.cols() == a.cols()) return Bcast::row;
    shape_error(op, a, b);
}

Matrix expand(const Matrix& b, Bcast kind, Eigen::Index rows, Eigen::Index cols) {
    switch (kind) {
        case Bcast::same: return b;
        case Bcast::scalar: return Matrix::Constant(rows, cols, b(0, 0));
        case Bcast::column: return b.replicate(1, cols);
        case Bcast::row: return b.replicate(rows, 1);
    }
    return b;
}

Matrix reduce_to(const Matrix& g, Bcast kind) {
    switch (kind) {
        case Bcast::same: return g;
        case Bcast::scalar: return Matrix::Constant(1, 1, g.sum());
        case Bcast::column: return g.rowwise().sum();
        case Bcast::row: return g.colwise().sum();
    }
    return g;
}

Node& parent(Node& n, std::size_t i) { return *n.parents[i]; }

template <class F, class DF>
Var unary(const Var& a, F f, DF df) {
    Matrix out = a.value().unaryExpr(f);
    return make_result(out, {a}, [df](Node& self) {
        Node& p = parent(self, 0);
        if (!p.requires_grad) return;
        p.grad_ref().array() += self.grad.array() * p.value.binaryExpr(self.value, df).array();
    });
}

}  // namespace

Matrix& Node::grad_ref() {
    if (grad.rows() != value.rows() || grad.cols() != value.cols())
        grad = Matrix::Zero(value.rows(), value.cols());
    return grad;
}

Var::Var(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
}

Matrix Var::grad() const {
    if (node_->grad.size() == 0) return Matrix::Zero(rows(), cols());
    return node_->grad;
}

void Var::zero_grad() {
    if (node_) node_->grad.resize(0, 0);
}

double Var::item() const {
    if (rows() != 1 || cols() != 1) throw InputError("item() requires a 1x1 value");
    return value()(0, 0);
}

Var constant(Matrix value) { return Var(std::move(value), false); }
Var parameter(Matrix value) { return Var(std::move(value), true); }

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var make_result(Matrix value, std::vector<Var> parents, std::function<void(Node&)> backward) {
    Var out(std::move(value), false);
    if (!g_grad_enabled) return out;
    const bool any = std::any_of(parents.begin(), parents.end(),
                                 [](const Var& p) { return p.requires_grad(); });
    if (!any) return out;
    out.node_->requires_grad = true;
    out.node_->parents.reserve(parents.size());
    for (auto& p : parents) out.node_->parents.push_back(p.node());
    out.node_->backward = std::move(backward);
    return out;
}

void backward(const Var& root) {
    if (root.rows() != 1 || root.cols() != 1)
        throw InputError("backward() requires a scalar (1x1) root");
    if (!root.requires_grad()) return;

    // Iterative post-order DFS for a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    seen.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* child = node->parents[next++].get();
            if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root.node()->grad_ref()(0, 0) += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward && n->grad.size() != 0) n->backward(*n);
    }
    // Interior gradients are not needed after the sweep; leaves keep theirs.
    for (Node* n : order)
        if (n->backward) n->grad.resize(0, 0);
}

// ---- linear algebra -------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
    if (a.cols() != b.rows()) shape_error("matmul", a.value(), b.value());
    return make_result(a.value() * b.value(), {a, b}, [](Node& self) {
        Node& pa = parent(self, 0);
        Node& pb = parent(self, 1);
        if (pa.requires_grad) pa.grad_ref().noalias() += self.grad * pb.value.transpose();
        if (pb.requires_grad) pb.grad_ref().noalias() += pa.value.transpose() * self.grad;
    });
}

Var matmul_nt(const Var& a, const Var& b) {
    if (a.cols() != b.cols()) shape_error("matmul_nt", a.value(), b.value());
    return make_result(a.value() * b.value().transpose(), {a, b}, [](Node& self) {
        Node& pa = parent(self, 0);
        Node& pb = parent(self, 1);
        if (pa.requires_grad) pa.grad_ref().noalias() += self.grad * pb.value;
        if (pb.requires_grad) pb.grad_ref().noalias() += self.grad.transpose() * pa.value;
    });
}

Var transpose(const Var& a) {
    return make_result(a.value().transpose(), {a}, [](Node& self) {
        Node& p = parent(self, 0);
        if (p.requires_grad) p.grad_ref() += self.grad.transpose();
    });
}

// ---- elementwise / broadcasting ------------------------------------------

Var add(const Var& a, const Var& b) {
    const Bcast kind = broadcast_kind("add", a.value(), b.value());
    Matrix out = a.value() + expand(b.value(), kind, a.rows(), a.cols());
    return make_result(std::move(out), {a, b}, [kind](Node& self) {
        Node& pa = parent(self, 0);
        Node& pb = parent(self, 1);
        if (pa.requires_grad) pa.grad_ref() += self.grad;
        if (pb.requires_grad) pb.grad_ref() += reduce_to(self.grad, kind);
    });
}

Var sub(const Var& a, const Var& b) {
    const Bcast kind = broadcast_kind("sub", a.value(), b.value());
    Matrix out = a.value() - expand(b.value(), kind, a.rows(), a.cols());
    return make_result(std::move(out), {a, b}, [kind](Node& self) {
        Node& pa = parent(self, 0);
        Node& pb = parent(self, 1);
        if (pa.requires_grad) pa.grad_ref() += self.grad;
        if (pb.requires_grad) pb.grad_ref() -= reduce_to(self.grad, kind);
    });
}

Var mul(const Var& a, const Var& b) {
    const Bcast kind = broadcast_kind("mul", a.value(), b.value());
    Matrix bx = expand(b.value(), kind, a.rows(), a.cols());
    Matrix out = a.value().cwiseProduct(bx);
    return make_result(std::move(out), {a, b}, [kind, bx = std::move(bx)](Node& self) {
        Node& pa = parent(self, 0);
        Node& pb = parent(self, 1);
        if (pa.requires_grad) pa.grad_ref() += self.grad.cwiseProduct(bx);
        if (pb.requires_grad) pb.grad_ref() += reduce_to(self.grad.cwiseProduct(pa.value), kind);
    });
}

Var operator+(const Var& a, const Var& b) { return add(a, b); }
Var operator-(const Var& a, const Var& b) { return sub(a, b); }
Var operator-(const Var& a) { return scale(a, -1.0); }

Var scale(const Var& a, double s) {
    return make_result(a.value() * s, {a}, [s](Node& self) {
        Node& p = parent(self, 0);
        if (p.requires_grad) p.grad_ref() += self.grad * s;
    });
}

Var add_scalar(const Var& a, double s) {
    Matrix out = a.value().array() + s;
    return make_result(std::move(out), {a}, [](Node& self) {
        Node& p = parent(self, 0);
        if (p.requires_grad) p.grad_ref() += self.grad;
    });
}

Var relu(const Var& a) {
    return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
                 [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(const Var& a) {
    return unary(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                 [](double, double y) { return y * (1.0 - y); });
}

Var exp(const Var& a) {
    return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(const Var& a) {
    return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var square(const Var& a) {
    return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var abs(const Var& a) {
    return unary(a, [](double x) { return std::abs(x); },
                 [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var reciprocal(const Var& a) {
    return unary(a, [](double x) { return 1.0 / x; }, [](double, double y) { return -y * y; });
}

Var softplus(const Var& a) {
    return unary(
        a, [](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); },
        [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Var maximum(const Var& a, const Var& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("maximum", a.value(), b.value());
    Matrix out = a.value().cwiseMax(b.value());
    return make_result(std::move(out), {a, b}, [](Node& self) {
        Node& pa = parent(self, 0);
        Node& pb = parent(self, 1);
        const auto take_a = (pa.value.array() >= pb.value.array()).cast<double>();
        if (pa.requires_grad) pa.grad_ref().array() += self.grad.array() * take_a;
        if (pb.requires_grad) pb.grad_ref().array() += self.grad.array() * (1.0 - take_a);
    });
}

Var minimum(const Var& a, const Var& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("minimum", a.value(), b.value());
    Matrix out = a.value().cwiseMin(b.value());
    return make_result(std::move(out), {a, b}, [](Node& self) {
        Node& pa = parent(self, 0);
        Node& pb = parent(self, 1);
        const auto take_a = (pa.value.array() <= pb.value.array()).cast<double>();
        if (pa.requires_grad) pa.grad_ref().array() += self.grad.array() * take_a;
        if (pb.requires_grad) pb.grad_ref().array() += self.grad.array() * (1.0 - take_a);
    });
}

// ---- reductions -----------------------------------------------------------

Var sum(const Var& a) {
    return make_result(Matrix::Constant(1, 1, a.value().sum()), {a}, [](Node& self) {
        Node& p = parent(self, 0);
        if (p.requires_grad) p.grad_ref().array() += self.grad(0, 0);
    });
}

Var mean(const Var& a) {
    const double n = static_cast<double>(a.value().size());
    return make_result(Matrix::Constant(1, 1, a.value().sum() / n), {a}, [n](Node& self) {
        Node& p = parent(self, 0);
        if (p.requires_grad) p.grad_ref().array() += self.grad(0, 0) / n;
    });
}

Var row_dot(const Var& a, const Var& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("row_dot", a.value(), b.value());
    Matrix out = a.value().cwiseProduct(b.value()).rowwise().sum();
    return make_result(std::move(out), {a, b}, [](Node& self) {
        Node& pa = parent(self, 0);
        Node& pb = parent(self, 1);
        const Eigen::Index cols = pa.value.cols();
        if (pa.requires_grad) pa.grad_ref() += pb.value.cwiseProduct(self.grad.replicate(1, cols));
        if (pb.requires_grad) pb.grad_ref() += pa.value.cwiseProduct(self.grad.replicate(1, cols));
    });
}

Var logsumexp_rows(const Var& a) {
    const Eigen::VectorXd mx = a.value().rowwise().maxCoeff();
    Matrix shifted = a.value().colwise() - mx;
    Matrix e = shifted.array().exp();
    Eigen::VectorXd s = e.rowwise().sum();
    Matrix out = (s.array().log() + mx.array()).matrix();
    Matrix probs = e.array().colwise() / s.array();
    return make_result(std::move(out), {a}, [probs = std::move(probs)](Node& self) {
        Node& p = parent(self, 0);
        if (p.requires_grad) p.grad_ref() += probs.cwiseProduct(self.grad.replicate(1, probs.cols()));
    });
}

// ---- normalization ----------------------------------------------------------

Var softmax_rows(const Var& a, const KeyMask* mask) {
    const Matrix& x = a.value();
    if (mask && static_cast<Eigen::Index>(mask->size()) != x.cols())
        throw InputError("softmax_rows: mask length does not match column count");
    Matrix out = x;
    if (mask)
        for (Eigen::Index c = 0; c < x.cols(); ++c)
            if (!(*mask)[c]) out.col(c).setConstant(-std::numeric_limits<double>::infinity());
    const Eigen::VectorXd mx = out.rowwise().maxCoeff();
    for (Eigen::Index r = 0; r < x.rows(); ++r)
        if (!std::isfinite(mx(r))) out.row(r).setConstant(-std::numeric_limits<double>::infinity());
    const Eigen::VectorXd shift = mx.unaryExpr([](double m) { return std::isfinite(m) ? m : 0.0; });
    out = (out.colwise() - shift).array().exp().matrix();
    // Vectorized exp leaves tiny values at -inf; masked entries must be exactly 0.
    if (mask)
        for (Eigen::Index c = 0; c < x.cols(); ++c)
            if (!(*mask)[c]) out.col(c).setZero();
    for (Eigen::Index r = 0; r < x.rows(); ++r)
        if (!std::isfinite(mx(r))) out.row(r).setZero();
    const Eigen::VectorXd total = out.rowwise().sum();
    for (Eigen::Index r = 0; r < x.rows(); ++r)
        if (total(r) > 0.0) out.row(r) /= total(r);
    return make_result(out, {a}, [](Node& self) {
        Node& p = parent(self, 0);
        if (!p.requires_grad) return;
        const Matrix& y = self.value;
        const Eigen::VectorXd dot = y.cwiseProduct(self.grad).rowwise().sum();
        p.grad_ref() += y.cwiseProduct(self.grad - dot.replicate(1, y.cols()));
    });
}

Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps) {
    const Matrix& v = x.value();
    const Eigen::Index n = v.cols();
    if (gamma.rows() != 1 || gamma.cols() != n || beta.rows() != 1 || beta.cols() != n)
        shape_error("layer_norm_rows", v, gamma.value());
    const Eigen::VectorXd mu = v.rowwise().mean();
    Matrix centered = v.colwise() - mu;
    const Eigen::VectorXd var = centered.array().square().rowwise().mean();
    const Eigen::VectorXd inv_sd = (var.array() + eps).rsqrt();
    Matrix xhat = centered.array().colwise() * inv_sd.array();
    Matrix out = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() +
                 beta.value().row(0).array();
    return make_result(std::move(out), {x, gamma, beta},
                       [xhat = std::move(xhat), inv_sd](Node& self) {
                           Node& px = parent(self, 0);
                           Node& pg = parent(self, 1);
                           Node& pb = parent(self, 2);
                           const Matrix& g = self.grad;
                           if (pg.requires_grad) pg.grad_ref() += g.cwiseProduct(xhat).colwise().sum();
                           if (pb.requires_grad) pb.grad_ref() += g.colwise().sum();
                           if (px.requires_grad) {
                               Matrix dxhat = g.array().rowwise() * pg.value.row(0).array();
                               const Eigen::VectorXd m1 = dxhat.rowwise().mean();
                               const Eigen::VectorXd m2 = dxhat.cwiseProduct(xhat).rowwise().mean();
                               Matrix dx = dxhat.colwise() - m1;
                               dx -= xhat.cwiseProduct(m2.replicate(1, xhat.cols()));
                               px.grad_ref() += (dx.array().colwise() * inv_sd.array()).matrix();
                           }
                       });
}

Var l2_normalize_rows(const Var& x, double eps) {
    const Eigen::VectorXd norms = x.value().rowwise().norm();
    const Eigen::VectorXd denom = norms.cwiseMax(eps);
    Matrix out = x.value().array().colwise() / denom.array();
    return make_result(out, {x}, [norms, denom, eps](Node& self) {
        Node& p = parent(self, 0);
        if (!p.requires_grad) return;
        const Matrix& y = self.value;
        const Matrix& g = self.grad;
        Matrix dx(g.rows(), g.cols());
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
            if (norms(r) > eps) {
                const double d = g.row(r).dot(y.row(r));
                dx.row(r) = (g.row(r) - d * y.row(r)) / denom(r);
            } else {
                dx.row(r) = g.row(r) / eps;
            }
        }
        p.grad_ref() += dx;
    });
}

// ---- indexing -------------------------------------------------------------

Var gather_rows(const Var& x, std::span<const int> indices) {
    Matrix out(static_cast<Eigen::Index>(indices.size()), x.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] < 0 || indices[i] >= x.rows()) throw InputError("gather_rows: index out of range");
        out.row(static_cast<Eigen::Index>(i)) = x.value().row(indices[i]);
    }
    std::vector<int> idx(indices.begin(), indices.end());
    return make_result(std::move(out), {x}, [idx = std::move(idx)](Node& self) {
        Node& p = parent(self, 0);
        if (!p.requires_grad) return;
        Matrix& g = p.grad_ref();
        for (std::size_t i = 0; i < idx.size(); ++i) g.row(idx[i]) += self.grad.row(static_cast<Eigen::Index>(i));
    });
}

Var slice_rows(const Var& x, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > x.rows()) throw InputError("slice_rows: out of range");
    return make_result(x.value().middleRows(start, count), {x}, [start, count](Node& self) {
        Node& p = parent(self, 0);
        if (p.requires_grad) p.grad_ref().middleRows(start, count) += self.grad;
    });
}

Var slice_cols(const Var& x, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > x.cols()) throw InputError("slice_cols: out of range");
    return make_result(x.value().middleCols(start, count), {x}, [start, count](Node& self) {
        Node& p = parent(self, 0);
        if (p.requires_grad) p.grad_ref().middleCols(start, count) += self.grad;
    });
}

Var element(const Var& x, Eigen::Index r, Eigen::Index c) {
    if (r < 0 || c < 0 || r >= x.rows() || c >= x.cols()) throw InputError("element: out of range");
    return make_result(Matrix::Constant(1, 1, x.value()(r, c)), {x}, [r, c](Node& self) {
        Node& p = parent(self, 0);
        if (p.requires_grad) p.grad_ref()(r, c) += self.grad(0, 0);
    });
}

Var concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw InputError("concat_rows: no inputs");
    Eigen::Index rows = 0;
    const Eigen::Index cols = parts[0].cols();
    for (const auto& p : parts) {
        if (p.cols() != cols) shape_error("concat_rows", parts[0].value(), p.value());
        rows += p.rows();
    }
    Matrix out(rows, cols);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        out.middleRows(at, p.rows()) = p.value();
        at += p.rows();
    }
    return make_result(std::move(out), std::vector<Var>(parts.begin(), parts.end()), [](Node& self) {
        Eigen::Index offset = 0;
        for (auto& p : self.parents) {
            const Eigen::Index r = p->value.rows();
            if (p->requires_grad) p->grad_ref() += self.grad.middleRows(offset, r);
            offset += r;
        }
    });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw InputError("concat_cols: no inputs");
    Eigen::Index cols = 0;
    const Eigen::Index rows = parts[0].rows();
    for (const auto& p : parts) {
        if (p.rows() != rows) shape_error("concat_cols", parts[0].value(), p.value());
        cols += p.cols();
    }
    Matrix out(rows, cols);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        out.middleCols(at, p.cols()) = p.value();
        at += p.cols();
    }
    return make_result(std::move(out), std::vector<Var>(parts.begin(), parts.end()), [](Node& self) {
        Eigen::Index offset = 0;
        for (auto& p : self.parents) {
            const Eigen::Index c = p->value.cols();
            if (p->requires_grad) p->grad_ref() += self.grad.middleCols(offset, c);
            offset += c;
        }
    });
}

Var mask_rows(const Var& x, const KeyMask& mask) {
    if (static_cast<Eigen::Index>(mask.size()) != x.rows()) throw InputError("mask_rows: mask length mismatch");
    Matrix keep(x.rows(), 1);
    for (Eigen::Index r = 0; r < x.rows(); ++r) keep(r, 0) = mask[r] ? 1.0 : 0.0;
    return mul(x, constant(std::move(keep)));
}

Var patchify(const Var& image, int height, int width, int channels, int patch) {
    if (image.rows() != static_cast<Eigen::Index>(height) * width || image.cols() != channels)
        throw InputError("patchify: image matrix does not match height*width x channels");
    if (patch <= 0 || height % patch != 0 || width % patch != 0)
        throw InputError("patchify: image size not divisible by patch size");
    const int ph = height / patch;
    const int pw = width / patch;
    // source pixel row / channel for each (patch row, patch column) entry
    std::vector<int> src(static_cast<std::size_t>(ph) * pw * patch * patch);
    Matrix out(static_cast<Eigen::Index>(ph) * pw, static_cast<Eigen::Index>(patch) * patch * channels);
    const Matrix& img = image.value();
    std::size_t k = 0;
    for (int py = 0; py < ph; ++py)
        for (int px = 0; px < pw; ++px)
            for (int dy = 0; dy < patch; ++dy)
                for (int dx = 0; dx < patch; ++dx) {
                    const int pixel = (py * patch + dy) * width + (px * patch + dx);
                    src[k++] = pixel;
                    const Eigen::Index row = static_cast<Eigen::Index>(py) * pw + px;
                    const Eigen::Index col0 = static_cast<Eigen::Index>(dy * patch + dx) * channels;
                    for (int c = 0; c < channels; ++c) out(row, col0 + c) = img(pixel, c);
                }
    const int per_patch = patch * patch;
    return make_result(std::move(out), {image}, [src = std::move(src), per_patch, channels](Node& self) {
        Node& p = parent(self, 0);
        if (!p.requires_grad) return;
        Matrix& g = p.grad_ref();
        std::size_t k = 0;
        for (Eigen::Index row = 0; row < self.grad.rows(); ++row)
            for (int j = 0; j < per_patch; ++j, ++k)
                for (int c = 0; c < channels; ++c)
                    g(src[k], c) += self.grad(row, static_cast<Eigen::Index>(j) * channels + c);
    });
}

}  // namespace ovg::ad
