#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ovg/autodiff.hpp"

namespace ovg::testkit {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst;  // "name[r,c] analytic=.. numeric=.."
    long checked = 0;
    long zeros = 0;  // elements where both estimates are below zero_tol
};

/// Central-difference check of every element of every leaf.
///
/// Relative error per element is |a - n| / max(|a|, |n|, floor). Elements
/// where both estimates are below zero_tol count as agreeing zeros: some
/// gradients vanish identically (an attention key bias shifts every logit of
/// a row equally), and there the difference quotient is pure rounding noise,
/// about eps * |loss| / h ~ 1e-10 at h = 1e-5.
inline GradCheckResult gradcheck(const std::function<ad::Var()>& loss,
                                 std::vector<std::pair<std::string, ad::Var>> leaves, double h = 1e-5,
                                 double floor = 1e-6, double zero_tol = 1e-8) {
    for (auto& [name, v] : leaves) v.zero_grad();
    ad::backward(loss());
    std::vector<ad::Matrix> analytic;
    for (auto& [name, v] : leaves) analytic.push_back(v.grad());

    GradCheckResult res;
    ad::NoGradGuard guard;
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        ad::Var v = leaves[i].second;
        ad::Matrix& m = v.mutable_value();
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                const double saved = m(r, c);
                m(r, c) = saved + h;
                const double up = loss().item();
                m(r, c) = saved - h;
                const double down = loss().item();
                m(r, c) = saved;
                const double numeric = (up - down) / (2.0 * h);
                const double a = analytic[i](r, c);
                ++res.checked;
                if (std::max(std::abs(a), std::abs(numeric)) < zero_tol) {
                    ++res.zeros;
                    continue;
                }
                const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
                if (rel > res.max_rel_error) {
                    res.max_rel_error = rel;
                    res.worst = leaves[i].first + "[" + std::to_string(r) + "," + std::to_string(c) +
                                "] analytic=" + std::to_string(a) + " numeric=" + std::to_string(numeric);
                }
            }
    }
    for (auto& [name, v] : leaves) v.zero_grad();
    return res;
}

/// Fixed random readout sum(x .* R) so that every output element matters.
inline ad::Var readout(const ad::Var& x, const ad::Matrix& weights) {
    return ad::sum(ad::mul(x, ad::constant(weights)));
}

}  // namespace ovg::testkit
