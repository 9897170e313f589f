#pragma once

// Central finite-difference verification of analytic gradients, shared by
// the unit suite and the acceptance criteria runner.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "chartfolio/cae/network.hpp"

namespace testsupport {

struct GradCheckStats {
    std::size_t total = 0;
    std::size_t within_tol = 0;
    double worst_rel_err = 0.0;
    std::string worst_param;

    double fraction_within() const {
        return total == 0 ? 0.0 : static_cast<double>(within_tol) / static_cast<double>(total);
    }
};

// Compares every parameter's analytic gradient against
// (loss(p+h) - loss(p-h)) / 2h with relative error
// |a - f| / max(|a|, |f|, eps_floor).
inline GradCheckStats finite_difference_check(chartfolio::cae::CaeNetwork& net,
                                              const chartfolio::cae::Tensor& x, double h,
                                              double tol, double eps_floor = 1e-10) {
    net.zero_grads();
    net.loss_and_gradients(x);

    // Snapshot analytic gradients before the perturbation sweeps overwrite
    // cached activations.
    std::vector<Eigen::MatrixXd> analytic;
    for (auto* p : net.parameters()) analytic.push_back(p->grad);

    GradCheckStats stats;
    auto params = net.parameters();
    for (std::size_t b = 0; b < params.size(); ++b) {
        auto& value = params[b]->value;
        for (long r = 0; r < value.rows(); ++r) {
            for (long c = 0; c < value.cols(); ++c) {
                const double saved = value(r, c);
                value(r, c) = saved + h;
                const double up = net.loss(x);
                value(r, c) = saved - h;
                const double down = net.loss(x);
                value(r, c) = saved;

                const double fd = (up - down) / (2.0 * h);
                const double a = analytic[b](r, c);
                const double rel =
                    std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), eps_floor});
                ++stats.total;
                if (rel <= tol) ++stats.within_tol;
                if (rel > stats.worst_rel_err) {
                    stats.worst_rel_err = rel;
                    stats.worst_param = params[b]->name + "(" + std::to_string(r) + "," +
                                        std::to_string(c) + ")";
                }
            }
        }
    }
    return stats;
}

} // namespace testsupport
