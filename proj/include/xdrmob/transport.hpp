#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace xdrmob {

struct TransportPlan {
    double cost = 0.0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> flow;  // row-major rows x cols
    std::size_t pivots = 0;
};

/// Exact balanced transportation problem solved with the transportation
/// simplex (northwest-corner start, u-v potentials, tree pivots).
///
/// `cost` is row-major supply.size() x demand.size(). Supplies and demands
/// must be non-negative with equal totals (relative tolerance 1e-9).
TransportPlan solve_transport(std::span<const double> supply, std::span<const double> demand,
                              std::span<const double> cost);

/// 1-Wasserstein distance between two distributions over the same n points
/// with ground metric `ground` (n x n, row-major). Mass shared by both
/// distributions at a point stays in place, so identical inputs return
/// exactly zero.
double wasserstein1(std::span<const double> p, std::span<const double> q, std::span<const double> ground);

}  // namespace xdrmob
