#include "xdrmob/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "xdrmob/error.hpp"

namespace xdrmob {

namespace {

struct BasicCell {
    std::size_t row;
    std::size_t col;
    double flow;
};

class TransportSimplex {
public:
    TransportSimplex(std::span<const double> supply, std::span<const double> demand, std::span<const double> cost)
        : m_(supply.size()), n_(demand.size()), cost_(cost), cell_slot_(m_ * n_, kNone)
    {
        northwest_corner(supply, demand);
        max_abs_cost_ = 0.0;
        for (double c : cost_) {
            max_abs_cost_ = std::max(max_abs_cost_, std::abs(c));
        }
    }

    std::size_t solve()
    {
        const double eps = 1e-12 * (1.0 + max_abs_cost_);
        const std::size_t max_pivots = 50 * (m_ + n_) * (m_ + n_) + 1000;
        std::size_t degenerate_run = 0;
        std::size_t pivots = 0;
        while (true) {
            compute_potentials();
            const bool bland = degenerate_run > m_ + n_;
            std::size_t enter = kNone;
            double best = -eps;
            for (std::size_t r = 0; r < m_ && !(bland && enter != kNone); ++r) {
                for (std::size_t c = 0; c < n_; ++c) {
                    if (cell_slot_[r * n_ + c] != kNone) {
                        continue;
                    }
                    const double reduced = cost_[r * n_ + c] - u_[r] - v_[c];
                    if (reduced < best) {
                        best = reduced;
                        enter = r * n_ + c;
                        if (bland) {
                            break;
                        }
                    }
                }
            }
            if (enter == kNone) {
                return pivots;
            }
            const double theta = pivot(enter / n_, enter % n_);
            degenerate_run = theta == 0.0 ? degenerate_run + 1 : 0;
            if (++pivots > max_pivots) {
                throw Error(Errc::DegenerateData, "transportation simplex failed to converge");
            }
        }
    }

    TransportPlan plan() const
    {
        TransportPlan out;
        out.rows = m_;
        out.cols = n_;
        out.flow.assign(m_ * n_, 0.0);
        for (const auto& cell : basis_) {
            out.flow[cell.row * n_ + cell.col] = cell.flow;
            out.cost += cell.flow * cost_[cell.row * n_ + cell.col];
        }
        return out;
    }

private:
    static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

    void add_basic(std::size_t r, std::size_t c, double flow)
    {
        cell_slot_[r * n_ + c] = basis_.size();
        basis_.push_back({r, c, flow});
    }

    void northwest_corner(std::span<const double> supply, std::span<const double> demand)
    {
        std::vector<double> rs(supply.begin(), supply.end());
        std::vector<double> cs(demand.begin(), demand.end());
        std::size_t r = 0;
        std::size_t c = 0;
        basis_.reserve(m_ + n_ - 1);
        while (true) {
            const double x = std::max(0.0, std::min(rs[r], cs[c]));
            add_basic(r, c, x);
            rs[r] -= x;
            cs[c] -= x;
            if (r == m_ - 1 && c == n_ - 1) {
                break;
            }
            if (r < m_ - 1 && (c == n_ - 1 || rs[r] <= cs[c])) {
                ++r;
            } else {
                ++c;
            }
        }
    }

    // Nodes 0..m-1 are rows, m..m+n-1 columns; basic cells are tree edges.
    void build_adjacency()
    {
        adj_.assign(m_ + n_, {});
        for (std::size_t k = 0; k < basis_.size(); ++k) {
            adj_[basis_[k].row].push_back(k);
            adj_[m_ + basis_[k].col].push_back(k);
        }
    }

    void compute_potentials()
    {
        build_adjacency();
        u_.assign(m_, 0.0);
        v_.assign(n_, 0.0);
        visited_.assign(m_ + n_, false);
        stack_.clear();
        stack_.push_back(0);
        visited_[0] = true;
        while (!stack_.empty()) {
            const std::size_t node = stack_.back();
            stack_.pop_back();
            for (std::size_t k : adj_[node]) {
                const auto& cell = basis_[k];
                const double c = cost_[cell.row * n_ + cell.col];
                if (node < m_) {
                    const std::size_t other = m_ + cell.col;
                    if (!visited_[other]) {
                        v_[cell.col] = c - u_[cell.row];
                        visited_[other] = true;
                        stack_.push_back(other);
                    }
                } else {
                    const std::size_t other = cell.row;
                    if (!visited_[other]) {
                        u_[cell.row] = c - v_[cell.col];
                        visited_[other] = true;
                        stack_.push_back(other);
                    }
                }
            }
        }
    }

    /// Tree path from row node `r` to column node `m + c`, as basis indices
    /// ordered from the column end back to the row.
    void tree_path(std::size_t r, std::size_t c)
    {
        parent_edge_.assign(m_ + n_, kNone);
        visited_.assign(m_ + n_, false);
        stack_.clear();
        stack_.push_back(r);
        visited_[r] = true;
        const std::size_t target = m_ + c;
        while (!stack_.empty()) {
            const std::size_t node = stack_.back();
            stack_.pop_back();
            if (node == target) {
                break;
            }
            for (std::size_t k : adj_[node]) {
                const auto& cell = basis_[k];
                const std::size_t other = node < m_ ? m_ + cell.col : cell.row;
                if (!visited_[other]) {
                    visited_[other] = true;
                    parent_edge_[other] = k;
                    stack_.push_back(other);
                }
            }
        }
        path_.clear();
        std::size_t node = target;
        while (node != r) {
            const std::size_t k = parent_edge_[node];
            path_.push_back(k);
            const auto& cell = basis_[k];
            node = node < m_ ? m_ + cell.col : cell.row;
        }
    }

    double pivot(std::size_t r, std::size_t c)
    {
        tree_path(r, c);
        // path_[0] touches the entering column: it loses flow, then signs alternate.
        double theta = std::numeric_limits<double>::infinity();
        std::size_t leave = kNone;
        for (std::size_t i = 0; i < path_.size(); i += 2) {
            const std::size_t k = path_[i];
            const auto& cell = basis_[k];
            const double x = cell.flow;
            const std::size_t idx = cell.row * n_ + cell.col;
            if (x < theta || (x == theta && idx < basis_[leave].row * n_ + basis_[leave].col)) {
                theta = x;
                leave = k;
            }
        }
        for (std::size_t i = 0; i < path_.size(); ++i) {
            auto& cell = basis_[path_[i]];
            if (i % 2 == 0) {
                cell.flow = std::max(0.0, cell.flow - theta);
            } else {
                cell.flow += theta;
            }
        }
        auto& gone = basis_[leave];
        cell_slot_[gone.row * n_ + gone.col] = kNone;
        gone = {r, c, theta};
        cell_slot_[r * n_ + c] = leave;
        return theta;
    }

    std::size_t m_;
    std::size_t n_;
    std::span<const double> cost_;
    double max_abs_cost_ = 0.0;
    std::vector<BasicCell> basis_;
    std::vector<std::size_t> cell_slot_;
    std::vector<std::vector<std::size_t>> adj_;
    std::vector<double> u_;
    std::vector<double> v_;
    std::vector<bool> visited_;
    std::vector<std::size_t> stack_;
    std::vector<std::size_t> parent_edge_;
    std::vector<std::size_t> path_;
};

}  // namespace

TransportPlan solve_transport(std::span<const double> supply, std::span<const double> demand,
                              std::span<const double> cost)
{
    if (cost.size() != supply.size() * demand.size()) {
        throw Error(Errc::ValidationError, "cost matrix shape does not match supply x demand");
    }
    double total_supply = 0.0;
    double total_demand = 0.0;
    for (double s : supply) {
        if (!(s >= 0.0) || !std::isfinite(s)) {
            throw Error(Errc::ValidationError, "supplies must be finite and non-negative");
        }
        total_supply += s;
    }
    for (double d : demand) {
        if (!(d >= 0.0) || !std::isfinite(d)) {
            throw Error(Errc::ValidationError, "demands must be finite and non-negative");
        }
        total_demand += d;
    }
    if (std::abs(total_supply - total_demand) > 1e-9 * std::max(1.0, std::max(total_supply, total_demand))) {
        throw Error(Errc::ValidationError, "unbalanced transportation problem");
    }

    TransportPlan out;
    out.rows = supply.size();
    out.cols = demand.size();
    out.flow.assign(out.rows * out.cols, 0.0);

    std::vector<std::size_t> rows;
    std::vector<std::size_t> cols;
    for (std::size_t i = 0; i < supply.size(); ++i) {
        if (supply[i] > 0.0) {
            rows.push_back(i);
        }
    }
    for (std::size_t j = 0; j < demand.size(); ++j) {
        if (demand[j] > 0.0) {
            cols.push_back(j);
        }
    }
    if (rows.empty() || cols.empty()) {
        return out;
    }

    std::vector<double> sub_supply;
    std::vector<double> sub_demand;
    std::vector<double> sub_cost;
    for (std::size_t i : rows) {
        sub_supply.push_back(supply[i]);
    }
    for (std::size_t j : cols) {
        sub_demand.push_back(demand[j]);
    }
    sub_cost.reserve(rows.size() * cols.size());
    for (std::size_t i : rows) {
        for (std::size_t j : cols) {
            sub_cost.push_back(cost[i * demand.size() + j]);
        }
    }

    TransportSimplex simplex(sub_supply, sub_demand, sub_cost);
    out.pivots = simplex.solve();
    const TransportPlan sub = simplex.plan();
    out.cost = sub.cost;
    for (std::size_t a = 0; a < rows.size(); ++a) {
        for (std::size_t b = 0; b < cols.size(); ++b) {
            out.flow[rows[a] * out.cols + cols[b]] = sub.flow[a * cols.size() + b];
        }
    }
    return out;
}

double wasserstein1(std::span<const double> p, std::span<const double> q, std::span<const double> ground)
{
    const std::size_t n = p.size();
    if (q.size() != n || ground.size() != n * n) {
        throw Error(Errc::ValidationError, "wasserstein1: shape mismatch");
    }
    std::vector<std::size_t> sources;
    std::vector<std::size_t> sinks;
    std::vector<double> supply;
    std::vector<double> demand;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(p[i] >= 0.0) || !(q[i] >= 0.0)) {
            throw Error(Errc::ValidationError, "wasserstein1: negative mass");
        }
        if (p[i] > q[i]) {
            sources.push_back(i);
            supply.push_back(p[i] - q[i]);
        } else if (q[i] > p[i]) {
            sinks.push_back(i);
            demand.push_back(q[i] - p[i]);
        }
    }
    if (sources.empty() && sinks.empty()) {
        return 0.0;
    }
    const double s = std::accumulate(supply.begin(), supply.end(), 0.0);
    const double d = std::accumulate(demand.begin(), demand.end(), 0.0);
    const double scale = std::max({1.0, std::accumulate(p.begin(), p.end(), 0.0), std::accumulate(q.begin(), q.end(), 0.0)});
    if (std::abs(s - d) > 1e-9 * scale) {
        throw Error(Errc::ValidationError, "wasserstein1: distributions carry different total mass");
    }
    if (sources.empty() || sinks.empty()) {
        return 0.0;  // residual below rounding level
    }
    // Rebalance rounding residue onto the largest demand so the solver sees equal totals.
    auto largest = std::max_element(demand.begin(), demand.end());
    *largest = std::max(0.0, *largest + (s - d));

    std::vector<double> cost;
    cost.reserve(sources.size() * sinks.size());
    for (std::size_t i : sources) {
        for (std::size_t j : sinks) {
            cost.push_back(ground[i * n + j]);
        }
    }
    return solve_transport(supply, demand, cost).cost;
}

}  // namespace xdrmob
