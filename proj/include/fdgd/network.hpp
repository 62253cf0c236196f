#pragma once

#include "fdgd/numerics.hpp"

#include <cstddef>
#include <optional>
#include <set>
#include <utility>
#include <vector>

namespace fdgd {

using numerics::Matrix;
using numerics::Vector;

// Undirected communication graph between controllers. Connectivity is checked
// at construction; a disconnected edge set raises ConnectivityError carrying
// the components.
class ControlGraph {
public:
    using Edge = std::pair<std::size_t, std::size_t>;  // stored with first < second

    ControlGraph(std::size_t nodes, const std::vector<Edge>& edges);

    [[nodiscard]] std::size_t nodes() const noexcept { return nodes_; }
    [[nodiscard]] const std::set<Edge>& edges() const noexcept { return edges_; }
    [[nodiscard]] bool has_edge(std::size_t i, std::size_t j) const;
    [[nodiscard]] std::size_t degree(std::size_t i) const { return degrees_.at(i); }

    static ControlGraph ring(std::size_t nodes);
    static ControlGraph complete(std::size_t nodes);

private:
    std::size_t nodes_;
    std::set<Edge> edges_;
    std::vector<std::size_t> degrees_;
};

// Connected components of an edge set, each sorted, ordered by smallest node.
[[nodiscard]] std::vector<std::vector<std::size_t>> connected_components(
    std::size_t nodes, const std::vector<ControlGraph::Edge>& edges);

inline constexpr double kStochasticTolerance = 1e-12;
inline constexpr double kMinEigenMargin = 1e-10;

// Symmetric doubly stochastic mixing matrix with beta < 1.
class MixingMatrix {
public:
    // Validates W against the mixing-matrix invariants; when `graph` is given,
    // off-graph entries must be exactly zero.
    explicit MixingMatrix(Matrix w, const ControlGraph* graph = nullptr);

    [[nodiscard]] const Matrix& W() const noexcept { return w_; }
    [[nodiscard]] std::size_t nodes() const noexcept { return static_cast<std::size_t>(w_.rows()); }
    [[nodiscard]] double beta() const noexcept { return beta_; }
    [[nodiscard]] double lambda_min() const noexcept { return lambda_min_; }
    [[nodiscard]] const Vector& eigenvalues() const noexcept { return eigenvalues_; }
    // Nonzero off-diagonal weights of row i as (j, w_ij).
    [[nodiscard]] const std::vector<std::pair<std::size_t, double>>& neighbors(std::size_t i) const {
        return neighbors_.at(i);
    }

private:
    Matrix w_;
    Vector eigenvalues_;
    double beta_ = 0.0;
    double lambda_min_ = 1.0;
    std::vector<std::vector<std::pair<std::size_t, double>>> neighbors_;
};

// w_ij = 1 / (1 + max(deg i, deg j)) on edges, w_ii = 1 - sum_{j != i} w_ij.
[[nodiscard]] MixingMatrix metropolis_weights(const ControlGraph& graph);

// max(|lambda_2(W)|, |lambda_N(W)|). Throws NotStochasticError when
// lambda_1(W) differs from 1 by more than 1e-10.
[[nodiscard]] double beta(const Matrix& w);

// (W kron I_m) u_stack evaluated blockwise without materializing the product.
[[nodiscard]] Vector kron_apply(const Matrix& w, const Vector& u_stack, Eigen::Index m);
void kron_apply_into(const Matrix& w, const Vector& u_stack, Eigen::Index m, Vector& out);

}  // namespace fdgd
