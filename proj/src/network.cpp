#include "fdgd/network.hpp"

#include "fdgd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace fdgd {

namespace {

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n), rank_(n, 0) {
        std::iota(parent_.begin(), parent_.end(), std::size_t{0});
    }

    std::size_t find(std::size_t i) {
        while (parent_[i] != i) {
            parent_[i] = parent_[parent_[i]];
            i = parent_[i];
        }
        return i;
    }

    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) {
            return;
        }
        if (rank_[a] < rank_[b]) {
            std::swap(a, b);
        }
        parent_[b] = a;
        if (rank_[a] == rank_[b]) {
            ++rank_[a];
        }
    }

private:
    std::vector<std::size_t> parent_;
    std::vector<int> rank_;
};

std::string format_components(const std::vector<std::vector<std::size_t>>& components) {
    std::ostringstream os;
    for (std::size_t c = 0; c < components.size(); ++c) {
        os << (c == 0 ? "" : " ") << "{";
        for (std::size_t k = 0; k < components[c].size(); ++k) {
            os << (k == 0 ? "" : ",") << components[c][k];
        }
        os << "}";
    }
    return os.str();
}

}  // namespace

std::vector<std::vector<std::size_t>> connected_components(std::size_t nodes,
                                                           const std::vector<ControlGraph::Edge>& edges) {
    UnionFind uf(nodes);
    for (const auto& [a, b] : edges) {
        uf.unite(a, b);
    }
    std::map<std::size_t, std::vector<std::size_t>> by_root;
    for (std::size_t i = 0; i < nodes; ++i) {
        by_root[uf.find(i)].push_back(i);
    }
    std::vector<std::vector<std::size_t>> out;
    for (auto& [root, members] : by_root) {
        out.push_back(std::move(members));
    }
    std::sort(out.begin(), out.end(), [](const auto& l, const auto& r) { return l.front() < r.front(); });
    return out;
}

ControlGraph::ControlGraph(std::size_t nodes, const std::vector<Edge>& edges)
    : nodes_(nodes), degrees_(nodes, 0) {
    if (nodes == 0) {
        throw DimensionError("control graph must have at least one node");
    }
    for (auto [a, b] : edges) {
        if (a >= nodes || b >= nodes) {
            std::ostringstream os;
            os << "edge (" << a << "," << b << ") references a node outside [0," << nodes << ")";
            throw DimensionError(os.str());
        }
        if (a == b) {
            std::ostringstream os;
            os << "self-loop at node " << a << " is not allowed";
            throw ParameterError(os.str());
        }
        if (a > b) {
            std::swap(a, b);
        }
        if (edges_.insert({a, b}).second) {
            ++degrees_[a];
            ++degrees_[b];
        }
    }
    const std::vector<Edge> unique(edges_.begin(), edges_.end());
    auto components = connected_components(nodes, unique);
    if (components.size() > 1) {
        throw ConnectivityError("control graph is disconnected: components " + format_components(components),
                                std::move(components));
    }
}

bool ControlGraph::has_edge(std::size_t i, std::size_t j) const {
    if (i > j) {
        std::swap(i, j);
    }
    return edges_.count({i, j}) > 0;
}

ControlGraph ControlGraph::ring(std::size_t nodes) {
    std::vector<Edge> edges;
    if (nodes == 2) {
        edges.emplace_back(0, 1);
    } else if (nodes > 2) {
        for (std::size_t i = 0; i < nodes; ++i) {
            edges.emplace_back(i, (i + 1) % nodes);
        }
    }
    return ControlGraph(nodes, edges);
}

ControlGraph ControlGraph::complete(std::size_t nodes) {
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < nodes; ++i) {
        for (std::size_t j = i + 1; j < nodes; ++j) {
            edges.emplace_back(i, j);
        }
    }
    return ControlGraph(nodes, edges);
}

double beta(const Matrix& w) {
    const Vector ev = numerics::sym_eigenvalues(w);
    if (ev.size() == 0) {
        throw DimensionError("beta of an empty matrix");
    }
    if (std::abs(ev(0) - 1.0) > 1e-10) {
        std::ostringstream os;
        os << "largest eigenvalue of W is " << ev(0) << ", expected 1";
        throw NotStochasticError(os.str());
    }
    if (ev.size() == 1) {
        return 0.0;
    }
    return std::max(std::abs(ev(1)), std::abs(ev(ev.size() - 1)));
}

MixingMatrix::MixingMatrix(Matrix w, const ControlGraph* graph) : w_(std::move(w)) {
    numerics::require_square(w_, "mixing matrix");
    numerics::require_finite(w_, "mixing matrix");
    const Eigen::Index n = w_.rows();
    if (n == 0) {
        throw DimensionError("mixing matrix must be nonempty");
    }
    if (graph != nullptr && graph->nodes() != static_cast<std::size_t>(n)) {
        throw DimensionError("mixing matrix size does not match the control graph");
    }
    const double asym = (w_ - w_.transpose()).cwiseAbs().maxCoeff();
    if (asym > kStochasticTolerance) {
        throw NotStochasticError("mixing matrix is not symmetric");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::abs(w_.row(i).sum() - 1.0) > kStochasticTolerance ||
            std::abs(w_.col(i).sum() - 1.0) > kStochasticTolerance) {
            std::ostringstream os;
            os << "mixing matrix row/column " << i << " does not sum to 1";
            throw NotStochasticError(os.str());
        }
    }
    neighbors_.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j || w_(i, j) == 0.0) {
                continue;
            }
            if (graph != nullptr && !graph->has_edge(static_cast<std::size_t>(i), static_cast<std::size_t>(j))) {
                std::ostringstream os;
                os << "mixing weight w(" << i << "," << j << ") is nonzero but the pair is not an edge";
                throw ParameterError(os.str());
            }
            neighbors_[static_cast<std::size_t>(i)].emplace_back(static_cast<std::size_t>(j), w_(i, j));
        }
    }
    eigenvalues_ = numerics::sym_eigenvalues(w_);
    lambda_min_ = eigenvalues_(n - 1);
    if (lambda_min_ <= -1.0 + kMinEigenMargin) {
        std::ostringstream os;
        os << "smallest eigenvalue of W is " << lambda_min_ << "; it must exceed -1";
        throw InfeasibleError(os.str());
    }
    beta_ = fdgd::beta(w_);
    if (!(beta_ < 1.0)) {
        throw ConnectivityError("mixing matrix has beta = 1 (the weighted graph is disconnected)", {});
    }
}

MixingMatrix metropolis_weights(const ControlGraph& graph) {
    const auto n = static_cast<Eigen::Index>(graph.nodes());
    Matrix w = Matrix::Zero(n, n);
    for (const auto& [a, b] : graph.edges()) {
        const double weight = 1.0 / (1.0 + static_cast<double>(std::max(graph.degree(a), graph.degree(b))));
        w(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = weight;
        w(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = weight;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        double off = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j != i) {
                off += w(i, j);
            }
        }
        w(i, i) = 1.0 - off;
    }
    return MixingMatrix(std::move(w), &graph);
}

void kron_apply_into(const Matrix& w, const Vector& u_stack, Eigen::Index m, Vector& out) {
    const Eigen::Index n = w.rows();
    if (w.cols() != n || m < 0 || u_stack.size() != m * n) {
        throw DimensionError("kron_apply: stack length must equal m * N");
    }
    out.resize(u_stack.size());
    if (u_stack.size() == 0) {
        return;
    }
    // Column j of the m x N view is agent j's block; column i of U W^T is sum_j w_ij u_(j).
    Eigen::Map<const Matrix> u(u_stack.data(), m, n);
    Eigen::Map<Matrix> result(out.data(), m, n);
    result.noalias() = u * w.transpose();
}

Vector kron_apply(const Matrix& w, const Vector& u_stack, Eigen::Index m) {
    Vector out;
    kron_apply_into(w, u_stack, m, out);
    return out;
}

}  // namespace fdgd
