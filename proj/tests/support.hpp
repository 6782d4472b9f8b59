#pragma once

// Fixtures and independent reference computations shared by the unit tests
// and the acceptance binary. Nothing here reuses the pair-indexed moment
// system or the per-node enumeration of the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "dlms/combiners.hpp"
#include "dlms/rng.hpp"
#include "dlms/errors.hpp"
#include "dlms/theory.hpp"
#include "dlms/topology.hpp"

namespace dlms::fx {

inline Topology graph(std::size_t n, const std::vector<std::pair<NodeId, NodeId>>& edges) {
    std::vector<std::vector<int>> adj(n, std::vector<int>(n, 0));
    for (auto [a, b] : edges) adj[a][b] = adj[b][a] = 1;
    return Topology::from_adjacency(adj);
}

inline Topology path(std::size_t n) {
    std::vector<std::pair<NodeId, NodeId>> e;
    for (NodeId k = 0; k + 1 < n; ++k) e.emplace_back(k, k + 1);
    return graph(n, e);
}

inline Topology star(std::size_t n) {
    std::vector<std::pair<NodeId, NodeId>> e;
    for (NodeId k = 1; k < n; ++k) e.emplace_back(0, k);
    return graph(n, e);
}

inline Topology complete(std::size_t n) {
    std::vector<std::pair<NodeId, NodeId>> e;
    for (NodeId k = 0; k < n; ++k)
        for (NodeId l = k + 1; l < n; ++l) e.emplace_back(k, l);
    return graph(n, e);
}

inline std::vector<NodeProfile> same_profiles(std::size_t n, double mu, double su2, double sv2) {
    return std::vector<NodeProfile>(n, NodeProfile{mu, su2, sv2});
}

/// M mu sigma_v2 / (2 - mu (M + 2) sigma_u2): a node that never hears its
/// neighbors.
inline double standalone_msd(const NodeProfile& p, std::size_t m) {
    const double md = static_cast<double>(m);
    return md * p.mu * p.sigma_v2 / (2.0 - p.mu * (md + 2.0) * p.sigma_u2);
}

/// E[a_{k,m} a_{l,n}] for all k, l by enumerating every joint pattern of
/// all directed links. Entry [k * N + l](m, n).
struct JointMoments {
    Eigen::MatrixXd abar;
    std::vector<Eigen::MatrixXd> second;
    const Eigen::MatrixXd& at(std::size_t k, std::size_t l) const { return second[k * static_cast<std::size_t>(abar.rows()) + l]; }
};

inline JointMoments brute_force_moments(const CombiningRule& rule, const Topology& topo,
                                        const ErrorModel& errors, const std::vector<double>& noise) {
    const std::size_t n = topo.size();
    const auto ni = static_cast<Eigen::Index>(n);
    std::vector<std::pair<NodeId, NodeId>> directed;  // (receiver, sender)
    for (auto [a, b] : topo.links()) {
        directed.emplace_back(a, b);
        directed.emplace_back(b, a);
    }
    const std::size_t links = directed.size();
    JointMoments out;
    out.abar = Eigen::MatrixXd::Zero(ni, ni);
    out.second.assign(n * n, Eigen::MatrixXd::Zero(ni, ni));
    for (std::size_t mask = 0; mask < (std::size_t{1} << links); ++mask) {
        double prob = 1.0;
        std::vector<std::vector<NodeId>> sets(n);
        for (NodeId k = 0; k < n; ++k) sets[k].push_back(k);
        for (std::size_t j = 0; j < links; ++j) {
            const auto [k, l] = directed[j];
            const double p = errors.failure(k, l);
            if ((mask >> j) & 1U) {
                prob *= 1.0 - p;
                sets[k].push_back(l);
            } else {
                prob *= p;
            }
        }
        if (prob == 0.0) continue;
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(ni, ni);
        for (NodeId k = 0; k < n; ++k) {
            std::sort(sets[k].begin(), sets[k].end());
            const WeightRow row = combine_weights(rule, topo, noise, k, sets[k]);
            for (std::size_t i = 0; i < row.members.size(); ++i)
                a(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(row.members[i])) = row.weights[i];
        }
        out.abar += prob * a;
        for (NodeId k = 0; k < n; ++k)
            for (NodeId l = 0; l < n; ++l)
                out.second[k * n + l] += prob * a.row(static_cast<Eigen::Index>(k)).transpose() *
                                         a.row(static_cast<Eigen::Index>(l));
    }
    return out;
}

/// Iterates the first- and second-moment recursions of the CTA update in
/// the full N x N cross-moment matrix X = [E w_k^T w_l], derived from
/// w_{k,i+1} = (I - mu_k u_k u_k^T) phi_k + mu_k u_k u_k^T w_o + mu_k v_k u_k
/// under the independence assumption. Returns the MSD per node after
/// `iters` steps (or at convergence).
inline Eigen::VectorXd iterate_oracle(const std::vector<NodeProfile>& prof, double rho,
                                      const JointMoments& jm, const Eigen::VectorXd& w_o,
                                      std::size_t iters) {
    const auto n = static_cast<Eigen::Index>(prof.size());
    const double md = static_cast<double>(w_o.size());
    Eigen::MatrixXd eta(n, n), nu(n, n);
    Eigen::VectorXd eps(n);
    for (Eigen::Index k = 0; k < n; ++k) eps(k) = prof[k].mu * prof[k].sigma_u2;
    for (Eigen::Index k = 0; k < n; ++k) {
        for (Eigen::Index l = 0; l < n; ++l) {
            const double idx = std::pow(rho, std::abs(static_cast<double>(k - l)));
            const double cross = idx * std::sqrt(prof[k].sigma_u2 * prof[l].sigma_u2);
            nu(k, l) = prof[k].mu * prof[l].mu *
                       (prof[k].sigma_u2 * prof[l].sigma_u2 + (md + 1.0) * cross * cross);
            eta(k, l) = 1.0 - eps(k) - eps(l) + nu(k, l);
        }
    }
    const double wo2 = w_o.squaredNorm();
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(n, w_o.size());  // rows are E[w_k]^T
    for (std::size_t it = 0; it < iters; ++it) {
        const Eigen::VectorXd mwo = mean * w_o;  // E[w_m]^T w_o
        Eigen::MatrixXd next(n, n);
        for (Eigen::Index k = 0; k < n; ++k) {
            for (Eigen::Index l = 0; l < n; ++l) {
                const auto& s = jm.at(static_cast<std::size_t>(k), static_cast<std::size_t>(l));
                double v = eta(k, l) * (s.cwiseProduct(x)).sum();
                v += (eps(l) - nu(k, l)) * jm.abar.row(k).dot(mwo);
                v += (eps(k) - nu(k, l)) * jm.abar.row(l).dot(mwo);
                v += nu(k, l) * wo2;
                if (k == l) v += md * prof[k].mu * prof[k].mu * prof[k].sigma_u2 * prof[k].sigma_v2;
                next(k, l) = v;
            }
        }
        Eigen::MatrixXd next_mean(n, w_o.size());
        for (Eigen::Index k = 0; k < n; ++k)
            next_mean.row(k) = (1.0 - eps(k)) * (jm.abar.row(k) * mean) + eps(k) * w_o.transpose();
        const bool done = (next - x).cwiseAbs().maxCoeff() == 0.0 && (next_mean - mean).cwiseAbs().maxCoeff() == 0.0;
        x = next;
        mean = next_mean;
        if (done) break;
    }
    Eigen::VectorXd msd(n);
    for (Eigen::Index k = 0; k < n; ++k) msd(k) = x(k, k) - 2.0 * mean.row(k).dot(w_o) + wo2;
    return msd;
}

/// Seeded random configuration with every step size strictly inside the
/// mean-square bound 2 / ((M + 2) sigma_u2).
struct RandomConfig {
    Topology topo;
    std::vector<NodeProfile> prof;
    double rho = 0.0;
    std::size_t m = 2;
    CombiningRule rule;
};

inline RandomConfig random_config(std::uint64_t seed, std::size_t n = 5) {
    Rng rng(derive_seed(seed, 0, 7));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    RandomConfig c;
    c.topo = Topology::random_geometric(n, 100.0, 30.0 + 50.0 * unit(rng), derive_seed(seed, 1, 7));
    c.m = 1 + static_cast<std::size_t>(unit(rng) * 8.0);
    c.rho = 0.95 * unit(rng);
    for (std::size_t k = 0; k < n; ++k) {
        const double su2 = 0.2 + 1.8 * unit(rng);
        const double bound = 2.0 / ((static_cast<double>(c.m) + 2.0) * su2);
        const double sv2 = std::pow(10.0, -6.0 + 4.0 * unit(rng));
        c.prof.push_back({bound * (0.01 + 0.98 * unit(rng)), su2, sv2});
    }
    const RuleKind kinds[] = {RuleKind::uniform, RuleKind::maximum_degree, RuleKind::metropolis,
                              RuleKind::relative_degree, RuleKind::relative_variance};
    c.rule = {kinds[static_cast<std::size_t>(unit(rng) * 5.0) % 5], {}};
    return c;
}

}  // namespace dlms::fx
