#pragma once

// Closed-form mean and mean-square analysis of combine-then-adapt diffusion
// LMS whose combination step loses neighbor estimates at random.
//
// The second-order state is the vector of cross moments E[w_k^T w_l] over the
// Q = N(N+1)/2 unordered node pairs, ordered {11, ..., NN, 12, ..., 1N, 23,
// ..., (N-1)N}. Under the usual independence assumption it evolves as
//
//   y_{i+1} = C' y_i + C_o (w_o^T E[w_i]) + nu ||w_o||^2 + c_v
//
// and the steady-state deviation of node k is entry kk of (I - C')^{-1} c_v.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dlms/combiners.hpp"
#include "dlms/curve.hpp"
#include "dlms/errors.hpp"
#include "dlms/topology.hpp"

namespace dlms {

struct NodeProfile {
    double mu = 0.0;        // step size
    double sigma_u2 = 0.0;  // regressor variance
    double sigma_v2 = 0.0;  // measurement noise variance
};

/// Throws ValidationError unless mu > 0, sigma_u2 > 0, sigma_v2 >= 0.
void validate_profiles(std::span<const NodeProfile> profiles);
std::vector<double> noise_variances(std::span<const NodeProfile> profiles);

/// Spatial correlation indices rho_{kl} between node regressors.
class SpatialCorrelation {
public:
    SpatialCorrelation() = default;

    /// rho_{kl} = rho^|k-l| by node index, regardless of links.
    static SpatialCorrelation exponential(double rho);
    /// Explicit symmetric index matrix with unit diagonal.
    static SpatialCorrelation explicit_matrix(Eigen::MatrixXd indices);

    double index(NodeId k, NodeId l) const;
    Eigen::MatrixXd indices(std::size_t n) const;

    /// N x N per-dimension covariance: diagonal sigma_u2, off-diagonal
    /// rho_{kl} sigma_{u_k} sigma_{u_l}.
    Eigen::MatrixXd covariance(std::span<const NodeProfile> profiles) const;

    std::optional<double> base() const noexcept { return base_; }

private:
    std::optional<double> base_ = 0.0;
    Eigen::MatrixXd matrix_;
};

struct TrueParameter {
    Eigen::VectorXd w_o;

    /// col{1, ..., 1} / sqrt(M).
    static TrueParameter normalized_ones(std::size_t m);

    std::size_t size() const noexcept { return static_cast<std::size_t>(w_o.size()); }
    double norm2() const { return w_o.squaredNorm(); }
};

/// Scalar moment coefficients. Pair quantities are stored as symmetric
/// N x N matrices whose diagonal holds the single-node value:
/// eta(k,k) = eta_k, nu(k,k) = nu_k.
struct ScalarCoefficients {
    std::size_t m = 0;
    Eigen::VectorXd rho;  // 1 - mu_k sigma_u_k^2
    Eigen::VectorXd eps;  // mu_k sigma_u_k^2
    Eigen::VectorXd c_v;  // M mu_k^2 sigma_u_k^2 sigma_v_k^2
    Eigen::MatrixXd eta;
    Eigen::MatrixXd nu;

    std::size_t nodes() const noexcept { return static_cast<std::size_t>(rho.size()); }
};

ScalarCoefficients scalar_coefficients(std::span<const NodeProfile> profiles,
                                       const SpatialCorrelation& corr, std::size_t m);

/// Maps unordered pairs (k <= l) to positions 0..Q-1 in the order
/// {11, ..., NN, 12, ..., 1N, 23, ..., (N-1)N}.
class PairIndex {
public:
    PairIndex() = default;
    explicit PairIndex(std::size_t n);

    std::size_t nodes() const noexcept { return n_; }
    std::size_t size() const noexcept { return pairs_.size(); }
    std::size_t index(NodeId k, NodeId l) const;
    std::pair<NodeId, NodeId> pair(std::size_t i) const { return pairs_[i]; }

private:
    std::size_t n_ = 0;
    std::vector<std::pair<NodeId, NodeId>> pairs_;
    std::vector<std::size_t> lookup_;
};

enum class MomentMode { exact, monte_carlo };

struct MomentOptions {
    MomentMode mode = MomentMode::exact;
    std::size_t samples = 0;
    std::uint64_t seed = 0;
    /// Exact mode refuses neighborhoods with more than this many in-links.
    std::size_t max_enumerated_links = 20;

    static MomentOptions monte_carlo(std::size_t samples, std::uint64_t seed) {
        return {MomentMode::monte_carlo, samples, seed, 20};
    }
};

/// First and second moments of the combining weights over the failure
/// ensemble.
struct WeightMoments {
    MomentMode mode = MomentMode::exact;
    std::size_t samples = 0;
    std::uint64_t seed = 0;

    PairIndex pairs;
    Eigen::MatrixXd abar;                 // E[a_{k,l}]
    std::vector<Eigen::MatrixXd> second;  // second[pairs.index(k,l)](m,n) = E[a_{k,m} a_{l,n}], k <= l

    // Standard errors of the estimates; empty in exact mode.
    Eigen::MatrixXd abar_se;
    std::vector<Eigen::MatrixXd> second_se;

    const Eigen::MatrixXd& pair(NodeId k, NodeId l) const { return second[pairs.index(k, l)]; }
};

/// Exact mode enumerates, per node, every failure pattern of its in-links
/// (weights at node k depend only on which links into k succeed). Links into
/// different nodes fail independently, so E[a_{k,m} a_{l,n}] factors as
/// E[a_{k,m}] E[a_{l,n}] for k != l. Monte Carlo mode averages sampled
/// success sets.
WeightMoments weight_moments(const CombiningRule& rule, const Topology& topo,
                             const ErrorModel& errors, std::span<const double> noise_vars,
                             const MomentOptions& options = {});

struct MomentSystem {
    PairIndex pairs;
    Eigen::MatrixXd cprime;    // Q x Q, C'
    Eigen::MatrixXd c_om;      // Q x N, coefficients of w_o^T E[w_m]
    Eigen::VectorXd nu;        // Q, coefficient of ||w_o||^2
    Eigen::VectorXd cv;        // Q, c_v_k on the first N rows, 0 elsewhere
    Eigen::VectorXd eta;       // Q, common row factor eta'_i
    Eigen::MatrixXd mean_matrix;  // N x N, [rho_k abar_{k,l}]
    Eigen::VectorXd mean_drive;   // N, [mu_k sigma_u_k^2]

    std::size_t q() const noexcept { return pairs.size(); }
    std::size_t nodes() const noexcept { return pairs.nodes(); }
};

MomentSystem build_moment_system(const ScalarCoefficients& coeffs, const WeightMoments& moments);

struct MsdReport {
    Eigen::VectorXd local;       // linear
    double global = 0.0;         // mean of local
    double spectral_radius = 0.0;
    Eigen::VectorXd w_ss_norm;   // ||w_o||^2 + MSD_k
    std::vector<std::string> warnings;

    double local_db(NodeId k) const { return to_db(local(static_cast<Eigen::Index>(k))); }
    double global_db() const { return to_db(global); }
};

/// Throws UnstableError if rho(C') >= 1 or (I - C') is numerically singular
/// (reciprocal condition estimate below 1e-12).
MsdReport steady_state_msd(const MomentSystem& system, const TrueParameter& w_o);

/// Per-node mean vectors, N x M (row k is node k), for i = 0..iters.
std::vector<Eigen::MatrixXd> mean_trajectory(const Eigen::MatrixXd& abar,
                                             const ScalarCoefficients& coeffs,
                                             const TrueParameter& w_o, std::size_t iters,
                                             const Eigen::MatrixXd& init);

/// Time-domain iteration of the mean and second-moment recursions.
/// `init` is N x M; zero vectors when omitted.
LearningCurve transient_theory_curve(const MomentSystem& system, const TrueParameter& w_o,
                                     std::size_t iters,
                                     const std::optional<Eigen::MatrixXd>& init = std::nullopt);

/// CSV `node,msd_linear,msd_db` plus a `global` row.
void write_msd_csv(std::ostream& out, const MsdReport& report);
/// Whitespace-separated dense dump of C' with the pair labels as a header.
void write_moment_system(std::ostream& out, const MomentSystem& system);

}  // namespace dlms
