#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dlms/combiners.hpp"
#include "dlms/curve.hpp"
#include "dlms/errors.hpp"
#include "dlms/rng.hpp"
#include "dlms/theory.hpp"
#include "dlms/topology.hpp"

namespace dlms {

/// Draws the regressors of all nodes for one iteration. Each of the M
/// dimensions is an independent N-variate Gaussian with the spatial
/// covariance; the symmetric square root of that covariance is computed once.
class RegressorSampler {
public:
    /// Throws ValidationError naming the smallest eigenvalue if the
    /// covariance is not positive semidefinite.
    RegressorSampler(std::span<const NodeProfile> profiles, const SpatialCorrelation& corr,
                     std::size_t m);

    /// N x M, row k is node k's regressor. Normals are drawn dimension by
    /// dimension, node index fastest.
    void sample(Rng& rng, Eigen::MatrixXd& out) const;
    Eigen::MatrixXd sample(Rng& rng) const;

    const Eigen::MatrixXd& factor() const noexcept { return sqrt_cov_; }

private:
    Eigen::MatrixXd sqrt_cov_;
    std::size_t m_;
};

Eigen::MatrixXd sample_regressors(std::span<const NodeProfile> profiles,
                                  const SpatialCorrelation& corr, std::size_t m, Rng& rng);

/// One combine-then-adapt iteration. `weights` is N x M and is overwritten
/// with w_{k,i+1}:
///   phi_k = sum_l a_{k,l} w_l,  e_k = v_k + (w_o - phi_k)^T u_k,
///   w_k  <- phi_k + mu_k e_k u_k
void diffusion_step(std::span<const WeightRow> rows, std::span<const NodeProfile> profiles,
                    const TrueParameter& w_o, const Eigen::MatrixXd& regressors,
                    const Eigen::VectorXd& noise, Eigen::MatrixXd& weights);

struct DiffusionProblem {
    Topology topo;
    std::vector<NodeProfile> profiles;
    SpatialCorrelation corr;
    TrueParameter w_o;
    CombiningRule rule;
    ErrorModel errors;
};

struct RunOptions {
    std::size_t iters = 1000;
    std::size_t runs = 1;
    std::uint64_t seed = 1;
    /// Worker threads; the result does not depend on this value.
    std::size_t threads = 1;
    /// Also accumulate the run-averaged weight vectors.
    bool track_mean = false;
};

struct DiffusionResult {
    LearningCurve curve;
    /// (iters+1) x N, ||mean over runs of w_{k,i} - w_o||; only with track_mean.
    Eigen::MatrixXd mean_deviation;
};

/// Runs are independent: run r draws failures, regressors and noise from
/// generators seeded by derive_seed(seed, r, stream). Runs are reduced in
/// fixed blocks in run order, so the output is bit-identical for any thread
/// count.
DiffusionResult run_diffusion(const DiffusionProblem& problem, const RunOptions& options);

struct SteadyStateEstimate {
    Eigen::VectorXd local;
    double global = 0.0;
};

/// Mean of the last `window` samples of each node's curve.
SteadyStateEstimate steady_state_estimate(const LearningCurve& curve, std::size_t window);

}  // namespace dlms
