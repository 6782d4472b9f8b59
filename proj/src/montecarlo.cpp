#include "dlms/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include <Eigen/Eigenvalues>

#include "dlms/error.hpp"

namespace dlms {

RegressorSampler::RegressorSampler(std::span<const NodeProfile> profiles,
                                   const SpatialCorrelation& corr, std::size_t m)
    : m_(m) {
    if (m < 1) throw ValidationError("regressor length M must be at least 1");
    const Eigen::MatrixXd cov = corr.covariance(profiles);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const Eigen::VectorXd ev = es.eigenvalues();
    const double smallest = ev.size() ? ev.minCoeff() : 0.0;
    const double largest = ev.size() ? ev.cwiseAbs().maxCoeff() : 0.0;
    if (smallest < -1e-10 * std::max(1.0, largest)) {
        throw ValidationError("regressor covariance is not positive semidefinite: smallest "
                              "eigenvalue " + std::to_string(smallest));
    }
    sqrt_cov_ = es.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                es.eigenvectors().transpose();
}

void RegressorSampler::sample(Rng& rng, Eigen::MatrixXd& out) const {
    const auto n = sqrt_cov_.rows();
    const auto m = static_cast<Eigen::Index>(m_);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd z(n, m);
    for (Eigen::Index j = 0; j < m; ++j)
        for (Eigen::Index k = 0; k < n; ++k) z(k, j) = normal(rng);
    out.noalias() = sqrt_cov_ * z;
}

Eigen::MatrixXd RegressorSampler::sample(Rng& rng) const {
    Eigen::MatrixXd out;
    sample(rng, out);
    return out;
}

Eigen::MatrixXd sample_regressors(std::span<const NodeProfile> profiles,
                                  const SpatialCorrelation& corr, std::size_t m, Rng& rng) {
    return RegressorSampler(profiles, corr, m).sample(rng);
}

namespace {

void step_impl(std::span<const WeightRow* const> rows, std::span<const NodeProfile> profiles,
               const Eigen::VectorXd& w_o, const Eigen::MatrixXd& u, const Eigen::VectorXd& v,
               Eigen::MatrixXd& w, Eigen::MatrixXd& phi) {
    const auto n = w.rows();
    phi.setZero(n, w.cols());
    for (Eigen::Index k = 0; k < n; ++k) {
        const WeightRow& r = *rows[static_cast<std::size_t>(k)];
        for (std::size_t i = 0; i < r.members.size(); ++i)
            phi.row(k) += r.weights[i] * w.row(static_cast<Eigen::Index>(r.members[i]));
    }
    for (Eigen::Index k = 0; k < n; ++k) {
        const double d = v(k) + u.row(k).dot(w_o);
        const double e = d - phi.row(k).dot(u.row(k));
        w.row(k) = phi.row(k) + profiles[static_cast<std::size_t>(k)].mu * e * u.row(k);
    }
}

// Weight rows for every failure pattern of small neighborhoods, built once
// and shared read-only by all runs.
class RowTable {
public:
    static constexpr std::size_t kMaxCachedLinks = 10;

    RowTable(const DiffusionProblem& p, std::span<const double> noise_vars)
        : problem_(p), noise_vars_(noise_vars.begin(), noise_vars.end()) {
        const std::size_t n = p.topo.size();
        others_.resize(n);
        table_.resize(n);
        for (NodeId k = 0; k < n; ++k) {
            for (NodeId l : p.topo.neighborhood(k))
                if (l != k) others_[k].push_back(l);
            const std::size_t d = others_[k].size();
            if (d > kMaxCachedLinks) continue;
            table_[k].reserve(std::size_t{1} << d);
            std::vector<NodeId> set;
            for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask) {
                set.clear();
                for (NodeId l : p.topo.neighborhood(k)) {
                    if (l == k) set.push_back(k);
                    else if ((mask >> position(k, l)) & 1U) set.push_back(l);
                }
                table_[k].push_back(combine_weights(p.rule, p.topo, noise_vars_, k, set));
            }
        }
    }

    // Row for the realized success set; `scratch` is used for large
    // neighborhoods.
    const WeightRow* lookup(NodeId k, const std::vector<NodeId>& set, WeightRow& scratch) const {
        if (table_[k].empty()) {
            scratch = combine_weights(problem_.rule, problem_.topo, noise_vars_, k, set);
            return &scratch;
        }
        std::size_t mask = 0;
        for (NodeId l : set)
            if (l != k) mask |= std::size_t{1} << position(k, l);
        return &table_[k][mask];
    }

private:
    std::size_t position(NodeId k, NodeId l) const {
        const auto& o = others_[k];
        return static_cast<std::size_t>(std::lower_bound(o.begin(), o.end(), l) - o.begin());
    }

    const DiffusionProblem& problem_;
    std::vector<double> noise_vars_;
    std::vector<std::vector<NodeId>> others_;
    std::vector<std::vector<WeightRow>> table_;
};

struct Accumulator {
    Eigen::MatrixXd msd;         // (iters+1) x N
    std::vector<Eigen::MatrixXd> mean;  // per iteration, N x M (track_mean only)
};

void run_one(const DiffusionProblem& p, const RowTable& table, const RegressorSampler& sampler,
             const RunOptions& opt, std::uint64_t run, Accumulator& acc) {
    const std::size_t n = p.topo.size();
    const auto ni = static_cast<Eigen::Index>(n);
    const auto m = static_cast<Eigen::Index>(p.w_o.size());
    Rng fail_rng = make_rng(opt.seed, run, Stream::failures);
    Rng reg_rng = make_rng(opt.seed, run, Stream::regressors);
    Rng noise_rng = make_rng(opt.seed, run, Stream::noise);
    std::normal_distribution<double> normal;

    std::vector<double> sigma_v(n);
    for (std::size_t k = 0; k < n; ++k) sigma_v[k] = std::sqrt(p.profiles[k].sigma_v2);

    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(ni, m);
    Eigen::MatrixXd phi(ni, m);
    Eigen::MatrixXd u(ni, m);
    Eigen::VectorXd v(ni);
    SuccessSets sets;
    std::vector<WeightRow> scratch(n);
    std::vector<const WeightRow*> rows(n);
    const Eigen::RowVectorXd wo = p.w_o.w_o.transpose();

    auto record = [&](std::size_t i) {
        const auto row = static_cast<Eigen::Index>(i);
        acc.msd.row(row) += (w.rowwise() - wo).rowwise().squaredNorm().transpose();
        if (opt.track_mean) acc.mean[i] += w;
    };

    record(0);
    for (std::size_t i = 0; i < opt.iters; ++i) {
        sample_success_sets(p.errors, p.topo, fail_rng, sets);
        for (NodeId k = 0; k < n; ++k) rows[k] = table.lookup(k, sets.members[k], scratch[k]);
        sampler.sample(reg_rng, u);
        for (std::size_t k = 0; k < n; ++k) v(static_cast<Eigen::Index>(k)) = sigma_v[k] * normal(noise_rng);
        step_impl(rows, p.profiles, p.w_o.w_o, u, v, w, phi);
        record(i + 1);
    }
}

}  // namespace

void diffusion_step(std::span<const WeightRow> rows, std::span<const NodeProfile> profiles,
                    const TrueParameter& w_o, const Eigen::MatrixXd& regressors,
                    const Eigen::VectorXd& noise, Eigen::MatrixXd& weights) {
    const auto n = weights.rows();
    if (static_cast<Eigen::Index>(rows.size()) != n ||
        static_cast<Eigen::Index>(profiles.size()) != n || regressors.rows() != n ||
        regressors.cols() != weights.cols() || noise.size() != n ||
        w_o.w_o.size() != weights.cols()) {
        throw ValidationError("diffusion_step: inconsistent dimensions");
    }
    std::vector<const WeightRow*> ptrs;
    ptrs.reserve(rows.size());
    for (const auto& r : rows) ptrs.push_back(&r);
    Eigen::MatrixXd phi;
    step_impl(ptrs, profiles, w_o.w_o, regressors, noise, weights, phi);
}

DiffusionResult run_diffusion(const DiffusionProblem& p, const RunOptions& opt) {
    if (opt.iters < 1 || opt.runs < 1) throw ValidationError("iters and runs must be at least 1");
    const std::size_t n = p.topo.size();
    if (p.profiles.size() != n) throw ValidationError("one node profile per node is required");
    if (p.errors.size() != n) throw ValidationError("error model size does not match topology");
    validate_profiles(p.profiles);

    const auto noise_vars = noise_variances(p.profiles);
    const RowTable table(p, noise_vars);
    const RegressorSampler sampler(p.profiles, p.corr, p.w_o.size());

    constexpr std::size_t kBlock = 8;
    const std::size_t blocks = (opt.runs + kBlock - 1) / kBlock;
    const auto ni = static_cast<Eigen::Index>(n);
    const auto rows = static_cast<Eigen::Index>(opt.iters) + 1;
    std::vector<Accumulator> acc(blocks);
    for (auto& a : acc) {
        a.msd = Eigen::MatrixXd::Zero(rows, ni);
        if (opt.track_mean)
            a.mean.assign(opt.iters + 1,
                          Eigen::MatrixXd::Zero(ni, static_cast<Eigen::Index>(p.w_o.size())));
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t b; (b = next.fetch_add(1)) < blocks;) {
            const std::size_t end = std::min(opt.runs, (b + 1) * kBlock);
            for (std::size_t r = b * kBlock; r < end; ++r) run_one(p, table, sampler, opt, r, acc[b]);
        }
    };
    const std::size_t nthreads = std::max<std::size_t>(1, std::min(opt.threads, blocks));
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    DiffusionResult res;
    res.curve.local = Eigen::MatrixXd::Zero(rows, ni);
    for (const auto& a : acc) res.curve.local += a.msd;
    res.curve.local /= static_cast<double>(opt.runs);
    res.curve.global = res.curve.local.rowwise().mean();
    res.curve.runs = opt.runs;
    res.curve.seed = opt.seed;

    if (opt.track_mean) {
        res.mean_deviation.resize(rows, ni);
        const Eigen::RowVectorXd wo = p.w_o.w_o.transpose();
        for (std::size_t i = 0; i <= opt.iters; ++i) {
            Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(ni, static_cast<Eigen::Index>(p.w_o.size()));
            for (const auto& a : acc) mean += a.mean[i];
            mean /= static_cast<double>(opt.runs);
            res.mean_deviation.row(static_cast<Eigen::Index>(i)) =
                (mean.rowwise() - wo).rowwise().norm().transpose();
        }
    }
    return res;
}

SteadyStateEstimate steady_state_estimate(const LearningCurve& curve, std::size_t window) {
    if (window < 1 || window > curve.samples()) {
        throw ValidationError("steady-state window " + std::to_string(window) +
                              " must be between 1 and the curve length " +
                              std::to_string(curve.samples()));
    }
    SteadyStateEstimate est;
    est.local = curve.local.bottomRows(static_cast<Eigen::Index>(window)).colwise().mean().transpose();
    est.global = est.local.mean();
    return est;
}

}  // namespace dlms
