#include "dlms/theory.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "dlms/error.hpp"
#include "dlms/rng.hpp"

namespace dlms {

void validate_profiles(std::span<const NodeProfile> profiles) {
    for (std::size_t k = 0; k < profiles.size(); ++k) {
        const auto& p = profiles[k];
        const auto node = "node " + std::to_string(k + 1);
        if (!(p.mu > 0.0)) {
            throw ValidationError(node + ": step size mu = " + std::to_string(p.mu) +
                                  " must be positive (mean bound 0 < mu < 2/sigma_u^2)");
        }
        if (!(p.sigma_u2 > 0.0)) {
            throw ValidationError(node + ": regressor variance must be positive");
        }
        if (!(p.sigma_v2 >= 0.0)) {
            throw ValidationError(node + ": noise variance must be non-negative");
        }
    }
}

std::vector<double> noise_variances(std::span<const NodeProfile> profiles) {
    std::vector<double> v(profiles.size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = profiles[k].sigma_v2;
    return v;
}

// ---------------------------------------------------------------------------

SpatialCorrelation SpatialCorrelation::exponential(double rho) {
    if (!(rho >= 0.0 && rho < 1.0)) {
        throw ValidationError("correlation base rho = " + std::to_string(rho) +
                              " outside [0,1)");
    }
    SpatialCorrelation c;
    c.base_ = rho;
    return c;
}

SpatialCorrelation SpatialCorrelation::explicit_matrix(Eigen::MatrixXd indices) {
    if (indices.rows() != indices.cols()) throw ValidationError("correlation matrix not square");
    for (Eigen::Index i = 0; i < indices.rows(); ++i) {
        if (indices(i, i) != 1.0) throw ValidationError("correlation matrix diagonal must be 1");
        for (Eigen::Index j = 0; j < indices.cols(); ++j) {
            if (indices(i, j) != indices(j, i))
                throw ValidationError("correlation matrix not symmetric");
        }
    }
    SpatialCorrelation c;
    c.base_.reset();
    c.matrix_ = std::move(indices);
    return c;
}

double SpatialCorrelation::index(NodeId k, NodeId l) const {
    if (base_) {
        if (k == l) return 1.0;
        const auto d = k > l ? k - l : l - k;
        return std::pow(*base_, static_cast<double>(d));
    }
    return matrix_(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l));
}

Eigen::MatrixXd SpatialCorrelation::indices(std::size_t n) const {
    if (!base_ && static_cast<std::size_t>(matrix_.rows()) != n) {
        throw ValidationError("correlation matrix is " + std::to_string(matrix_.rows()) +
                              "x" + std::to_string(matrix_.rows()) + ", network has " +
                              std::to_string(n) + " nodes");
    }
    const auto sz = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd r(sz, sz);
    for (Eigen::Index k = 0; k < sz; ++k)
        for (Eigen::Index l = 0; l < sz; ++l)
            r(k, l) = index(static_cast<NodeId>(k), static_cast<NodeId>(l));
    return r;
}

Eigen::MatrixXd SpatialCorrelation::covariance(std::span<const NodeProfile> profiles) const {
    Eigen::MatrixXd c = indices(profiles.size());
    for (Eigen::Index k = 0; k < c.rows(); ++k)
        for (Eigen::Index l = 0; l < c.cols(); ++l)
            c(k, l) *= std::sqrt(profiles[static_cast<std::size_t>(k)].sigma_u2 *
                                 profiles[static_cast<std::size_t>(l)].sigma_u2);
    return c;
}

TrueParameter TrueParameter::normalized_ones(std::size_t m) {
    if (m < 1) throw ValidationError("regressor length M must be at least 1");
    const auto sz = static_cast<Eigen::Index>(m);
    return {Eigen::VectorXd::Constant(sz, 1.0 / std::sqrt(static_cast<double>(m)))};
}

// ---------------------------------------------------------------------------

ScalarCoefficients scalar_coefficients(std::span<const NodeProfile> profiles,
                                       const SpatialCorrelation& corr, std::size_t m) {
    validate_profiles(profiles);
    if (m < 1) throw ValidationError("regressor length M must be at least 1");
    const auto n = static_cast<Eigen::Index>(profiles.size());
    const Eigen::MatrixXd cov = corr.covariance(profiles);
    const double md = static_cast<double>(m);

    ScalarCoefficients c;
    c.m = m;
    c.rho.resize(n);
    c.eps.resize(n);
    c.c_v.resize(n);
    c.eta.resize(n, n);
    c.nu.resize(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto& p = profiles[static_cast<std::size_t>(k)];
        c.eps(k) = p.mu * p.sigma_u2;
        c.rho(k) = 1.0 - c.eps(k);
        c.c_v(k) = md * p.mu * p.mu * p.sigma_u2 * p.sigma_v2;
    }
    for (Eigen::Index k = 0; k < n; ++k) {
        for (Eigen::Index l = 0; l < n; ++l) {
            const auto& pk = profiles[static_cast<std::size_t>(k)];
            const auto& pl = profiles[static_cast<std::size_t>(l)];
            const double cross4 = cov(k, l) * cov(k, l);
            // k == l reduces to nu_k = mu_k^2 (M+2) sigma_u_k^4
            c.nu(k, l) = pk.mu * pl.mu * (pk.sigma_u2 * pl.sigma_u2 + (md + 1.0) * cross4);
            c.eta(k, l) = 1.0 - (c.eps(k) + c.eps(l)) + c.nu(k, l);
        }
    }
    return c;
}

// ---------------------------------------------------------------------------

PairIndex::PairIndex(std::size_t n) : n_(n), lookup_(n * n) {
    pairs_.reserve(n * (n + 1) / 2);
    for (NodeId k = 0; k < n; ++k) pairs_.emplace_back(k, k);
    for (NodeId k = 0; k < n; ++k)
        for (NodeId l = k + 1; l < n; ++l) pairs_.emplace_back(k, l);
    for (std::size_t i = 0; i < pairs_.size(); ++i) {
        const auto [k, l] = pairs_[i];
        lookup_[k * n + l] = i;
        lookup_[l * n + k] = i;
    }
}

std::size_t PairIndex::index(NodeId k, NodeId l) const {
    if (k >= n_ || l >= n_) throw ValidationError("pair index out of range");
    return lookup_[k * n_ + l];
}

// ---------------------------------------------------------------------------

namespace {

void check_moment_inputs(const Topology& topo, const ErrorModel& errors) {
    if (errors.size() != topo.size()) {
        throw ValidationError("error model size does not match topology");
    }
}

// Exact distribution of one node's weight row over all failure patterns of
// its in-links: accumulates E[a_{k,.}] and E[a_{k,m} a_{k,n}].
void enumerate_node(const CombiningRule& rule, const Topology& topo, const ErrorModel& errors,
                    std::span<const double> noise_vars, NodeId k, std::size_t max_links,
                    Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> abar_row, Eigen::MatrixXd& self_second) {
    const auto& nb = topo.neighborhood(k);
    std::vector<NodeId> others;
    for (NodeId l : nb)
        if (l != k) others.push_back(l);
    const std::size_t d = others.size();
    if (d > max_links) {
        throw ValidationError("enumeration too large, use monte_carlo: node " +
                              std::to_string(k + 1) + " has " + std::to_string(d) +
                              " in-links (2^" + std::to_string(d) + " failure patterns, limit 2^" +
                              std::to_string(max_links) + ")");
    }

    std::vector<NodeId> set;
    set.reserve(d + 1);
    const std::uint64_t patterns = std::uint64_t{1} << d;
    for (std::uint64_t mask = 0; mask < patterns; ++mask) {
        double prob = 1.0;
        for (std::size_t b = 0; b < d && prob > 0.0; ++b) {
            const double fail = errors.failure(k, others[b]);
            prob *= (mask >> b) & 1U ? 1.0 - fail : fail;
        }
        if (prob == 0.0) continue;

        set.clear();
        for (NodeId l : nb) {
            if (l == k) {
                set.push_back(k);
                continue;
            }
            const auto b = static_cast<std::size_t>(
                std::lower_bound(others.begin(), others.end(), l) - others.begin());
            if ((mask >> b) & 1U) set.push_back(l);
        }
        const WeightRow row = combine_weights(rule, topo, noise_vars, k, set);
        for (std::size_t i = 0; i < row.members.size(); ++i) {
            const auto m = static_cast<Eigen::Index>(row.members[i]);
            abar_row(m) += prob * row.weights[i];
            for (std::size_t j = 0; j < row.members.size(); ++j) {
                self_second(m, static_cast<Eigen::Index>(row.members[j])) +=
                    prob * row.weights[i] * row.weights[j];
            }
        }
    }
}

WeightMoments exact_moments(const CombiningRule& rule, const Topology& topo,
                            const ErrorModel& errors, std::span<const double> noise_vars,
                            const MomentOptions& options) {
    const std::size_t n = topo.size();
    const auto sz = static_cast<Eigen::Index>(n);
    WeightMoments w;
    w.mode = MomentMode::exact;
    w.pairs = PairIndex(n);
    w.abar = Eigen::MatrixXd::Zero(sz, sz);
    w.second.assign(w.pairs.size(), Eigen::MatrixXd::Zero(sz, sz));

    for (NodeId k = 0; k < n; ++k) {
        enumerate_node(rule, topo, errors, noise_vars, k, options.max_enumerated_links,
                       w.abar.row(static_cast<Eigen::Index>(k)), w.second[w.pairs.index(k, k)]);
    }
    for (std::size_t i = n; i < w.pairs.size(); ++i) {
        const auto [k, l] = w.pairs.pair(i);
        w.second[i] = w.abar.row(static_cast<Eigen::Index>(k)).transpose() *
                      w.abar.row(static_cast<Eigen::Index>(l));
    }
    return w;
}

WeightMoments sampled_moments(const CombiningRule& rule, const Topology& topo,
                              const ErrorModel& errors, std::span<const double> noise_vars,
                              const MomentOptions& options) {
    if (options.samples < 2) throw ValidationError("monte_carlo moments need at least 2 samples");
    const std::size_t n = topo.size();
    const auto sz = static_cast<Eigen::Index>(n);
    WeightMoments w;
    w.mode = MomentMode::monte_carlo;
    w.samples = options.samples;
    w.seed = options.seed;
    w.pairs = PairIndex(n);

    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(sz, sz);
    Eigen::MatrixXd sum2 = Eigen::MatrixXd::Zero(sz, sz);
    std::vector<Eigen::MatrixXd> psum(w.pairs.size(), Eigen::MatrixXd::Zero(sz, sz));
    std::vector<Eigen::MatrixXd> psum2(w.pairs.size(), Eigen::MatrixXd::Zero(sz, sz));

    Rng rng(options.seed);
    SuccessSets sets;
    std::vector<WeightRow> rows(n);
    for (std::size_t s = 0; s < options.samples; ++s) {
        sample_success_sets(errors, topo, rng, sets);
        for (NodeId k = 0; k < n; ++k) {
            rows[k] = combine_weights(rule, topo, noise_vars, k, sets.members[k]);
            const auto& r = rows[k];
            for (std::size_t i = 0; i < r.members.size(); ++i) {
                const auto m = static_cast<Eigen::Index>(r.members[i]);
                sum(static_cast<Eigen::Index>(k), m) += r.weights[i];
                sum2(static_cast<Eigen::Index>(k), m) += r.weights[i] * r.weights[i];
            }
        }
        for (std::size_t p = 0; p < w.pairs.size(); ++p) {
            const auto [k, l] = w.pairs.pair(p);
            const auto& rk = rows[k];
            const auto& rl = rows[l];
            for (std::size_t i = 0; i < rk.members.size(); ++i) {
                const auto m = static_cast<Eigen::Index>(rk.members[i]);
                for (std::size_t j = 0; j < rl.members.size(); ++j) {
                    const auto nn = static_cast<Eigen::Index>(rl.members[j]);
                    const double v = rk.weights[i] * rl.weights[j];
                    psum[p](m, nn) += v;
                    psum2[p](m, nn) += v * v;
                }
            }
        }
    }

    const double cnt = static_cast<double>(options.samples);
    auto standard_error = [cnt](const Eigen::MatrixXd& s1, const Eigen::MatrixXd& s2) {
        Eigen::MatrixXd var = (s2 - s1.cwiseProduct(s1) / cnt) / (cnt - 1.0);
        return Eigen::MatrixXd(var.cwiseMax(0.0).cwiseSqrt() / std::sqrt(cnt));
    };
    w.abar = sum / cnt;
    w.abar_se = standard_error(sum, sum2);
    w.second.resize(w.pairs.size());
    w.second_se.resize(w.pairs.size());
    for (std::size_t p = 0; p < w.pairs.size(); ++p) {
        w.second[p] = psum[p] / cnt;
        w.second_se[p] = standard_error(psum[p], psum2[p]);
    }
    return w;
}

}  // namespace

WeightMoments weight_moments(const CombiningRule& rule, const Topology& topo,
                             const ErrorModel& errors, std::span<const double> noise_vars,
                             const MomentOptions& options) {
    check_moment_inputs(topo, errors);
    return options.mode == MomentMode::exact
               ? exact_moments(rule, topo, errors, noise_vars, options)
               : sampled_moments(rule, topo, errors, noise_vars, options);
}

// ---------------------------------------------------------------------------

MomentSystem build_moment_system(const ScalarCoefficients& coeffs, const WeightMoments& moments) {
    const std::size_t n = coeffs.nodes();
    if (moments.pairs.nodes() != n || static_cast<std::size_t>(moments.abar.rows()) != n) {
        throw ValidationError("weight moments and coefficients disagree on the node count");
    }
    const auto sz = static_cast<Eigen::Index>(n);
    const PairIndex& pairs = moments.pairs;
    const auto q = static_cast<Eigen::Index>(pairs.size());

    MomentSystem s;
    s.pairs = pairs;
    s.cprime = Eigen::MatrixXd::Zero(q, q);
    s.c_om = Eigen::MatrixXd::Zero(q, sz);
    s.nu = Eigen::VectorXd::Zero(q);
    s.cv = Eigen::VectorXd::Zero(q);
    s.eta = Eigen::VectorXd::Zero(q);

    for (Eigen::Index r = 0; r < q; ++r) {
        const auto [k, l] = pairs.pair(static_cast<std::size_t>(r));
        const auto ki = static_cast<Eigen::Index>(k);
        const auto li = static_cast<Eigen::Index>(l);
        const double eta = coeffs.eta(ki, li);
        const double nu = coeffs.nu(ki, li);
        const Eigen::MatrixXd& e = moments.second[static_cast<std::size_t>(r)];

        for (Eigen::Index c = 0; c < q; ++c) {
            const auto [m, nn] = pairs.pair(static_cast<std::size_t>(c));
            const auto mi = static_cast<Eigen::Index>(m);
            const auto ni = static_cast<Eigen::Index>(nn);
            // unordered (m,n) collects both a_{k,m} a_{l,n} and a_{k,n} a_{l,m}
            const double w = m == nn ? e(mi, mi) : e(mi, ni) + e(ni, mi);
            s.cprime(r, c) = eta * w;
        }
        for (Eigen::Index m = 0; m < sz; ++m) {
            s.c_om(r, m) = moments.abar(ki, m) * (coeffs.eps(li) - nu) +
                           moments.abar(li, m) * (coeffs.eps(ki) - nu);
        }
        s.nu(r) = nu;
        s.eta(r) = eta;
        if (k == l) s.cv(r) = coeffs.c_v(ki);
    }
    s.mean_matrix = coeffs.rho.asDiagonal() * moments.abar;
    s.mean_drive = coeffs.eps;
    return s;
}

// ---------------------------------------------------------------------------

namespace {

double max_abs_eigenvalue(const Eigen::MatrixXd& m) {
    if (m.size() == 0) return 0.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

MsdReport steady_state_msd(const MomentSystem& system, const TrueParameter& w_o) {
    const auto q = static_cast<Eigen::Index>(system.q());
    const auto n = static_cast<Eigen::Index>(system.nodes());

    MsdReport rep;
    rep.spectral_radius = max_abs_eigenvalue(system.cprime);
    if (!(rep.spectral_radius < 1.0)) {
        throw UnstableError("mean-square unstable configuration: spectral radius of C' = " +
                                std::to_string(rep.spectral_radius),
                            rep.spectral_radius);
    }

    const Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(q, q) - system.cprime;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(lhs);
    if (lu.rcond() < 1e-12) {
        throw UnstableError("mean-square unstable configuration: I - C' is singular (rcond " +
                                std::to_string(lu.rcond()) + ")",
                            rep.spectral_radius);
    }
    const Eigen::VectorXd y = lu.solve(system.cv);

    rep.local = y.head(n);
    rep.global = rep.local.mean();
    rep.w_ss_norm = rep.local.array() + w_o.norm2();

    // The ||w_o||^2 term of the steady state collapses only if the mean
    // system is nonsingular; flag configurations where that is doubtful.
    // Scale-free test: reciprocal condition of the substituted matrix.
    if (n > 0) {
        Eigen::MatrixXd aux = Eigen::MatrixXd::Identity(n, n) - system.mean_matrix;
        aux.col(0) = system.mean_drive;
        if (Eigen::PartialPivLU<Eigen::MatrixXd>(aux).rcond() < 1e-12) {
            rep.warnings.emplace_back(
                "mean system with the drive column substituted is numerically singular; "
                "the ||w_o||^2 reduction may not hold");
        }
    }
    return rep;
}

std::vector<Eigen::MatrixXd> mean_trajectory(const Eigen::MatrixXd& abar,
                                             const ScalarCoefficients& coeffs,
                                             const TrueParameter& w_o, std::size_t iters,
                                             const Eigen::MatrixXd& init) {
    const auto n = static_cast<Eigen::Index>(coeffs.nodes());
    const auto m = static_cast<Eigen::Index>(w_o.size());
    if (abar.rows() != n || abar.cols() != n) throw ValidationError("abar has wrong shape");
    if (init.rows() != n || init.cols() != m) throw ValidationError("initial weights have wrong shape");

    // Iterated on deviations from w_o: with unit row sums the drive
    // mu_k sigma_u_k^2 w_o cancels exactly.
    const Eigen::MatrixXd e = coeffs.rho.asDiagonal() * abar;
    const Eigen::RowVectorXd wo = w_o.w_o.transpose();
    Eigen::MatrixXd dev = init.rowwise() - wo;

    std::vector<Eigen::MatrixXd> out;
    out.reserve(iters + 1);
    out.push_back(init);
    for (std::size_t i = 0; i < iters; ++i) {
        dev = e * dev;
        out.push_back(dev.rowwise() + wo);
    }
    return out;
}

LearningCurve transient_theory_curve(const MomentSystem& system, const TrueParameter& w_o,
                                     std::size_t iters,
                                     const std::optional<Eigen::MatrixXd>& init) {
    const auto n = static_cast<Eigen::Index>(system.nodes());
    const auto q = static_cast<Eigen::Index>(system.q());
    const auto m = static_cast<Eigen::Index>(w_o.size());
    const Eigen::MatrixXd w0 = init ? *init : Eigen::MatrixXd::Zero(n, m);
    if (w0.rows() != n || w0.cols() != m) throw ValidationError("initial weights have wrong shape");

    // x = E[w_k^T w_l] - ||w_o||^2 and dev = E[w_k] - w_o. In these
    // coordinates the ||w_o||^2 drive cancels and the state decays to the
    // fixed point (I - C')^{-1} c_v without cancellation error.
    const double norm2 = w_o.norm2();
    const Eigen::RowVectorXd wo = w_o.w_o.transpose();
    Eigen::MatrixXd dev = w0.rowwise() - wo;
    Eigen::VectorXd x(q);
    for (Eigen::Index r = 0; r < q; ++r) {
        const auto [k, l] = system.pairs.pair(static_cast<std::size_t>(r));
        x(r) = w0.row(static_cast<Eigen::Index>(k)).dot(w0.row(static_cast<Eigen::Index>(l))) - norm2;
    }

    LearningCurve curve;
    curve.local.resize(static_cast<Eigen::Index>(iters) + 1, n);
    for (std::size_t i = 0;; ++i) {
        const Eigen::VectorXd g = dev * w_o.w_o;  // w_o^T E[w_m] - ||w_o||^2
        curve.local.row(static_cast<Eigen::Index>(i)) = (x.head(n) - 2.0 * g).transpose();
        if (i == iters) break;
        x = system.cprime * x + system.c_om * g + system.cv;
        dev = system.mean_matrix * dev;
    }
    curve.global = curve.local.rowwise().mean();
    return curve;
}

// ---------------------------------------------------------------------------

void write_msd_csv(std::ostream& out, const MsdReport& report) {
    out << "node,msd_linear,msd_db\n" << std::setprecision(17);
    for (Eigen::Index k = 0; k < report.local.size(); ++k) {
        out << (k + 1) << ',' << report.local(k) << ',' << to_db(report.local(k)) << '\n';
    }
    out << "global," << report.global << ',' << report.global_db() << '\n';
}

void write_moment_system(std::ostream& out, const MomentSystem& system) {
    out << "#";
    for (std::size_t i = 0; i < system.q(); ++i) {
        const auto [k, l] = system.pairs.pair(i);
        out << ' ' << (k + 1) << '-' << (l + 1);
    }
    out << '\n' << std::setprecision(17);
    for (Eigen::Index r = 0; r < system.cprime.rows(); ++r) {
        for (Eigen::Index c = 0; c < system.cprime.cols(); ++c) {
            if (c) out << ' ';
            out << system.cprime(r, c);
        }
        out << '\n';
    }
}

}  // namespace dlms
