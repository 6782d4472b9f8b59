#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "dlms/error.hpp"
#include "dlms/theory.hpp"
#include "support.hpp"

using namespace dlms;
using fx::brute_force_moments;

namespace {

struct Fixture {
    Topology topo;
    std::vector<NodeProfile> prof;
    double rho;
    ErrorModel errors;
    CombiningRule rule;
};

MomentSystem system_for(const Fixture& f, std::size_t m) {
    const auto coeffs = scalar_coefficients(f.prof, SpatialCorrelation::exponential(f.rho), m);
    const auto mom = weight_moments(f.rule, f.topo, f.errors, noise_variances(f.prof));
    return build_moment_system(coeffs, mom);
}

std::vector<Fixture> fixtures() {
    std::vector<Fixture> out;
    {
        auto t = fx::path(3);
        out.push_back({t, {{0.05, 1.0, 1e-2}, {0.08, 0.7, 1e-3}, {0.03, 1.3, 1e-4}}, 0.0,
                       ErrorModel::uniform(t, 0.3), {RuleKind::relative_degree, {}}});
    }
    {
        auto t = fx::complete(3);
        Eigen::MatrixXd p = Eigen::MatrixXd::Zero(3, 3);
        p << 0, 0.1, 0.7, 0.4, 0, 0.2, 0.9, 0.5, 0;
        out.push_back({t, {{0.05, 1.0, 1e-2}, {0.05, 0.5, 1e-3}, {0.1, 1.0, 5e-3}}, 0.5,
                       ErrorModel(t, p), {RuleKind::relative_variance, {}}});
    }
    {
        auto t = fx::star(4);
        out.push_back({t, fx::same_profiles(4, 0.04, 1.0, 1e-3), 0.9, ErrorModel::uniform(t, 0.6),
                       {RuleKind::metropolis, {}}});
    }
    {
        auto t = fx::graph(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {0, 2}});
        auto e = ErrorModel::uniform(t, 0.25);
        out.push_back({t, {{0.02, 2.0, 1e-3}, {0.06, 1.0, 1e-2}, {0.05, 0.8, 1e-4}, {0.03, 1.0, 1e-3}},
                       0.3, e, CombiningRule::enhanced(e.average_losses(t))});
    }
    return out;
}

}  // namespace

TEST(ScalarCoefficients, Examples) {
    const auto one = scalar_coefficients(fx::same_profiles(1, 0.1, 1.0, 0.01), SpatialCorrelation::exponential(0), 2);
    EXPECT_NEAR(one.eta(0, 0), 0.84, 1e-15);
    EXPECT_NEAR(one.nu(0, 0), 0.04, 1e-15);
    EXPECT_NEAR(one.eps(0), 0.1, 1e-15);
    EXPECT_NEAR(one.rho(0), 0.9, 1e-15);
    EXPECT_NEAR(one.c_v(0), 2 * 0.01 * 0.01, 1e-18);

    const auto two = scalar_coefficients(fx::same_profiles(2, 0.1, 1.0, 0.01), SpatialCorrelation::exponential(0), 2);
    EXPECT_NEAR(two.eta(0, 1), 0.81, 1e-15);
    EXPECT_EQ(two.eta(0, 1), two.eta(1, 0));

    Eigen::MatrixXd full = Eigen::MatrixXd::Ones(2, 2);
    const auto corr = scalar_coefficients(fx::same_profiles(2, 0.1, 1.0, 0.01),
                                          SpatialCorrelation::explicit_matrix(full), 2);
    EXPECT_NEAR(corr.eta(0, 1), 0.84, 1e-15);
}

TEST(SpatialCorrelation, ExponentialIndex) {
    const auto c = SpatialCorrelation::exponential(0.9);
    EXPECT_NEAR(c.index(0, 2), 0.81, 1e-15);
    EXPECT_EQ(c.index(1, 1), 1.0);
    EXPECT_THROW(SpatialCorrelation::exponential(1.0), ValidationError);
    EXPECT_THROW(SpatialCorrelation::exponential(-0.1), ValidationError);
}

TEST(PairIndex, Ordering) {
    const PairIndex idx(3);
    ASSERT_EQ(idx.size(), 6u);
    const std::vector<std::pair<NodeId, NodeId>> expect{{0, 0}, {1, 1}, {2, 2}, {0, 1}, {0, 2}, {1, 2}};
    for (std::size_t i = 0; i < 6; ++i) {
        EXPECT_EQ(idx.pair(i), expect[i]);
        EXPECT_EQ(idx.index(expect[i].first, expect[i].second), i);
        EXPECT_EQ(idx.index(expect[i].second, expect[i].first), i);
    }
}

TEST(WeightMoments, TwoNodeUniformRule) {
    const auto t = fx::path(2);
    const CombiningRule u{RuleKind::uniform, {}};
    const auto ideal = weight_moments(u, t, ErrorModel::uniform(t, 0.0), {});
    EXPECT_TRUE(ideal.abar.isApprox(Eigen::MatrixXd::Constant(2, 2, 0.5)));
    const auto cut = weight_moments(u, t, ErrorModel::uniform(t, 1.0), {});
    EXPECT_TRUE(cut.abar.isApprox(Eigen::MatrixXd::Identity(2, 2)));
    const auto half = weight_moments(u, t, ErrorModel::uniform(t, 0.5), {});
    EXPECT_NEAR(half.pair(0, 0)(0, 0), 0.625, 1e-15);
    EXPECT_NEAR(half.abar(0, 0), 0.75, 1e-15);
}

TEST(WeightMoments, ExactMatchesJointEnumeration) {
    for (const auto& f : fixtures()) {
        const auto noise = noise_variances(f.prof);
        const auto mom = weight_moments(f.rule, f.topo, f.errors, noise);
        const auto ref = brute_force_moments(f.rule, f.topo, f.errors, noise);
        EXPECT_LT((mom.abar - ref.abar).cwiseAbs().maxCoeff(), 1e-14);
        for (NodeId k = 0; k < f.topo.size(); ++k)
            for (NodeId l = k; l < f.topo.size(); ++l)
                EXPECT_LT((mom.pair(k, l) - ref.at(k, l)).cwiseAbs().maxCoeff(), 1e-14) << k << "," << l;
        for (Eigen::Index k = 0; k < mom.abar.rows(); ++k) EXPECT_NEAR(mom.abar.row(k).sum(), 1.0, 1e-12);
    }
}

TEST(WeightMoments, MonteCarloWithinThreeStandardErrors) {
    const auto f = fixtures()[1];
    const auto noise = noise_variances(f.prof);
    const auto exact = weight_moments(f.rule, f.topo, f.errors, noise);
    const auto mc = weight_moments(f.rule, f.topo, f.errors, noise, MomentOptions::monte_carlo(200000, 17));
    EXPECT_EQ(mc.mode, MomentMode::monte_carlo);
    for (Eigen::Index k = 0; k < 3; ++k) {
        for (Eigen::Index l = 0; l < 3; ++l) {
            const double se = mc.abar_se(k, l);
            EXPECT_LE(std::abs(mc.abar(k, l) - exact.abar(k, l)), 3.0 * se + 1e-15);
        }
    }
    for (std::size_t i = 0; i < exact.second.size(); ++i) {
        const Eigen::MatrixXd diff = (mc.second[i] - exact.second[i]).cwiseAbs();
        const Eigen::MatrixXd tol = 3.0 * mc.second_se[i].array() + 1e-15;
        EXPECT_TRUE((diff.array() <= tol.array()).all()) << "pair " << i;
    }
}

TEST(WeightMoments, ExactRefusesHugeNeighborhoods) {
    const auto t = fx::star(6);
    MomentOptions opt;
    opt.max_enumerated_links = 4;
    try {
        weight_moments({RuleKind::uniform, {}}, t, ErrorModel::uniform(t, 0.5), {}, opt);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("monte_carlo"), std::string::npos);
    }
}

TEST(MomentSystem, SingleNode) {
    const auto t = fx::graph(1, {});
    const auto prof = fx::same_profiles(1, 0.1, 1.0, 0.01);
    const auto coeffs = scalar_coefficients(prof, SpatialCorrelation::exponential(0), 2);
    const auto sys = build_moment_system(coeffs, weight_moments({RuleKind::uniform, {}}, t, ErrorModel::uniform(t, 0), {}));
    ASSERT_EQ(sys.q(), 1u);
    EXPECT_NEAR(sys.cprime(0, 0), 0.84, 1e-15);
    EXPECT_NEAR(sys.cv(0), 2e-4, 1e-18);
}

TEST(MomentSystem, IsolatedNodesAreDiagonal) {
    const auto t = fx::graph(2, {});
    const auto prof = fx::same_profiles(2, 0.1, 1.0, 0.01);
    const auto coeffs = scalar_coefficients(prof, SpatialCorrelation::exponential(0), 2);
    const auto sys = build_moment_system(coeffs, weight_moments({RuleKind::uniform, {}}, t, ErrorModel::uniform(t, 0), {}));
    Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(3, 3);
    expect.diagonal() << 0.84, 0.84, 0.81;
    EXPECT_LT((sys.cprime - expect).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(MomentSystem, RowSumsEqualEta) {
    for (const auto& f : fixtures()) {
        const auto sys = system_for(f, 3);
        for (std::size_t i = 0; i < sys.q(); ++i) {
            EXPECT_NEAR(sys.cprime.row(static_cast<Eigen::Index>(i)).sum(), sys.eta(static_cast<Eigen::Index>(i)), 1e-12);
            const auto [k, l] = sys.pairs.pair(i);
            const auto coeffs = scalar_coefficients(f.prof, SpatialCorrelation::exponential(f.rho), 3);
            EXPECT_DOUBLE_EQ(sys.eta(static_cast<Eigen::Index>(i)), coeffs.eta(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)));
        }
    }
}

TEST(MomentSystem, ReplacingAColumnWithTheRowSumsKeepsTheDeterminant) {
    for (const auto& f : fixtures()) {
        if (f.topo.size() > 3) continue;
        const auto sys = system_for(f, 2);
        const auto q = static_cast<Eigen::Index>(sys.q());
        const Eigen::MatrixXd i_c = Eigen::MatrixXd::Identity(q, q) - sys.cprime;
        const Eigen::VectorXd ds = Eigen::VectorXd::Ones(q) - sys.eta;
        const double base = i_c.determinant();
        for (Eigen::Index j = 0; j < q; ++j) {
            Eigen::MatrixXd swapped = i_c;
            swapped.col(j) = ds;
            EXPECT_NEAR(swapped.determinant(), base, 1e-8 * std::abs(base));
        }
    }
}

TEST(MomentSystem, MeanSystemColumnIdentity) {
    for (const auto& f : fixtures()) {
        const auto sys = system_for(f, 2);
        const auto n = sys.mean_matrix.rows();
        const Eigen::MatrixXd i_e = Eigen::MatrixXd::Identity(n, n) - sys.mean_matrix;
        EXPECT_LT((i_e.rowwise().sum() - sys.mean_drive).cwiseAbs().maxCoeff(), 1e-14);
        const double base = i_e.determinant();
        for (Eigen::Index j = 0; j < n; ++j) {
            Eigen::MatrixXd swapped = i_e;
            swapped.col(j) = sys.mean_drive;
            EXPECT_NEAR(swapped.determinant(), base, 1e-10 * std::abs(base));
        }
    }
}

TEST(SteadyState, SingleNodeClosedForm) {
    const auto t = fx::graph(1, {});
    const auto prof = fx::same_profiles(1, 0.1, 1.0, 0.01);
    const auto sys = build_moment_system(scalar_coefficients(prof, SpatialCorrelation::exponential(0), 2),
                                         weight_moments({RuleKind::uniform, {}}, t, ErrorModel::uniform(t, 0), {}));
    const auto rep = steady_state_msd(sys, TrueParameter::normalized_ones(2));
    EXPECT_NEAR(rep.local(0), 1.25e-3, 1.25e-13);
    EXPECT_NEAR(rep.global, 1.25e-3, 1.25e-13);
    EXPECT_NEAR(rep.spectral_radius, 0.84, 1e-12);
    EXPECT_NEAR(rep.w_ss_norm(0), 1.0 + 1.25e-3, 1e-12);
    EXPECT_NEAR(fx::standalone_msd(prof[0], 2), 1.25e-3, 1e-15);
}

TEST(SteadyState, TotalFailureDecouplesNodes) {
    const auto t = fx::path(2);
    const std::vector<NodeProfile> prof{{0.1, 1.0, 0.01}, {0.05, 2.0, 0.001}};
    for (RuleKind kind : {RuleKind::uniform, RuleKind::relative_degree, RuleKind::relative_variance, RuleKind::metropolis}) {
        const auto sys = build_moment_system(scalar_coefficients(prof, SpatialCorrelation::exponential(0.5), 4),
                                             weight_moments({kind, {}}, t, ErrorModel::uniform(t, 1.0), noise_variances(prof)));
        const auto rep = steady_state_msd(sys, TrueParameter::normalized_ones(4));
        for (NodeId k = 0; k < 2; ++k) {
            const double want = fx::standalone_msd(prof[k], 4);
            EXPECT_NEAR(rep.local(static_cast<Eigen::Index>(k)), want, 1e-10 * want);
        }
    }
}

TEST(SteadyState, MatchesFirstPrinciplesIteration) {
    for (const auto& f : fixtures()) {
        const std::size_t m = 3;
        const auto sys = system_for(f, m);
        const auto w_o = TrueParameter::normalized_ones(m);
        const auto rep = steady_state_msd(sys, w_o);
        const auto ref = fx::iterate_oracle(f.prof, f.rho,
                                                 brute_force_moments(f.rule, f.topo, f.errors, noise_variances(f.prof)),
                                                 w_o.w_o, 200000);
        for (Eigen::Index k = 0; k < ref.size(); ++k) EXPECT_NEAR(rep.local(k), ref(k), 1e-8 * ref(k));
    }
}

TEST(SteadyState, NonUnitTrueParameter) {
    const auto f = fixtures()[0];
    const auto sys = system_for(f, 3);
    TrueParameter w_o;
    w_o.w_o = Eigen::Vector3d(2.0, -1.0, 0.5);
    const auto rep = steady_state_msd(sys, w_o);
    const auto ref = fx::iterate_oracle(f.prof, f.rho,
                                             brute_force_moments(f.rule, f.topo, f.errors, noise_variances(f.prof)),
                                             w_o.w_o, 200000);
    for (Eigen::Index k = 0; k < ref.size(); ++k) EXPECT_NEAR(rep.local(k), ref(k), 1e-7 * ref(k));
}

TEST(SteadyState, UnstableReportsSpectralRadius) {
    const auto t = fx::path(2);
    // isolated nodes past the mean-square bound of 0.5 for M = 2
    const auto prof = fx::same_profiles(2, 0.7, 1.0, 0.01);
    const auto sys = build_moment_system(scalar_coefficients(prof, SpatialCorrelation::exponential(0), 2),
                                         weight_moments({RuleKind::uniform, {}}, t, ErrorModel::uniform(t, 1.0), {}));
    try {
        steady_state_msd(sys, TrueParameter::normalized_ones(2));
        FAIL();
    } catch (const UnstableError& e) {
        EXPECT_GE(e.spectral_radius(), 1.0);
    }
}

TEST(SteadyState, CsvRoundTrip) {
    const auto f = fixtures()[1];
    const auto rep = steady_state_msd(system_for(f, 2), TrueParameter::normalized_ones(2));
    std::ostringstream out;
    write_msd_csv(out, rep);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "node,msd_linear,msd_db");
    for (Eigen::Index k = 0; k <= rep.local.size(); ++k) {
        std::getline(in, line);
        std::istringstream row(line);
        std::string id, lin, db;
        std::getline(row, id, ',');
        std::getline(row, lin, ',');
        std::getline(row, db, ',');
        const double want = k < rep.local.size() ? rep.local(k) : rep.global;
        EXPECT_EQ(id, k < rep.local.size() ? std::to_string(k + 1) : "global");
        EXPECT_EQ(std::stod(lin), want);
        EXPECT_EQ(std::stod(db), to_db(want));
    }
    EXPECT_FALSE(std::getline(in, line));
}

TEST(MeanTrajectory, FixedPointAtTrueParameter) {
    const auto f = fixtures()[2];
    const auto coeffs = scalar_coefficients(f.prof, SpatialCorrelation::exponential(f.rho), 3);
    const auto w_o = TrueParameter::normalized_ones(3);
    const auto abar = weight_moments(f.rule, f.topo, f.errors, {}).abar;
    const Eigen::MatrixXd init = w_o.w_o.transpose().replicate(4, 1);
    for (const auto& m : mean_trajectory(abar, coeffs, w_o, 50, init))
        EXPECT_LT((m - init).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(MeanTrajectory, SingleNodeGeometric) {
    const auto coeffs = scalar_coefficients(fx::same_profiles(1, 0.1, 1.0, 0.01), SpatialCorrelation::exponential(0), 2);
    const auto w_o = TrueParameter::normalized_ones(2);
    const auto traj = mean_trajectory(Eigen::MatrixXd::Ones(1, 1), coeffs, w_o, 40, Eigen::MatrixXd::Zero(1, 2));
    ASSERT_EQ(traj.size(), 41u);
    for (std::size_t i = 0; i <= 40; ++i) {
        const double scale = 1.0 - std::pow(0.9, static_cast<double>(i));
        EXPECT_LT((traj[i].row(0).transpose() - scale * w_o.w_o).cwiseAbs().maxCoeff(), 1e-14);
    }
}

TEST(MeanTrajectory, ConvergesToTrueParameter) {
    for (const auto& f : fixtures()) {
        const auto coeffs = scalar_coefficients(f.prof, SpatialCorrelation::exponential(f.rho), 2);
        const auto w_o = TrueParameter::normalized_ones(2);
        const auto abar = weight_moments(f.rule, f.topo, f.errors, noise_variances(f.prof)).abar;
        const auto n = static_cast<Eigen::Index>(f.topo.size());
        const auto traj = mean_trajectory(abar, coeffs, w_o, 3000, Eigen::MatrixXd::Zero(n, 2));
        const Eigen::MatrixXd target = w_o.w_o.transpose().replicate(n, 1);
        EXPECT_LT((traj.back() - target).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(TransientCurve, StartsAtZeroDecibels) {
    const auto f = fixtures()[0];
    const auto curve = transient_theory_curve(system_for(f, 2), TrueParameter::normalized_ones(2), 10);
    ASSERT_EQ(curve.samples(), 11u);
    for (Eigen::Index k = 0; k < curve.local.cols(); ++k) EXPECT_NEAR(curve.local(0, k), 1.0, 1e-15);
}

TEST(TransientCurve, LimitIsSteadyState) {
    for (const auto& f : fixtures()) {
        const auto sys = system_for(f, 4);
        const auto w_o = TrueParameter::normalized_ones(4);
        const auto rep = steady_state_msd(sys, w_o);
        const auto curve = transient_theory_curve(sys, w_o, 20000);
        for (Eigen::Index k = 0; k < rep.local.size(); ++k)
            EXPECT_NEAR(curve.local(curve.local.rows() - 1, k), rep.local(k), 1e-8 * rep.local(k));
        EXPECT_NEAR(curve.global(curve.global.size() - 1), rep.global, 1e-8 * rep.global);
    }
}

TEST(TransientCurve, SingleNodeLimit) {
    const auto t = fx::graph(1, {});
    const auto prof = fx::same_profiles(1, 0.1, 1.0, 0.01);
    const auto sys = build_moment_system(scalar_coefficients(prof, SpatialCorrelation::exponential(0), 2),
                                         weight_moments({RuleKind::uniform, {}}, t, ErrorModel::uniform(t, 0), {}));
    const auto curve = transient_theory_curve(sys, TrueParameter::normalized_ones(2), 2000);
    EXPECT_NEAR(curve.local(2000, 0), 1.25e-3, 1.25e-11);
}
