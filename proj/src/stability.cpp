#include "dlms/stability.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include <Eigen/Eigenvalues>

#include "dlms/error.hpp"

namespace dlms {

std::vector<StepInterval> mean_bounds(std::span<const NodeProfile> profiles) {
    std::vector<StepInterval> out;
    out.reserve(profiles.size());
    for (const auto& p : profiles) {
        const double hi = 2.0 / p.sigma_u2;
        out.push_back({0.0, hi, p.mu > 0.0 && p.mu < hi});
    }
    return out;
}

std::vector<StepInterval> meansquare_bounds(std::span<const NodeProfile> profiles, std::size_t m) {
    if (m < 1) throw ValidationError("regressor length M must be at least 1");
    std::vector<StepInterval> out;
    out.reserve(profiles.size());
    for (const auto& p : profiles) {
        const double hi = 2.0 / ((static_cast<double>(m) + 2.0) * p.sigma_u2);
        out.push_back({0.0, hi, p.mu > 0.0 && p.mu < hi});
    }
    return out;
}

SpectralCheck spectral_check(const Eigen::MatrixXd& matrix) {
    if (matrix.rows() != matrix.cols()) {
        throw ValidationError("spectral_check: matrix is " + std::to_string(matrix.rows()) + "x" +
                              std::to_string(matrix.cols()));
    }
    SpectralCheck c;
    if (matrix.size() > 0) {
        Eigen::EigenSolver<Eigen::MatrixXd> es(matrix, false);
        c.radius = es.eigenvalues().cwiseAbs().maxCoeff();
    }
    c.stable = c.radius < 1.0;
    return c;
}

bool StabilityReport::sufficient_mean() const {
    return std::all_of(mean.begin(), mean.end(), [](const StepInterval& s) { return s.ok; });
}

bool StabilityReport::sufficient_mean_square() const {
    return std::all_of(mean_square.begin(), mean_square.end(),
                       [](const StepInterval& s) { return s.ok; });
}

StabilityReport stability_report(std::span<const NodeProfile> profiles,
                                 const ScalarCoefficients& coeffs, const Eigen::MatrixXd& abar,
                                 const MomentSystem* system) {
    StabilityReport r;
    r.mean = mean_bounds(profiles);
    r.mean_square = meansquare_bounds(profiles, coeffs.m);
    r.mean_spectral = spectral_check(coeffs.rho.asDiagonal() * abar);
    if (system) r.ms_spectral = spectral_check(system->cprime);

    r.eta_single_ok = true;
    r.eta_pair_ok = true;
    for (Eigen::Index k = 0; k < coeffs.eta.rows(); ++k) {
        for (Eigen::Index l = 0; l < coeffs.eta.cols(); ++l) {
            const bool ok = std::abs(coeffs.eta(k, l)) < 1.0;
            if (k == l) r.eta_single_ok = r.eta_single_ok && ok;
            else r.eta_pair_ok = r.eta_pair_ok && ok;
        }
    }
    return r;
}

void write_stability_csv(std::ostream& out, const StabilityReport& report) {
    out << "node,mean_lo,mean_hi,mean_ok,ms_lo,ms_hi,ms_ok\n" << std::setprecision(17);
    for (std::size_t k = 0; k < report.mean.size(); ++k) {
        const auto& a = report.mean[k];
        const auto& b = report.mean_square[k];
        out << (k + 1) << ',' << a.lo << ',' << a.hi << ',' << (a.ok ? 1 : 0) << ',' << b.lo << ','
            << b.hi << ',' << (b.ok ? 1 : 0) << '\n';
    }
}

void write_stability_text(std::ostream& out, const StabilityReport& report) {
    out << std::setprecision(6);
    out << "mean stability (0 < mu_k < 2/sigma_u_k^2): "
        << (report.sufficient_mean() ? "satisfied" : "VIOLATED") << '\n';
    out << "mean-square stability (0 < mu_k < 2/((M+2) sigma_u_k^2)): "
        << (report.sufficient_mean_square() ? "satisfied" : "VIOLATED") << '\n';
    for (std::size_t k = 0; k < report.mean.size(); ++k) {
        if (!report.mean[k].ok || !report.mean_square[k].ok) {
            out << "  node " << (k + 1) << ": mean bound " << report.mean[k].hi
                << (report.mean[k].ok ? " ok" : " violated") << ", mean-square bound "
                << report.mean_square[k].hi << (report.mean_square[k].ok ? " ok" : " violated")
                << '\n';
        }
    }
    out << "|eta_k| < 1: " << (report.eta_single_ok ? "yes" : "no")
        << ", |eta_kl| < 1: " << (report.eta_pair_ok ? "yes" : "no") << '\n';
    out << "spectral radius of E': " << report.mean_spectral.radius
        << (report.mean_spectral.stable ? " (stable)" : " (unstable)") << '\n';
    if (report.ms_spectral) {
        out << "spectral radius of C': " << report.ms_spectral->radius
            << (report.ms_spectral->stable ? " (stable)" : " (unstable)") << '\n';
    }
}

}  // namespace dlms
