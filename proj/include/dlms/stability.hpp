#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dlms/theory.hpp"

namespace dlms {

struct StepInterval {
    double lo = 0.0;
    double hi = 0.0;
    bool ok = false;  // lo < mu < hi

    friend bool operator==(const StepInterval&, const StepInterval&) = default;
};

/// 0 < mu_k < 2 / sigma_u_k^2.
std::vector<StepInterval> mean_bounds(std::span<const NodeProfile> profiles);

/// 0 < mu_k < 2 / ((M + 2) sigma_u_k^2).
std::vector<StepInterval> meansquare_bounds(std::span<const NodeProfile> profiles, std::size_t m);

struct SpectralCheck {
    double radius = 0.0;
    bool stable = false;  // radius < 1
};

/// Largest eigenvalue magnitude via a full eigendecomposition.
SpectralCheck spectral_check(const Eigen::MatrixXd& matrix);

struct StabilityReport {
    std::vector<StepInterval> mean;
    std::vector<StepInterval> mean_square;
    SpectralCheck mean_spectral;                // rho(E')
    std::optional<SpectralCheck> ms_spectral;   // rho(C'), when a system is supplied
    bool eta_single_ok = false;                 // |eta_k| < 1 for all k
    bool eta_pair_ok = false;                   // |eta_kl| < 1 for all k != l

    bool sufficient_mean() const;
    bool sufficient_mean_square() const;
};

StabilityReport stability_report(std::span<const NodeProfile> profiles,
                                 const ScalarCoefficients& coeffs, const Eigen::MatrixXd& abar,
                                 const MomentSystem* system = nullptr);

/// CSV `node,mean_lo,mean_hi,mean_ok,ms_lo,ms_hi,ms_ok`.
void write_stability_csv(std::ostream& out, const StabilityReport& report);
void write_stability_text(std::ostream& out, const StabilityReport& report);

}  // namespace dlms
