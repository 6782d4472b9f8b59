#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iosfwd>

#include <Eigen/Dense>

namespace dlms {

/// Per-iteration MSD, linear scale. Row i holds iteration i (row 0 is the
/// initial condition), column k holds node k.
struct LearningCurve {
    Eigen::MatrixXd local;
    Eigen::VectorXd global;
    std::size_t runs = 0;
    std::uint64_t seed = 0;

    std::size_t samples() const noexcept { return static_cast<std::size_t>(local.rows()); }
    std::size_t nodes() const noexcept { return static_cast<std::size_t>(local.cols()); }
};

inline double to_db(double linear) { return 10.0 * std::log10(linear); }

/// CSV `iter,msd_global_db,msd_node1_db,...`.
void write_curve_csv(std::ostream& out, const LearningCurve& curve);

}  // namespace dlms
