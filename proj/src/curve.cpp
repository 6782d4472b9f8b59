#include "dlms/curve.hpp"

#include <iomanip>
#include <ostream>

namespace dlms {

void write_curve_csv(std::ostream& out, const LearningCurve& curve) {
    out << "iter,msd_global_db";
    for (std::size_t k = 0; k < curve.nodes(); ++k) out << ",msd_node" << (k + 1) << "_db";
    out << '\n' << std::setprecision(17);
    for (Eigen::Index i = 0; i < curve.local.rows(); ++i) {
        out << i << ',' << to_db(curve.global(i));
        for (Eigen::Index k = 0; k < curve.local.cols(); ++k) out << ',' << to_db(curve.local(i, k));
        out << '\n';
    }
}

}  // namespace dlms
