#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dlms/montecarlo.hpp"
#include "dlms/scenario.hpp"
#include "dlms/stability.hpp"
#include "dlms/theory.hpp"

namespace dlms {

/// "a:b:step" -> a, a + step, ..., up to b inclusive (within step / 1e6).
/// Values must be probabilities.
std::vector<double> parse_grid(std::string_view text);

/// Theory for one setup. An unstable configuration is a result, not an
/// error: `msd` is empty and `unstable_reason` says why.
struct TheoryResult {
    ScalarCoefficients coeffs;
    WeightMoments moments;
    MomentSystem system;
    StabilityReport stability;
    std::optional<MsdReport> msd;
    std::string unstable_reason;
};

TheoryResult run_theory(const Setup& setup, const RunSpec& run);

RunOptions run_options(const RunSpec& run);

struct ComparisonReport {
    std::optional<MsdReport> theory;  // empty when unstable
    std::string unstable_reason;
    SteadyStateEstimate simulation;
    LearningCurve curve;
    StabilityReport stability;

    std::size_t nodes() const { return static_cast<std::size_t>(simulation.local.size()); }
};

ComparisonReport cmd_compare(const Setup& setup, const RunSpec& run);

/// CSV `node,msd_theory_db,msd_sim_db,delta_db` with a final `global` row.
/// Theory and delta cells read "unstable" when the theory is unavailable.
void write_comparison_csv(std::ostream& out, const ComparisonReport& report);

struct SweepResult {
    std::vector<double> grid;
    std::vector<std::optional<MsdReport>> theory;            // per grid point
    std::vector<std::optional<SteadyStateEstimate>> simulation;  // empty unless requested
    std::optional<std::size_t> argmin_global;                // first grid index of the minimum

    /// Grid index of node k's smallest stable theory MSD (first on ties).
    std::optional<std::size_t> argmin_local(NodeId k) const;
};

/// Throws ValidationError unless the scenario's error model is uniform.
SweepResult cmd_sweep(const Scenario& sc, const Setup& setup, const std::vector<double>& grid,
                      bool simulate = false);

/// CSV `p,msd_global_db,msd_node1_db,...`; unstable points are written as nan.
void write_sweep_csv(std::ostream& out, const SweepResult& sweep);
void write_sweep_simulation_csv(std::ostream& out, const SweepResult& sweep);

struct RankResult {
    std::vector<double> grid;
    /// Per grid point, node ids sorted by increasing theory MSD (ties by
    /// index); empty when the theory is unstable at that point.
    std::vector<std::vector<NodeId>> order;
};

/// Orders nodes by local MSD.
std::vector<NodeId> rank_nodes(const Eigen::VectorXd& local_msd);

RankResult cmd_rank(const Scenario& sc, const Setup& setup, const std::vector<double>& grid);

/// CSV `p,rank1,...,rankN` holding 1-based node ids.
void write_rank_csv(std::ostream& out, const RankResult& rank);

}  // namespace dlms
