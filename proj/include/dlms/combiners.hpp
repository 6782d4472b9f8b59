#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dlms/topology.hpp"

namespace dlms {

enum class RuleKind {
    uniform,
    maximum_degree,
    metropolis,
    relative_degree,
    relative_variance,
    enhanced_relative_degree,
};

std::string_view to_string(RuleKind kind);
/// Accepts the config spellings, e.g. "relative_variance".
RuleKind parse_rule(std::string_view name);

struct CombiningRule {
    RuleKind kind = RuleKind::relative_degree;
    /// Per-node average loss probability, used by the enhanced rule only.
    std::vector<double> loss;

    static CombiningRule enhanced(std::vector<double> q) {
        return {RuleKind::enhanced_relative_degree, std::move(q)};
    }
};

/// Combining weights of node k over its realized success set.
struct WeightRow {
    NodeId node = 0;
    std::vector<NodeId> members;  // S_k, ascending
    std::vector<double> weights;  // aligned with members

    /// a_{k,l}; 0 for l outside S_k.
    double at(NodeId l) const;
};

/// n'_k = n_k (1 - q_k).
std::vector<double> effective_degrees(const Topology& topo, std::span<const double> q);

/// Row-stochastic weights for node k over success_set (which must contain k
/// and lie inside N_k). Degree-based rules defined on the full neighborhood
/// are restricted to the success set and renormalized.
WeightRow combine_weights(const CombiningRule& rule, const Topology& topo,
                          std::span<const double> noise_vars, NodeId k,
                          std::span<const NodeId> success_set);

}  // namespace dlms
