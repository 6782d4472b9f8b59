#include "dlms/combiners.hpp"

#include <algorithm>
#include <array>

#include "dlms/error.hpp"

namespace dlms {

namespace {

constexpr std::array<std::pair<RuleKind, std::string_view>, 6> kRuleNames{{
    {RuleKind::uniform, "uniform"},
    {RuleKind::maximum_degree, "maximum_degree"},
    {RuleKind::metropolis, "metropolis"},
    {RuleKind::relative_degree, "relative_degree"},
    {RuleKind::relative_variance, "relative_variance"},
    {RuleKind::enhanced_relative_degree, "enhanced_relative_degree"},
}};

// Unnormalized weight of l in node k's row under the full-neighborhood rule.
double raw_weight(const CombiningRule& rule, const Topology& topo,
                  std::span<const double> noise_vars, NodeId k, NodeId l) {
    const auto nk = static_cast<double>(topo.degree(k));
    switch (rule.kind) {
        case RuleKind::uniform:
            return 1.0;
        case RuleKind::maximum_degree: {
            const auto n = static_cast<double>(topo.size());
            return l == k ? 1.0 - (nk - 1.0) / n : 1.0 / n;
        }
        case RuleKind::metropolis: {
            if (l != k) {
                return 1.0 / std::max(nk, static_cast<double>(topo.degree(l)));
            }
            double off = 0.0;
            for (NodeId m : topo.neighborhood(k))
                if (m != k) off += 1.0 / std::max(nk, static_cast<double>(topo.degree(m)));
            return 1.0 - off;
        }
        case RuleKind::relative_degree:
            return static_cast<double>(topo.degree(l));
        case RuleKind::relative_variance:
            if (!(noise_vars[l] > 0.0)) {
                throw ValidationError("relative_variance rule: node " + std::to_string(l + 1) +
                                      " has zero noise variance");
            }
            return 1.0 / noise_vars[l];
        case RuleKind::enhanced_relative_degree:
            return static_cast<double>(topo.degree(l)) * (1.0 - rule.loss[l]);
    }
    return 0.0;
}

}  // namespace

std::string_view to_string(RuleKind kind) {
    for (const auto& [k, name] : kRuleNames)
        if (k == kind) return name;
    return "unknown";
}

RuleKind parse_rule(std::string_view name) {
    for (const auto& [k, n] : kRuleNames)
        if (n == name) return k;
    throw ValidationError("unknown combining rule '" + std::string(name) + "'");
}

double WeightRow::at(NodeId l) const {
    auto it = std::lower_bound(members.begin(), members.end(), l);
    if (it == members.end() || *it != l) return 0.0;
    return weights[static_cast<std::size_t>(it - members.begin())];
}

std::vector<double> effective_degrees(const Topology& topo, std::span<const double> q) {
    if (q.size() != topo.size()) {
        throw ValidationError("loss vector has " + std::to_string(q.size()) +
                              " entries, topology has " + std::to_string(topo.size()) + " nodes");
    }
    std::vector<double> out(q.size());
    for (NodeId k = 0; k < q.size(); ++k) {
        if (!(q[k] >= 0.0 && q[k] <= 1.0)) {
            throw ValidationError("loss probability of node " + std::to_string(k + 1) +
                                  " outside [0,1]");
        }
        out[k] = static_cast<double>(topo.degree(k)) * (1.0 - q[k]);
    }
    return out;
}

WeightRow combine_weights(const CombiningRule& rule, const Topology& topo,
                          std::span<const double> noise_vars, NodeId k,
                          std::span<const NodeId> success_set) {
    const auto& nb = topo.neighborhood(k);
    if (!std::binary_search(success_set.begin(), success_set.end(), k)) {
        throw ValidationError("success set of node " + std::to_string(k + 1) +
                              " must contain the node itself");
    }
    for (NodeId l : success_set) {
        if (!std::binary_search(nb.begin(), nb.end(), l)) {
            throw ValidationError("node " + std::to_string(l + 1) +
                                  " is not in the neighborhood of node " + std::to_string(k + 1));
        }
    }
    if (rule.kind == RuleKind::relative_variance && noise_vars.size() != topo.size()) {
        throw ValidationError("relative_variance rule needs one noise variance per node");
    }
    if (rule.kind == RuleKind::enhanced_relative_degree && rule.loss.size() != topo.size()) {
        throw ValidationError("enhanced_relative_degree rule needs one loss probability per node");
    }
    if (rule.kind == RuleKind::enhanced_relative_degree) {
        for (NodeId l : success_set) {
            if (!(rule.loss[l] >= 0.0 && rule.loss[l] <= 1.0)) {
                throw ValidationError("loss probability of node " + std::to_string(l + 1) +
                                      " outside [0,1]");
            }
        }
    }

    WeightRow row;
    row.node = k;
    row.members.assign(success_set.begin(), success_set.end());
    row.weights.resize(row.members.size());
    if (row.members.size() == 1) {
        row.weights[0] = 1.0;
        return row;
    }

    double total = 0.0;
    for (std::size_t i = 0; i < row.members.size(); ++i) {
        row.weights[i] = raw_weight(rule, topo, noise_vars, k, row.members[i]);
        total += row.weights[i];
    }
    if (!(total > 0.0)) {
        throw ValidationError(std::string(to_string(rule.kind)) + " rule: weights of node " +
                              std::to_string(k + 1) + " sum to zero over its success set");
    }
    for (double& w : row.weights) w /= total;
    return row;
}

}  // namespace dlms
