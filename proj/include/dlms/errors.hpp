#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dlms/rng.hpp"
#include "dlms/topology.hpp"

namespace dlms {

/// Failure probabilities of directed links. Entry (k, l) is the probability
/// that the transmission l -> k fails in one iteration. Entries of
/// non-links and the diagonal are 0.
class ErrorModel {
public:
    ErrorModel() = default;

    /// Validates shape, range and that only linked pairs carry probability.
    ErrorModel(const Topology& topo, Eigen::MatrixXd p);

    static ErrorModel uniform(const Topology& topo, double p);

    std::size_t size() const noexcept { return static_cast<std::size_t>(p_.rows()); }
    double failure(NodeId k, NodeId l) const { return p_(k, l); }
    const Eigen::MatrixXd& matrix() const noexcept { return p_; }

    /// Mean failure probability over the in-links of k (0 for isolated nodes).
    double average_loss(const Topology& topo, NodeId k) const;
    std::vector<double> average_losses(const Topology& topo) const;

private:
    Eigen::MatrixXd p_;
};

/// Realized success sets: members[k] is S_k, sorted, always containing k.
struct SuccessSets {
    std::vector<std::vector<NodeId>> members;
};

/// One Bernoulli draw per directed link; draws are made for k ascending,
/// then l ascending over N_k \ {k}.
SuccessSets sample_success_sets(const ErrorModel& model, const Topology& topo, Rng& rng);

/// In-place variant reusing the allocation in `out`.
void sample_success_sets(const ErrorModel& model, const Topology& topo, Rng& rng,
                         SuccessSets& out);

/// CSV `src,dst,p` with 1-based node ids. Links not listed get p = 0.
ErrorModel read_link_errors(std::istream& in, const Topology& topo);
ErrorModel read_link_errors_file(const std::string& path, const Topology& topo);

}  // namespace dlms
