#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "dlms/errors.hpp"
#include "dlms/topology.hpp"

namespace dlms {

/// Binary exponential backoff: initial window cw slots, at most r
/// retransmissions, window capped at 2^r * cw.
struct MacParams {
    unsigned cw = 3;
    unsigned r = 1;

    void validate() const;
    unsigned cw_max() const { return cw << r; }
};

struct MacNodeResult {
    double tau = 0.0;  // per-slot transmission probability
    double q = 0.0;    // collision probability of a packet sent to this node
    double p = 0.0;    // loss probability q^{r+1}
};

/// Saturated-station transmission probability for collision probability q,
/// written in the form with the (1 - 2q) factor cancelled so q = 1/2 is a
/// regular point:
///   tau = 2 / ((cw + 1) + q cw sum_{j<r} (2q)^j)
double transmission_probability(const MacParams& params, double q);

/// Solves q = 1 - (1 - tau(q))^contenders by bisection on [0, 1] (the
/// residual is strictly decreasing in q). `contenders` counts the stations
/// other than the sender whose transmission destroys a packet at the
/// destination: its other neighbors and itself. Zero contenders gives q = 0.
MacNodeResult bianchi_fixed_point(const MacParams& params, std::size_t contenders);

/// Fixed point for every node, using |N_k| - 1 contenders for node k.
std::vector<MacNodeResult> mac_model(const Topology& topo, const MacParams& params);

/// p_{k,l} = q_k^{r+1} on every in-link of k.
ErrorModel mac_error_model(const Topology& topo, const MacParams& params);

struct BackoffStats {
    std::vector<std::uint64_t> attempts;    // transmissions addressed to node k
    std::vector<std::uint64_t> collisions;  // of which collided
    std::vector<std::uint64_t> packets;     // packets addressed to k that finished
    std::vector<std::uint64_t> discards;    // of which were dropped after r retransmissions
    std::vector<double> q_hat;              // collisions / attempts
    std::vector<double> p_hat;              // discards / packets

    friend bool operator==(const BackoffStats&, const BackoffStats&) = default;
};

/// Slotted, saturated backoff simulation. Every node with neighbors always
/// has a packet, addressed to its neighbors in round-robin order. A node
/// draws its counter uniformly from [0, W - 1], counts down one per slot and
/// transmits when the counter is 0. A packet l -> k collides if any other
/// member of N_k (k included) transmits in the same slot. After a collision
/// the backoff stage grows (window doubles up to cw_max) and the packet is
/// retried; the (r+1)-th collision of a packet drops it. The stage returns
/// to 0 only after a successful delivery.
BackoffStats simulate_backoff(const Topology& topo, const MacParams& params, std::uint64_t slots,
                              std::uint64_t seed);

void write_mac_model_csv(std::ostream& out, const std::vector<MacNodeResult>& model);
void write_mac_sim_csv(std::ostream& out, const BackoffStats& stats);

}  // namespace dlms
