#include "dlms/mac.hpp"

#include <cassert>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "dlms/error.hpp"
#include "dlms/rng.hpp"

namespace dlms {

void MacParams::validate() const {
    if (cw < 1) throw ValidationError("contention window must be at least 1 slot");
    if (r > 20) throw ValidationError("maximum retransmissions above 20 is not supported");
}

double transmission_probability(const MacParams& params, double q) {
    double geometric = 0.0;
    double term = 1.0;
    for (unsigned j = 0; j < params.r; ++j) {
        geometric += term;
        term *= 2.0 * q;
    }
    const double cw = params.cw;
    return 2.0 / ((cw + 1.0) + q * cw * geometric);
}

MacNodeResult bianchi_fixed_point(const MacParams& params, std::size_t contenders) {
    params.validate();
    MacNodeResult res;
    if (contenders == 0) {
        // no one to collide with: q = 0 is the exact root
        res.tau = transmission_probability(params, 0.0);
        return res;
    }
    const double n = static_cast<double>(contenders);
    auto residual = [&](double q) {
        return 1.0 - std::pow(1.0 - transmission_probability(params, q), n) - q;
    };

    double lo = 0.0;
    double hi = 1.0;
    // residual(0) >= 0 >= residual(1) always holds for cw >= 1
    assert(residual(lo) >= 0.0 && residual(hi) <= 0.0);
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (residual(mid) > 0.0) lo = mid;
        else hi = mid;
    }
    res.q = 0.5 * (lo + hi);
    res.tau = transmission_probability(params, res.q);
    res.p = std::pow(res.q, static_cast<double>(params.r) + 1.0);
    return res;
}

std::vector<MacNodeResult> mac_model(const Topology& topo, const MacParams& params) {
    std::vector<MacNodeResult> out;
    out.reserve(topo.size());
    for (NodeId k = 0; k < topo.size(); ++k) {
        out.push_back(bianchi_fixed_point(params, topo.degree(k) - 1));
    }
    return out;
}

ErrorModel mac_error_model(const Topology& topo, const MacParams& params) {
    const auto model = mac_model(topo, params);
    const auto n = static_cast<Eigen::Index>(topo.size());
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
    for (NodeId k = 0; k < topo.size(); ++k) {
        for (NodeId l : topo.neighborhood(k)) {
            if (l != k) p(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) = model[k].p;
        }
    }
    return ErrorModel(topo, std::move(p));
}

BackoffStats simulate_backoff(const Topology& topo, const MacParams& params, std::uint64_t slots,
                              std::uint64_t seed) {
    params.validate();
    if (slots < 1) throw ValidationError("backoff simulation needs at least one slot");
    const std::size_t n = topo.size();

    std::vector<std::vector<NodeId>> dests(n);
    for (NodeId k = 0; k < n; ++k)
        for (NodeId l : topo.neighborhood(k))
            if (l != k) dests[k].push_back(l);

    Rng rng(seed);
    auto draw = [&](unsigned stage) {
        const std::uint64_t window = std::uint64_t{params.cw} << stage;
        return std::uniform_int_distribution<std::uint64_t>(0, window - 1)(rng);
    };

    std::vector<std::uint64_t> counter(n, 0);
    std::vector<unsigned> stage(n, 0);
    std::vector<unsigned> tries(n, 0);
    std::vector<std::size_t> next_dest(n, 0);
    for (NodeId k = 0; k < n; ++k)
        if (!dests[k].empty()) counter[k] = draw(0);

    BackoffStats st;
    st.attempts.assign(n, 0);
    st.collisions.assign(n, 0);
    st.packets.assign(n, 0);
    st.discards.assign(n, 0);

    std::vector<char> transmitting(n, 0);
    std::vector<NodeId> senders;
    senders.reserve(n);
    for (std::uint64_t slot = 0; slot < slots; ++slot) {
        senders.clear();
        for (NodeId k = 0; k < n; ++k) {
            transmitting[k] = 0;
            if (dests[k].empty()) continue;
            if (counter[k] == 0) {
                transmitting[k] = 1;
                senders.push_back(k);
            } else {
                --counter[k];
            }
        }
        for (NodeId l : senders) {
            const NodeId k = dests[l][next_dest[l] % dests[l].size()];
            bool lost = false;
            for (NodeId m : topo.neighborhood(k)) {
                if (m != l && transmitting[m]) {
                    lost = true;
                    break;
                }
            }
            ++st.attempts[k];
            if (lost) {
                ++st.collisions[k];
                if (stage[l] < params.r) ++stage[l];
                if (++tries[l] > params.r) {
                    ++st.discards[k];
                    ++st.packets[k];
                    tries[l] = 0;
                    ++next_dest[l];
                }
            } else {
                ++st.packets[k];
                stage[l] = 0;
                tries[l] = 0;
                ++next_dest[l];
            }
            counter[l] = draw(stage[l]);
        }
    }

    st.q_hat.resize(n);
    st.p_hat.resize(n);
    for (NodeId k = 0; k < n; ++k) {
        st.q_hat[k] = st.attempts[k] ? static_cast<double>(st.collisions[k]) /
                                           static_cast<double>(st.attempts[k])
                                     : 0.0;
        st.p_hat[k] = st.packets[k] ? static_cast<double>(st.discards[k]) /
                                          static_cast<double>(st.packets[k])
                                    : 0.0;
    }
    return st;
}

void write_mac_model_csv(std::ostream& out, const std::vector<MacNodeResult>& model) {
    out << "node,tau,q,p\n" << std::setprecision(17);
    for (std::size_t k = 0; k < model.size(); ++k) {
        out << (k + 1) << ',' << model[k].tau << ',' << model[k].q << ',' << model[k].p << '\n';
    }
}

void write_mac_sim_csv(std::ostream& out, const BackoffStats& stats) {
    out << "node,q_hat,p_hat\n" << std::setprecision(17);
    for (std::size_t k = 0; k < stats.q_hat.size(); ++k) {
        out << (k + 1) << ',' << stats.q_hat[k] << ',' << stats.p_hat[k] << '\n';
    }
}

}  // namespace dlms
