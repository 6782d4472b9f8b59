#include "dlms/errors.hpp"

#include <fstream>
#include <istream>
#include <sstream>

#include "dlms/error.hpp"

namespace dlms {

ErrorModel::ErrorModel(const Topology& topo, Eigen::MatrixXd p) : p_(std::move(p)) {
    const auto n = static_cast<Eigen::Index>(topo.size());
    if (p_.rows() != n || p_.cols() != n) {
        throw ValidationError("error model is " + std::to_string(p_.rows()) + "x" +
                              std::to_string(p_.cols()) + " but the topology has " +
                              std::to_string(n) + " nodes");
    }
    for (Eigen::Index k = 0; k < n; ++k) {
        for (Eigen::Index l = 0; l < n; ++l) {
            const double v = p_(k, l);
            const auto where = "(" + std::to_string(k + 1) + "," + std::to_string(l + 1) + ")";
            if (!(v >= 0.0 && v <= 1.0)) {
                throw ValidationError("failure probability " + where + " = " + std::to_string(v) +
                                      " outside [0,1]");
            }
            const bool link = k != l && topo.linked(static_cast<NodeId>(k), static_cast<NodeId>(l));
            if (!link && v != 0.0) {
                throw ValidationError("failure probability " + where +
                                      " set on a pair that is not a link");
            }
        }
    }
}

ErrorModel ErrorModel::uniform(const Topology& topo, double p) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw ValidationError("uniform failure probability " + std::to_string(p) +
                              " outside [0,1]");
    }
    const auto n = static_cast<Eigen::Index>(topo.size());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (const auto& [a, b] : topo.links()) {
        m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = p;
        m(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = p;
    }
    return ErrorModel(topo, std::move(m));
}

double ErrorModel::average_loss(const Topology& topo, NodeId k) const {
    const auto& nb = topo.neighborhood(k);
    if (nb.size() <= 1) return 0.0;
    double s = 0.0;
    for (NodeId l : nb)
        if (l != k) s += p_(k, l);
    return s / static_cast<double>(nb.size() - 1);
}

std::vector<double> ErrorModel::average_losses(const Topology& topo) const {
    std::vector<double> q(topo.size());
    for (NodeId k = 0; k < topo.size(); ++k) q[k] = average_loss(topo, k);
    return q;
}

void sample_success_sets(const ErrorModel& model, const Topology& topo, Rng& rng,
                         SuccessSets& out) {
    const std::size_t n = topo.size();
    out.members.resize(n);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (NodeId k = 0; k < n; ++k) {
        auto& s = out.members[k];
        s.clear();
        for (NodeId l : topo.neighborhood(k)) {
            if (l == k) {
                s.push_back(k);
                continue;
            }
            // l fails to reach k with probability p_{k,l}
            if (unit(rng) >= model.failure(k, l)) s.push_back(l);
        }
    }
}

SuccessSets sample_success_sets(const ErrorModel& model, const Topology& topo, Rng& rng) {
    SuccessSets s;
    sample_success_sets(model, topo, rng, s);
    return s;
}

ErrorModel read_link_errors(std::istream& in, const Topology& topo) {
    const auto n = static_cast<Eigen::Index>(topo.size());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    std::string line;
    std::size_t lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;
            if (line == "src,dst,p") continue;
        }
        std::istringstream ls(line);
        std::string a, b, c;
        if (!std::getline(ls, a, ',') || !std::getline(ls, b, ',') || !std::getline(ls, c)) {
            throw ValidationError("link error CSV line " + std::to_string(lineno) +
                                  ": expected src,dst,p");
        }
        long src = 0, dst = 0;
        double p = 0.0;
        try {
            src = std::stol(a);
            dst = std::stol(b);
            p = std::stod(c);
        } catch (const std::exception&) {
            throw ValidationError("link error CSV line " + std::to_string(lineno) +
                                  ": cannot parse '" + line + "'");
        }
        if (src < 1 || dst < 1 || src > n || dst > n) {
            throw ValidationError("link error CSV line " + std::to_string(lineno) +
                                  ": node id out of range");
        }
        if (src == dst || !topo.linked(static_cast<NodeId>(src - 1), static_cast<NodeId>(dst - 1))) {
            throw ValidationError("link error CSV line " + std::to_string(lineno) + ": " +
                                  std::to_string(src) + "->" + std::to_string(dst) +
                                  " is not a link");
        }
        m(dst - 1, src - 1) = p;
    }
    return ErrorModel(topo, std::move(m));
}

ErrorModel read_link_errors_file(const std::string& path, const Topology& topo) {
    std::ifstream f(path);
    if (!f) throw ValidationError("cannot open link error file '" + path + "'");
    return read_link_errors(f, topo);
}

}  // namespace dlms
