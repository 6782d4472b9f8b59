#include "dlms/topology.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include "dlms/error.hpp"
#include "dlms/rng.hpp"

namespace dlms {

namespace {

std::string entry_name(std::size_t r, std::size_t c) {
    return "(" + std::to_string(r + 1) + "," + std::to_string(c + 1) + ")";
}

}  // namespace

Topology Topology::from_adjacency(const std::vector<std::vector<int>>& adj) {
    const std::size_t n = adj.size();
    for (std::size_t r = 0; r < n; ++r) {
        if (adj[r].size() != n) {
            throw ValidationError("adjacency matrix is not square: row " + std::to_string(r + 1) +
                                  " has " + std::to_string(adj[r].size()) + " entries, expected " +
                                  std::to_string(n));
        }
    }
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            const int v = adj[r][c];
            if (v != 0 && v != 1) {
                throw ValidationError("adjacency entry " + entry_name(r, c) + " = " +
                                      std::to_string(v) + " is not binary");
            }
            if (r == c && v != 0) {
                throw ValidationError("adjacency entry " + entry_name(r, c) +
                                      " on the diagonal must be 0");
            }
            if (v != adj[c][r]) {
                throw ValidationError("adjacency matrix is not symmetric at entry " +
                                      entry_name(r, c));
            }
        }
    }

    Topology t;
    t.n_ = n;
    t.adj_.assign(n * n, 0);
    t.closed_.assign(n, {});
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            t.adj_[r * n + c] = static_cast<std::uint8_t>(adj[r][c]);
            if (r == c || adj[r][c] == 1) t.closed_[r].push_back(c);
            if (r < c && adj[r][c] == 1) t.links_.emplace_back(r, c);
        }
    }
    return t;
}

Topology Topology::random_geometric(std::size_t n, double side, double range,
                                    std::uint64_t seed) {
    if (n < 1) throw ValidationError("random_geometric: need at least one node");
    if (!(side > 0.0)) throw ValidationError("random_geometric: side must be positive");
    if (!(range > 0.0)) throw ValidationError("random_geometric: range must be positive");

    Rng rng(seed);
    std::uniform_real_distribution<double> coord(0.0, side);
    std::vector<Point> pts(n);
    for (auto& p : pts) {
        p.x = coord(rng);
        p.y = coord(rng);
    }

    std::vector<std::vector<int>> adj(n, std::vector<int>(n, 0));
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
            const double d = std::hypot(pts[a].x - pts[b].x, pts[a].y - pts[b].y);
            if (d < range) adj[a][b] = adj[b][a] = 1;
        }
    }
    Topology t = from_adjacency(adj);
    t.positions_ = std::move(pts);
    return t;
}

void Topology::check_node(NodeId k) const {
    if (k >= n_) {
        throw ValidationError("invalid node id " + std::to_string(k) + " (network has " +
                              std::to_string(n_) + " nodes)");
    }
}

bool Topology::linked(NodeId k, NodeId l) const {
    check_node(k);
    check_node(l);
    return adj_[k * n_ + l] != 0;
}

const std::vector<NodeId>& Topology::neighborhood(NodeId k) const {
    check_node(k);
    return closed_[k];
}

std::vector<std::size_t> Topology::degrees() const {
    std::vector<std::size_t> d(n_);
    for (std::size_t k = 0; k < n_; ++k) d[k] = closed_[k].size();
    return d;
}

std::vector<std::vector<int>> Topology::adjacency() const {
    std::vector<std::vector<int>> a(n_, std::vector<int>(n_));
    for (std::size_t r = 0; r < n_; ++r)
        for (std::size_t c = 0; c < n_; ++c) a[r][c] = adj_[r * n_ + c];
    return a;
}

Topology read_adjacency(std::istream& in) {
    std::vector<std::vector<int>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::vector<int> row;
        std::string tok;
        while (ls >> tok) {
            if (tok != "0" && tok != "1") {
                throw ValidationError("adjacency file line " + std::to_string(lineno) +
                                      ": entry '" + tok + "' is not 0 or 1");
            }
            row.push_back(tok == "1" ? 1 : 0);
        }
        if (!row.empty()) rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ValidationError("adjacency file is empty");
    return Topology::from_adjacency(rows);
}

Topology read_adjacency_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("cannot open adjacency file '" + path + "'");
    return read_adjacency(f);
}

void write_positions_csv(std::ostream& out, const Topology& topo) {
    if (!topo.positions()) throw ValidationError("topology has no node positions");
    out << "node,x,y\n" << std::setprecision(17);
    const auto& pts = *topo.positions();
    for (std::size_t k = 0; k < pts.size(); ++k) {
        out << (k + 1) << ',' << pts[k].x << ',' << pts[k].y << '\n';
    }
}

}  // namespace dlms
