#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dlms {

using NodeId = std::size_t;

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Undirected network graph. Node ids are 0-based in the API; every file
/// format written by the tools numbers nodes from 1.
///
/// The degree n_k is the size of the closed neighborhood N_k, so it counts
/// node k itself. An isolated node has degree 1.
class Topology {
public:
    Topology() = default;

    /// Row-major N x N 0/1 matrix. Throws ValidationError naming the first
    /// offending entry if the matrix is not square, binary, symmetric and
    /// zero on the diagonal.
    static Topology from_adjacency(const std::vector<std::vector<int>>& adj);

    /// n points uniform on [0, side]^2, edge iff distance < range.
    static Topology random_geometric(std::size_t n, double side, double range,
                                     std::uint64_t seed);

    std::size_t size() const noexcept { return n_; }
    std::size_t link_count() const noexcept { return links_.size(); }

    bool linked(NodeId k, NodeId l) const;
    const std::vector<std::pair<NodeId, NodeId>>& links() const noexcept { return links_; }

    /// Closed neighborhood N_k, sorted ascending, contains k.
    const std::vector<NodeId>& neighborhood(NodeId k) const;
    std::size_t degree(NodeId k) const { return neighborhood(k).size(); }
    std::vector<std::size_t> degrees() const;

    std::vector<std::vector<int>> adjacency() const;
    const std::optional<std::vector<Point>>& positions() const noexcept { return positions_; }

private:
    void check_node(NodeId k) const;

    std::size_t n_ = 0;
    std::vector<std::uint8_t> adj_;
    std::vector<std::pair<NodeId, NodeId>> links_;
    std::vector<std::vector<NodeId>> closed_;
    std::optional<std::vector<Point>> positions_;
};

/// Rows of whitespace-separated 0/1 entries; blank lines and '#' comments
/// are skipped.
Topology read_adjacency(std::istream& in);
Topology read_adjacency_file(const std::string& path);

/// CSV `node,x,y`. Throws if the topology has no positions.
void write_positions_csv(std::ostream& out, const Topology& topo);

}  // namespace dlms
