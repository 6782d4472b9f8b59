#pragma once

// Scenario files are flat INI-style text:
//
//   # comment
//   [section]
//   key = value
//
// Sections and keys (defaults in parentheses):
//
//   [topology]  kind = geometric | file (geometric)
//               nodes, side (100), range, seed (1)     -- geometric
//               file = adjacency matrix path            -- file
//   [nodes]     mu, sigma_u2, sigma_v2                  -- one value or a comma list
//               sigma_u2_range = lo, hi                 -- uniform draw per node
//               sigma_v2_range = lo, hi                 -- log-uniform draw per node
//               seed (1)                                -- seed for the draws
//               correlation (0)                         -- rho, rho_kl = rho^|k-l|
//   [model]     m (2), w_o = ones | <path> (ones)
//   [error]     kind = uniform | links | mac (uniform)
//               p (0), file (src,dst,p CSV), cw (3), r (1)
//   [combiner]  rule (relative_degree), loss = comma list (enhanced rule;
//               defaults to each node's mean in-link failure probability)
//   [run]       iters (1000), runs (10), window (100), seed (1), threads (1),
//               moments = exact | monte_carlo (exact), moment_samples (100000),
//               slots (100000), output (out)
//
// Unknown sections or keys are errors. Relative paths are resolved against
// the directory of the scenario file.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dlms/combiners.hpp"
#include "dlms/errors.hpp"
#include "dlms/mac.hpp"
#include "dlms/montecarlo.hpp"
#include "dlms/theory.hpp"
#include "dlms/topology.hpp"

namespace dlms {

struct TopologySpec {
    enum class Kind { geometric, file } kind = Kind::geometric;
    std::size_t nodes = 0;
    double side = 100.0;
    double range = 0.0;
    std::uint64_t seed = 1;
    std::filesystem::path file;
};

/// One per-node quantity: a constant, an explicit list, or a seeded random
/// draw from a range.
struct ProfileSpec {
    enum class Kind { constant, list, uniform_range, log_range } kind = Kind::constant;
    std::vector<double> values{0.0};  // constant: one value; range: lo, hi
};

struct NodesSpec {
    ProfileSpec mu{ProfileSpec::Kind::constant, {0.01}};
    ProfileSpec sigma_u2{ProfileSpec::Kind::constant, {1.0}};
    ProfileSpec sigma_v2{ProfileSpec::Kind::constant, {1e-3}};
    std::uint64_t seed = 1;
    double correlation = 0.0;
};

struct ModelSpec {
    std::size_t m = 2;
    std::optional<std::filesystem::path> w_o_file;
};

struct ErrorSpec {
    enum class Kind { uniform, links, mac } kind = Kind::uniform;
    double p = 0.0;
    std::filesystem::path file;
    MacParams mac;
};

struct CombinerSpec {
    RuleKind rule = RuleKind::relative_degree;
    std::optional<std::vector<double>> loss;
};

struct RunSpec {
    std::size_t iters = 1000;
    std::size_t runs = 10;
    std::size_t window = 100;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    MomentMode moments = MomentMode::exact;
    std::size_t moment_samples = 100000;
    std::uint64_t slots = 100000;
    std::filesystem::path output = "out";
};

struct Scenario {
    TopologySpec topology;
    NodesSpec nodes;
    ModelSpec model;
    ErrorSpec error;
    CombinerSpec combiner;
    RunSpec run;
};

/// Throws ValidationError with "<name>:<line>: ..." diagnostics.
Scenario parse_scenario(std::istream& in, const std::string& name = "<scenario>",
                        const std::filesystem::path& base_dir = {});
Scenario parse_scenario_file(const std::filesystem::path& path);

/// Everything a command needs, built from a scenario.
struct Setup {
    Topology topo;
    std::vector<NodeProfile> profiles;
    SpatialCorrelation corr;
    TrueParameter w_o;
    ErrorModel errors;
    CombiningRule rule;

    DiffusionProblem problem() const { return {topo, profiles, corr, w_o, rule, errors}; }
};

Topology build_topology(const TopologySpec& spec);
std::vector<NodeProfile> build_profiles(const NodesSpec& spec, std::size_t n);
ErrorModel build_errors(const ErrorSpec& spec, const Topology& topo);
CombiningRule build_rule(const CombinerSpec& spec, const Topology& topo, const ErrorModel& errors);
Setup build_setup(const Scenario& sc);
/// Same scenario with the error model replaced by uniform p.
Setup with_uniform_error(const Setup& base, const Scenario& sc, double p);

/// CSV `node,mu,sigma_u2,sigma_v2`.
void write_profiles_csv(std::ostream& out, const std::vector<NodeProfile>& profiles);

}  // namespace dlms
