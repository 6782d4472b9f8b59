#include "dlms/scenario.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <map>
#include <set>
#include <ostream>
#include <sstream>

#include "dlms/error.hpp"
#include "dlms/rng.hpp"

namespace dlms {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

class Parser {
public:
    Parser(std::string name, std::filesystem::path base) : name_(std::move(name)), base_(std::move(base)) {}

    [[noreturn]] void fail(const std::string& msg) const {
        throw ValidationError(name_ + ":" + std::to_string(line_) + ": " + msg);
    }

    void set_line(std::size_t line) { line_ = line; }

    double number(const std::string& v) const {
        double x = 0.0;
        const char* end = v.data() + v.size();
        auto [ptr, ec] = std::from_chars(v.data(), end, x);
        if (ec != std::errc() || ptr != end || !std::isfinite(x)) fail("'" + v + "' is not a number");
        return x;
    }

    std::uint64_t integer(const std::string& v) const {
        std::uint64_t x = 0;
        const char* end = v.data() + v.size();
        auto [ptr, ec] = std::from_chars(v.data(), end, x);
        if (ec != std::errc() || ptr != end) fail("'" + v + "' is not a non-negative integer");
        return x;
    }

    std::size_t positive(const std::string& v, const std::string& key) const {
        const auto x = integer(v);
        if (x < 1) fail(key + " must be at least 1");
        return static_cast<std::size_t>(x);
    }

    std::vector<double> list(const std::string& v) const {
        std::vector<double> out;
        std::stringstream ss(v);
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(number(trim(item)));
        if (out.empty()) fail("empty value");
        return out;
    }

    std::filesystem::path existing_file(const std::string& v) const {
        std::filesystem::path p(v);
        if (p.is_relative() && !base_.empty()) p = base_ / p;
        if (!std::filesystem::is_regular_file(p)) fail("file '" + p.string() + "' does not exist");
        return p;
    }

    std::filesystem::path path(const std::string& v) const {
        std::filesystem::path p(v);
        if (p.is_relative() && !base_.empty()) p = base_ / p;
        return p;
    }

private:
    std::string name_;
    std::filesystem::path base_;
    std::size_t line_ = 0;
};

void check_all(const Parser& ps, const std::vector<double>& values, const std::string& key,
               const std::function<bool(double)>& ok, const std::string& requirement) {
    for (double x : values)
        if (!ok(x)) ps.fail(key + " = " + std::to_string(x) + ": " + requirement);
}

ProfileSpec per_node(const Parser& ps, const std::string& key, const std::string& value,
                     const std::function<bool(double)>& ok, const std::string& requirement) {
    ProfileSpec spec;
    spec.values = ps.list(value);
    check_all(ps, spec.values, key, ok, requirement);
    spec.kind = spec.values.size() == 1 ? ProfileSpec::Kind::constant : ProfileSpec::Kind::list;
    return spec;
}

ProfileSpec range(const Parser& ps, const std::string& key, const std::string& value,
                  ProfileSpec::Kind kind, const std::function<bool(double)>& ok,
                  const std::string& requirement) {
    ProfileSpec spec{kind, ps.list(value)};
    if (spec.values.size() != 2) ps.fail(key + " needs exactly two values: lo, hi");
    check_all(ps, spec.values, key, ok, requirement);
    if (spec.values[0] > spec.values[1]) ps.fail(key + ": lo must not exceed hi");
    return spec;
}

const std::string kMuRequirement =
    "step size must be positive (mean stability requires 0 < mu_k < 2 / sigma_u2_k)";

bool positive_value(double x) { return x > 0.0; }
bool nonnegative_value(double x) { return x >= 0.0; }
bool probability_value(double x) { return x >= 0.0 && x <= 1.0; }

void apply(Parser& ps, Scenario& sc, const std::string& section, const std::string& key,
           const std::string& value) {
    if (section == "topology") {
        auto& t = sc.topology;
        if (key == "kind") {
            if (value == "geometric") t.kind = TopologySpec::Kind::geometric;
            else if (value == "file") t.kind = TopologySpec::Kind::file;
            else ps.fail("topology kind must be 'geometric' or 'file', got '" + value + "'");
        } else if (key == "nodes") {
            t.nodes = ps.positive(value, key);
        } else if (key == "side") {
            t.side = ps.number(value);
            if (t.side <= 0.0) ps.fail("side must be positive");
        } else if (key == "range") {
            t.range = ps.number(value);
            if (t.range <= 0.0) ps.fail("range must be positive");
        } else if (key == "seed") {
            t.seed = ps.integer(value);
        } else if (key == "file") {
            t.file = ps.existing_file(value);
        } else {
            ps.fail("unknown key '" + key + "' in [topology]");
        }
    } else if (section == "nodes") {
        auto& n = sc.nodes;
        if (key == "mu") {
            n.mu = per_node(ps, key, value, positive_value, kMuRequirement);
        } else if (key == "sigma_u2") {
            n.sigma_u2 = per_node(ps, key, value, positive_value, "regressor variance must be positive");
        } else if (key == "sigma_v2") {
            n.sigma_v2 = per_node(ps, key, value, nonnegative_value, "noise variance must be non-negative");
        } else if (key == "sigma_u2_range") {
            n.sigma_u2 = range(ps, key, value, ProfileSpec::Kind::uniform_range, positive_value,
                               "regressor variance must be positive");
        } else if (key == "sigma_v2_range") {
            n.sigma_v2 = range(ps, key, value, ProfileSpec::Kind::log_range, positive_value,
                               "log-uniform noise range must be positive");
        } else if (key == "seed") {
            n.seed = ps.integer(value);
        } else if (key == "correlation") {
            n.correlation = ps.number(value);
            if (n.correlation < 0.0 || n.correlation >= 1.0) ps.fail("correlation must lie in [0, 1)");
        } else {
            ps.fail("unknown key '" + key + "' in [nodes]");
        }
    } else if (section == "model") {
        if (key == "m") {
            sc.model.m = ps.positive(value, key);
        } else if (key == "w_o") {
            if (value == "ones") sc.model.w_o_file.reset();
            else sc.model.w_o_file = ps.existing_file(value);
        } else {
            ps.fail("unknown key '" + key + "' in [model]");
        }
    } else if (section == "error") {
        auto& e = sc.error;
        if (key == "kind") {
            if (value == "uniform") e.kind = ErrorSpec::Kind::uniform;
            else if (value == "links") e.kind = ErrorSpec::Kind::links;
            else if (value == "mac") e.kind = ErrorSpec::Kind::mac;
            else ps.fail("error kind must be 'uniform', 'links' or 'mac', got '" + value + "'");
        } else if (key == "p") {
            e.p = ps.number(value);
            if (!probability_value(e.p)) ps.fail("p must lie in [0, 1]");
        } else if (key == "file") {
            e.file = ps.existing_file(value);
        } else if (key == "cw") {
            e.mac.cw = static_cast<unsigned>(ps.positive(value, key));
        } else if (key == "r") {
            const auto r = ps.integer(value);
            if (r > 20) ps.fail("r above 20 is not supported");
            e.mac.r = static_cast<unsigned>(r);
        } else {
            ps.fail("unknown key '" + key + "' in [error]");
        }
    } else if (section == "combiner") {
        if (key == "rule") {
            try {
                sc.combiner.rule = parse_rule(value);
            } catch (const ValidationError& ex) {
                ps.fail(ex.what());
            }
        } else if (key == "loss") {
            auto q = ps.list(value);
            check_all(ps, q, key, probability_value, "loss must lie in [0, 1]");
            sc.combiner.loss = std::move(q);
        } else {
            ps.fail("unknown key '" + key + "' in [combiner]");
        }
    } else if (section == "run") {
        auto& r = sc.run;
        if (key == "iters") r.iters = ps.positive(value, key);
        else if (key == "runs") r.runs = ps.positive(value, key);
        else if (key == "window") r.window = ps.positive(value, key);
        else if (key == "seed") r.seed = ps.integer(value);
        else if (key == "threads") r.threads = ps.positive(value, key);
        else if (key == "moment_samples") r.moment_samples = ps.positive(value, key);
        else if (key == "slots") r.slots = ps.positive(value, key);
        else if (key == "output") r.output = ps.path(value);
        else if (key == "moments") {
            if (value == "exact") r.moments = MomentMode::exact;
            else if (value == "monte_carlo") r.moments = MomentMode::monte_carlo;
            else ps.fail("moments must be 'exact' or 'monte_carlo', got '" + value + "'");
        } else {
            ps.fail("unknown key '" + key + "' in [run]");
        }
    } else {
        ps.fail("key outside a known section");
    }
}

}  // namespace

Scenario parse_scenario(std::istream& in, const std::string& name,
                        const std::filesystem::path& base_dir) {
    Parser ps(name, base_dir);
    Scenario sc;
    const std::set<std::string> sections{"topology", "nodes", "model", "error", "combiner", "run"};
    std::map<std::string, std::size_t> seen;  // section.key -> line
    std::map<std::string, std::size_t> section_line;
    std::string section;
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ps.set_line(++line);
        const auto hash = raw.find('#');
        const std::string text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (text.empty()) continue;
        if (text.front() == '[') {
            if (text.back() != ']') ps.fail("malformed section header '" + text + "'");
            section = trim(std::string_view(text).substr(1, text.size() - 2));
            if (!sections.count(section)) ps.fail("unknown section [" + section + "]");
            section_line.emplace(section, line);
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string::npos) ps.fail("expected 'key = value', got '" + text + "'");
        const std::string key = trim(std::string_view(text).substr(0, eq));
        const std::string value = trim(std::string_view(text).substr(eq + 1));
        if (key.empty()) ps.fail("missing key before '='");
        if (value.empty()) ps.fail("missing value for '" + key + "'");
        if (section.empty()) ps.fail("key '" + key + "' appears before any section");
        const auto [it, fresh] = seen.emplace(section + "." + key, line);
        if (!fresh) ps.fail("duplicate key '" + key + "' (first set on line " + std::to_string(it->second) + ")");
        apply(ps, sc, section, key, value);
    }

    auto require = [&](const std::string& sect, bool ok, const std::string& msg) {
        if (ok) return;
        const auto it = section_line.find(sect);
        ps.set_line(it == section_line.end() ? line : it->second);
        ps.fail(msg);
    };
    const bool geometric = sc.topology.kind == TopologySpec::Kind::geometric;
    require("topology", !geometric || sc.topology.nodes > 0, "geometric topology needs 'nodes'");
    require("topology", !geometric || sc.topology.range > 0.0, "geometric topology needs 'range'");
    require("topology", geometric || !sc.topology.file.empty(), "file topology needs 'file'");
    require("error", sc.error.kind != ErrorSpec::Kind::links || !sc.error.file.empty(),
            "links error model needs 'file'");
    require("combiner",
            !sc.combiner.loss || sc.combiner.rule == RuleKind::enhanced_relative_degree,
            "'loss' only applies to the enhanced_relative_degree rule");
    require("run", sc.run.window <= sc.run.iters + 1, "window exceeds the curve length iters + 1");
    return sc;
}

Scenario parse_scenario_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open scenario file '" + path.string() + "'");
    return parse_scenario(in, path.string(), path.parent_path());
}

Topology build_topology(const TopologySpec& spec) {
    if (spec.kind == TopologySpec::Kind::file) return read_adjacency_file(spec.file.string());
    return Topology::random_geometric(spec.nodes, spec.side, spec.range, spec.seed);
}

namespace {

std::vector<double> expand(const ProfileSpec& spec, std::size_t n, Rng& rng, const char* name) {
    std::vector<double> out(n);
    switch (spec.kind) {
    case ProfileSpec::Kind::constant:
        out.assign(n, spec.values.at(0));
        break;
    case ProfileSpec::Kind::list:
        if (spec.values.size() != n) {
            throw ValidationError(std::string(name) + " lists " + std::to_string(spec.values.size()) +
                                  " values for " + std::to_string(n) + " nodes");
        }
        out = spec.values;
        break;
    case ProfileSpec::Kind::uniform_range: {
        std::uniform_real_distribution<double> d(spec.values[0], spec.values[1]);
        for (auto& x : out) x = d(rng);
        break;
    }
    case ProfileSpec::Kind::log_range: {
        std::uniform_real_distribution<double> d(std::log10(spec.values[0]), std::log10(spec.values[1]));
        for (auto& x : out) x = std::pow(10.0, d(rng));
        break;
    }
    }
    return out;
}

}  // namespace

std::vector<NodeProfile> build_profiles(const NodesSpec& spec, std::size_t n) {
    Rng u_rng(derive_seed(spec.seed, 0, 1));
    Rng v_rng(derive_seed(spec.seed, 0, 2));
    Rng unused(0);
    const auto mu = expand(spec.mu, n, unused, "mu");
    const auto su = expand(spec.sigma_u2, n, u_rng, "sigma_u2");
    const auto sv = expand(spec.sigma_v2, n, v_rng, "sigma_v2");
    std::vector<NodeProfile> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = {mu[k], su[k], sv[k]};
    validate_profiles(out);
    return out;
}

ErrorModel build_errors(const ErrorSpec& spec, const Topology& topo) {
    switch (spec.kind) {
    case ErrorSpec::Kind::uniform: return ErrorModel::uniform(topo, spec.p);
    case ErrorSpec::Kind::links: return read_link_errors_file(spec.file.string(), topo);
    case ErrorSpec::Kind::mac: return mac_error_model(topo, spec.mac);
    }
    throw ValidationError("unknown error model kind");
}

CombiningRule build_rule(const CombinerSpec& spec, const Topology& topo, const ErrorModel& errors) {
    if (spec.rule != RuleKind::enhanced_relative_degree) return {spec.rule, {}};
    if (!spec.loss) return CombiningRule::enhanced(errors.average_losses(topo));
    if (spec.loss->size() == 1) return CombiningRule::enhanced(std::vector<double>(topo.size(), spec.loss->front()));
    if (spec.loss->size() != topo.size()) {
        throw ValidationError("combiner loss lists " + std::to_string(spec.loss->size()) +
                              " values for " + std::to_string(topo.size()) + " nodes");
    }
    return CombiningRule::enhanced(*spec.loss);
}

namespace {

TrueParameter build_w_o(const ModelSpec& spec) {
    if (!spec.w_o_file) return TrueParameter::normalized_ones(spec.m);
    std::ifstream in(*spec.w_o_file);
    if (!in) throw ValidationError("cannot open w_o file '" + spec.w_o_file->string() + "'");
    std::vector<double> values;
    std::string tok;
    while (in >> tok) {
        std::stringstream ss(tok);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (item.empty()) continue;
            try {
                std::size_t used = 0;
                values.push_back(std::stod(item, &used));
                if (used != item.size()) throw std::invalid_argument(item);
            } catch (const std::exception&) {
                throw ValidationError("w_o file '" + spec.w_o_file->string() + "': '" + item +
                                      "' is not a number");
            }
        }
    }
    if (values.size() != spec.m) {
        throw ValidationError("w_o file has " + std::to_string(values.size()) +
                              " entries but m = " + std::to_string(spec.m));
    }
    TrueParameter w;
    w.w_o = Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    return w;
}

}  // namespace

Setup build_setup(const Scenario& sc) {
    Topology topo = build_topology(sc.topology);
    auto profiles = build_profiles(sc.nodes, topo.size());
    ErrorModel errors = build_errors(sc.error, topo);
    CombiningRule rule = build_rule(sc.combiner, topo, errors);
    return Setup{std::move(topo), std::move(profiles), SpatialCorrelation::exponential(sc.nodes.correlation),
                 build_w_o(sc.model), std::move(errors), std::move(rule)};
}

Setup with_uniform_error(const Setup& base, const Scenario& sc, double p) {
    Setup s = base;
    s.errors = ErrorModel::uniform(s.topo, p);
    s.rule = build_rule(sc.combiner, s.topo, s.errors);
    return s;
}

void write_profiles_csv(std::ostream& out, const std::vector<NodeProfile>& profiles) {
    out << "node,mu,sigma_u2,sigma_v2\n" << std::setprecision(17);
    for (std::size_t k = 0; k < profiles.size(); ++k) {
        out << (k + 1) << ',' << profiles[k].mu << ',' << profiles[k].sigma_u2 << ','
            << profiles[k].sigma_v2 << '\n';
    }
}

}  // namespace dlms
