#include "dlms/commands.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>

#include "dlms/error.hpp"

namespace dlms {

std::vector<double> parse_grid(std::string_view text) {
    std::vector<double> parts;
    std::size_t start = 0;
    for (;;) {
        const auto colon = text.find(':', start);
        const std::string item(text.substr(start, colon == std::string_view::npos ? text.npos : colon - start));
        try {
            std::size_t used = 0;
            parts.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ValidationError("grid '" + std::string(text) + "': '" + item + "' is not a number");
        }
        if (colon == std::string_view::npos) break;
        start = colon + 1;
    }
    if (parts.size() != 3) throw ValidationError("grid must have the form a:b:step");
    const double a = parts[0], b = parts[1], step = parts[2];
    if (!(step > 0.0)) throw ValidationError("grid step must be positive");
    if (a > b) throw ValidationError("grid start exceeds its end");
    if (a < 0.0 || b > 1.0) throw ValidationError("grid values are probabilities and must lie in [0, 1]");
    const auto count = static_cast<std::size_t>(std::floor((b - a) / step * (1.0 + 1e-12) + 1e-6)) + 1;
    std::vector<double> grid(count);
    for (std::size_t i = 0; i < count; ++i) grid[i] = std::min(b, a + static_cast<double>(i) * step);
    return grid;
}

TheoryResult run_theory(const Setup& setup, const RunSpec& run) {
    TheoryResult t;
    t.coeffs = scalar_coefficients(setup.profiles, setup.corr, setup.w_o.size());
    MomentOptions opt;
    if (run.moments == MomentMode::monte_carlo) opt = MomentOptions::monte_carlo(run.moment_samples, run.seed);
    t.moments = weight_moments(setup.rule, setup.topo, setup.errors, noise_variances(setup.profiles), opt);
    t.system = build_moment_system(t.coeffs, t.moments);
    t.stability = stability_report(setup.profiles, t.coeffs, t.moments.abar, &t.system);
    try {
        t.msd = steady_state_msd(t.system, setup.w_o);
    } catch (const UnstableError& e) {
        t.unstable_reason = e.what();
    }
    return t;
}

RunOptions run_options(const RunSpec& run) {
    RunOptions o;
    o.iters = run.iters;
    o.runs = run.runs;
    o.seed = run.seed;
    o.threads = run.threads;
    return o;
}

ComparisonReport cmd_compare(const Setup& setup, const RunSpec& run) {
    ComparisonReport r;
    TheoryResult t = run_theory(setup, run);
    r.theory = std::move(t.msd);
    r.unstable_reason = std::move(t.unstable_reason);
    r.stability = std::move(t.stability);
    r.curve = run_diffusion(setup.problem(), run_options(run)).curve;
    r.simulation = steady_state_estimate(r.curve, run.window);
    return r;
}

void write_comparison_csv(std::ostream& out, const ComparisonReport& report) {
    out << "node,msd_theory_db,msd_sim_db,delta_db\n" << std::setprecision(17);
    auto row = [&](const std::string& label, std::optional<double> theory_db, double sim_db) {
        out << label << ',';
        if (theory_db) out << *theory_db << ',' << sim_db << ',' << (sim_db - *theory_db) << '\n';
        else out << "unstable," << sim_db << ",unstable\n";
    };
    for (std::size_t k = 0; k < report.nodes(); ++k) {
        const double sim = to_db(report.simulation.local(static_cast<Eigen::Index>(k)));
        row(std::to_string(k + 1),
            report.theory ? std::optional<double>(report.theory->local_db(k)) : std::nullopt, sim);
    }
    row("global", report.theory ? std::optional<double>(report.theory->global_db()) : std::nullopt,
        to_db(report.simulation.global));
}

namespace {

void require_uniform(const Scenario& sc) {
    if (sc.error.kind != ErrorSpec::Kind::uniform) {
        throw ValidationError("p sweeps need a uniform error model ([error] kind = uniform)");
    }
}

}  // namespace

std::optional<std::size_t> SweepResult::argmin_local(NodeId k) const {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < theory.size(); ++i) {
        if (!theory[i]) continue;
        const double v = theory[i]->local(static_cast<Eigen::Index>(k));
        if (!best || v < theory[*best]->local(static_cast<Eigen::Index>(k))) best = i;
    }
    return best;
}

SweepResult cmd_sweep(const Scenario& sc, const Setup& setup, const std::vector<double>& grid,
                      bool simulate) {
    require_uniform(sc);
    if (grid.empty()) throw ValidationError("sweep grid is empty");
    SweepResult s;
    s.grid = grid;
    for (double p : grid) {
        const Setup at = with_uniform_error(setup, sc, p);
        s.theory.push_back(run_theory(at, sc.run).msd);
        if (simulate) {
            const auto curve = run_diffusion(at.problem(), run_options(sc.run)).curve;
            s.simulation.push_back(steady_state_estimate(curve, sc.run.window));
        }
    }
    for (std::size_t i = 0; i < s.theory.size(); ++i) {
        if (!s.theory[i]) continue;
        if (!s.argmin_global || s.theory[i]->global < s.theory[*s.argmin_global]->global) s.argmin_global = i;
    }
    return s;
}

void write_sweep_csv(std::ostream& out, const SweepResult& sweep) {
    const std::size_t n = [&]() -> std::size_t {
        for (const auto& t : sweep.theory)
            if (t) return static_cast<std::size_t>(t->local.size());
        return 0;
    }();
    out << "p,msd_global_db";
    for (std::size_t k = 0; k < n; ++k) out << ",msd_node" << (k + 1) << "_db";
    out << '\n' << std::setprecision(17);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < sweep.grid.size(); ++i) {
        const auto& t = sweep.theory[i];
        out << sweep.grid[i] << ',' << (t ? t->global_db() : nan);
        for (std::size_t k = 0; k < n; ++k) out << ',' << (t ? t->local_db(k) : nan);
        out << '\n';
    }
}

void write_sweep_simulation_csv(std::ostream& out, const SweepResult& sweep) {
    const std::size_t n = sweep.simulation.empty() || !sweep.simulation.front()
                              ? 0
                              : static_cast<std::size_t>(sweep.simulation.front()->local.size());
    out << "p,msd_global_db";
    for (std::size_t k = 0; k < n; ++k) out << ",msd_node" << (k + 1) << "_db";
    out << '\n' << std::setprecision(17);
    for (std::size_t i = 0; i < sweep.simulation.size(); ++i) {
        const auto& s = *sweep.simulation[i];
        out << sweep.grid[i] << ',' << to_db(s.global);
        for (std::size_t k = 0; k < n; ++k) out << ',' << to_db(s.local(static_cast<Eigen::Index>(k)));
        out << '\n';
    }
}

std::vector<NodeId> rank_nodes(const Eigen::VectorXd& local_msd) {
    std::vector<NodeId> order(static_cast<std::size_t>(local_msd.size()));
    std::iota(order.begin(), order.end(), NodeId{0});
    std::stable_sort(order.begin(), order.end(), [&](NodeId a, NodeId b) {
        return local_msd(static_cast<Eigen::Index>(a)) < local_msd(static_cast<Eigen::Index>(b));
    });
    return order;
}

RankResult cmd_rank(const Scenario& sc, const Setup& setup, const std::vector<double>& grid) {
    const SweepResult sweep = cmd_sweep(sc, setup, grid, false);
    RankResult r;
    r.grid = grid;
    for (const auto& t : sweep.theory) r.order.push_back(t ? rank_nodes(t->local) : std::vector<NodeId>{});
    return r;
}

void write_rank_csv(std::ostream& out, const RankResult& rank) {
    std::size_t n = 0;
    for (const auto& o : rank.order) n = std::max(n, o.size());
    out << "p";
    for (std::size_t k = 0; k < n; ++k) out << ",rank" << (k + 1);
    out << '\n' << std::setprecision(17);
    for (std::size_t i = 0; i < rank.grid.size(); ++i) {
        out << rank.grid[i];
        const auto& o = rank.order[i];
        for (std::size_t k = 0; k < n; ++k) {
            if (o.empty()) out << ",unstable";
            else out << ',' << (o[k] + 1);
        }
        out << '\n';
    }
}

}  // namespace dlms
