// dlms: diffusion LMS over lossy links.
//
//   dlms theory    --config s.ini [--out DIR] [--transient] [--dump-system]
//   dlms simulate  --config s.ini [--out DIR] [--seed N]
//   dlms stability --config s.ini [--out DIR]
//   dlms mac model --config s.ini [--out DIR]
//   dlms mac sim   --config s.ini [--out DIR] [--seed N]
//   dlms compare   --config s.ini [--out DIR] [--seed N]
//   dlms sweep     --config s.ini --grid 0:1:0.02 [--simulate]
//   dlms rank      --config s.ini --grid 0.1:0.9:0.1
//
// Exit status: 0 when the analysis ran (an unstable configuration is a
// finding), 1 on bad input.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dlms/commands.hpp"
#include "dlms/error.hpp"
#include "dlms/mac.hpp"
#include "dlms/scenario.hpp"

namespace fs = std::filesystem;
using namespace dlms;

namespace {

struct Options {
    std::string config;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::string grid = "0:1:0.02";
    bool transient = false;
    bool dump_system = false;
    bool simulate = false;
};

struct Context {
    Scenario sc;
    Setup setup;
    fs::path out;
};

Context load(const Options& o) {
    Scenario sc = parse_scenario_file(o.config);
    if (o.seed) sc.run.seed = *o.seed;
    fs::path out = o.out ? fs::path(*o.out) : sc.run.output;
    Setup setup = build_setup(sc);
    fs::create_directories(out);
    // Profiles may be drawn at random; keep what was used.
    {
        std::ofstream prof(out / "profiles.csv");
        write_profiles_csv(prof, setup.profiles);
    }
    if (setup.topo.positions()) {
        std::ofstream pos(out / "positions.csv");
        write_positions_csv(pos, setup.topo);
    }
    return {std::move(sc), std::move(setup), std::move(out)};
}

std::ofstream open(const fs::path& p) {
    std::ofstream f(p);
    if (!f) throw ValidationError("cannot write '" + p.string() + "'");
    return f;
}

void report_written(const fs::path& p) { std::cout << "wrote " << p.string() << '\n'; }

void cmd_theory(const Options& o) {
    const Context c = load(o);
    const TheoryResult t = run_theory(c.setup, c.sc.run);
    {
        auto f = open(c.out / "stability.csv");
        write_stability_csv(f, t.stability);
    }
    if (o.dump_system) {
        auto f = open(c.out / "moment_system.txt");
        write_moment_system(f, t.system);
        report_written(c.out / "moment_system.txt");
    }
    if (!t.msd) {
        std::cout << "unstable: " << t.unstable_reason << '\n';
        write_stability_text(std::cout, t.stability);
        return;
    }
    {
        auto f = open(c.out / "msd.csv");
        write_msd_csv(f, *t.msd);
    }
    write_msd_csv(std::cout, *t.msd);
    for (const auto& w : t.msd->warnings) std::cout << "warning: " << w << '\n';
    if (o.transient) {
        auto f = open(c.out / "theory_curve.csv");
        write_curve_csv(f, transient_theory_curve(t.system, c.setup.w_o, c.sc.run.iters));
        report_written(c.out / "theory_curve.csv");
    }
    report_written(c.out / "msd.csv");
}

void cmd_simulate(const Options& o) {
    const Context c = load(o);
    const auto curve = run_diffusion(c.setup.problem(), run_options(c.sc.run)).curve;
    const auto est = steady_state_estimate(curve, c.sc.run.window);
    {
        auto f = open(c.out / "curve.csv");
        write_curve_csv(f, curve);
    }
    MsdReport r;
    r.local = est.local;
    r.global = est.global;
    {
        auto f = open(c.out / "sim_msd.csv");
        write_msd_csv(f, r);
    }
    write_msd_csv(std::cout, r);
    report_written(c.out / "curve.csv");
    report_written(c.out / "sim_msd.csv");
}

void cmd_stability(const Options& o) {
    const Context c = load(o);
    const TheoryResult t = run_theory(c.setup, c.sc.run);
    auto f = open(c.out / "stability.csv");
    write_stability_csv(f, t.stability);
    write_stability_text(std::cout, t.stability);
    report_written(c.out / "stability.csv");
}

void cmd_mac_model(const Options& o) {
    const Context c = load(o);
    const auto model = mac_model(c.setup.topo, c.sc.error.mac);
    auto f = open(c.out / "mac_model.csv");
    write_mac_model_csv(f, model);
    write_mac_model_csv(std::cout, model);
    report_written(c.out / "mac_model.csv");
}

void cmd_mac_sim(const Options& o) {
    const Context c = load(o);
    const auto stats = simulate_backoff(c.setup.topo, c.sc.error.mac, c.sc.run.slots, c.sc.run.seed);
    auto f = open(c.out / "mac_sim.csv");
    write_mac_sim_csv(f, stats);
    write_mac_sim_csv(std::cout, stats);
    report_written(c.out / "mac_sim.csv");
}

void cmd_compare_main(const Options& o) {
    const Context c = load(o);
    const auto r = cmd_compare(c.setup, c.sc.run);
    {
        auto f = open(c.out / "compare.csv");
        write_comparison_csv(f, r);
    }
    {
        auto f = open(c.out / "stability.txt");
        write_stability_text(f, r.stability);
    }
    {
        auto f = open(c.out / "curve.csv");
        write_curve_csv(f, r.curve);
    }
    write_comparison_csv(std::cout, r);
    if (!r.theory) std::cout << "theory unstable: " << r.unstable_reason << '\n';
    write_stability_text(std::cout, r.stability);
    report_written(c.out / "compare.csv");
}

void cmd_sweep_main(const Options& o) {
    const Context c = load(o);
    const auto s = cmd_sweep(c.sc, c.setup, parse_grid(o.grid), o.simulate);
    {
        auto f = open(c.out / "sweep.csv");
        write_sweep_csv(f, s);
    }
    if (o.simulate) {
        auto f = open(c.out / "sweep_sim.csv");
        write_sweep_simulation_csv(f, s);
        report_written(c.out / "sweep_sim.csv");
    }
    write_sweep_csv(std::cout, s);
    std::cout << std::setprecision(17);
    if (s.argmin_global) std::cout << "argmin_global_p," << s.grid[*s.argmin_global] << '\n';
    else std::cout << "argmin_global_p,unstable\n";
    report_written(c.out / "sweep.csv");
}

void cmd_rank_main(const Options& o) {
    const Context c = load(o);
    const auto r = cmd_rank(c.sc, c.setup, parse_grid(o.grid));
    auto f = open(c.out / "rank.csv");
    write_rank_csv(f, r);
    write_rank_csv(std::cout, r);
    report_written(c.out / "rank.csv");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Diffusion LMS over networks with random link failures"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "scenario file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", o.out, "output directory (overrides [run] output)");
        sub->add_option("--seed", o.seed, "master seed (overrides [run] seed)");
    };
    auto with_grid = [&](CLI::App* sub) {
        sub->add_option("--grid", o.grid, "p grid a:b:step")->capture_default_str();
    };

    auto* theory = app.add_subcommand("theory", "steady-state MSD from the moment recursion");
    common(theory);
    theory->add_flag("--transient", o.transient, "also write the transient theory curve");
    theory->add_flag("--dump-system", o.dump_system, "also write the C' matrix");
    theory->callback([&] { cmd_theory(o); });

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo learning curves");
    common(simulate);
    simulate->callback([&] { cmd_simulate(o); });

    auto* stability = app.add_subcommand("stability", "step-size bounds and spectral radii");
    common(stability);
    stability->callback([&] { cmd_stability(o); });

    auto* mac = app.add_subcommand("mac", "backoff model and simulation");
    mac->require_subcommand(1);
    auto* mac_m = mac->add_subcommand("model", "fixed-point collision and loss probabilities");
    common(mac_m);
    mac_m->callback([&] { cmd_mac_model(o); });
    auto* mac_s = mac->add_subcommand("sim", "slotted backoff simulation");
    common(mac_s);
    mac_s->callback([&] { cmd_mac_sim(o); });

    auto* compare = app.add_subcommand("compare", "theory against simulation");
    common(compare);
    compare->callback([&] { cmd_compare_main(o); });

    auto* sweep = app.add_subcommand("sweep", "theory MSD over a grid of uniform p");
    common(sweep);
    with_grid(sweep);
    sweep->add_flag("--simulate", o.simulate, "also simulate every grid point");
    sweep->callback([&] { cmd_sweep_main(o); });

    auto* rank = app.add_subcommand("rank", "node ordering by local MSD over a p grid");
    common(rank);
    with_grid(rank);
    rank->callback([&] { cmd_rank_main(o); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
