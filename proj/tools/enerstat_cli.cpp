// enerstat — command-line surface over the simulator library.
//
//   enerstat run <scenario> [--seed N] [--steps N] [--out DIR] [--seeds A..B]
//   enerstat perturb <bundle> --at STEP --prop TARGET --delta N [--out DIR]
//   enerstat tcv <scenario> --variable REF [--theta R] [--trials N] [--steps N]
//   enerstat metrics <bundle> [--window N]
//   enerstat validate <scenario>
//
// Exit codes: 0 success, 1 domain error, 2 usage error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "enerstat/provider.hpp"
#include "enerstat/run.hpp"
#include "enerstat/tcv.hpp"

namespace fs = std::filesystem;
using namespace enerstat;

namespace {

std::unique_ptr<ProgramProvider> provider_for(const Scenario& scenario) {
    if (!scenario.generator.enabled || scenario.generator.mode != GeneratorMode::Provider)
        return nullptr;
    const char* url = std::getenv("ENERSTAT_PROVIDER_URL");
    if (!url || !*url)
        raise(Errc::ProviderUnavailable,
              "generator mode is external but ENERSTAT_PROVIDER_URL is not set");
    return std::make_unique<HttpProgramProvider>(url);
}

fs::path default_out_dir(const Scenario& scenario) {
    return fs::path("out") / (scenario.name + "-seed" + std::to_string(scenario.seed));
}

int run_command(const std::string& scenario_path, std::optional<std::uint64_t> seed,
                std::optional<Step> steps, std::optional<std::string> out,
                const std::string& seed_range) {
    Scenario scenario = load_scenario(scenario_path);
    if (seed) scenario.seed = *seed;
    if (steps) scenario.step_limit = *steps;

    std::vector<std::uint64_t> seeds;
    if (!seed_range.empty()) {
        const auto dots = seed_range.find("..");
        if (dots == std::string::npos)
            raise(Errc::SchemaError, "--seeds expects A..B, got " + seed_range);
        const std::uint64_t lo = std::stoull(seed_range.substr(0, dots));
        const std::uint64_t hi = std::stoull(seed_range.substr(dots + 2));
        if (hi < lo) raise(Errc::SchemaError, "--seeds range is empty");
        for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
    } else {
        seeds.push_back(scenario.seed);
    }

    // independent worlds, one per seed, output files never shared
    std::vector<std::thread> workers;
    std::vector<std::string> failures(seeds.size());
    const unsigned lanes = std::max(1u, std::thread::hardware_concurrency());
    for (std::size_t begin = 0; begin < seeds.size(); begin += lanes) {
        const std::size_t end = std::min(seeds.size(), begin + lanes);
        for (std::size_t i = begin; i < end; ++i)
            workers.emplace_back([&, i] {
                try {
                    Scenario mine = scenario;
                    mine.seed = seeds[i];
                    fs::path dir =
                        out ? (seeds.size() == 1
                                   ? fs::path(*out)
                                   : fs::path(*out) / ("seed" + std::to_string(seeds[i])))
                            : default_out_dir(mine);
                    auto provider = provider_for(mine);
                    RunBundle bundle = run(mine, dir, provider.get());
                    std::cout << "seed " << seeds[i] << ": " << bundle.steps_run
                              << " steps, checksum " << bundle.checksum
                              << (bundle.extinct ? " (extinct)" : "") << ", events "
                              << (dir / "events.jsonl").string() << "\n";
                } catch (const std::exception& e) {
                    failures[i] = e.what();
                }
            });
        for (auto& w : workers) w.join();
        workers.clear();
    }
    for (std::size_t i = 0; i < seeds.size(); ++i)
        if (!failures[i].empty()) {
            std::cerr << "seed " << seeds[i] << " failed: " << failures[i] << "\n";
            return 1;
        }
    return 0;
}

int tcv_command(const std::string& scenario_path, std::string variable, const std::string& theta,
                std::optional<int> trials, std::optional<Step> steps,
                std::optional<std::string> out) {
    Scenario scenario = load_scenario(scenario_path);
    if (!scenario.tcv) raise(Errc::SeverUndefined, scenario_path + " declares no tcv block");
    ScenarioTcv decl = *scenario.tcv;
    if (variable.empty()) {
        if (decl.variables.empty())
            raise(Errc::SchemaError, "no --variable given and the scenario lists none");
        variable = decl.variables.front();
    }
    if (!theta.empty()) decl.theta = parse_rational(theta);
    if (trials) decl.trials = *trials;
    if (steps) decl.steps = *steps;

    // the disturbance pushes the candidate variable itself
    DisturbanceSpec disturbance = decl.disturbance;
    disturbance.target = variable;

    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < decl.trials; ++i)
        seeds.push_back(scenario.seed + static_cast<std::uint64_t>(i));

    TcvReport report = tcv([&scenario] { return build_world(scenario); }, decl.controller_loops,
                           variable, disturbance, decl.theta, seeds, decl.steps);

    fs::path dir = out ? fs::path(*out) : fs::path("out") / (scenario.name + "-tcv");
    fs::create_directories(dir);
    std::ofstream lines(dir / "tcv_report.jsonl", std::ios::trunc);
    lines << "{\"schema\":\"enerstat-tcv/1\"}\n";
    for (const TcvTrial& trial : report.per_trial)
        lines << OrderedJson{{"seed", trial.seed},
                             {"S", rational_str(trial.attenuation)},
                             {"S_real", rational_double(trial.attenuation)},
                             {"verdict", trial.verdict}}
                     .dump()
              << "\n";
    lines << OrderedJson{{"variable", report.variable},
                         {"pooled_S", rational_str(report.attenuation)},
                         {"pooled_S_real", rational_double(report.attenuation)},
                         {"verdict", report.verdict},
                         {"trials", report.trials}}
                 .dump()
          << "\n";

    std::cout << "variable " << report.variable << ": " << report.verdict
              << " (S = " << rational_double(report.attenuation) << " over " << report.trials
              << " paired trials)\nreport: " << (dir / "tcv_report.jsonl").string() << "\n";
    return 0;
}

int metrics_command(const std::string& bundle_dir, std::optional<Step> window) {
    Scenario scenario = scenario_from_bundle(bundle_dir);
    const Step w = window.value_or(scenario.metrics_window);
    std::vector<Event> events = read_events(fs::path(bundle_dir) / "events.jsonl");
    AssemblyMetrics m = update_metrics(events, w);
    std::cout << "events: " << events.size() << "\n";
    std::cout << "k_d (trailing " << w << " steps): " << rational_str(m.k_d) << " = "
              << rational_double(m.k_d) << "\n";
    std::cout << "k_p (trailing " << w << " steps): " << rational_str(m.k_p) << " = "
              << rational_double(m.k_p) << "\n";
    std::cout << "copy numbers:";
    for (const auto& [kind, count] : m.copy_number) std::cout << " " << kind << ":" << count;
    std::cout << "\n";
    auto series = metrics_series(events, w);
    if (auto at = detect_transition(series, 2))
        std::cout << "k_p<k_d -> k_d<k_p transition at step " << *at << "\n";
    else
        std::cout << "no k_p<k_d -> k_d<k_p transition\n";
    write_metrics_csv(fs::path(bundle_dir) / "metrics.csv", events, w);
    std::cout << "metrics.csv rewritten with window " << w << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"enerstat: deterministic simulator for enerstatic systems"};
    app.require_subcommand(1);

    std::string scenario_path, bundle_dir, prop, seed_range, theta, variable;
    std::optional<std::uint64_t> seed;
    std::optional<Step> steps, window;
    std::optional<int> trials;
    std::optional<std::string> out;
    Step at = 0;
    std::int64_t delta = 0;

    auto* cmd_run = app.add_subcommand("run", "run a scenario to its step limit");
    cmd_run->add_option("scenario", scenario_path, "path to a .scenario file")->required();
    cmd_run->add_option("--seed", seed, "override the scenario seed");
    cmd_run->add_option("--steps", steps, "override the step limit");
    cmd_run->add_option("--out", out, "output directory");
    cmd_run->add_option("--seeds", seed_range, "seed sweep A..B, parallel independent worlds");

    auto* cmd_perturb = app.add_subcommand("perturb", "replay a bundle, inject, continue");
    cmd_perturb->add_option("bundle", bundle_dir, "bundle directory")->required();
    cmd_perturb->add_option("--at", at, "step after which to inject")->required();
    cmd_perturb->add_option("--prop", prop, "target, e.g. loop3.energy or env.temp")->required();
    cmd_perturb->add_option("--delta", delta, "signed uE / value delta")->required();
    cmd_perturb->add_option("--out", out, "output directory");

    auto* cmd_tcv = app.add_subcommand("tcv", "test for controlled variable");
    cmd_tcv->add_option("scenario", scenario_path, "path to a .scenario file")->required();
    cmd_tcv->add_option("--variable", variable, "candidate controlled variable");
    cmd_tcv->add_option("--theta", theta, "attenuation threshold (rational)");
    cmd_tcv->add_option("--trials", trials, "paired trial count");
    cmd_tcv->add_option("--steps", steps, "steps per trial");
    cmd_tcv->add_option("--out", out, "output directory");

    auto* cmd_metrics = app.add_subcommand("metrics", "recompute metrics from a bundle");
    cmd_metrics->add_option("bundle", bundle_dir, "bundle directory")->required();
    cmd_metrics->add_option("--window", window, "window length in steps");

    auto* cmd_validate = app.add_subcommand("validate", "load and validate a scenario");
    cmd_validate->add_option("scenario", scenario_path, "path to a .scenario file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (cmd_run->parsed()) return run_command(scenario_path, seed, steps, out, seed_range);
        if (cmd_perturb->parsed()) {
            Scenario snapshot = scenario_from_bundle(bundle_dir);
            fs::path dir = out ? fs::path(*out)
                               : fs::path(bundle_dir).parent_path() /
                                     (fs::path(bundle_dir).filename().string() + "-perturbed");
            RunBundle bundle = perturb_replay(bundle_dir, at, prop, delta, dir);
            std::cout << "perturbed " << snapshot.name << " at step " << at << ": " << prop << " "
                      << (delta >= 0 ? "+" : "") << delta << "\n"
                      << bundle.steps_run << " steps, checksum " << bundle.checksum << ", events "
                      << (dir / "events.jsonl").string() << "\n";
            return 0;
        }
        if (cmd_tcv->parsed()) return tcv_command(scenario_path, variable, theta, trials, steps, out);
        if (cmd_metrics->parsed()) return metrics_command(bundle_dir, window);
        if (cmd_validate->parsed()) {
            Scenario scenario = load_scenario(scenario_path);
            for (const std::string& warning : validate_world(build_world(scenario)))
                std::cout << "warning: " << warning << "\n";
            std::cout << scenario.name << ": OK (" << scenario.catalog.size() << " kinds, "
                      << scenario.instances.size() << " instances, " << scenario.loops.size()
                      << " loops, " << scenario.channels.size() << " channels)\n";
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
