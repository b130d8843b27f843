#include "doctest.h"

#include <cstdlib>
#include <unistd.h>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "enerstat/run.hpp"
#include "enerstat/scenario.hpp"

namespace fs = std::filesystem;
using namespace enerstat;

namespace {

const fs::path kScenarios = ENERSTAT_SCENARIO_DIR;

fs::path fresh_dir(const std::string& tag) {
    static int counter = 0;
    fs::path dir = fs::temp_directory_path() /
                   ("enerstat_" + tag + "_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter++));
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

// Mirrors load_scenario for in-memory JSON: parse, build, validate.
Scenario inline_scenario(const std::string& json_text) {
    Scenario s = parse_scenario_json(nlohmann::ordered_json::parse(json_text), fs::path("."));
    validate_world(build_world(s));
    return s;
}

}  // namespace

TEST_CASE("bundled scenarios load, validate and carry their declared shape") {
    SUBCASE("men: 30 loops, 3 channels each, 5 kinds") {
        Scenario men = load_scenario((kScenarios / "men.scenario").string());
        CHECK(men.loops.size() == 30);
        CHECK(men.channels.size() == 90);
        CHECK(men.catalog.size() == 5);
        World world = build_world(men);
        CHECK(validate_world(world).empty());
        CHECK(world.instances.size() == 62);  // 30 member pairs + 2 free radiators
        CHECK(world.ledger.total() == 100000);
    }

    SUBCASE("every bundled scenario loads clean") {
        for (const char* name :
             {"minimal_loop.scenario", "men.scenario", "thermostat.scenario",
              "learning.scenario", "neuron.scenario"}) {
            CAPTURE(name);
            CHECK_NOTHROW(load_scenario((kScenarios / name).string()));
        }
    }
}

TEST_CASE("bundled scenarios complete their declared step limits alive") {
    // men's 100k-step completion is covered by the acceptance suite; the
    // others run to their declared limits here
    for (const char* name : {"minimal_loop.scenario", "thermostat.scenario",
                             "learning.scenario", "neuron.scenario"}) {
        CAPTURE(name);
        Scenario scenario = load_scenario((kScenarios / name).string());
        fs::path dir = fresh_dir("complete");
        RunBundle bundle = run(scenario, dir);
        CHECK(bundle.steps_run == scenario.step_limit);
        CHECK_FALSE(bundle.extinct);
    }

    SUBCASE("the neuron's declared anatomy survives the whole run") {
        Scenario scenario = load_scenario((kScenarios / "neuron.scenario").string());
        World world = build_world(scenario);
        for (Step t = 0; t < scenario.step_limit; ++t) step_world(world);
        CHECK(world.loops[0].alive);
        // soma, dendrite, axon, ion_channel all still standing
        for (InstanceId id : {1, 2, 3, 4}) {
            CAPTURE(id);
            CHECK(world.instances.count(id) == 1);
        }
        // and stimulation-gated allocation actually gated: surplus flowed in
        CHECK(world.catalog.discovery_steps.size() > 4);  // policy assembled transients
    }
}

TEST_CASE("scenario schema errors surface at load") {
    SUBCASE("missing seed: reproducibility is not optional") {
        try {
            inline_scenario(R"json({"version":1,"total_energy":100,"step_limit":10})json");
            CHECK(false);
        } catch (const Error& e) {
            CHECK(e.code() == Errc::SchemaError);
        }
    }

    SUBCASE("a niche-violating program is a DslError before any run") {
        // kind 0 referencing struct[0] refers to itself: outside its niche
        try {
            inline_scenario(R"json({
                "version": 1, "total_energy": 100, "seed": 1, "step_limit": 10,
                "catalog": [{"name": "bad", "program_text": "sense(struct[0].p)"}]
            })json");
            CHECK(false);
        } catch (const Error& e) {
            CHECK(e.code() == Errc::DslError);
        }
    }

    SUBCASE("unparsable program text carries its location") {
        try {
            inline_scenario(R"json({
                "version": 1, "total_energy": 100, "seed": 1, "step_limit": 10,
                "catalog": [{"name": "bad", "program_text": "affect(env.x, 1"}]
            })json");
            CHECK(false);
        } catch (const Error& e) {
            CHECK(e.code() == Errc::DslError);
            CHECK(std::string(e.what()).find("1:16") != std::string::npos);
        }
    }

    SUBCASE("nests are carried as data and must stay acyclic") {
        Scenario ok = inline_scenario(R"json({
            "version": 1, "total_energy": 1000, "seed": 1, "step_limit": 10,
            "catalog": [{"name": "a", "program_text": "affect(env.alloc_self, 6)"}],
            "instances": [{"kind": 0, "position": [0, 0]}, {"kind": 0, "position": [5, 5]}],
            "loops": [{"members": [0], "radii": [1, 2, 3], "nests": [1]},
                      {"members": [1], "radii": [1, 2, 3]}]
        })json");
        World world = build_world(ok);
        CHECK(world.loops[0].nested_loops == std::vector<LoopId>{1});
        CHECK(scenario_snapshot(ok).at("loops").at(0).at("nests").at(0).get<int>() == 1);

        try {
            inline_scenario(R"json({
                "version": 1, "total_energy": 1000, "seed": 1, "step_limit": 10,
                "catalog": [{"name": "a", "program_text": "affect(env.alloc_self, 6)"}],
                "instances": [{"kind": 0, "position": [0, 0]}, {"kind": 0, "position": [5, 5]}],
                "loops": [{"members": [0], "radii": [1, 2, 3], "nests": [1]},
                          {"members": [1], "radii": [1, 2, 3], "nests": [0]}]
            })json");
            CHECK(false);
        } catch (const Error& e) {
            CHECK(std::string(e.what()).find("cycle") != std::string::npos);
        }
    }

    SUBCASE("disconnected loop members violate the relationship rule") {
        try {
            inline_scenario(R"json({
                "version": 1, "total_energy": 1000, "seed": 1, "step_limit": 10,
                "catalog": [{"name": "a", "program_text": "affect(env.alloc_self, 6)",
                             "effective_radius": 1}],
                "instances": [{"kind": 0, "position": [0, 0]},
                              {"kind": 0, "position": [10, 10]}],
                "loops": [{"members": [0, 1], "radii": [1, 2, 3]}]
            })json");
            CHECK(false);
        } catch (const Error& e) {
            CHECK(e.code() == Errc::SchemaError);
            CHECK(std::string(e.what()).find("relationship") != std::string::npos);
        }
    }
}

TEST_CASE("minimal loop run: impulse 50, rate 2, stasis by step 25, no extinction") {
    Scenario scenario = load_scenario((kScenarios / "minimal_loop.scenario").string());
    fs::path dir = fresh_dir("minimal");
    RunBundle bundle = run(scenario, dir);
    CHECK(bundle.steps_run == 60);
    CHECK_FALSE(bundle.extinct);

    std::vector<Event> events = read_events(dir / "events.jsonl");
    Step stasis_at = -1;
    for (const Event& e : events)
        if (const auto* w = std::get_if<WindowTransitionEvent>(&e.payload))
            if (w->to == "stasis" && stasis_at < 0) stasis_at = e.step;
    // energy 50 drains 2 per step: zero after the 25th step (index 24)
    CHECK(stasis_at == 24);
    // and it stays there: no transition away afterwards
    for (const Event& e : events)
        if (const auto* w = std::get_if<WindowTransitionEvent>(&e.payload))
            CHECK(!(e.step > stasis_at && w->from == "stasis"));
}

TEST_CASE("determinism: same seed, byte-identical logs and equal checksums") {
    Scenario scenario = load_scenario((kScenarios / "learning.scenario").string());
    scenario.step_limit = 250;
    fs::path a = fresh_dir("det_a"), b = fresh_dir("det_b");
    RunBundle ra = run(scenario, a);
    RunBundle rb = run(scenario, b);
    CHECK(ra.checksum == rb.checksum);
    CHECK(slurp(a / "events.jsonl") == slurp(b / "events.jsonl"));
    CHECK(slurp(a / "metrics.csv") == slurp(b / "metrics.csv"));

    Scenario reseeded = scenario;
    reseeded.seed = scenario.seed + 1;
    RunBundle rc = run(reseeded, fresh_dir("det_c"));
    CHECK(rc.checksum != ra.checksum);
}

TEST_CASE("zero-step limit: construction-only log, initial checksum") {
    Scenario scenario = load_scenario((kScenarios / "minimal_loop.scenario").string());
    scenario.step_limit = 0;
    fs::path dir = fresh_dir("zero");
    RunBundle bundle = run(scenario, dir);
    CHECK(bundle.steps_run == 0);
    // no step ever ran: only the initial assembly and its discovery are logged
    std::vector<Event> events = read_events(dir / "events.jsonl");
    CHECK(events.size() == 2);
    CHECK(std::holds_alternative<AssembleEvent>(events[0].payload));
    CHECK(std::holds_alternative<DiscoveryEvent>(events[1].payload));
    CHECK(bundle.checksum == world_checksum(build_world(scenario)));
    // and copy numbers reconstruct from the log alone
    CHECK(update_metrics(events, 10).copy_number.at(0) == 1);
}

TEST_CASE("perturb replay") {
    Scenario scenario = load_scenario((kScenarios / "learning.scenario").string());
    scenario.step_limit = 120;
    fs::path base = fresh_dir("base");
    RunBundle original = run(scenario, base);

    SUBCASE("delta 0 reproduces the run: equal checksum, identical post-step events") {
        fs::path replay = fresh_dir("replay0");
        RunBundle replayed = perturb_replay(base, 50, "loop0.energy", 0, replay);
        CHECK(replayed.checksum == original.checksum);

        auto post = [](const fs::path& dir, Step after) {
            std::vector<std::string> lines;
            for (const Event& e : read_events(dir / "events.jsonl"))
                if (e.step > after) lines.push_back(event_line(e));
            return lines;
        };
        CHECK(post(base, 50) == post(replay, 50));
    }

    SUBCASE("a real injection lands as a logged Perturbation at the requested step") {
        fs::path replay = fresh_dir("replay40");
        RunBundle replayed = perturb_replay(base, 50, "loop0.energy", 40, replay);
        CHECK(replayed.checksum != original.checksum);
        bool found = false;
        for (const Event& e : read_events(replay / "events.jsonl"))
            if (const auto* p = std::get_if<PerturbationEvent>(&e.payload))
                if (p->source == "injected" && e.step == 50 && p->target == "loop0.energy")
                    found = true;
        CHECK(found);
    }

    SUBCASE("a step outside the run is refused") {
        CHECK_THROWS_AS(perturb_replay(base, 500, "loop0.energy", 1, fresh_dir("bad")), Error);
    }
}

TEST_CASE("credit updates log the resolved trace alongside the policy snapshot") {
    Scenario scenario = load_scenario((kScenarios / "learning.scenario").string());
    scenario.step_limit = 200;
    fs::path dir = fresh_dir("trace");
    run(scenario, dir);
    bool update_seen = false;
    for (const Event& e : read_events(dir / "events.jsonl"))
        if (const auto* w = std::get_if<WindowTransitionEvent>(&e.payload))
            if (!w->outcome.empty()) {
                update_seen = true;
                CHECK(!w->trace.empty());    // the actions that drove the update
                CHECK(!w->policy.empty());   // and the weights after it
                for (const TraceRecord& t : w->trace) CHECK(t.step <= e.step);
            }
    CHECK(update_seen);
}

TEST_CASE("metrics are a pure fold: persisted log equals the live computation") {
    Scenario scenario = load_scenario((kScenarios / "learning.scenario").string());
    scenario.step_limit = 300;
    World world = build_world(scenario);
    fs::path dir = fresh_dir("fold");
    fs::create_directories(dir);
    JsonlFileSink file_sink((dir / "events.jsonl").string());
    VectorSink live;
    TeeSink tee({&file_sink, &live});
    world.sink = &tee;
    for (Step s = 0; s < scenario.step_limit; ++s) step_world(world);
    file_sink.flush();

    AssemblyMetrics from_live = update_metrics(live.events(), 100);
    AssemblyMetrics from_disk = update_metrics(read_events(dir / "events.jsonl"), 100);
    CHECK(from_live.k_d == from_disk.k_d);
    CHECK(from_live.k_p == from_disk.k_p);
    CHECK(from_live.copy_number == from_disk.copy_number);
    CHECK(from_live.discoveries == from_disk.discoveries);
    CHECK(from_live.productions == from_disk.productions);
}

TEST_CASE("scenario snapshots are self-contained and rebuild identical worlds") {
    Scenario scenario = load_scenario((kScenarios / "neuron.scenario").string());
    auto snapshot = scenario_snapshot(scenario);
    Scenario rebuilt = parse_scenario_json(snapshot, fs::path("/nonexistent"));
    CHECK(world_checksum(build_world(rebuilt)) == world_checksum(build_world(scenario)));
}

#ifdef ENERSTAT_CLI_PATH
namespace {

int run_cli(const std::string& args) {
    const std::string command = std::string(ENERSTAT_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(command.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("CLI surface end to end: exit codes 0/1/2") {
    const fs::path out = fresh_dir("cli");
    const std::string minimal = (kScenarios / "minimal_loop.scenario").string();

    CHECK(run_cli("validate " + minimal) == 0);
    CHECK(run_cli("validate /nonexistent.scenario") == 1);
    CHECK(run_cli("frobnicate") == 2);
    CHECK(run_cli("run") == 2);

    CHECK(run_cli("run " + minimal + " --out " + (out / "a").string()) == 0);
    CHECK(run_cli("metrics " + (out / "a").string()) == 0);
    CHECK(run_cli("perturb " + (out / "a").string() + " --at 10 --prop loop0.energy --delta -4 --out " +
                  (out / "b").string()) == 0);
    CHECK(run_cli("run " + minimal + " --seeds 3..4 --out " + (out / "sweep").string()) == 0);
    CHECK(fs::exists(out / "sweep" / "seed3" / "events.jsonl"));
    CHECK(fs::exists(out / "sweep" / "seed4" / "events.jsonl"));

    const std::string thermostat = (kScenarios / "thermostat.scenario").string();
    CHECK(run_cli("tcv " + thermostat + " --trials 2 --steps 80 --out " +
                  (out / "tcv").string()) == 0);
    CHECK(fs::exists(out / "tcv" / "tcv_report.jsonl"));
}
#endif
