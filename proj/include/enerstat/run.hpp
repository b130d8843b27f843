// Run bundles: drive a scenario to its step limit (or extinction), streaming
// the event log to disk, then emit metrics and a deterministic digest of the
// final world. Replays and perturbation injections rebuild from the bundle's
// self-contained scenario snapshot.
#pragma once

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "enerstat/events_json.hpp"
#include "enerstat/metrics.hpp"
#include "enerstat/printer.hpp"
#include "enerstat/scenario.hpp"

namespace enerstat {

inline constexpr const char* kBundleSchema = "enerstat-bundle/1";

// ---------------------------------------------------------------------------
// World digest: FNV-1a over a canonical text serialization. Equal digests
// across replays are the determinism contract.

namespace detail {

struct Fnv {
    std::uint64_t h = 1469598103934665603ull;

    void feed(const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ull;
        }
    }

    void field(const std::string& key, const std::string& value) {
        feed(key);
        feed("=");
        feed(value);
        feed(";");
    }

    void field(const std::string& key, std::int64_t value) {
        field(key, std::to_string(value));
    }
};

}  // namespace detail

inline std::uint64_t world_checksum_u64(const World& world) {
    detail::Fnv fnv;
    fnv.field("step", world.step);
    fnv.field("mode", world.mode == WorldMode::Closed ? "closed" : "open");
    fnv.field("pool", world.ledger.free_pool());
    fnv.field("total", world.ledger.total());
    for (const auto& [id, v] : world.ledger.trapped_accounts()) fnv.field("t" + std::to_string(id), v);
    for (const auto& [id, v] : world.ledger.buffer_accounts()) fnv.field("b" + std::to_string(id), v);
    for (const auto& [name, prop] : world.env_props) {
        fnv.field("env." + name, prop.value);
        fnv.field("env." + name + ".d", prop.default_value);
        fnv.field("env." + name + ".k", prop.perturbation.kappa);
    }
    for (const StructureKind& kind : world.catalog.kinds) {
        const std::string prefix = "kind" + std::to_string(kind.id);
        fnv.field(prefix, kind.name);
        fnv.field(prefix + ".program", print(kind.program));
        fnv.field(prefix + ".fed", kind.fed);
        fnv.field(prefix + ".fel", kind.fel);
        fnv.field(prefix + ".radius", kind.effective_radius);
        for (const PropertyTemplate& p : kind.causal_props)
            fnv.field(prefix + ".prop." + p.name,
                      std::to_string(p.default_value) + "," + std::to_string(p.initial) + "," +
                          std::to_string(p.perturbation.kappa));
    }
    for (const auto& [kind, at] : world.catalog.discovery_steps)
        fnv.field("disc" + std::to_string(kind), at);
    for (const auto& [id, inst] : world.instances) {
        const std::string prefix = "i" + std::to_string(id);
        fnv.field(prefix, std::to_string(inst.kind) + "@" + std::to_string(inst.x) + "," +
                              std::to_string(inst.y) + (inst.alive ? "+" : "-"));
        fnv.field(prefix + ".intake", inst.intake_this_step);
        for (const auto& [name, prop] : inst.props) fnv.field(prefix + "." + name, prop.value);
    }
    for (const EnerstaticLoop& loop : world.loops) {
        const std::string prefix = "l" + std::to_string(loop.id);
        std::string members;
        for (InstanceId m : loop.members) members += std::to_string(m) + ",";
        fnv.field(prefix + ".members", members);
        std::string nests;
        for (LoopId n : loop.nested_loops) nests += std::to_string(n) + ",";
        if (!nests.empty()) fnv.field(prefix + ".nests", nests);
        fnv.field(prefix + ".sp", loop.setpoint);
        fnv.field(prefix + ".radii", std::to_string(loop.r_stasis) + "," +
                                         std::to_string(loop.r_action) + "," +
                                         std::to_string(loop.r_cap));
        fnv.field(prefix + ".window",
                  loop.classified_once ? window_name(loop.window) : "none");
        fnv.field(prefix + ".state", std::string(loop.alive ? "alive" : "dead") +
                                         (loop.severed ? ",severed" : ""));
        if (loop.policy) {
            fnv.field(prefix + ".eta", rational_str(loop.policy->eta));
            for (std::size_t i = 0; i < loop.policy->actions.size(); ++i)
                fnv.field(prefix + ".w." + loop.policy->actions[i].label(),
                          rational_str(loop.policy->weights[i]));
        }
        for (const TraceEntry& t : loop.trace.entries)
            fnv.field(prefix + ".trace",
                      std::to_string(t.step) + "," + std::to_string(t.action) + "," +
                          std::to_string(t.loop_energy));
    }
    for (const EnergyChannel& channel : world.channels)
        fnv.field("c" + std::to_string(channel.id),
                  channel.origin.text() + ">" + channel.target.text() + "*" +
                      rational_str(channel.gain) + "^" + std::to_string(channel.cap));
    for (std::uint64_t word : world.rng_policy.state()) fnv.field("rp", static_cast<std::int64_t>(word));
    for (std::uint64_t word : world.rng_gen.state()) fnv.field("rg", static_cast<std::int64_t>(word));
    for (std::uint64_t word : world.rng_place.state()) fnv.field("rl", static_cast<std::int64_t>(word));
    fnv.field("next", world.next_instance);
    fnv.field("learning", world.learning_enabled ? 1 : 0);
    return fnv.h;
}

inline std::string world_checksum(const World& world) {
    char buffer[17];
    std::snprintf(buffer, sizeof buffer, "%016" PRIx64, world_checksum_u64(world));
    return buffer;
}

// ---------------------------------------------------------------------------
// Reading persisted logs back (metrics recomputation, replay comparison)

inline std::vector<Event> read_events(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) raise(Errc::MissingFile, path.string());
    std::vector<Event> events;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        OrderedJson j = OrderedJson::parse(line);
        if (j.contains("schema")) continue;  // header
        Event event;
        event.step = j.at("step").get<Step>();
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "Transfer")
            event.payload = TransferEvent{j.at("from"), j.at("to"), j.at("amount"), j.at("reason")};
        else if (kind == "Assemble")
            event.payload = AssembleEvent{j.at("instance"), j.at("of_kind"), j.at("x"), j.at("y"),
                                          j.at("cost"),     j.at("payer")};
        else if (kind == "Disassemble")
            event.payload =
                DisassembleEvent{j.at("instance"), j.at("of_kind"), j.at("refund"), j.at("to")};
        else if (kind == "Death")
            event.payload = DeathEvent{j.at("entity"), j.at("id"), j.at("of_kind"), j.at("reason"),
                                       j.at("refund")};
        else if (kind == "WindowTransition") {
            WindowTransitionEvent w;
            w.loop = j.at("loop");
            w.from = j.at("from");
            w.to = j.at("to");
            w.energy = j.at("energy");
            if (j.contains("outcome")) {
                w.outcome = j.at("outcome");
                for (const auto& entry : j.at("trace"))
                    w.trace.push_back(TraceRecord{entry.at(0).get<Step>(),
                                                  entry.at(1).get<std::string>(),
                                                  entry.at(2).get<Energy>()});
                for (const auto& [label, weight] : j.at("policy").items())
                    w.policy.emplace_back(label, weight.get<std::string>());
            }
            event.payload = std::move(w);
        } else if (kind == "Discovery")
            event.payload = DiscoveryEvent{j.at("of_kind"), j.at("name")};
        else if (kind == "DivZero")
            event.payload = DivZeroEvent{j.at("instance"), j.at("of_kind")};
        else if (kind == "ChannelFlow")
            event.payload =
                ChannelFlowEvent{j.at("channel"), j.at("origin"), j.at("target"), j.at("amount")};
        else if (kind == "Perturbation")
            event.payload = PerturbationEvent{
                j.at("source"), j.at("target"),     j.at("writer"), j.at("writer_kind"),
                j.at("owner"),  j.at("owner_kind"), j.at("from"),   j.at("to"),
                j.at("cost"),   j.at("applied")};
        else
            raise(Errc::SchemaError, "unknown event kind in log: " + kind);
        events.push_back(std::move(event));
    }
    return events;
}

// ---------------------------------------------------------------------------
// Metrics outputs

// Keeps only what the assembly metrics need; the full firehose goes to disk.
class MetricsCollector : public EventSink {
public:
    void emit(Event event) override {
        if (std::holds_alternative<AssembleEvent>(event.payload) ||
            std::holds_alternative<DisassembleEvent>(event.payload) ||
            std::holds_alternative<DeathEvent>(event.payload) ||
            std::holds_alternative<DiscoveryEvent>(event.payload))
            events_.push_back(std::move(event));
    }

    const std::vector<Event>& events() const { return events_; }

private:
    std::vector<Event> events_;
};

inline void write_metrics_csv(const std::filesystem::path& path, const std::vector<Event>& events,
                              Step window) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) raise(Errc::IoError, "cannot open " + path.string());
    out << "window_start,window_length,k_d,k_p,k_d_real,k_p_real\n";
    for (const MetricsWindow& w : metrics_series(events, window)) {
        char kd[32], kp[32];
        std::snprintf(kd, sizeof kd, "%.9g", rational_double(w.k_d));
        std::snprintf(kp, sizeof kp, "%.9g", rational_double(w.k_p));
        out << w.start << ',' << w.length << ',' << rational_str(w.k_d) << ','
            << rational_str(w.k_p) << ',' << kd << ',' << kp << '\n';
    }
}

inline void write_complexity_csv(const std::filesystem::path& path, const World& world) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) raise(Errc::IoError, "cannot open " + path.string());
    out << "# declared proxies: ast_size (node count), niche_depth (longest referenced chain)\n";
    out << "kind,name,ast_size,niche_depth\n";
    for (const KindComplexity& k : complexity_report(world.catalog))
        out << k.kind << ',' << world.catalog.at(k.kind).name << ',' << k.ast_size << ','
            << k.niche_depth << '\n';
}

// ---------------------------------------------------------------------------
// Runs and replays

struct RunBundle {
    std::filesystem::path dir;
    std::string checksum;
    Step steps_run = 0;
    bool extinct = false;
};

namespace detail {

inline RunBundle drive_world(const Scenario& scenario, ProgramProvider* provider,
                             const std::filesystem::path& out_dir, Step inject_at = -1,
                             const std::string& inject_target = "", std::int64_t inject_delta = 0) {
    std::filesystem::create_directories(out_dir);
    JsonlFileSink file_sink((out_dir / "events.jsonl").string());
    MetricsCollector collector;
    TeeSink tee({&file_sink, &collector});
    World world = build_world(scenario, &tee);  // construction events included
    world.provider = provider;

    RunBundle bundle;
    bundle.dir = out_dir;
    while (world.step < scenario.step_limit) {
        if (world.step == inject_at && !inject_target.empty())
            inject_perturbation(world, inject_target, inject_delta, "injected");
        step_world(world);
        if (world.instances.empty() && !world.generator.enabled) {
            bundle.extinct = true;
            break;
        }
    }
    if (world.step == inject_at && !inject_target.empty())
        inject_perturbation(world, inject_target, inject_delta, "injected");

    bundle.steps_run = world.step;
    bundle.checksum = world_checksum(world);
    file_sink.flush();

    write_metrics_csv(out_dir / "metrics.csv", collector.events(), scenario.metrics_window);
    write_complexity_csv(out_dir / "complexity.csv", world);

    OrderedJson meta;
    meta["schema"] = kBundleSchema;
    meta["name"] = scenario.name;
    meta["seed"] = scenario.seed;
    meta["steps_run"] = bundle.steps_run;
    meta["extinct"] = bundle.extinct;
    meta["checksum"] = bundle.checksum;
    meta["events"] = "events.jsonl";
    meta["metrics"] = "metrics.csv";
    meta["complexity"] = "complexity.csv";
    meta["scenario"] = scenario_snapshot(scenario);
    std::ofstream meta_out(out_dir / "bundle.json", std::ios::trunc);
    if (!meta_out) raise(Errc::IoError, "cannot write bundle.json");
    meta_out << meta.dump(2) << '\n';
    return bundle;
}

}  // namespace detail

// Steps the world to the scenario's limit or to total extinction, writing the
// event log incrementally. ConservationViolation aborts the run but the
// partial log survives on disk.
inline RunBundle run(const Scenario& scenario, const std::filesystem::path& out_dir,
                     ProgramProvider* provider = nullptr) {
    return detail::drive_world(scenario, provider, out_dir);
}

inline Scenario scenario_from_bundle(const std::filesystem::path& bundle_dir) {
    std::ifstream in(bundle_dir / "bundle.json");
    if (!in) raise(Errc::MissingFile, (bundle_dir / "bundle.json").string());
    OrderedJson meta = OrderedJson::parse(in);
    if (meta.value("schema", "") != kBundleSchema)
        raise(Errc::SchemaError, "not an enerstat bundle: " + bundle_dir.string());
    return parse_scenario_json(meta.at("scenario"), bundle_dir);
}

// Replays the bundle's scenario to `at` steps, injects a logged perturbation,
// and continues to the limit. delta 0 reproduces the original run exactly
// (modulo the one zero-delta Perturbation line).
inline RunBundle perturb_replay(const std::filesystem::path& bundle_dir, Step at,
                                const std::string& target, std::int64_t delta,
                                const std::filesystem::path& out_dir,
                                ProgramProvider* provider = nullptr) {
    Scenario scenario = scenario_from_bundle(bundle_dir);
    if (at < 0 || at > scenario.step_limit)
        raise(Errc::SchemaError, "perturbation step outside the run");
    return detail::drive_world(scenario, provider, out_dir, at, target, delta);
}

}  // namespace enerstat
