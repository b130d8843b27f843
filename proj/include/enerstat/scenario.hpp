// Scenario files: the documented JSON schema that fully determines a run
// given its seed. Programs live in sibling .cp files (or inline program_text
// in self-contained bundles); everything is parsed, schema-validated and
// niche-checked eagerly at load, before any world steps.
#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "enerstat/parser.hpp"
#include "enerstat/tcv.hpp"
#include "enerstat/world.hpp"

namespace enerstat {

inline constexpr int kScenarioVersion = 1;

struct ScenarioKind {
    std::string name;
    std::string program_path;  // as referenced, for reporting
    std::string program_text;
    std::int32_t effective_radius = 4;
    std::vector<PropertyTemplate> properties;
};

struct ScenarioInstance {
    KindId kind = -1;
    int x = 0;
    int y = 0;
};

struct ScenarioLoop {
    std::vector<int> members;       // indices into instances
    std::vector<LoopId> nests;      // loops nested inside this one (data only)
    Energy setpoint = 0;
    Energy r_stasis = 0;
    Energy r_action = 0;
    Energy r_cap = 0;
    Energy initial_energy = 0;
    std::optional<ActionPolicy> policy;
};

struct ScenarioChannel {
    LoopId origin = -1;
    bool target_pool = false;
    LoopId target = -1;
    Rational gain = make_rational(1, 1);
    Energy cap = 0;
};

struct ScenarioTcv {
    std::vector<LoopId> controller_loops;
    std::vector<std::string> variables;
    std::vector<std::string> dummy_variables;
    DisturbanceSpec disturbance;
    Rational theta = make_rational(1, 4);
    int trials = 20;
    Step steps = 300;
};

struct Scenario {
    std::string name;
    WorldMode mode = WorldMode::Closed;
    Energy total_energy = 0;
    InflowSpec inflow;
    std::uint64_t seed = 0;
    Step step_limit = 0;
    Energy c_squared = 1;
    int grid_w = 64;
    int grid_h = 64;
    Energy assembly_density_threshold = 0;
    Step metrics_window = 100;
    bool learning = true;
    CostTable cost_table = CostTable::defaults();
    std::vector<std::pair<std::string, PropertyTemplate>> env_properties;  // name -> template
    std::vector<ScenarioKind> catalog;
    std::map<KindId, Energy> alloc;
    std::vector<ScenarioInstance> instances;
    std::vector<ScenarioLoop> loops;
    std::vector<ScenarioChannel> channels;
    std::vector<ScheduledPerturbation> perturbations;
    GeneratorConfig generator;
    std::optional<ScenarioTcv> tcv;
};

namespace detail {

using Json = nlohmann::ordered_json;

inline void require(bool ok, const std::string& message) {
    if (!ok) raise(Errc::SchemaError, message);
}

inline PerturbationModel parse_perturbation_model(const Json& j) {
    PerturbationModel model;
    if (j.contains("shape")) {
        const std::string shape = j.at("shape").get<std::string>();
        if (shape == "linear") model.shape = PerturbationShape::Linear;
        else if (shape == "quadratic") model.shape = PerturbationShape::Quadratic;
        else raise(Errc::SchemaError, "perturbation shape must be linear|quadratic: " + shape);
    }
    model.kappa = j.value("kappa", 0);
    require(model.kappa >= 0, "kappa must be >= 0");
    return model;
}

inline PropertyTemplate parse_property(const Json& j) {
    PropertyTemplate tmpl;
    require(j.contains("name"), "property needs a name");
    tmpl.name = j.at("name").get<std::string>();
    tmpl.default_value = j.value("default", 0);
    tmpl.initial = j.value("initial", tmpl.default_value);
    if (j.contains("perturbation")) tmpl.perturbation = parse_perturbation_model(j.at("perturbation"));
    return tmpl;
}

inline DisturbanceSpec parse_disturbance(const Json& j) {
    DisturbanceSpec spec;
    const std::string kind = j.value("kind", "square");
    if (kind == "square") spec.kind = DisturbanceSpec::Kind::Square;
    else if (kind == "noise") spec.kind = DisturbanceSpec::Kind::Noise;
    else if (kind == "constant") spec.kind = DisturbanceSpec::Kind::Constant;
    else raise(Errc::SchemaError, "disturbance kind must be square|noise|constant: " + kind);
    spec.amplitude = j.value("amplitude", 0);
    spec.period = j.value("period", 20);
    require(j.contains("target"), "disturbance needs a target");
    spec.target = j.at("target").get<std::string>();
    return spec;
}

inline ActionPolicy parse_policy(const Json& j) {
    ActionPolicy policy;
    policy.eta = parse_rational(j.value("eta", "1/10"));
    require(j.contains("actions") && j.at("actions").is_array() && !j.at("actions").empty(),
            "policy needs a nonempty actions array");
    for (const Json& a : j.at("actions")) {
        LoopAction action;
        const std::string type = a.value("type", "no_op");
        if (type == "no_op") action.type = ActionType::NoOp;
        else if (type == "assemble") action.type = ActionType::Assemble;
        else if (type == "disassemble_oldest") action.type = ActionType::DisassembleOldest;
        else raise(Errc::SchemaError, "unknown action type " + type);
        if (action.type != ActionType::NoOp) {
            require(a.contains("kind"), "action " + type + " needs a kind");
            action.kind = a.at("kind").get<KindId>();
        }
        policy.actions.push_back(action);
        policy.weights.push_back(parse_rational(a.value("weight", "1")));
    }
    policy.validate();
    return policy;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) raise(Errc::MissingFile, path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

}  // namespace detail

inline Scenario parse_scenario_json(const detail::Json& j, const std::filesystem::path& base_dir) {
    using detail::require;
    Scenario s;
    require(j.is_object(), "scenario must be a JSON object");
    require(j.value("version", 0) == kScenarioVersion,
            "scenario version must be " + std::to_string(kScenarioVersion));
    s.name = j.value("name", "unnamed");
    const std::string mode = j.value("mode", "closed");
    require(mode == "closed" || mode == "open", "mode must be closed|open");
    s.mode = mode == "closed" ? WorldMode::Closed : WorldMode::Open;
    require(j.contains("total_energy"), "total_energy is mandatory");
    s.total_energy = j.at("total_energy").get<Energy>();
    require(s.total_energy >= 0, "total_energy must be >= 0");
    if (j.contains("inflow")) {
        require(s.mode == WorldMode::Open, "inflow is only meaningful in open mode");
        s.inflow.amount = j.at("inflow").value("amount", 0);
        s.inflow.every = j.at("inflow").value("every", 1);
    }
    require(j.contains("seed"), "seed is mandatory: runs must be reproducible");
    s.seed = j.at("seed").get<std::uint64_t>();
    require(j.contains("step_limit"), "step_limit is mandatory");
    s.step_limit = j.at("step_limit").get<Step>();
    require(s.step_limit >= 0, "step_limit must be >= 0");
    s.c_squared = j.value("c_squared", 1);
    require(s.c_squared >= 1, "c_squared must be >= 1");
    if (j.contains("grid")) {
        s.grid_w = j.at("grid").value("width", 64);
        s.grid_h = j.at("grid").value("height", 64);
        require(s.grid_w > 0 && s.grid_h > 0, "grid dimensions must be positive");
    }
    s.assembly_density_threshold = j.value("assembly_density_threshold", 0);
    s.metrics_window = j.value("metrics_window", 100);
    require(s.metrics_window > 0, "metrics_window must be >= 1");
    s.learning = j.value("learning", true);

    if (j.contains("cost_table")) {
        const auto names = node_kinds_by_name();
        const detail::Json& ct = j.at("cost_table");
        for (const auto& [field, table] :
             {std::pair{"cost", &s.cost_table.cost}, std::pair{"dissipation", &s.cost_table.dissipation}}) {
            if (!ct.contains(field)) continue;
            for (const auto& [key, value] : ct.at(field).items()) {
                auto it = names.find(key);
                require(it != names.end(), std::string("unknown node kind in cost_table: ") + key);
                (*table)[it->second] = value.get<Energy>();
            }
        }
        s.cost_table.validate();
    }

    if (j.contains("env_properties"))
        for (const detail::Json& p : j.at("env_properties")) {
            PropertyTemplate tmpl = detail::parse_property(p);
            s.env_properties.emplace_back(tmpl.name, tmpl);
        }

    if (j.contains("catalog"))
        for (const detail::Json& k : j.at("catalog")) {
            ScenarioKind kind;
            require(k.contains("name"), "catalog entry needs a name");
            kind.name = k.at("name").get<std::string>();
            if (k.contains("program_text")) {
                kind.program_text = k.at("program_text").get<std::string>();
            } else {
                require(k.contains("program"), "catalog entry needs program or program_text");
                kind.program_path = k.at("program").get<std::string>();
                kind.program_text = detail::read_file(base_dir / kind.program_path);
            }
            kind.effective_radius = k.value("effective_radius", 4);
            require(kind.effective_radius >= 0, "effective_radius must be >= 0");
            if (k.contains("properties"))
                for (const detail::Json& p : k.at("properties"))
                    kind.properties.push_back(detail::parse_property(p));
            s.catalog.push_back(std::move(kind));
        }

    if (j.contains("alloc"))
        for (const auto& [key, value] : j.at("alloc").items()) {
            const KindId kind = static_cast<KindId>(std::stol(key));
            require(kind >= 0 && kind < static_cast<KindId>(s.catalog.size()),
                    "alloc references unknown kind " + key);
            s.alloc[kind] = value.get<Energy>();
        }

    if (j.contains("instances"))
        for (const detail::Json& i : j.at("instances")) {
            ScenarioInstance instance;
            require(i.contains("kind"), "instance needs a kind");
            instance.kind = i.at("kind").get<KindId>();
            require(instance.kind >= 0 && instance.kind < static_cast<KindId>(s.catalog.size()),
                    "instance references unknown kind");
            if (i.contains("position")) {
                instance.x = i.at("position").at(0).get<int>();
                instance.y = i.at("position").at(1).get<int>();
            }
            s.instances.push_back(instance);
        }

    if (j.contains("loops"))
        for (const detail::Json& l : j.at("loops")) {
            ScenarioLoop loop;
            require(l.contains("members") && l.at("members").is_array() &&
                        !l.at("members").empty(),
                    "loop needs a nonempty members array");
            for (const detail::Json& m : l.at("members")) {
                const int idx = m.get<int>();
                require(idx >= 0 && idx < static_cast<int>(s.instances.size()),
                        "loop member index out of range");
                loop.members.push_back(idx);
            }
            require(l.contains("radii") && l.at("radii").is_array() && l.at("radii").size() == 3,
                    "loop needs radii [stasis, action, cap]");
            loop.setpoint = l.value("setpoint", 0);
            loop.r_stasis = l.at("radii").at(0).get<Energy>();
            loop.r_action = l.at("radii").at(1).get<Energy>();
            loop.r_cap = l.at("radii").at(2).get<Energy>();
            loop.initial_energy = l.value("initial_energy", 0);
            require(loop.initial_energy >= 0, "initial_energy must be >= 0");
            if (l.contains("nests"))
                for (const detail::Json& n : l.at("nests"))
                    loop.nests.push_back(n.get<LoopId>());
            if (l.contains("policy")) loop.policy = detail::parse_policy(l.at("policy"));
            s.loops.push_back(std::move(loop));
        }

    // nests must name real loops and contain no cycles
    for (std::size_t i = 0; i < s.loops.size(); ++i)
        for (LoopId nested : s.loops[i].nests)
            require(nested >= 0 && nested < static_cast<LoopId>(s.loops.size()) &&
                        nested != static_cast<LoopId>(i),
                    "loop " + std::to_string(i) + " nests an invalid loop id");
    {
        std::vector<int> state(s.loops.size(), 0);  // 0 new, 1 visiting, 2 done
        std::function<void(std::size_t)> visit = [&](std::size_t at) {
            if (state[at] == 1) raise(Errc::SchemaError, "nest containment has a cycle");
            if (state[at] == 2) return;
            state[at] = 1;
            for (LoopId nested : s.loops[at].nests) visit(static_cast<std::size_t>(nested));
            state[at] = 2;
        };
        for (std::size_t i = 0; i < s.loops.size(); ++i) visit(i);
    }

    if (j.contains("channels"))
        for (const detail::Json& c : j.at("channels")) {
            ScenarioChannel channel;
            require(c.contains("origin"), "channel needs an origin loop");
            channel.origin = c.at("origin").get<LoopId>();
            require(channel.origin >= 0 && channel.origin < static_cast<LoopId>(s.loops.size()),
                    "channel origin out of range");
            require(c.contains("target"), "channel needs a target");
            if (c.at("target").is_string()) {
                require(c.at("target").get<std::string>() == "eel",
                        "channel target must be a loop index or \"eel\"");
                channel.target_pool = true;
            } else {
                channel.target = c.at("target").get<LoopId>();
                require(channel.target >= 0 && channel.target < static_cast<LoopId>(s.loops.size()),
                        "channel target out of range");
            }
            channel.gain = parse_rational(c.value("gain", "1"));
            channel.cap = c.value("cap", 0);
            require(channel.cap >= 0, "channel cap must be >= 0");
            s.channels.push_back(std::move(channel));
        }

    if (j.contains("perturbations"))
        for (const detail::Json& p : j.at("perturbations")) {
            ScheduledPerturbation sched;
            sched.at = p.value("at", -1);
            sched.every = p.value("every", 0);
            sched.phase = p.value("phase", 0);
            require(sched.at >= 0 || sched.every > 0,
                    "perturbation needs at or every");
            require(p.contains("target") && p.contains("delta"),
                    "perturbation needs target and delta");
            sched.target = p.at("target").get<std::string>();
            sched.delta = p.at("delta").get<std::int64_t>();
            s.perturbations.push_back(std::move(sched));
        }

    if (j.contains("generator")) {
        const detail::Json& g = j.at("generator");
        s.generator.enabled = g.value("enabled", true);
        const std::string gmode = g.value("mode", "grammar");
        require(gmode == "grammar" || gmode == "external",
                "generator mode must be grammar|external");
        s.generator.mode = gmode == "grammar" ? GeneratorMode::Grammar : GeneratorMode::Provider;
        s.generator.epoch = g.value("epoch", 100);
        s.generator.invention_budget = g.value("invention_budget", 1);
        s.generator.max_nodes = g.value("max_nodes", 24);
        s.generator.max_attempts = g.value("max_attempts", 64);
        s.generator.generate_props = g.value("generate_props", true);
        if (g.contains("radius")) {
            s.generator.radius_min = g.at("radius").at(0).get<std::int32_t>();
            s.generator.radius_max = g.at("radius").at(1).get<std::int32_t>();
        }
        require(s.generator.epoch > 0 && s.generator.invention_budget >= 0 &&
                    s.generator.max_nodes >= 3 && s.generator.max_attempts >= 1,
                "generator bounds out of range");
    }

    if (j.contains("tcv")) {
        const detail::Json& t = j.at("tcv");
        ScenarioTcv tcv_decl;
        require(t.contains("controller_loops"), "tcv needs controller_loops");
        for (const detail::Json& l : t.at("controller_loops"))
            tcv_decl.controller_loops.push_back(l.get<LoopId>());
        if (t.contains("variables"))
            for (const detail::Json& v : t.at("variables"))
                tcv_decl.variables.push_back(v.get<std::string>());
        if (t.contains("dummy_variables"))
            for (const detail::Json& v : t.at("dummy_variables"))
                tcv_decl.dummy_variables.push_back(v.get<std::string>());
        require(t.contains("disturbance"), "tcv needs a disturbance spec");
        tcv_decl.disturbance = detail::parse_disturbance(t.at("disturbance"));
        tcv_decl.theta = parse_rational(t.value("theta", "1/4"));
        tcv_decl.trials = t.value("trials", 20);
        tcv_decl.steps = t.value("steps", 300);
        require(tcv_decl.trials >= 1 && tcv_decl.steps >= 2, "tcv trials/steps out of range");
        s.tcv = std::move(tcv_decl);
    }

    return s;
}

// ---------------------------------------------------------------------------
// Relationship rule for load-time loop validation: two instances are related
// when each lies within the other's effective radius and at least one of the
// two kinds affects a property of the other.

inline bool kinds_affect(const Catalog& catalog, KindId a, KindId b) {
    bool found = false;
    for_each_node(catalog.at(a).program, [&](const AstNode& node) {
        if (node.kind == NodeKind::Affect && !node.ref.env && node.ref.kind == b) found = true;
    });
    return found;
}

inline bool in_relationship(const World& world, const StructureInstance& a,
                            const StructureInstance& b) {
    const int dist = std::max(std::abs(a.x - b.x), std::abs(a.y - b.y));
    if (dist > world.catalog.at(a.kind).effective_radius ||
        dist > world.catalog.at(b.kind).effective_radius)
        return false;
    return kinds_affect(world.catalog, a.kind, b.kind) ||
           kinds_affect(world.catalog, b.kind, a.kind);
}

// ---------------------------------------------------------------------------
// Build a world from a loaded scenario. Deterministic: no random draws here.
// Construction itself is observable: initial assemblies and discoveries are
// emitted (at step 0) when a sink is supplied, so copy numbers stay
// reconstructible from the log alone.

inline World build_world(const Scenario& scenario, EventSink* sink = nullptr) {
    World world;
    world.sink = sink;
    world.mode = scenario.mode;
    world.inflow = scenario.inflow;
    world.ledger = Ledger(scenario.total_energy);
    world.cost_table = scenario.cost_table;
    world.c_squared = scenario.c_squared;
    world.density_threshold = scenario.assembly_density_threshold;
    world.grid_w = scenario.grid_w;
    world.grid_h = scenario.grid_h;
    world.schedule = scenario.perturbations;
    world.generator = scenario.generator;
    world.learning_enabled = scenario.learning;
    world.seed(scenario.seed);

    for (const auto& [name, tmpl] : scenario.env_properties)
        add_env_prop(world, name, tmpl.default_value, tmpl.initial, tmpl.perturbation);

    for (const ScenarioKind& kind : scenario.catalog) {
        AstNode program;
        try {
            program = parse(kind.program_text);
        } catch (const Error& e) {
            raise(Errc::DslError, kind.name + " (" + kind.program_path + "): " + e.what());
        }
        register_kind(world, kind.name, std::move(program), kind.effective_radius,
                      kind.properties);
    }

    for (const auto& [kind, amount] : scenario.alloc)
        world.env_props.at(alloc_prop_name(kind)).value = amount;

    std::vector<InstanceId> ids;
    for (const ScenarioInstance& instance : scenario.instances)
        ids.push_back(assemble_from_pool(world, instance.kind, instance.x, instance.y));

    for (std::size_t i = 0; i < scenario.loops.size(); ++i) {
        const ScenarioLoop& decl = scenario.loops[i];
        EnerstaticLoop loop;
        loop.id = static_cast<LoopId>(i);
        for (int member : decl.members)
            loop.members.push_back(ids[static_cast<std::size_t>(member)]);
        std::sort(loop.members.begin(), loop.members.end());
        loop.nested_loops = decl.nests;
        loop.setpoint = decl.setpoint;
        loop.r_stasis = decl.r_stasis;
        loop.r_action = decl.r_action;
        loop.r_cap = decl.r_cap;
        loop.policy = decl.policy;
        loop.validate();
        world.loops.push_back(std::move(loop));
        if (decl.initial_energy > 0)
            deposit_to_loop(world, world.loops.back(), AccountRef::pool(), decl.initial_energy);
    }

    for (std::size_t i = 0; i < scenario.channels.size(); ++i) {
        const ScenarioChannel& decl = scenario.channels[i];
        EnergyChannel channel;
        channel.id = static_cast<ChannelId>(i);
        channel.origin = ChannelEnd::of_loop(decl.origin);
        channel.target = decl.target_pool ? ChannelEnd::pool() : ChannelEnd::of_loop(decl.target);
        channel.gain = decl.gain;
        channel.cap = decl.cap;
        world.channels.push_back(std::move(channel));
    }

    return world;
}

// Load-time structural validation beyond the schema: loop membership must
// form a connected relationship graph (radius overlap + a directed affect),
// and multi-loop members are reported. Returns human-readable warnings;
// violations throw SchemaError.
inline std::vector<std::string> validate_world(const World& world) {
    std::vector<std::string> warnings;
    std::map<InstanceId, int> loop_count;
    for (const EnerstaticLoop& loop : world.loops) {
        for (InstanceId member : loop.members) ++loop_count[member];
        if (loop.members.size() < 2) continue;
        // BFS over the relationship graph
        std::set<InstanceId> seen{loop.members.front()};
        std::vector<InstanceId> frontier{loop.members.front()};
        while (!frontier.empty()) {
            InstanceId current = frontier.back();
            frontier.pop_back();
            for (InstanceId other : loop.members) {
                if (seen.count(other)) continue;
                if (in_relationship(world, world.instances.at(current),
                                    world.instances.at(other))) {
                    seen.insert(other);
                    frontier.push_back(other);
                }
            }
        }
        if (seen.size() != loop.members.size())
            raise(Errc::SchemaError,
                  "loop " + std::to_string(loop.id) +
                      " members are not connected under the relationship rule "
                      "(mutual radius + at least one directed affect)");
    }
    for (const auto& [instance, count] : loop_count)
        if (count > 1)
            warnings.push_back("instance " + std::to_string(instance) + " is shared by " +
                               std::to_string(count) + " loops");
    return warnings;
}

// Parses, schema-validates and eagerly builds (then discards) the world so
// every DSL and structural error surfaces before any run.
inline Scenario load_scenario(const std::string& path) {
    std::filesystem::path file(path);
    if (!std::filesystem::exists(file)) raise(Errc::MissingFile, path);
    detail::Json j;
    try {
        std::ifstream in(file);
        j = detail::Json::parse(in);
    } catch (const std::exception& e) {
        raise(Errc::SchemaError, path + ": " + e.what());
    }
    Scenario scenario = parse_scenario_json(j, file.parent_path());
    World world = build_world(scenario);
    validate_world(world);
    return scenario;
}

// Self-contained JSON snapshot (program sources inlined) for run bundles.
inline detail::Json scenario_snapshot(const Scenario& s) {
    using detail::Json;
    Json j;
    j["version"] = kScenarioVersion;
    j["name"] = s.name;
    j["mode"] = s.mode == WorldMode::Closed ? "closed" : "open";
    j["total_energy"] = s.total_energy;
    if (s.mode == WorldMode::Open) {
        j["inflow"] = Json{{"amount", s.inflow.amount}, {"every", s.inflow.every}};
    }
    j["seed"] = s.seed;
    j["step_limit"] = s.step_limit;
    j["c_squared"] = s.c_squared;
    j["grid"] = Json{{"width", s.grid_w}, {"height", s.grid_h}};
    j["assembly_density_threshold"] = s.assembly_density_threshold;
    j["metrics_window"] = s.metrics_window;
    j["learning"] = s.learning;

    Json cost = Json::object(), dissipation = Json::object();
    for (const auto& [kind, value] : s.cost_table.cost) cost[node_kind_name(kind)] = value;
    for (const auto& [kind, value] : s.cost_table.dissipation)
        dissipation[node_kind_name(kind)] = value;
    j["cost_table"] = Json{{"cost", std::move(cost)}, {"dissipation", std::move(dissipation)}};

    auto prop_json = [](const PropertyTemplate& p) {
        return Json{{"name", p.name},
                    {"default", p.default_value},
                    {"initial", p.initial},
                    {"perturbation",
                     Json{{"shape", p.perturbation.shape == PerturbationShape::Linear
                                        ? "linear"
                                        : "quadratic"},
                          {"kappa", p.perturbation.kappa}}}};
    };
    j["env_properties"] = Json::array();
    for (const auto& [name, tmpl] : s.env_properties) j["env_properties"].push_back(prop_json(tmpl));
    j["catalog"] = Json::array();
    for (const ScenarioKind& kind : s.catalog) {
        Json k;
        k["name"] = kind.name;
        k["program_text"] = kind.program_text;
        k["effective_radius"] = kind.effective_radius;
        k["properties"] = Json::array();
        for (const PropertyTemplate& p : kind.properties) k["properties"].push_back(prop_json(p));
        j["catalog"].push_back(std::move(k));
    }
    j["alloc"] = Json::object();
    for (const auto& [kind, amount] : s.alloc) j["alloc"][std::to_string(kind)] = amount;
    j["instances"] = Json::array();
    for (const ScenarioInstance& i : s.instances)
        j["instances"].push_back(Json{{"kind", i.kind}, {"position", Json::array({i.x, i.y})}});
    j["loops"] = Json::array();
    for (const ScenarioLoop& l : s.loops) {
        Json loop;
        loop["members"] = l.members;
        if (!l.nests.empty()) loop["nests"] = l.nests;
        loop["setpoint"] = l.setpoint;
        loop["radii"] = Json::array({l.r_stasis, l.r_action, l.r_cap});
        loop["initial_energy"] = l.initial_energy;
        if (l.policy) {
            Json policy;
            policy["eta"] = rational_str(l.policy->eta);
            policy["actions"] = Json::array();
            for (std::size_t a = 0; a < l.policy->actions.size(); ++a) {
                const LoopAction& action = l.policy->actions[a];
                Json entry;
                entry["type"] = action.type == ActionType::NoOp ? "no_op"
                                : action.type == ActionType::Assemble ? "assemble"
                                                                      : "disassemble_oldest";
                if (action.type != ActionType::NoOp) entry["kind"] = action.kind;
                entry["weight"] = rational_str(l.policy->weights[a]);
                policy["actions"].push_back(std::move(entry));
            }
            loop["policy"] = std::move(policy);
        }
        j["loops"].push_back(std::move(loop));
    }
    j["channels"] = Json::array();
    for (const ScenarioChannel& c : s.channels) {
        Json channel;
        channel["origin"] = c.origin;
        if (c.target_pool) channel["target"] = "eel";
        else channel["target"] = c.target;
        channel["gain"] = rational_str(c.gain);
        channel["cap"] = c.cap;
        j["channels"].push_back(std::move(channel));
    }
    j["perturbations"] = Json::array();
    for (const ScheduledPerturbation& p : s.perturbations) {
        Json sched;
        if (p.at >= 0) sched["at"] = p.at;
        if (p.every > 0) {
            sched["every"] = p.every;
            sched["phase"] = p.phase;
        }
        sched["target"] = p.target;
        sched["delta"] = p.delta;
        j["perturbations"].push_back(std::move(sched));
    }
    if (s.generator.enabled) {
        j["generator"] =
            Json{{"enabled", true},
                 {"mode", s.generator.mode == GeneratorMode::Grammar ? "grammar" : "external"},
                 {"epoch", s.generator.epoch},
                 {"invention_budget", s.generator.invention_budget},
                 {"max_nodes", s.generator.max_nodes},
                 {"max_attempts", s.generator.max_attempts},
                 {"generate_props", s.generator.generate_props},
                 {"radius", Json::array({s.generator.radius_min, s.generator.radius_max})}};
    }
    if (s.tcv) {
        Json t;
        t["controller_loops"] = s.tcv->controller_loops;
        t["variables"] = s.tcv->variables;
        t["dummy_variables"] = s.tcv->dummy_variables;
        t["disturbance"] =
            Json{{"kind", s.tcv->disturbance.kind == DisturbanceSpec::Kind::Square ? "square"
                          : s.tcv->disturbance.kind == DisturbanceSpec::Kind::Noise
                              ? "noise"
                              : "constant"},
                 {"amplitude", s.tcv->disturbance.amplitude},
                 {"period", s.tcv->disturbance.period},
                 {"target", s.tcv->disturbance.target}};
        t["theta"] = rational_str(s.tcv->theta);
        t["trials"] = s.tcv->trials;
        t["steps"] = s.tcv->steps;
        j["tcv"] = std::move(t);
    }
    return j;
}

}  // namespace enerstat
