// The world: structures, enerstatic loops, energy channels, windows, the
// synchronous timestep and death. Phases run in a fixed order with the ledger
// audited after each one; two runs from the same scenario and seed produce
// bit-identical event logs.
#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "enerstat/catalog.hpp"
#include "enerstat/eval.hpp"
#include "enerstat/events.hpp"
#include "enerstat/generator.hpp"
#include "enerstat/learning.hpp"
#include "enerstat/ledger.hpp"
#include "enerstat/rng.hpp"

namespace enerstat {

enum class WorldMode { Closed, Open };

struct InflowSpec {
    Energy amount = 0;
    Step every = 1;
};

struct StructureInstance {
    InstanceId id = 0;
    KindId kind = -1;
    int x = 0;
    int y = 0;
    bool alive = true;
    Energy intake_this_step = 0;
    Step born = 0;
    std::map<std::string, Property> props;
};

struct EnerstaticLoop {
    LoopId id = -1;
    std::vector<InstanceId> members;  // kept sorted ascending
    // Nests: loops held as members of this loop. Carried, validated and
    // serialized as data; v1 attaches no dynamics to the containment.
    std::vector<LoopId> nested_loops;
    Energy setpoint = 0;
    Energy r_stasis = 0;
    Energy r_action = 0;
    Energy r_cap = 0;
    std::optional<ActionPolicy> policy;
    ActionTrace trace;
    WindowClass window = WindowClass::Stasis;
    bool classified_once = false;
    bool severed = false;  // TCV: frozen in place, energy intact
    bool alive = true;

    void validate() const {
        if (r_stasis < 0 || r_stasis >= r_action || r_action >= r_cap)
            raise(Errc::SchemaError, "loop windows must nest: 0 <= r_stasis < r_action < r_cap");
        if (policy) policy->validate();
    }
};

struct ChannelEnd {
    bool is_pool = false;
    LoopId loop = -1;

    static ChannelEnd pool() { return {true, -1}; }
    static ChannelEnd of_loop(LoopId id) { return {false, id}; }

    std::string text() const { return is_pool ? "eel" : "loop:" + std::to_string(loop); }
};

struct EnergyChannel {
    ChannelId id = -1;
    ChannelEnd origin;  // must be a loop; the pool has no setpoint to deviate from
    ChannelEnd target;  // loop or the free pool
    Rational gain = make_rational(1, 1);
    Energy cap = 0;  // per-step transfer bound, >= 0
};

struct ScheduledPerturbation {
    Step at = -1;     // one-shot, start of step `at`; or
    Step every = 0;   // periodic with this period
    Step phase = 0;
    std::string target;  // "loop<k>.energy" | "env.<name>" | "instance<id>.<name>"
    std::int64_t delta = 0;
};

struct World {
    WorldMode mode = WorldMode::Closed;
    InflowSpec inflow;
    Ledger ledger;
    Catalog catalog;
    CostTable cost_table = CostTable::defaults();
    Energy c_squared = 1;
    Energy density_threshold = 0;
    int grid_w = 64;
    int grid_h = 64;
    std::map<InstanceId, StructureInstance> instances;
    std::map<KindId, std::vector<InstanceId>> instances_by_kind;
    std::vector<EnerstaticLoop> loops;
    std::vector<EnergyChannel> channels;
    std::map<std::string, Property> env_props;
    std::vector<ScheduledPerturbation> schedule;
    GeneratorConfig generator;
    ProgramProvider* provider = nullptr;  // non-owning; provider mode only
    bool learning_enabled = true;  // false freezes policies (baseline runs)
    Rng rng_policy;
    Rng rng_gen;
    Rng rng_place;
    Step step = 0;
    InstanceId next_instance = 1;
    EventSink* sink = nullptr;  // non-owning; null discards

    void seed(std::uint64_t s) {
        Rng root(s);
        rng_policy = root.fork(1);
        rng_gen = root.fork(2);
        rng_place = root.fork(3);
    }
};

inline void emit(World& world, EventPayload payload) {
    if (world.sink) world.sink->emit(Event{world.step, std::move(payload)});
}

inline std::string alloc_prop_name(KindId kind) { return "alloc_" + std::to_string(kind); }

// ---------------------------------------------------------------------------
// Environment properties and kind registration

inline Property& add_env_prop(World& world, const std::string& name, std::int64_t default_value,
                              std::int64_t initial, PerturbationModel model) {
    if (world.env_props.count(name))
        raise(Errc::SchemaError, "duplicate env property " + name);
    Property prop;
    prop.name = name;
    prop.default_value = default_value;
    prop.value = initial;
    prop.perturbation = model;
    prop.owner = kEnvAccount;
    Energy stored = stored_property_energy(prop);
    if (stored > 0)  // fund non-default initial values up front, from the pool
        world.ledger.transfer(AccountRef::pool(), AccountRef::trapped(kEnvAccount), stored);
    return world.env_props.emplace(name, std::move(prop)).first->second;
}

inline std::set<std::string> env_prop_names(const World& world) {
    std::set<std::string> names;
    for (const auto& [name, prop] : world.env_props) names.insert(name);
    return names;
}

// Registers a kind at the next catalog index: creates its alloc slot, derives
// its niche, checks the program against it, derives fed/fel/assembly cost.
// Throws DslError when the program violates the niche.
inline KindId register_kind(World& world, const std::string& name, AstNode program,
                            std::int32_t effective_radius,
                            std::vector<PropertyTemplate> causal_props) {
    const KindId id = static_cast<KindId>(world.catalog.kinds.size());
    if (!world.env_props.count(alloc_prop_name(id)))
        add_env_prop(world, alloc_prop_name(id), 0, 0, {PerturbationShape::Linear, 0});

    StructureKind kind;
    kind.id = id;
    kind.name = name;
    kind.effective_radius = effective_radius;
    kind.causal_props = std::move(causal_props);

    std::set<std::string> env_names = env_prop_names(world);
    env_names.insert("alloc_self");  // alias for alloc_<own kind>, always in niche
    kind.niche = niche_of(id, world.catalog, env_names);

    auto violations = niche_check(program, kind.niche);
    if (!violations.empty()) {
        std::string msg = "kind " + name + ": ";
        for (const auto& v : violations) msg += v.message() + "; ";
        raise(Errc::DslError, msg);
    }

    StaticCosts costs = static_costs(program, world.cost_table);
    kind.fed = costs.fed;
    kind.fel = costs.fel;
    kind.assembly_cost = costs.fed;  // assembly and causal power cost coincide
    kind.program = std::move(program);
    world.catalog.kinds.push_back(std::move(kind));
    return id;
}

// ---------------------------------------------------------------------------
// Loop energy and membership bookkeeping

inline EnerstaticLoop& loop_at(World& world, LoopId id) {
    if (id < 0 || id >= static_cast<LoopId>(world.loops.size()))
        raise(Errc::SchemaError, "no loop " + std::to_string(id));
    return world.loops[static_cast<std::size_t>(id)];
}

inline Energy loop_energy(const World& world, const EnerstaticLoop& loop) {
    Energy sum = 0;
    for (InstanceId member : loop.members) sum += world.ledger.buffer(member);
    return sum;
}

// Greedy withdrawal across member buffers in ascending id order; the loop's
// energy is the sum, so where it sits inside the loop does not matter.
inline void withdraw_from_loop(World& world, EnerstaticLoop& loop, Energy amount,
                               const AccountRef& to) {
    for (InstanceId member : loop.members) {
        if (amount <= 0) return;
        Energy take = std::min(amount, world.ledger.buffer(member));
        if (take > 0) {
            world.ledger.transfer(AccountRef::buffer(member), to, take);
            amount -= take;
        }
    }
    if (amount > 0) raise(Errc::InsufficientBalance, "loop cannot cover withdrawal");
}

inline void deposit_to_loop(World& world, EnerstaticLoop& loop, const AccountRef& from,
                            Energy amount) {
    if (loop.members.empty()) raise(Errc::EmptyLoop, "deposit into memberless loop");
    world.ledger.transfer(from, AccountRef::buffer(loop.members.front()), amount);
}

// ---------------------------------------------------------------------------
// Window classification

inline WindowClass classify_window(const EnerstaticLoop& loop, Energy energy) {
    Energy deviation = energy >= loop.setpoint ? energy - loop.setpoint : loop.setpoint - energy;
    if (deviation <= loop.r_stasis) return WindowClass::Stasis;
    if (deviation <= loop.r_action) return WindowClass::Action;
    if (deviation <= loop.r_cap) return WindowClass::Cap;
    return WindowClass::Fatal;
}

inline WindowClass classify_window(const World& world, const EnerstaticLoop& loop) {
    return classify_window(loop, loop_energy(world, loop));
}

// Lower bound: least energy that sustains every member. Upper bound: most the
// membership can dissipate. Derived from the same ASTs as everything else.
inline std::pair<Energy, Energy> loop_window_bounds(const std::vector<const StructureKind*>& members) {
    if (members.empty()) raise(Errc::EmptyLoop, "window bounds of empty member set");
    Energy lower = 0, upper = 0;
    for (const StructureKind* kind : members) {
        lower += kind->fed;
        upper += kind->fel;
    }
    return {lower, upper};
}

// ---------------------------------------------------------------------------
// The minimal enerstatic loop (single effector, setpoint 0)

inline Energy step_minimal_loop(Energy energy, Energy effector_rate) {
    if (effector_rate < 0) raise(Errc::SchemaError, "effector rate must be >= 0");
    if (energy > 0) return energy - std::min(energy, effector_rate);
    if (energy < 0) return energy + std::min(-energy, effector_rate);
    return 0;
}

// ---------------------------------------------------------------------------
// Assembly, disassembly, death

namespace detail {

inline Property instantiate_prop(const PropertyTemplate& tmpl, InstanceId owner) {
    Property prop;
    prop.name = tmpl.name;
    prop.default_value = tmpl.default_value;
    prop.value = tmpl.initial;
    prop.perturbation = tmpl.perturbation;
    prop.owner = owner;
    return prop;
}

inline Energy spawn_cost(const StructureKind& kind) {
    Energy cost = kind.assembly_cost;
    for (const PropertyTemplate& tmpl : kind.causal_props)
        cost += stored_property_energy(instantiate_prop(tmpl, 0));
    return cost;
}

// Creates the instance and charges `payer`. Caller has already verified the
// payer can cover spawn_cost().
inline InstanceId spawn_instance(World& world, KindId kind_id, int x, int y,
                                 const std::string& payer_label,
                                 const std::function<void(World&, Energy, AccountRef)>& pay) {
    const StructureKind& kind = world.catalog.at(kind_id);
    const InstanceId id = world.next_instance++;
    StructureInstance instance;
    instance.id = id;
    instance.kind = kind_id;
    instance.x = x;
    instance.y = y;
    instance.born = world.step;
    for (const PropertyTemplate& tmpl : kind.causal_props)
        instance.props.emplace(tmpl.name, instantiate_prop(tmpl, id));

    world.ledger.open(id);
    pay(world, spawn_cost(kind), AccountRef::trapped(id));

    world.instances.emplace(id, std::move(instance));
    world.instances_by_kind[kind_id].push_back(id);

    const bool first_ever = !world.catalog.discovery_steps.count(kind_id);
    emit(world, AssembleEvent{id, kind_id, x, y, spawn_cost(kind), payer_label});
    if (first_ever) {
        world.catalog.discovery_steps[kind_id] = world.step;
        emit(world, DiscoveryEvent{kind_id, kind.name});
    }
    return id;
}

inline void drop_from_loops(World& world, InstanceId id) {
    for (EnerstaticLoop& loop : world.loops) {
        if (!loop.alive) continue;
        auto it = std::find(loop.members.begin(), loop.members.end(), id);
        if (it == loop.members.end()) continue;
        loop.members.erase(it);
        if (loop.members.empty()) {
            loop.alive = false;
            emit(world, DeathEvent{"loop", loop.id, -1, "empty", 0});
        }
    }
}

inline void erase_instance(World& world, InstanceId id) {
    auto it = world.instances.find(id);
    if (it == world.instances.end()) return;
    auto& by_kind = world.instances_by_kind[it->second.kind];
    by_kind.erase(std::remove(by_kind.begin(), by_kind.end(), id), by_kind.end());
    world.instances.erase(it);
}

// Death returns everything (assembly + stored properties + buffer) to the
// free pool: the world reclaims what equilibrium releases.
inline void kill_instance(World& world, InstanceId id, const std::string& reason) {
    auto it = world.instances.find(id);
    if (it == world.instances.end() || !it->second.alive) return;
    it->second.alive = false;
    const KindId kind = it->second.kind;
    const Energy refund = world.ledger.trapped(id) + world.ledger.buffer(id);
    if (world.ledger.trapped(id) > 0) {
        emit(world, TransferEvent{account_name(AccountRef::trapped(id)), "pool",
                                  world.ledger.trapped(id), "death_refund"});
        world.ledger.transfer(AccountRef::trapped(id), AccountRef::pool(),
                              world.ledger.trapped(id));
    }
    if (world.ledger.buffer(id) > 0) {
        emit(world, TransferEvent{account_name(AccountRef::buffer(id)), "pool",
                                  world.ledger.buffer(id), "death_refund"});
        world.ledger.transfer(AccountRef::buffer(id), AccountRef::pool(),
                              world.ledger.buffer(id));
    }
    emit(world, DeathEvent{"structure", id, kind, reason, refund});
    drop_from_loops(world, id);
    world.ledger.forget(id);
    erase_instance(world, id);
}

}  // namespace detail

// Assembles a new instance of `kind` inside `loop`, paid from the loop's
// buffers. The newborn joins the loop at the first member's cell.
inline InstanceId assemble(World& world, LoopId loop_id, KindId kind_id) {
    EnerstaticLoop& loop = loop_at(world, loop_id);
    if (!loop.alive || loop.members.empty()) raise(Errc::EmptyLoop, "assemble into dead loop");
    if (!world.catalog.has(kind_id)) raise(Errc::UnknownKind, std::to_string(kind_id));

    const Energy energy = loop_energy(world, loop);
    if (energy < world.density_threshold * static_cast<Energy>(loop.members.size()))
        raise(Errc::DensityTooLow, "loop " + std::to_string(loop_id) + " energy " +
                                       std::to_string(energy) + " below density threshold");
    const Energy cost = detail::spawn_cost(world.catalog.at(kind_id));
    if (energy < cost)
        raise(Errc::InsufficientBalance, "loop " + std::to_string(loop_id) + " holds " +
                                             std::to_string(energy) + ", assembly needs " +
                                             std::to_string(cost));

    const StructureInstance& anchor = world.instances.at(loop.members.front());
    InstanceId id = detail::spawn_instance(
        world, kind_id, anchor.x, anchor.y, "loop:" + std::to_string(loop_id),
        [&loop](World& w, Energy amount, AccountRef to) {
            withdraw_from_loop(w, loop, amount, to);
        });
    loop.members.insert(std::upper_bound(loop.members.begin(), loop.members.end(), id), id);
    return id;
}

// Assembles from the free pool (EEL-driven births and scenario init).
inline InstanceId assemble_from_pool(World& world, KindId kind_id, int x, int y) {
    if (!world.catalog.has(kind_id)) raise(Errc::UnknownKind, std::to_string(kind_id));
    const Energy cost = detail::spawn_cost(world.catalog.at(kind_id));
    if (world.ledger.free_pool() < cost)
        raise(Errc::InsufficientBalance, "pool holds " + std::to_string(world.ledger.free_pool()) +
                                             ", assembly needs " + std::to_string(cost));
    return detail::spawn_instance(world, kind_id, x, y, "pool",
                                  [](World& w, Energy amount, AccountRef to) {
                                      w.ledger.transfer(AccountRef::pool(), to, amount);
                                  });
}

// Deliberate disassembly refunds trapped energy (assembly cost + currently
// stored property energy) to the owning loop's buffer; with nobody left to
// receive it, the pool takes it. Returns the trapped refund.
inline Energy disassemble(World& world, InstanceId id, std::optional<LoopId> acting_loop = {}) {
    auto it = world.instances.find(id);
    if (it == world.instances.end() || !it->second.alive)
        raise(Errc::UnknownInstance, std::to_string(id));
    const KindId kind = it->second.kind;
    const Energy trapped = world.ledger.trapped(id);
    const Energy buffered = world.ledger.buffer(id);

    // Recipient: lowest-id other member of the acting loop (or of the first
    // alive loop containing the instance).
    InstanceId recipient = 0;
    auto pick_recipient = [&](const EnerstaticLoop& loop) {
        for (InstanceId member : loop.members)
            if (member != id) {
                recipient = member;
                return true;
            }
        return false;
    };
    if (acting_loop) {
        pick_recipient(loop_at(world, *acting_loop));
    } else {
        for (const EnerstaticLoop& loop : world.loops)
            if (loop.alive &&
                std::find(loop.members.begin(), loop.members.end(), id) != loop.members.end() &&
                pick_recipient(loop))
                break;
    }
    const AccountRef to = recipient ? AccountRef::buffer(recipient) : AccountRef::pool();
    const std::string to_name = account_name(to);
    if (trapped > 0) world.ledger.transfer(AccountRef::trapped(id), to, trapped);
    if (buffered > 0) {
        world.ledger.transfer(AccountRef::buffer(id), to, buffered);
        emit(world, TransferEvent{account_name(AccountRef::buffer(id)), to_name, buffered,
                                  "disassemble_buffer"});
    }
    emit(world, DisassembleEvent{id, kind, trapped, to_name});
    it->second.alive = false;
    detail::drop_from_loops(world, id);
    world.ledger.forget(id);
    detail::erase_instance(world, id);
    return trapped;
}

// ---------------------------------------------------------------------------
// Energy channels

// t = clamp(trunc(gain * (origin - setpoint)), -cap, +cap), clamped again so
// no account goes negative. Positive t flows origin -> target; negative draws
// from the target. Dead or severed endpoints move nothing.
inline Energy apply_channel(World& world, EnergyChannel& channel) {
    if (channel.origin.is_pool) raise(Errc::SchemaError, "channel origin cannot be the pool");
    EnerstaticLoop& origin = loop_at(world, channel.origin.loop);
    if (!origin.alive || origin.severed) return 0;
    EnerstaticLoop* target = nullptr;
    if (!channel.target.is_pool) {
        target = &loop_at(world, channel.target.loop);
        if (!target->alive || target->severed) return 0;
    }

    const Energy deviation = loop_energy(world, origin) - origin.setpoint;
    Energy t = trunc_toward_zero(channel.gain * Rational(deviation));
    t = std::clamp(t, -channel.cap, channel.cap);

    if (t > 0) {
        t = std::min(t, loop_energy(world, origin));
        if (t > 0) {
            if (target)
                withdraw_from_loop(world, origin, t, AccountRef::buffer(target->members.front()));
            else
                withdraw_from_loop(world, origin, t, AccountRef::pool());
        }
    } else if (t < 0) {
        Energy draw = -t;
        draw = std::min(draw, target ? loop_energy(world, *target) : world.ledger.free_pool());
        if (draw > 0) {
            if (target)
                withdraw_from_loop(world, *target, draw,
                                   AccountRef::buffer(origin.members.front()));
            else
                world.ledger.transfer(AccountRef::pool(),
                                      AccountRef::buffer(origin.members.front()), draw);
        }
        t = -draw;
    }
    if (t != 0)
        emit(world, ChannelFlowEvent{channel.id, channel.origin.text(), channel.target.text(), t});
    return t;
}

// ---------------------------------------------------------------------------
// Perturbation injection (schedules, CLI, TCV)

// Applies as much of `delta` as accounting allows and logs what happened.
// Returns the applied delta.
inline std::int64_t inject_perturbation(World& world, const std::string& target,
                                        std::int64_t delta, const std::string& source) {
    PerturbationEvent event;
    event.source = source;
    event.target = target;

    auto starts_with = [&](const char* prefix) { return target.rfind(prefix, 0) == 0; };

    if (starts_with("loop")) {
        const auto dot = target.find(".energy");
        if (dot == std::string::npos)
            raise(Errc::SchemaError, "loop perturbation must target .energy: " + target);
        const LoopId id = static_cast<LoopId>(std::stol(target.substr(4, dot - 4)));
        EnerstaticLoop& loop = loop_at(world, id);
        if (!loop.alive || loop.members.empty()) {
            event.applied = false;
            emit(world, std::move(event));
            return 0;
        }
        const Energy before = loop_energy(world, loop);
        std::int64_t applied = 0;
        if (delta > 0) {
            applied = std::min<Energy>(delta, world.ledger.free_pool());
            if (applied > 0) deposit_to_loop(world, loop, AccountRef::pool(), applied);
        } else if (delta < 0) {
            applied = -std::min<Energy>(-delta, before);
            if (applied < 0) withdraw_from_loop(world, loop, -applied, AccountRef::pool());
        }
        event.from = before;
        event.to = before + applied;
        event.cost = applied;
        event.applied = applied == delta;
        emit(world, std::move(event));
        return applied;
    }

    Property* prop = nullptr;
    if (starts_with("env.")) {
        auto it = world.env_props.find(target.substr(4));
        if (it == world.env_props.end()) raise(Errc::SchemaError, "no env property " + target);
        prop = &it->second;
    } else if (starts_with("instance")) {
        const auto dot = target.find('.');
        if (dot == std::string::npos) raise(Errc::SchemaError, "malformed target " + target);
        const InstanceId id = static_cast<InstanceId>(std::stol(target.substr(8, dot - 8)));
        auto it = world.instances.find(id);
        if (it == world.instances.end())
            raise(Errc::UnknownInstance, std::to_string(id));
        auto pit = it->second.props.find(target.substr(dot + 1));
        if (pit == it->second.props.end())
            raise(Errc::SchemaError, "no property " + target);
        prop = &pit->second;
    } else {
        raise(Errc::SchemaError, "unrecognized perturbation target " + target);
    }

    event.from = prop->value;
    event.owner = prop->owner;
    event.owner_kind = prop->owner == kEnvAccount ? -1 : world.instances.at(prop->owner).kind;
    const Energy cost = perturbation_cost(*prop, delta);
    const AccountRef store = AccountRef::trapped(prop->owner);
    if (cost > 0 && world.ledger.free_pool() < cost) {
        event.to = prop->value;
        event.cost = cost;
        event.applied = false;
        emit(world, std::move(event));
        return 0;
    }
    if (cost > 0) world.ledger.transfer(AccountRef::pool(), store, cost);
    if (cost < 0) world.ledger.transfer(store, AccountRef::pool(), -cost);
    prop->value = sat_add(prop->value, delta);
    event.to = prop->value;
    event.cost = cost;
    event.applied = true;
    emit(world, std::move(event));
    return delta;
}

// Reads the current value of a perturbation/observation target without
// touching anything. Same target grammar as inject_perturbation.
inline std::int64_t observe_target(const World& world, const std::string& target) {
    if (target.rfind("loop", 0) == 0) {
        const auto dot = target.find(".energy");
        if (dot == std::string::npos)
            raise(Errc::SchemaError, "loop observation must target .energy: " + target);
        const LoopId id = static_cast<LoopId>(std::stol(target.substr(4, dot - 4)));
        if (id < 0 || id >= static_cast<LoopId>(world.loops.size()))
            raise(Errc::SchemaError, "no loop " + std::to_string(id));
        return loop_energy(world, world.loops[static_cast<std::size_t>(id)]);
    }
    if (target.rfind("env.", 0) == 0) {
        auto it = world.env_props.find(target.substr(4));
        if (it == world.env_props.end()) raise(Errc::SchemaError, "no env property " + target);
        return it->second.value;
    }
    if (target.rfind("instance", 0) == 0) {
        const auto dot = target.find('.');
        const InstanceId id = static_cast<InstanceId>(std::stol(target.substr(8, dot - 8)));
        auto it = world.instances.find(id);
        if (it == world.instances.end()) raise(Errc::UnknownInstance, std::to_string(id));
        auto pit = it->second.props.find(target.substr(dot + 1));
        if (pit == it->second.props.end()) raise(Errc::SchemaError, "no property " + target);
        return pit->second.value;
    }
    raise(Errc::SchemaError, "unrecognized observation target " + target);
}

// ---------------------------------------------------------------------------
// The synchronous timestep

namespace detail {

struct QueuedWrite {
    InstanceId writer = 0;
    KindId writer_kind = -1;
    PropWrite write;
};

// Resolves refs for one executing instance against the phase-2 snapshot.
class WorldPropView : public PropReadView {
public:
    WorldPropView(const World& world, const StructureInstance& executor)
        : world_(world),
          executor_(executor),
          niche_(&world.catalog.at(executor.kind).niche),
          radius_(world.catalog.at(executor.kind).effective_radius) {}

    SensedProp lookup(const PropRef& ref) const override {
        if (!niche_->sensable.count(ref)) raise(Errc::RefOutsideNiche, ref.text());
        if (ref.env) {
            const std::string name =
                ref.name == "alloc_self" ? alloc_prop_name(executor_.kind) : ref.name;
            auto it = world_.env_props.find(name);
            if (it == world_.env_props.end()) raise(Errc::RefOutsideNiche, ref.text());
            return {it->second.value, true, kEnvAccount};
        }
        // nearest alive instance of the kind within the executor's reach
        const StructureInstance* best = nullptr;
        int best_dist = 0;
        auto by_kind = world_.instances_by_kind.find(ref.kind);
        if (by_kind != world_.instances_by_kind.end()) {
            for (InstanceId id : by_kind->second) {
                const StructureInstance& cand = world_.instances.at(id);
                if (!cand.alive) continue;
                const int dist = std::max(std::abs(cand.x - executor_.x),
                                          std::abs(cand.y - executor_.y));
                if (dist > radius_) continue;
                if (!best || dist < best_dist || (dist == best_dist && id < best->id)) {
                    best = &cand;
                    best_dist = dist;
                }
            }
        }
        if (best) {
            auto pit = best->props.find(ref.name);
            if (pit == best->props.end()) raise(Errc::RefOutsideNiche, ref.text());
            return {pit->second.value, true, best->id};
        }
        const PropertyTemplate* tmpl = world_.catalog.at(ref.kind).find_prop(ref.name);
        if (!tmpl) raise(Errc::RefOutsideNiche, ref.text());
        return {tmpl->default_value, false, kEnvAccount};
    }

private:
    const World& world_;
    const StructureInstance& executor_;
    const Niche* niche_;
    int radius_;
};

// Members of severed loops are frozen statues: no intake, no execution, no
// classification. Computed once per step.
inline std::set<InstanceId> severed_instances(const World& world) {
    std::set<InstanceId> frozen;
    for (const EnerstaticLoop& loop : world.loops)
        if (loop.alive && loop.severed)
            frozen.insert(loop.members.begin(), loop.members.end());
    return frozen;
}

inline void audit_or_abort(const World& world, const char* phase) {
    if (world.ledger.audit()) return;
    raise(Errc::ConservationViolation,
          "step " + std::to_string(world.step) + " after " + phase + ": pool " +
              std::to_string(world.ledger.free_pool()) + " total " +
              std::to_string(world.ledger.total()));
}

}  // namespace detail

// Phase 1 allocation: in ascending instance-id order each structure requests
// its kind's alloc slot. intake < fed starves it; intake > fel overfeeds it
// (fatally); otherwise fed is earmarked for dissipation and the surplus lands
// in its buffer. Starving and overfed structures withdraw nothing; they die
// in phase 4 with a full refund. Returns the death marks.
inline std::map<InstanceId, std::string> allocate(World& world) {
    std::map<InstanceId, std::string> marked;
    const std::set<InstanceId> frozen = detail::severed_instances(world);
    for (auto& [id, instance] : world.instances) {
        if (!instance.alive || frozen.count(id)) continue;
        const StructureKind& kind = world.catalog.at(instance.kind);
        auto alloc_it = world.env_props.find(alloc_prop_name(instance.kind));
        const Energy requested =
            alloc_it == world.env_props.end() ? 0 : std::max<std::int64_t>(0, alloc_it->second.value);
        const Energy intake = std::min(requested, world.ledger.free_pool());
        instance.intake_this_step = intake;
        if (intake < kind.fed) {
            marked.emplace(id, "starved");
        } else if (intake > kind.fel) {
            marked.emplace(id, "over_limit");
        } else {
            world.ledger.transfer(AccountRef::pool(), AccountRef::buffer(id), intake);
            emit(world, TransferEvent{"pool", account_name(AccountRef::buffer(id)), intake,
                                      "intake"});
        }
    }
    return marked;
}

inline Energy free_energy(const World& world) { return world.ledger.free_pool(); }

// EEL-driven birth: invents a kind in the next open niche, registers it,
// subsidizes its alloc slot with its own fed (a structure cannot set a slot
// it has never been alive to write), and assembles one instance from the
// pool at a seeded position. Throws when generation or funding fails.
inline KindId invent_and_spawn(World& world) {
    std::set<std::string> env_names = env_prop_names(world);
    env_names.insert("alloc_self");
    const KindId next = static_cast<KindId>(world.catalog.kinds.size());
    const Niche niche = niche_of(next, world.catalog, env_names);
    InventedKind invented =
        invent_structure(world.generator, world.catalog, niche, world.rng_gen, world.provider);
    const KindId id = register_kind(world, "gen" + std::to_string(next),
                                    std::move(invented.program), invented.effective_radius,
                                    std::move(invented.causal_props));
    Property& alloc = world.env_props.at(alloc_prop_name(id));
    if (alloc.value == 0) {
        alloc.value = world.catalog.at(id).fed;
        PerturbationEvent subsidy;
        subsidy.source = "eel";
        subsidy.target = "env." + alloc_prop_name(id);
        subsidy.from = 0;
        subsidy.to = alloc.value;
        subsidy.applied = true;
        emit(world, std::move(subsidy));
    }
    const int x = static_cast<int>(world.rng_place.range(0, world.grid_w - 1));
    const int y = static_cast<int>(world.rng_place.range(0, world.grid_h - 1));
    assemble_from_pool(world, id, x, y);
    return id;
}

// One synchronous step. Phase order is fixed: (1) inflow/allocation,
// (2) causal execution in ascending instance id, (3) effect application and
// perturbation billing, (4) death and disassembly, (5) channel flow, window
// classification and at most one policy action per loop, (6) final audit.
inline void step_world(World& world) {
    // scheduled perturbations land at the start of the step
    for (const ScheduledPerturbation& sched : world.schedule) {
        const bool fires = (sched.at >= 0 && sched.at == world.step) ||
                           (sched.every > 0 && world.step >= sched.phase &&
                            (world.step - sched.phase) % sched.every == 0);
        if (fires) inject_perturbation(world, sched.target, sched.delta, "schedule");
    }

    // (1) inflow + invention + allocation
    if (world.mode == WorldMode::Open && world.inflow.amount > 0 && world.inflow.every > 0 &&
        world.step % world.inflow.every == 0) {
        world.ledger.transfer(AccountRef::external(), AccountRef::pool(), world.inflow.amount);
        emit(world, TransferEvent{"external", "pool", world.inflow.amount, "inflow"});
    }
    // one kind per qualifying step keeps discovery steps strictly increasing
    if (world.generator.enabled && world.generator.epoch > 0 &&
        world.step % world.generator.epoch <
            static_cast<Step>(world.generator.invention_budget)) {
        try {
            invent_and_spawn(world);
        } catch (const Error&) {
            // nothing admissible or affordable this slot; the epoch moves on
        }
    }
    std::map<InstanceId, std::string> marked = allocate(world);
    detail::audit_or_abort(world, "allocation");

    // (2) causal execution over the immutable snapshot
    std::vector<detail::QueuedWrite> queue;
    const std::set<InstanceId> frozen = detail::severed_instances(world);
    for (auto& [id, instance] : world.instances) {
        if (!instance.alive || marked.count(id) || frozen.count(id)) continue;
        const StructureKind& kind = world.catalog.at(instance.kind);
        detail::WorldPropView view(world, instance);
        EffectSet effects = execute(kind.program, view, kind.fed, world.cost_table);
        if (effects.div_zero) emit(world, DivZeroEvent{id, instance.kind});
        for (PropWrite& write : effects.writes)
            queue.push_back({id, instance.kind, std::move(write)});
        // dissipation: fed returns to the pool in closed mode, exits in open
        const AccountRef sinkhole =
            world.mode == WorldMode::Closed ? AccountRef::pool() : AccountRef::external();
        world.ledger.transfer(AccountRef::buffer(id), sinkhole, kind.fed);
        emit(world, TransferEvent{account_name(AccountRef::buffer(id)),
                                  world.mode == WorldMode::Closed ? "pool" : "external", kind.fed,
                                  "dissipation"});
    }
    detail::audit_or_abort(world, "execution");

    // (3) effect application + perturbation billing, serial in queue order
    for (detail::QueuedWrite& queued : queue) {
        PerturbationEvent event;
        event.source = "causal";
        event.writer = queued.writer;
        event.writer_kind = queued.writer_kind;
        PropWrite& write = queued.write;
        const std::string target_name = write.ref.env && write.ref.name == "alloc_self"
                                            ? "env." + alloc_prop_name(queued.writer_kind)
                                            : write.ref.text();
        event.target = target_name;
        if (!write.resolved && !write.ref.env) {
            event.applied = false;
            emit(world, std::move(event));
            continue;
        }
        Property* prop = nullptr;
        if (write.ref.env) {
            const std::string name = write.ref.name == "alloc_self"
                                         ? alloc_prop_name(queued.writer_kind)
                                         : write.ref.name;
            prop = &world.env_props.at(name);
        } else {
            auto target_it = world.instances.find(write.owner);
            if (target_it == world.instances.end() || !target_it->second.alive) {
                event.applied = false;  // owner vanished between snapshot and apply
                emit(world, std::move(event));
                continue;
            }
            prop = &target_it->second.props.at(write.ref.name);
        }
        event.owner = prop->owner;
        event.owner_kind = prop->owner == kEnvAccount ? -1 : world.instances.at(prop->owner).kind;
        event.from = prop->value;
        const Energy cost = perturbation_cost(*prop, write.value - prop->value);
        event.cost = cost;
        const AccountRef store = AccountRef::trapped(prop->owner);
        const AccountRef payer = AccountRef::buffer(queued.writer);
        if (cost > 0 && world.ledger.buffer(queued.writer) < cost) {
            event.to = prop->value;
            event.applied = false;  // unaffordable writes are skipped whole
            emit(world, std::move(event));
            continue;
        }
        if (cost > 0) world.ledger.transfer(payer, store, cost);
        if (cost < 0) world.ledger.transfer(store, payer, -cost);
        prop->value = write.value;
        event.to = prop->value;
        event.applied = true;
        emit(world, std::move(event));
    }
    detail::audit_or_abort(world, "effects");

    // (4) death & disassembly
    for (const auto& [id, reason] : marked) detail::kill_instance(world, id, reason);
    detail::audit_or_abort(world, "death");

    // (5) channels, then window classification + policy, ascending ids
    for (EnergyChannel& channel : world.channels) apply_channel(world, channel);
    for (EnerstaticLoop& loop : world.loops) {
        if (!loop.alive || loop.severed) continue;
        const Energy energy = loop_energy(world, loop);
        const WindowClass cls = classify_window(loop, energy);

        if (!loop.classified_once || cls != loop.window) {
            WindowTransitionEvent transition;
            transition.loop = loop.id;
            transition.from = loop.classified_once ? window_name(loop.window) : "none";
            transition.to = window_name(cls);
            transition.energy = energy;
            // hebbian credit fires exactly at window crossings; frozen-policy
            // runs still resolve (clear) the trace, they just skip the update
            if (loop.policy && !loop.trace.entries.empty() &&
                (cls == WindowClass::Stasis || cls == WindowClass::Cap)) {
                const CreditOutcome outcome = cls == WindowClass::Stasis
                                                  ? CreditOutcome::ReachedStasis
                                                  : CreditOutcome::ReachedCap;
                if (world.learning_enabled) {
                    *loop.policy = credit_update(*loop.policy, loop.trace, outcome);
                    transition.outcome = outcome == CreditOutcome::ReachedStasis
                                             ? "reached_stasis"
                                             : "reached_cap";
                    for (const TraceEntry& entry : loop.trace.entries)
                        transition.trace.push_back(
                            {entry.step, loop.policy->actions[entry.action].label(),
                             entry.loop_energy});
                    for (std::size_t i = 0; i < loop.policy->actions.size(); ++i)
                        transition.policy.emplace_back(loop.policy->actions[i].label(),
                                                       rational_str(loop.policy->weights[i]));
                }
                loop.trace.entries.clear();
            }
            if (cls == WindowClass::Action && loop.window != WindowClass::Action)
                loop.trace.window_entered_at = world.step;
            emit(world, std::move(transition));
        }
        loop.classified_once = true;
        loop.window = cls;

        if (cls == WindowClass::Fatal) {
            // beyond the cap the loop breaks down through loss of structure
            loop.alive = false;
            emit(world, DeathEvent{"loop", loop.id, -1, "fatal", 0});
            std::vector<InstanceId> members = loop.members;
            for (InstanceId member : members) detail::kill_instance(world, member, "loop_fatal");
            loop.members.clear();
            continue;
        }

        if ((cls == WindowClass::Action || cls == WindowClass::Cap) && loop.policy) {
            auto pick = select_action(*loop.policy, cls, world.rng_policy);
            if (pick) {
                const LoopAction& action = loop.policy->actions[*pick];
                bool acted = true;
                try {
                    switch (action.type) {
                        case ActionType::NoOp:
                            break;
                        case ActionType::Assemble:
                            assemble(world, loop.id, action.kind);
                            break;
                        case ActionType::DisassembleOldest: {
                            InstanceId oldest = 0;
                            for (InstanceId member : loop.members)
                                if (world.instances.at(member).kind == action.kind) {
                                    oldest = member;
                                    break;
                                }
                            if (oldest == 0) {
                                acted = false;
                            } else {
                                disassemble(world, oldest, loop.id);
                            }
                            break;
                        }
                    }
                } catch (const Error&) {
                    acted = false;  // failed reconfiguration never happened
                }
                if (acted && cls == WindowClass::Action)
                    loop.trace.entries.push_back({world.step, *pick, energy});
            }
        }
    }
    detail::audit_or_abort(world, "loops");

    // (6) closing audit
    detail::audit_or_abort(world, "step");
    ++world.step;
}

}  // namespace enerstat
