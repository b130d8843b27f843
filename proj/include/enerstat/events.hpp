// Append-only event record: every transfer, assembly, death, window
// transition and discovery, in step order. The log is the substrate for all
// metrics, so events carry enough payload to reconstruct accounting offline.
// JSON rendering lives in events_json.hpp; the engine itself never touches a
// serializer.
#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "enerstat/base.hpp"
#include "enerstat/learning.hpp"
#include "enerstat/ledger.hpp"

namespace enerstat {

struct TransferEvent {
    std::string from;
    std::string to;
    Energy amount = 0;
    std::string reason;  // intake | dissipation | inflow | death_refund | ...
};

struct AssembleEvent {
    InstanceId instance = 0;
    KindId kind = -1;
    int x = 0;
    int y = 0;
    Energy cost = 0;
    std::string payer;  // "pool" or "loop:<id>"
};

struct DisassembleEvent {
    InstanceId instance = 0;
    KindId kind = -1;
    Energy refund = 0;
    std::string to;
};

struct DeathEvent {
    // entity: "structure" (id = instance) or "loop" (id = loop id)
    std::string entity;
    std::int64_t id = 0;
    KindId kind = -1;
    std::string reason;  // starved | over_limit | loop_fatal | empty
    Energy refund = 0;
};

struct TraceRecord {
    Step step = 0;
    std::string action;
    Energy loop_energy = 0;  // recorded at action time; unused by v1 updates

    bool operator==(const TraceRecord&) const = default;
};

struct WindowTransitionEvent {
    LoopId loop = -1;
    std::string from;
    std::string to;
    Energy energy = 0;
    std::string outcome;  // set when a credit update fired at this crossing
    // the resolved action-window trace that drove the update
    std::vector<TraceRecord> trace;
    // policy snapshot after the update: (action label, exact weight)
    std::vector<std::pair<std::string, std::string>> policy;
};

struct DiscoveryEvent {
    KindId kind = -1;
    std::string name;
};

struct DivZeroEvent {
    InstanceId instance = 0;
    KindId kind = -1;
};

struct ChannelFlowEvent {
    ChannelId channel = -1;
    std::string origin;
    std::string target;
    Energy amount = 0;
};

struct PerturbationEvent {
    std::string source;  // causal | injected | schedule | tcv | eel
    std::string target;
    InstanceId writer = 0;     // causal writes: executing instance
    KindId writer_kind = -1;
    InstanceId owner = 0;      // account holding the stored energy (0 = env)
    KindId owner_kind = -1;    // kind owning the written property; -1 for env
    std::int64_t from = 0;
    std::int64_t to = 0;
    Energy cost = 0;           // signed stored-energy delta paid (+) / refunded (-)
    bool applied = false;
};

using EventPayload =
    std::variant<TransferEvent, AssembleEvent, DisassembleEvent, DeathEvent,
                 WindowTransitionEvent, DiscoveryEvent, DivZeroEvent, ChannelFlowEvent,
                 PerturbationEvent>;

struct Event {
    Step step = 0;
    EventPayload payload;

    const char* kind_name() const {
        switch (payload.index()) {
            case 0: return "Transfer";
            case 1: return "Assemble";
            case 2: return "Disassemble";
            case 3: return "Death";
            case 4: return "WindowTransition";
            case 5: return "Discovery";
            case 6: return "DivZero";
            case 7: return "ChannelFlow";
            case 8: return "Perturbation";
        }
        return "?";
    }
};

class EventSink {
public:
    virtual ~EventSink() = default;
    virtual void emit(Event event) = 0;
};

class NullSink : public EventSink {
public:
    void emit(Event) override { ++count_; }
    std::uint64_t count() const { return count_; }

private:
    std::uint64_t count_ = 0;
};

class VectorSink : public EventSink {
public:
    void emit(Event event) override { events_.push_back(std::move(event)); }
    const std::vector<Event>& events() const { return events_; }
    std::vector<Event> take() { return std::move(events_); }

private:
    std::vector<Event> events_;
};

// Fans one event stream out to several sinks.
class TeeSink : public EventSink {
public:
    explicit TeeSink(std::vector<EventSink*> sinks) : sinks_(std::move(sinks)) {}
    void emit(Event event) override {
        for (EventSink* sink : sinks_) sink->emit(event);
    }

private:
    std::vector<EventSink*> sinks_;
};

}  // namespace enerstat
