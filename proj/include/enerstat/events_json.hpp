// Line-delimited JSON rendering of the event log. Field order is fixed per
// event kind so identical runs produce byte-identical files.
#pragma once

#include <fstream>
#include <ostream>
#include <string>

#include "json.hpp"

#include "enerstat/events.hpp"

namespace enerstat {

using OrderedJson = nlohmann::ordered_json;

inline constexpr const char* kEventSchema = "enerstat-events/1";

inline OrderedJson event_json(const Event& event) {
    OrderedJson j;
    j["step"] = event.step;
    j["kind"] = event.kind_name();
    std::visit(
        [&j](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, TransferEvent>) {
                j["from"] = p.from;
                j["to"] = p.to;
                j["amount"] = p.amount;
                j["reason"] = p.reason;
            } else if constexpr (std::is_same_v<T, AssembleEvent>) {
                j["instance"] = p.instance;
                j["of_kind"] = p.kind;
                j["x"] = p.x;
                j["y"] = p.y;
                j["cost"] = p.cost;
                j["payer"] = p.payer;
            } else if constexpr (std::is_same_v<T, DisassembleEvent>) {
                j["instance"] = p.instance;
                j["of_kind"] = p.kind;
                j["refund"] = p.refund;
                j["to"] = p.to;
            } else if constexpr (std::is_same_v<T, DeathEvent>) {
                j["entity"] = p.entity;
                j["id"] = p.id;
                j["of_kind"] = p.kind;
                j["reason"] = p.reason;
                j["refund"] = p.refund;
            } else if constexpr (std::is_same_v<T, WindowTransitionEvent>) {
                j["loop"] = p.loop;
                j["from"] = p.from;
                j["to"] = p.to;
                j["energy"] = p.energy;
                if (!p.outcome.empty()) {
                    j["outcome"] = p.outcome;
                    OrderedJson trace = OrderedJson::array();
                    for (const TraceRecord& t : p.trace)
                        trace.push_back(OrderedJson::array({t.step, t.action, t.loop_energy}));
                    j["trace"] = std::move(trace);
                    OrderedJson weights = OrderedJson::object();
                    for (const auto& [label, weight] : p.policy) weights[label] = weight;
                    j["policy"] = std::move(weights);
                }
            } else if constexpr (std::is_same_v<T, DiscoveryEvent>) {
                j["of_kind"] = p.kind;
                j["name"] = p.name;
            } else if constexpr (std::is_same_v<T, DivZeroEvent>) {
                j["instance"] = p.instance;
                j["of_kind"] = p.kind;
            } else if constexpr (std::is_same_v<T, ChannelFlowEvent>) {
                j["channel"] = p.channel;
                j["origin"] = p.origin;
                j["target"] = p.target;
                j["amount"] = p.amount;
            } else if constexpr (std::is_same_v<T, PerturbationEvent>) {
                j["source"] = p.source;
                j["target"] = p.target;
                j["writer"] = p.writer;
                j["writer_kind"] = p.writer_kind;
                j["owner"] = p.owner;
                j["owner_kind"] = p.owner_kind;
                j["from"] = p.from;
                j["to"] = p.to;
                j["cost"] = p.cost;
                j["applied"] = p.applied;
            }
        },
        event.payload);
    return j;
}

inline std::string event_line(const Event& event) { return event_json(event).dump(); }

// Streams events to a .jsonl file, one per line, schema header first.
class JsonlFileSink : public EventSink {
public:
    explicit JsonlFileSink(const std::string& path) : out_(path, std::ios::trunc) {
        if (!out_) raise(Errc::IoError, "cannot open " + path);
        out_ << "{\"schema\":\"" << kEventSchema << "\"}\n";
    }

    void emit(Event event) override { out_ << event_line(event) << '\n'; }

    void flush() { out_.flush(); }

private:
    std::ofstream out_;
};

}  // namespace enerstat
