// Assembly-theory metrics over the event log: copy numbers, discovery and
// production rates, the k_p/k_d transition detector, and the declared
// complexity proxies (ast_size, niche_depth). Everything is a pure fold over
// events — recomputing from a persisted log equals the live computation.
#pragma once

#include <map>
#include <optional>
#include <vector>

#include "enerstat/catalog.hpp"
#include "enerstat/events.hpp"
#include "enerstat/rational.hpp"

namespace enerstat {

struct AssemblyMetrics {
    std::map<KindId, std::int64_t> copy_number;  // alive instances per kind
    std::vector<std::pair<Step, KindId>> discoveries;
    std::vector<std::pair<Step, KindId>> productions;
    Rational k_d = 0;  // discoveries per step over the trailing window
    Rational k_p = 0;  // mean productions per step over kinds that produced
    Step window = 0;
};

namespace detail {

inline void fold_event(AssemblyMetrics& m, const Event& event) {
    if (const auto* a = std::get_if<AssembleEvent>(&event.payload)) {
        ++m.copy_number[a->kind];
        m.productions.emplace_back(event.step, a->kind);
    } else if (const auto* d = std::get_if<DisassembleEvent>(&event.payload)) {
        --m.copy_number[d->kind];
    } else if (const auto* death = std::get_if<DeathEvent>(&event.payload)) {
        if (death->entity == "structure") --m.copy_number[death->kind];
    } else if (const auto* disc = std::get_if<DiscoveryEvent>(&event.payload)) {
        m.discoveries.emplace_back(event.step, disc->kind);
    }
}

inline Rational window_kd(const AssemblyMetrics& m, Step lo, Step hi) {
    std::int64_t n = 0;
    for (const auto& [step, kind] : m.discoveries)
        if (step >= lo && step < hi) ++n;
    return make_rational(n, hi - lo);
}

inline Rational window_kp(const AssemblyMetrics& m, Step lo, Step hi) {
    std::map<KindId, std::int64_t> per_kind;
    for (const auto& [step, kind] : m.productions)
        if (step >= lo && step < hi) ++per_kind[kind];
    if (per_kind.empty()) return 0;
    Rational sum = 0;
    for (const auto& [kind, n] : per_kind) sum += make_rational(n, hi - lo);
    return sum / Rational(static_cast<std::int64_t>(per_kind.size()));
}

}  // namespace detail

// Copy numbers over the whole stream; k_d / k_p over the trailing window
// ending at the last observed step. Events must be step-ordered.
inline AssemblyMetrics update_metrics(const std::vector<Event>& events, Step window) {
    if (window <= 0) raise(Errc::EmptyWindow, "window must be >= 1 step");
    AssemblyMetrics m;
    m.window = window;
    for (const Event& event : events) detail::fold_event(m, event);
    if (events.empty()) return m;
    const Step last = events.back().step;
    m.k_d = detail::window_kd(m, last - window + 1, last + 1);
    m.k_p = detail::window_kp(m, last - window + 1, last + 1);
    return m;
}

struct MetricsWindow {
    Step start = 0;  // window covers [start, start + length)
    Step length = 0;
    Rational k_d = 0;
    Rational k_p = 0;
};

// Consecutive fixed-length windows from step 0 through the last event.
inline std::vector<MetricsWindow> metrics_series(const std::vector<Event>& events, Step window) {
    if (window <= 0) raise(Errc::EmptyWindow, "window must be >= 1 step");
    AssemblyMetrics m;
    for (const Event& event : events) detail::fold_event(m, event);
    std::vector<MetricsWindow> series;
    if (events.empty()) return series;
    const Step last = events.back().step;
    for (Step start = 0; start <= last; start += window) {
        MetricsWindow w;
        w.start = start;
        w.length = window;
        w.k_d = detail::window_kd(m, start, start + window);
        w.k_p = detail::window_kp(m, start, start + window);
        series.push_back(std::move(w));
    }
    return series;
}

// First window where the ordering flips from k_p < k_d to k_d < k_p and the
// flipped inequality persists for `hysteresis` consecutive windows. Returns
// the starting step of that window; nullopt when no such crossing exists.
inline std::optional<Step> detect_transition(const std::vector<MetricsWindow>& series,
                                             int hysteresis = 1) {
    if (hysteresis < 1) hysteresis = 1;
    bool saw_pre_regime = false;
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (series[i].k_p < series[i].k_d) {
            saw_pre_regime = true;
            continue;
        }
        if (!saw_pre_regime || !(series[i].k_d < series[i].k_p)) continue;
        bool persists = i + static_cast<std::size_t>(hysteresis) <= series.size();
        for (int h = 0; persists && h < hysteresis; ++h)
            if (!(series[i + static_cast<std::size_t>(h)].k_d <
                  series[i + static_cast<std::size_t>(h)].k_p))
                persists = false;
        if (persists) return series[i].start;
    }
    return std::nullopt;
}

// Declared complexity proxies (full assembly-index computation is out of
// scope and these are labeled as proxies in every output).
struct KindComplexity {
    KindId kind = -1;
    std::int64_t ast_size = 0;
    std::int64_t niche_depth = 1;  // 1 + longest chain of struct refs below
};

inline std::vector<KindComplexity> complexity_report(const Catalog& catalog) {
    std::vector<KindComplexity> report;
    std::vector<std::int64_t> depth(catalog.kinds.size(), 1);
    for (std::size_t k = 0; k < catalog.kinds.size(); ++k) {
        const StructureKind& kind = catalog.kinds[k];
        std::int64_t deepest = 0;
        for_each_node(kind.program, [&](const AstNode& node) {
            if ((node.kind == NodeKind::Sense || node.kind == NodeKind::Affect) &&
                !node.ref.env && node.ref.kind >= 0 &&
                static_cast<std::size_t>(node.ref.kind) < k)
                deepest = std::max(deepest, depth[static_cast<std::size_t>(node.ref.kind)]);
        });
        depth[k] = 1 + deepest;
        report.push_back({kind.id, static_cast<std::int64_t>(node_count(kind.program)), depth[k]});
    }
    return report;
}

}  // namespace enerstat
