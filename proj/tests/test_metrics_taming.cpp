#include "doctest.h"

#include <vector>

#include "enerstat/metrics.hpp"
#include "enerstat/parser.hpp"
#include "enerstat/tcv.hpp"
#include "enerstat/world.hpp"

using namespace enerstat;

namespace {

Event assemble_at(Step step, KindId kind) {
    return {step, AssembleEvent{0, kind, 0, 0, 0, "pool"}};
}

Event discovery_at(Step step, KindId kind) {
    return {step, DiscoveryEvent{kind, "k" + std::to_string(kind)}};
}

Event death_at(Step step, KindId kind) {
    return {step, DeathEvent{"structure", 0, kind, "starved", 0}};
}

// The bundled thermostat world, built programmatically: env.temp regulated by
// a proportional controller structure, env.dummy regulated by nobody.
World thermostat_world() {
    World world;
    world.ledger = Ledger(10000);
    world.seed(11);
    add_env_prop(world, "temp", 0, 0, {PerturbationShape::Linear, 0});
    add_env_prop(world, "dummy", 0, 0, {PerturbationShape::Linear, 0});
    KindId k = register_kind(world, "thermostat",
                             parse("affect(env.temp, sense(env.temp) - sense(env.temp) / 2)"), 4,
                             {});
    InstanceId id = assemble_from_pool(world, k, 0, 0);
    world.env_props.at(alloc_prop_name(k)).value = world.catalog.at(k).fed;
    EnerstaticLoop loop;
    loop.id = 0;
    loop.members = {id};
    loop.setpoint = 0;
    loop.r_stasis = 1'000'000;  // the controller loop itself never reconfigures
    loop.r_action = 2'000'000;
    loop.r_cap = 4'000'000;
    world.loops.push_back(std::move(loop));
    return world;
}

}  // namespace

TEST_CASE("update_metrics: counting oracle on scripted logs") {
    SUBCASE("3 discoveries in a window of 10") {
        std::vector<Event> events = {discovery_at(2, 0), discovery_at(5, 1), discovery_at(9, 2)};
        AssemblyMetrics m = update_metrics(events, 10);
        CHECK(m.k_d == make_rational(3, 10));
        CHECK(m.discoveries.size() == 3);
    }

    SUBCASE("no events: zero rates, empty copy numbers") {
        AssemblyMetrics m = update_metrics({}, 10);
        CHECK(m.k_d == 0);
        CHECK(m.k_p == 0);
        CHECK(m.copy_number.empty());
    }

    SUBCASE("one kind, 12 productions in a window of 10") {
        std::vector<Event> events;
        for (int i = 0; i < 12; ++i) events.push_back(assemble_at(i * 10 / 12, 0));
        AssemblyMetrics m = update_metrics(events, 10);
        CHECK(m.k_p == make_rational(12, 10));
        CHECK(m.copy_number.at(0) == 12);
    }

    SUBCASE("copy numbers net assembles against deaths and disassembles") {
        std::vector<Event> events = {assemble_at(0, 0), assemble_at(1, 0), assemble_at(2, 1),
                                     death_at(3, 0),
                                     Event{4, DisassembleEvent{0, 1, 0, "pool"}}};
        AssemblyMetrics m = update_metrics(events, 10);
        CHECK(m.copy_number.at(0) == 1);
        CHECK(m.copy_number.at(1) == 0);
    }

    SUBCASE("zero window is refused") {
        try {
            update_metrics({}, 0);
            CHECK(false);
        } catch (const Error& e) {
            CHECK(e.code() == Errc::EmptyWindow);
        }
    }

    SUBCASE("pure fold: recomputation over the same events is identical") {
        std::vector<Event> events = {discovery_at(0, 0), assemble_at(0, 0), assemble_at(7, 0),
                                     discovery_at(12, 1), assemble_at(13, 1)};
        AssemblyMetrics a = update_metrics(events, 5);
        AssemblyMetrics b = update_metrics(events, 5);
        CHECK(a.k_d == b.k_d);
        CHECK(a.k_p == b.k_p);
        CHECK(a.copy_number == b.copy_number);
    }
}

TEST_CASE("detect_transition: exact window, hysteresis suppresses blips") {
    auto window_with = [](Step start, std::int64_t kd, std::int64_t kp) {
        MetricsWindow w;
        w.start = start;
        w.length = 10;
        w.k_d = make_rational(kd, 10);
        w.k_p = make_rational(kp, 10);
        return w;
    };

    SUBCASE("flip at window 7 with hysteresis 2") {
        std::vector<MetricsWindow> series;
        for (int i = 0; i < 7; ++i) series.push_back(window_with(i * 10, 3, 1));  // k_p < k_d
        for (int i = 7; i < 12; ++i) series.push_back(window_with(i * 10, 1, 4));  // flipped
        auto at = detect_transition(series, 2);
        REQUIRE(at.has_value());
        CHECK(*at == 70);
    }

    SUBCASE("constant k_d > k_p never transitions") {
        std::vector<MetricsWindow> series;
        for (int i = 0; i < 20; ++i) series.push_back(window_with(i * 10, 5, 2));
        CHECK_FALSE(detect_transition(series, 2).has_value());
    }

    SUBCASE("single-window blip with hysteresis 2 is suppressed") {
        std::vector<MetricsWindow> series;
        for (int i = 0; i < 5; ++i) series.push_back(window_with(i * 10, 3, 1));
        series.push_back(window_with(50, 1, 4));  // blip
        for (int i = 6; i < 10; ++i) series.push_back(window_with(i * 10, 3, 1));
        CHECK_FALSE(detect_transition(series, 2).has_value());
        // the same series is a transition for hysteresis 1
        CHECK(detect_transition(series, 1).has_value());
    }

    SUBCASE("ties are neither regime") {
        std::vector<MetricsWindow> series = {window_with(0, 3, 1), window_with(10, 2, 2),
                                             window_with(20, 2, 2)};
        CHECK_FALSE(detect_transition(series, 1).has_value());
    }
}

TEST_CASE("complexity_report: ast_size and niche_depth proxies") {
    World world;
    world.ledger = Ledger(100000);
    world.seed(1);
    add_env_prop(world, "scratch", 0, 0, {PerturbationShape::Linear, 0});
    auto prop = [](const char* name) {
        return std::vector<PropertyTemplate>{{name, 0, 0, {PerturbationShape::Linear, 1}}};
    };
    // S0 env-only; S1 and S2 reference S0; S3 references S1 and S2 (diamond)
    register_kind(world, "s0", parse("affect(env.scratch, 1)"), 4, prop("a"));
    register_kind(world, "s1", parse("sense(struct[0].a)"), 4, prop("b"));
    register_kind(world, "s2", parse("sense(struct[0].a) + 1"), 4, prop("c"));
    register_kind(world, "s3", parse("sense(struct[1].b) + sense(struct[2].c)"), 4, {});

    auto report = complexity_report(world.catalog);
    REQUIRE(report.size() == 4);
    CHECK(report[0].niche_depth == 1);  // env-only base case
    CHECK(report[1].niche_depth == 2);
    CHECK(report[2].niche_depth == 2);
    CHECK(report[3].niche_depth == 3);  // diamond: longest path through either arm
    CHECK(report[0].ast_size == 2);
    CHECK(report[3].ast_size == 3);

    SUBCASE("depth never exceeds catalog index + 1 and is monotone under append") {
        for (const KindComplexity& k : report)
            CHECK(k.niche_depth <= static_cast<std::int64_t>(k.kind) + 1);
        register_kind(world, "s4", parse("sense(struct[2].c)"), 4, {});
        auto longer = complexity_report(world.catalog);
        for (std::size_t i = 0; i < report.size(); ++i)
            CHECK(longer[i].niche_depth == report[i].niche_depth);
    }
}

TEST_CASE("vaf: exact, clamped, shift-invariant") {
    std::vector<std::int64_t> observed = {2, 4, 6, 8, 10, 4};

    SUBCASE("perfect model scores 1") {
        CHECK(vaf(observed, observed) == Rational(1));
    }

    SUBCASE("the constant-mean model scores exactly 0") {
        // mean rigged to an integer so the baseline model is representable
        std::vector<std::int64_t> obs = {2, 4, 6, 8};
        std::vector<std::int64_t> mean_model(obs.size(), 5);
        CHECK(vaf(mean_model, obs) == Rational(0));
    }

    SUBCASE("worse than the mean clamps to 0, never negative") {
        std::vector<std::int64_t> terrible = {100, -100, 100, -100, 100, -100};
        CHECK(vaf(terrible, observed) == Rational(0));
    }

    SUBCASE("shift invariance in the observed mean") {
        std::vector<std::int64_t> model = {1, 5, 5, 9, 9, 5};
        Rational base = vaf(model, observed);
        std::vector<std::int64_t> shifted_obs = observed, shifted_model = model;
        for (auto& v : shifted_obs) v += 1000;
        for (auto& v : shifted_model) v += 1000;
        CHECK(vaf(shifted_model, shifted_obs) == base);
        CHECK(base > 0);
        CHECK(base < 1);
    }

    SUBCASE("errors: length mismatch and zero observed variance") {
        try {
            vaf({1, 2}, {1, 2, 3});
            CHECK(false);
        } catch (const Error& e) {
            CHECK(e.code() == Errc::LengthMismatch);
        }
        try {
            vaf({1, 1, 1}, {5, 5, 5});
            CHECK(false);
        } catch (const Error& e) {
            CHECK(e.code() == Errc::ZeroVarianceObserved);
        }
    }
}

TEST_CASE("tcv: the thermostat controls temp, nobody controls dummy") {
    DisturbanceSpec disturbance;
    disturbance.kind = DisturbanceSpec::Kind::Square;
    disturbance.amplitude = 50;
    disturbance.period = 10;
    disturbance.target = "env.temp";
    const Rational theta = make_rational(1, 4);
    const std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};

    SUBCASE("regulated variable: Controlled with S below theta") {
        TcvReport report = tcv(thermostat_world, {0}, "env.temp", disturbance, theta, seeds, 300);
        CHECK(report.verdict == "Controlled");
        CHECK(report.attenuation < theta);
        for (const TcvTrial& trial : report.per_trial) CHECK(trial.verdict == "Controlled");
    }

    SUBCASE("unregulated dummy: NotControlled with S == 1 exactly") {
        DisturbanceSpec dummy_push = disturbance;
        dummy_push.target = "env.dummy";
        TcvReport report = tcv(thermostat_world, {0}, "env.dummy", dummy_push, theta, seeds, 300);
        CHECK(report.verdict == "NotControlled");
        CHECK(report.attenuation == Rational(1));
    }

    SUBCASE("seed order does not change the pooled attenuation") {
        TcvReport forward = tcv(thermostat_world, {0}, "env.temp", disturbance, theta, seeds, 200);
        std::vector<std::uint64_t> reversed(seeds.rbegin(), seeds.rend());
        TcvReport backward =
            tcv(thermostat_world, {0}, "env.temp", disturbance, theta, reversed, 200);
        CHECK(forward.attenuation == backward.attenuation);
        CHECK(forward.verdict == backward.verdict);
    }

    SUBCASE("constant disturbance is degenerate") {
        DisturbanceSpec constant;
        constant.kind = DisturbanceSpec::Kind::Constant;
        constant.amplitude = 7;
        constant.target = "env.temp";
        try {
            tcv(thermostat_world, {0}, "env.temp", constant, theta, {1}, 100);
            CHECK(false);
        } catch (const Error& e) {
            CHECK(e.code() == Errc::DegenerateDisturbance);
        }
    }

    SUBCASE("no declared controller loops") {
        try {
            tcv(thermostat_world, {}, "env.temp", disturbance, theta, {1}, 100);
            CHECK(false);
        } catch (const Error& e) {
            CHECK(e.code() == Errc::SeverUndefined);
        }
    }
}
