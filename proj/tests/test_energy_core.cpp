#include "doctest.h"

#include <cstdlib>
#include <vector>

#include "enerstat/ledger.hpp"
#include "enerstat/perturbation.hpp"
#include "enerstat/rng.hpp"

using namespace enerstat;

namespace {

// Independent unit-step oracle: walk the value one unit at a time and sum the
// marginal cost at each step. The k-th unit step away from default costs
// kappa (linear) or kappa*(2k-1) (quadratic); steps toward default refund the
// same marginal amounts.
Energy marginal(const PerturbationModel& m, std::int64_t dist_after_step) {
    if (m.shape == PerturbationShape::Linear) return m.kappa;
    return m.kappa * (2 * dist_after_step - 1);
}

Energy oracle_stored(const PerturbationModel& m, std::int64_t value, std::int64_t def) {
    Energy sum = 0;
    std::int64_t dist = std::llabs(value - def);
    for (std::int64_t k = 1; k <= dist; ++k) sum += marginal(m, k);
    return sum;
}

Energy oracle_perturbation(const PerturbationModel& m, std::int64_t def, std::int64_t from,
                           std::int64_t to) {
    Energy cost = 0;
    std::int64_t v = from;
    while (v != to) {
        std::int64_t next = v + (to > v ? 1 : -1);
        std::int64_t dv = std::llabs(v - def);
        std::int64_t dn = std::llabs(next - def);
        cost += dn > dv ? marginal(m, dn) : -marginal(m, dv);
        v = next;
    }
    return cost;
}

Property make_prop(PerturbationShape shape, Energy kappa, std::int64_t def, std::int64_t value) {
    Property p;
    p.name = "p";
    p.perturbation = {shape, kappa};
    p.default_value = def;
    p.value = value;
    return p;
}

}  // namespace

TEST_CASE("stored_property_energy matches the unit-step oracle") {
    // linear kappa=2, default=0, value=5 -> 10
    CHECK(stored_property_energy(make_prop(PerturbationShape::Linear, 2, 0, 5)) == 10);
    // value == default -> 0, any model
    CHECK(stored_property_energy(make_prop(PerturbationShape::Quadratic, 7, 3, 3)) == 0);
    CHECK(stored_property_energy(make_prop(PerturbationShape::Linear, 9, -4, -4)) == 0);
    // quadratic kappa=1, default=0, value=3 -> 1+3+5 = 9 (oracle-confirmed)
    const PerturbationModel quad{PerturbationShape::Quadratic, 1};
    CHECK(oracle_stored(quad, 3, 0) == 9);
    CHECK(stored_property_energy(make_prop(PerturbationShape::Quadratic, 1, 0, 3)) == 9);

    // oracle equivalence over a grid of shapes/defaults/values
    Rng rng(101);
    for (int trial = 0; trial < 400; ++trial) {
        PerturbationModel m;
        m.shape = (trial % 2 == 0) ? PerturbationShape::Linear : PerturbationShape::Quadratic;
        m.kappa = rng.range(0, 5);
        std::int64_t def = rng.range(-10, 10);
        std::int64_t value = rng.range(-30, 30);
        Property p = make_prop(m.shape, m.kappa, def, value);
        CAPTURE(m.kappa);
        CAPTURE(def);
        CAPTURE(value);
        CHECK(stored_property_energy(p) == oracle_stored(m, value, def));
        CHECK(stored_property_energy(p) >= 0);
    }
}

TEST_CASE("perturbation_cost: signed stored-energy delta") {
    // linear kappa=3, delta=-4 from default -> 12 paid
    CHECK(perturbation_cost(make_prop(PerturbationShape::Linear, 3, 0, 0), -4) == 12);
    // delta = 0 -> 0
    CHECK(perturbation_cost(make_prop(PerturbationShape::Quadratic, 5, 2, 9), 0) == 0);
    // quadratic kappa=1, value 2 -> 4 (default 0): unit steps 5+7 = 12
    const PerturbationModel quad{PerturbationShape::Quadratic, 1};
    CHECK(oracle_perturbation(quad, 0, 2, 4) == 12);
    CHECK(perturbation_cost(make_prop(PerturbationShape::Quadratic, 1, 0, 2), 2) == 12);

    SUBCASE("oracle equivalence and path additivity, |delta| <= 16") {
        Rng rng(202);
        for (int trial = 0; trial < 400; ++trial) {
            PerturbationModel m;
            m.shape = (trial % 2 == 0) ? PerturbationShape::Linear : PerturbationShape::Quadratic;
            m.kappa = rng.range(0, 4);
            std::int64_t def = rng.range(-6, 6);
            std::int64_t value = rng.range(-20, 20);
            std::int64_t a = rng.range(-16, 16);
            std::int64_t b = (a >= 0) ? rng.range(0, 16) : rng.range(-16, 0);  // same sign
            Property p = make_prop(m.shape, m.kappa, def, value);
            CHECK(perturbation_cost(p, a) == oracle_perturbation(m, def, value, value + a));
            // monotone path: cost(v -> v+a) + cost(v+a -> v+a+b) == cost(v -> v+a+b)
            Property mid = make_prop(m.shape, m.kappa, def, value + a);
            CHECK(perturbation_cost(p, a) + perturbation_cost(mid, b) ==
                  perturbation_cost(p, a + b));
        }
    }

    SUBCASE("round-trip: default -> v -> default stores nothing, legs equal magnitude") {
        Rng rng(303);
        for (int trial = 0; trial < 200; ++trial) {
            PerturbationModel m;
            m.shape = (trial % 2 == 0) ? PerturbationShape::Linear : PerturbationShape::Quadratic;
            m.kappa = rng.range(1, 5);
            std::int64_t def = rng.range(-8, 8);
            std::int64_t v = rng.range(-25, 25);
            Property at_default = make_prop(m.shape, m.kappa, def, def);
            Property moved = make_prop(m.shape, m.kappa, def, v);
            Energy out = perturbation_cost(at_default, v - def);
            Energy back = perturbation_cost(moved, def - v);
            CHECK(out + back == 0);
            CHECK(stored_property_energy(at_default) == 0);
        }
    }
}

TEST_CASE("mass_of rounds up and never under-charges") {
    CHECK(mass_of(8, 4) == 2);
    CHECK(mass_of(8, 1) == 8);
    // ceil rule: 9/4 = 2.25 -> 3
    CHECK(mass_of(9, 4) == 3);
    CHECK(mass_of(0, 5) == 0);

    Rng rng(404);
    for (int trial = 0; trial < 500; ++trial) {
        Energy e = rng.range(0, 100000);
        Energy c2 = rng.range(1, 64);
        Energy m = mass_of(e, c2);
        CHECK(m * c2 >= e);            // never under-charges the real formula
        CHECK(((m - 1) * c2 < e || e == 0));  // and is the least such integer
        if (e > 0) CHECK(m >= 1);
    }
}

TEST_CASE("move_cost: W = m v^2 / 2, ceiling, zero iff stationary") {
    CHECK(move_cost(2, 3) == 9);
    CHECK(move_cost(5, 0) == 0);
    // ceil(1*1/2) = 1: motion is never free
    CHECK(move_cost(1, 1) == 1);

    Rng rng(505);
    for (int trial = 0; trial < 500; ++trial) {
        Energy m = rng.range(0, 10000);
        std::int64_t v = rng.range(0, 100);
        Energy w = move_cost(m, v);
        CHECK(2 * w >= m * v * v);
        CHECK(((w == 0) == (m == 0 || v == 0)));
    }
}

TEST_CASE("ledger transfer: exact, atomic, conserving") {
    Ledger ledger(100);
    ledger.open(3);

    SUBCASE("plain move") {
        ledger.transfer(AccountRef::pool(), AccountRef::buffer(3), 30);
        CHECK(ledger.free_pool() == 70);
        CHECK(ledger.buffer(3) == 30);
        CHECK(ledger.total() == 100);
        CHECK(ledger.audit());
    }

    SUBCASE("zero amount is the identity") {
        ledger.transfer(AccountRef::pool(), AccountRef::buffer(3), 0);
        CHECK(ledger.free_pool() == 100);
        CHECK(ledger.buffer(3) == 0);
    }

    SUBCASE("insufficient balance throws, nothing moves") {
        Ledger small(10);
        small.open(1);
        CHECK_THROWS_AS(small.transfer(AccountRef::pool(), AccountRef::buffer(1), 30), Error);
        CHECK(small.free_pool() == 10);
        CHECK(small.audit());
    }

    SUBCASE("unknown account") {
        CHECK_THROWS_AS(ledger.transfer(AccountRef::pool(), AccountRef::buffer(42), 5), Error);
        try {
            ledger.transfer(AccountRef::trapped(9), AccountRef::pool(), 1);
            CHECK(false);
        } catch (const Error& e) {
            CHECK(e.code() == Errc::UnknownAccount);
        }
    }
}

TEST_CASE("conservation holds over arbitrary transfer sequences") {
    Ledger ledger(1'000'000);
    for (InstanceId id = 1; id <= 8; ++id) ledger.open(id);

    Rng rng(606);
    for (int op = 0; op < 5000; ++op) {
        InstanceId a = static_cast<InstanceId>(rng.range(1, 8));
        InstanceId b = static_cast<InstanceId>(rng.range(1, 8));
        AccountRef from = AccountRef::pool();
        AccountRef to = AccountRef::pool();
        switch (rng.below(5)) {
            case 0: from = AccountRef::pool(); to = AccountRef::buffer(a); break;
            case 1: from = AccountRef::buffer(a); to = AccountRef::trapped(b); break;
            case 2: from = AccountRef::trapped(a); to = AccountRef::pool(); break;
            case 3: from = AccountRef::buffer(a); to = AccountRef::buffer(b); break;
            case 4: from = AccountRef::pool(); to = AccountRef::trapped(a); break;
        }
        Energy amount = rng.range(0, 500);
        try {
            ledger.transfer(from, to, amount);
        } catch (const Error&) {
            // refused transfers must leave the ledger untouched; audited below
        }
        REQUIRE(ledger.audit());
        REQUIRE(ledger.total() == 1'000'000);
    }
}

TEST_CASE("open-mode external endpoints change total and stay audited") {
    Ledger ledger(50);
    ledger.transfer(AccountRef::external(), AccountRef::pool(), 25);  // inflow
    CHECK(ledger.total() == 75);
    CHECK(ledger.free_pool() == 75);
    CHECK(ledger.audit());
    ledger.transfer(AccountRef::pool(), AccountRef::external(), 10);  // outflow
    CHECK(ledger.total() == 65);
    CHECK(ledger.audit());
}
