// Perturbation-energy physics: properties store energy as a function of how
// far their value sits from its default, and every move pays (or refunds) the
// exact difference. Mass and movement work derive from the two cited
// formulas with ceilings so rounding can never create energy.
#pragma once

#include <cstdint>
#include <string>

#include "enerstat/base.hpp"

namespace enerstat {

enum class PerturbationShape { Linear, Quadratic };

struct PerturbationModel {
    PerturbationShape shape = PerturbationShape::Linear;
    Energy kappa = 0;  // uE per unit step (linear) or uE scale (quadratic)
};

struct Property {
    std::string name;
    std::int64_t value = 0;
    std::int64_t default_value = 0;
    PerturbationModel perturbation;
    InstanceId owner = kEnvAccount;  // kEnvAccount or owning instance
};

namespace detail {

inline Energy saturate_energy(__int128 v) {
    if (v > std::numeric_limits<Energy>::max()) return std::numeric_limits<Energy>::max();
    if (v < std::numeric_limits<Energy>::min()) return std::numeric_limits<Energy>::min();
    return static_cast<Energy>(v);
}

// Energy held by a value sitting |value - def| unit steps from default.
// Linear wells charge kappa per step; quadratic wells charge kappa*(2k-1) for
// the k-th step out, summing to kappa*dist^2, so partial moves stay integer.
inline __int128 stored_at(const PerturbationModel& model, std::int64_t value, std::int64_t def) {
    __int128 dist = value >= def ? static_cast<__int128>(value) - def
                                 : static_cast<__int128>(def) - value;
    if (model.shape == PerturbationShape::Linear)
        return static_cast<__int128>(model.kappa) * dist;
    return static_cast<__int128>(model.kappa) * dist * dist;
}

}  // namespace detail

// Total unit-step perturbation cost from default to the current value; >= 0,
// and exactly 0 when value == default.
inline Energy stored_property_energy(const Property& prop) {
    return detail::saturate_energy(
        detail::stored_at(prop.perturbation, prop.value, prop.default_value));
}

// Signed energy delta of moving value -> value + delta. Positive means the
// mover pays that much into the property; negative means the property
// refunds it. Path-additive by construction (telescoping differences).
inline Energy perturbation_cost(const Property& prop, std::int64_t delta) {
    __int128 after = detail::stored_at(prop.perturbation, sat_add(prop.value, delta),
                                       prop.default_value);
    __int128 before = detail::stored_at(prop.perturbation, prop.value, prop.default_value);
    return detail::saturate_energy(after - before);
}

// E / c^2 = m, rounded up: a structure's mass never understates its energy.
inline Energy mass_of(Energy assembly_cost, Energy c_squared) {
    if (c_squared < 1) raise(Errc::SchemaError, "c_squared must be >= 1");
    if (assembly_cost <= 0) return 0;
    return ceil_div(assembly_cost, c_squared);
}

// W = m * v^2 / 2, rounded up; zero only for zero speed, so motion is never
// free.
inline Energy move_cost(Energy mass, std::int64_t speed) {
    if (speed < 0) raise(Errc::SchemaError, "speed must be >= 0");
    __int128 numer = static_cast<__int128>(mass) * speed * speed;
    return detail::saturate_energy((numer + 1) / 2);
}

}  // namespace enerstat
