// Structure kinds (birth-ordered, append-only) and the causal-niche rule:
// a kind may interact with the environment and with kinds born before it,
// never after. The niche DAG is what makes generated worlds explainable.
#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "enerstat/ast.hpp"
#include "enerstat/cost.hpp"
#include "enerstat/niche.hpp"
#include "enerstat/perturbation.hpp"

namespace enerstat {

struct PropertyTemplate {
    std::string name;
    std::int64_t default_value = 0;
    std::int64_t initial = 0;  // value at assembly; != default stores energy
    PerturbationModel perturbation;
};

struct StructureKind {
    KindId id = -1;  // catalog index, birth order
    std::string name;
    AstNode program;
    Energy fed = 0;
    Energy fel = 0;
    Energy assembly_cost = 0;  // == fed
    std::int32_t effective_radius = 1;
    std::vector<PropertyTemplate> causal_props;
    Niche niche;

    const PropertyTemplate* find_prop(const std::string& prop) const {
        for (const PropertyTemplate& t : causal_props)
            if (t.name == prop) return &t;
        return nullptr;
    }
};

struct Catalog {
    std::vector<StructureKind> kinds;
    std::map<KindId, Step> discovery_steps;  // first instance ever, by kind

    bool has(KindId id) const { return id >= 0 && id < static_cast<KindId>(kinds.size()); }

    const StructureKind& at(KindId id) const {
        if (!has(id)) raise(Errc::UnknownKind, "kind " + std::to_string(id));
        return kinds[static_cast<std::size_t>(id)];
    }
};

// The niche of catalog index `index`: all environment properties plus the
// causal properties of every earlier-born kind. Sensable and affectable
// coincide in this model. `index == catalog size` (the next to be born) is
// legal; anything beyond is not.
inline Niche niche_of(KindId index, const Catalog& catalog, const std::set<std::string>& env_props) {
    if (index < 0 || index > static_cast<KindId>(catalog.kinds.size()))
        raise(Errc::IndexBeyondNext,
              "niche index " + std::to_string(index) + " beyond next-to-be-born");
    Niche niche;
    for (const std::string& name : env_props) {
        PropRef ref = PropRef::environment(name);
        niche.sensable.insert(ref);
        niche.affectable.insert(ref);
    }
    for (KindId k = 0; k < index; ++k)
        for (const PropertyTemplate& prop : catalog.kinds[static_cast<std::size_t>(k)].causal_props) {
            PropRef ref = PropRef::structure(k, prop.name);
            niche.sensable.insert(ref);
            niche.affectable.insert(ref);
        }
    return niche;
}

}  // namespace enerstat
