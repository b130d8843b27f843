// Niche-respecting automatic structure generation. Grammar mode builds
// programs from the DSL grammar with seeded draws; provider mode asks an
// external text-in/program-out service. Either way every candidate is parsed,
// size-checked and niche-checked before catalog admission — generated code is
// data until it survives rejection sampling.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "enerstat/catalog.hpp"
#include "enerstat/parser.hpp"
#include "enerstat/rng.hpp"

namespace enerstat {

enum class GeneratorMode { Grammar, Provider };

struct GeneratorConfig {
    bool enabled = false;
    GeneratorMode mode = GeneratorMode::Grammar;
    Step epoch = 100;          // one invention opportunity per epoch
    int invention_budget = 1;  // kinds per epoch, spread over its first steps
    int max_nodes = 24;
    int max_attempts = 64;
    std::int32_t radius_min = 2;
    std::int32_t radius_max = 6;
    bool generate_props = true;  // invented kinds may carry causal properties
    std::string provider_url;    // provider mode endpoint base
    // Test seam: draw refs from this pool instead of the niche. Lets tests
    // force out-of-niche candidates to watch rejection sampling work.
    std::optional<std::vector<PropRef>> ref_pool_override;
};

// Text-in/program-out seam. Grammar-mode runs never construct one, so they
// can never open a network connection.
class ProgramProvider {
public:
    virtual ~ProgramProvider() = default;
    virtual std::string generate(const std::string& niche_request_json) = 0;
};

namespace detail {

struct GenContext {
    const std::vector<PropRef>& refs;
    int budget;  // remaining node allowance
    bool local_bound = false;
};

inline PropRef pick_ref(const std::vector<PropRef>& refs, Rng& rng) {
    return refs[rng.below(refs.size())];
}

inline AstNode gen_expr(GenContext& ctx, Rng& rng, int depth) {
    AstNode node;
    // leaves only, once the budget or depth runs dry
    if (ctx.budget <= 1 || depth <= 0) {
        ctx.budget -= 1;
        if (!ctx.refs.empty() && rng.below(2) == 0) {
            node.kind = NodeKind::Sense;
            node.ref = pick_ref(ctx.refs, rng);
        } else {
            node.kind = NodeKind::Literal;
            node.literal = rng.range(-8, 8);
        }
        return node;
    }
    switch (rng.below(ctx.refs.empty() ? 6 : 10)) {
        case 0:
            ctx.budget -= 1;
            node.kind = NodeKind::Literal;
            node.literal = rng.range(-8, 8);
            return node;
        case 1:
            if (ctx.local_bound) {
                ctx.budget -= 1;
                node.kind = NodeKind::ReadLocal;
                node.local = "a";
                return node;
            }
            [[fallthrough]];
        case 2: {
            static const NodeKind ops[] = {NodeKind::Add, NodeKind::Sub, NodeKind::Mul,
                                           NodeKind::Div};
            ctx.budget -= 1;
            node.kind = ops[rng.below(4)];
            node.children.push_back(gen_expr(ctx, rng, depth - 1));
            node.children.push_back(gen_expr(ctx, rng, depth - 1));
            return node;
        }
        case 3:
            ctx.budget -= 1;
            node.kind = NodeKind::Compare;
            node.cmp = static_cast<CompareOp>(rng.below(6));
            node.children.push_back(gen_expr(ctx, rng, depth - 1));
            node.children.push_back(gen_expr(ctx, rng, depth - 1));
            return node;
        case 4:
            ctx.budget -= 1;
            node.kind = NodeKind::IfElse;
            for (int i = 0; i < 3; ++i) node.children.push_back(gen_expr(ctx, rng, depth - 1));
            return node;
        case 5:
            ctx.budget -= 1;
            node.kind = NodeKind::Clamp;
            for (int i = 0; i < 3; ++i) node.children.push_back(gen_expr(ctx, rng, depth - 1));
            return node;
        case 6:
        case 7:
            ctx.budget -= 1;
            node.kind = NodeKind::Sense;
            node.ref = pick_ref(ctx.refs, rng);
            return node;
        default:
            ctx.budget -= 1;
            node.kind = NodeKind::Affect;
            node.ref = pick_ref(ctx.refs, rng);
            node.children.push_back(gen_expr(ctx, rng, depth - 1));
            return node;
    }
}

inline AstNode gen_program(const GeneratorConfig& config, const std::vector<PropRef>& refs,
                           Rng& rng) {
    GenContext ctx{refs, 3 + static_cast<int>(rng.below(
                             static_cast<std::uint64_t>(std::max(1, config.max_nodes - 3))))};
    AstNode seq;
    seq.kind = NodeKind::Seq;
    const int elements = 1 + static_cast<int>(rng.below(3));
    for (int i = 0; i < elements && ctx.budget > 0; ++i) {
        if (i == 0 && rng.below(3) == 0) {
            AstNode let;
            let.kind = NodeKind::WriteLocal;
            let.local = "a";
            ctx.budget -= 1;
            let.children.push_back(gen_expr(ctx, rng, 4));
            ctx.local_bound = true;
            seq.children.push_back(std::move(let));
        } else if (!refs.empty()) {
            // bias toward exerting causal power; inert kinds teach nothing
            AstNode affect;
            affect.kind = NodeKind::Affect;
            affect.ref = pick_ref(refs, rng);
            ctx.budget -= 1;
            affect.children.push_back(gen_expr(ctx, rng, 4));
            seq.children.push_back(std::move(affect));
        } else {
            seq.children.push_back(gen_expr(ctx, rng, 4));
        }
    }
    if (seq.children.size() == 1) return std::move(seq.children.front());
    return seq;
}

// Hand-formatted request document: identifiers only, no escaping needed.
inline std::string niche_request_json(const Niche& niche, int catalog_size, int max_nodes) {
    std::string body = "{\"grammar\":\"cp/1\",\"catalog_size\":" + std::to_string(catalog_size) +
                       ",\"max_nodes\":" + std::to_string(max_nodes) + ",\"sensable\":[";
    bool first = true;
    for (const PropRef& ref : niche.sensable) {
        if (!first) body += ',';
        first = false;
        body += '"' + ref.text() + '"';
    }
    body += "],\"affectable\":[";
    first = true;
    for (const PropRef& ref : niche.affectable) {
        if (!first) body += ',';
        first = false;
        body += '"' + ref.text() + '"';
    }
    body += "]}";
    return body;
}

}  // namespace detail

struct InventedKind {
    AstNode program;
    std::int32_t effective_radius = 1;
    std::vector<PropertyTemplate> causal_props;
};

// Draws candidates until one passes the niche check and the size bound, or
// the attempt cap is hit (GenerationExhausted). Provider mode additionally
// surfaces connectivity failures as ProviderUnavailable. Deterministic in
// grammar mode for a given rng state.
inline InventedKind invent_structure(const GeneratorConfig& config, const Catalog& catalog,
                                     const Niche& niche, Rng& rng,
                                     ProgramProvider* provider = nullptr) {
    std::vector<PropRef> pool;
    if (config.ref_pool_override) {
        pool = *config.ref_pool_override;
    } else {
        pool.assign(niche.sensable.begin(), niche.sensable.end());
    }

    for (int attempt = 0; attempt < config.max_attempts; ++attempt) {
        AstNode program;
        if (config.mode == GeneratorMode::Grammar) {
            program = detail::gen_program(config, pool, rng);
        } else {
            if (!provider) raise(Errc::ProviderUnavailable, "no provider configured");
            std::string source = provider->generate(detail::niche_request_json(
                niche, static_cast<int>(catalog.kinds.size()), config.max_nodes));
            try {
                program = parse(source);
            } catch (const Error&) {
                continue;  // non-parsing response: rejected, try again
            }
        }
        if (node_count(program) > static_cast<std::size_t>(config.max_nodes)) continue;
        if (!niche_check(program, niche).empty()) continue;

        InventedKind kind;
        kind.program = std::move(program);
        kind.effective_radius = static_cast<std::int32_t>(
            rng.range(config.radius_min, std::max(config.radius_min, config.radius_max)));
        if (config.generate_props && rng.below(2) == 0) {
            kind.causal_props.push_back(
                PropertyTemplate{"p0", 0, 0, {PerturbationShape::Linear, 1}});
            if (rng.below(4) == 0)
                kind.causal_props.push_back(
                    PropertyTemplate{"p1", 0, 0, {PerturbationShape::Quadratic, 1}});
        }
        return kind;
    }
    raise(Errc::GenerationExhausted,
          "no admissible program in " + std::to_string(config.max_attempts) + " attempts");
}

}  // namespace enerstat
