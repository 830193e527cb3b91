#include "s3kit/spec.hpp"

#include "s3kit/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

namespace s3kit {

namespace {

constexpr std::int64_t kEnumerationCap = std::int64_t{1} << 16;

std::vector<std::int64_t> grid_shape_of(const SparsitySpec& spec) {
    std::vector<std::int64_t> g(spec.view.arity());
    for (std::size_t k = 0; k < g.size(); ++k) {
        g[k] = spec.view.shape()[k] / spec.block[k];
    }
    return g;
}

std::vector<std::int64_t> scope_grid_of(const SparsitySpec& spec) {
    std::vector<std::int64_t> g = grid_shape_of(spec);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] /= spec.scope[k];
    return g;
}

std::int64_t pack_last_fastest(const std::vector<std::int64_t>& shape,
                               const std::vector<std::int64_t>& coord) {
    std::int64_t o = 0;
    for (std::size_t k = 0; k < shape.size(); ++k) o = o * shape[k] + coord[k];
    return o;
}

std::vector<std::int64_t> unpack_last_fastest(const std::vector<std::int64_t>& shape,
                                              std::int64_t ordinal) {
    std::vector<std::int64_t> c(shape.size(), 0);
    for (std::size_t k = shape.size(); k-- > 0;) {
        c[k] = ordinal % shape[k];
        ordinal /= shape[k];
    }
    return c;
}

std::int64_t pack_first_fastest(const std::vector<std::int64_t>& shape,
                                const std::vector<std::int64_t>& coord) {
    std::int64_t o = 0;
    std::int64_t mult = 1;
    for (std::size_t k = 0; k < shape.size(); ++k) {
        o += coord[k] * mult;
        mult *= shape[k];
    }
    return o;
}

/// Physical index of a view-space linear index (identity without a domain).
std::int64_t embed_index(const SparsitySpec& spec, std::int64_t view_out) {
    if (!spec.domain) return view_out;
    if (!spec.phys) {
        throw SpecInvalidError("spec has a domain but no bound physical layout");
    }
    return domain_embed(*spec.domain, *spec.phys, view_out);
}

}  // namespace

std::int64_t SparsitySpec::target_size() const {
    if (domain) return domain_size(*domain);
    if (declared_phys_size) return *declared_phys_size;
    return view.size();
}

std::vector<Violation> validate_spec(const SparsitySpec& spec) {
    std::vector<Violation> out;
    const std::size_t n = spec.view.arity();

    if (spec.block.size() != n) {
        out.push_back({"block-arity", -1,
                       "block arity " + std::to_string(spec.block.size()) +
                           " != view arity " + std::to_string(n)});
    }
    if (spec.scope.size() != n) {
        out.push_back({"scope-arity", -1,
                       "scope arity " + std::to_string(spec.scope.size()) +
                           " != view arity " + std::to_string(n)});
    }
    if (spec.block.size() == n) {
        for (std::size_t k = 0; k < n; ++k) {
            if (spec.block[k] < 1) {
                out.push_back({"block-extent", static_cast<int>(k),
                               "block extent must be >= 1 at dim " + std::to_string(k)});
            } else if (spec.view.shape()[k] % spec.block[k] != 0) {
                out.push_back({"block-divisibility", static_cast<int>(k),
                               std::to_string(spec.block[k]) + " does not divide " +
                                   std::to_string(spec.view.shape()[k]) + " (dim " +
                                   std::to_string(k) + ")"});
            }
        }
    }
    if (spec.scope.size() == n && spec.block.size() == n && out.empty()) {
        std::vector<std::int64_t> g = grid_shape_of(spec);
        for (std::size_t k = 0; k < n; ++k) {
            if (spec.scope[k] < 1) {
                out.push_back({"scope-extent", static_cast<int>(k),
                               "scope extent must be >= 1 at dim " + std::to_string(k)});
            } else if (g[k] % spec.scope[k] != 0) {
                out.push_back({"scope-divisibility", static_cast<int>(k),
                               std::to_string(spec.scope[k]) + " does not divide grid extent " +
                                   std::to_string(g[k]) + " (dim " + std::to_string(k) + ")"});
            }
        }
        if (out.empty()) {
            std::int64_t per_scope = 1;
            for (std::int64_t s : spec.scope) per_scope *= s;
            if (spec.keep < 0 || spec.keep > per_scope) {
                out.push_back({"keep-range", -1,
                               "keep " + std::to_string(spec.keep) + " outside [0, " +
                                   std::to_string(per_scope) + "]"});
            }
        }
    }

    const std::int64_t target = spec.target_size();
    if (spec.view.size() != target) {
        out.push_back({"view-size", -1,
                       "view size " + std::to_string(spec.view.size()) + " ≠ " +
                           std::to_string(target)});
    }

    for (std::size_t k = 0; k < n; ++k) {
        if (spec.view.stride()[k] == 0) {
            out.push_back({"view-zero-stride", static_cast<int>(k),
                           "view stride 0 at dim " + std::to_string(k) +
                               " (views must be bijections onto storage)"});
        }
    }

    // Bijectivity onto [0, target): enumerated for desk-scale views.
    if (out.empty() && spec.view.size() <= kEnumerationCap) {
        std::unordered_set<std::int64_t> seen;
        seen.reserve(static_cast<std::size_t>(spec.view.size()));
        std::int64_t max_idx = -1;
        bool injective = true;
        for (std::int64_t o = 0; o < spec.view.size() && injective; ++o) {
            std::int64_t idx = spec.view.index_at(o);
            max_idx = std::max(max_idx, idx);
            injective = seen.insert(idx).second;
        }
        if (!injective) {
            out.push_back({"view-injective", -1, "view coordinate map is not injective"});
        } else if (max_idx >= target) {
            out.push_back({"view-image", -1,
                           "view image reaches index " + std::to_string(max_idx) +
                               " outside [0, " + std::to_string(target) + ")"});
        }
    }

    if (spec.domain && spec.phys) {
        try {
            (void)domain_elements(*spec.domain, *spec.phys);
        } catch (const Error& e) {
            out.push_back({"domain", -1, e.what()});
        }
    }
    return out;
}

void require_valid(const SparsitySpec& spec) {
    auto violations = validate_spec(spec);
    if (!violations.empty()) {
        std::string msg = "invalid spec:";
        for (const auto& v : violations) msg += " [" + v.constraint + "] " + v.message + ";";
        throw SpecInvalidError(msg);
    }
}

BlockGrid block_grid(const SparsitySpec& spec) {
    BlockGrid g;
    g.grid_shape = grid_shape_of(spec);
    g.grid_strides.resize(spec.view.arity());
    for (std::size_t k = 0; k < g.grid_strides.size(); ++k) {
        g.grid_strides[k] = spec.block[k] * spec.view.stride()[k];
    }
    return g;
}

std::int64_t num_blocks(const SparsitySpec& spec) {
    std::int64_t p = 1;
    for (std::int64_t g : grid_shape_of(spec)) p *= g;
    return p;
}

std::int64_t blocks_per_scope(const SparsitySpec& spec) {
    std::int64_t p = 1;
    for (std::int64_t s : spec.scope) p *= s;
    return p;
}

std::int64_t num_scopes(const SparsitySpec& spec) {
    std::int64_t p = 1;
    for (std::int64_t q : scope_grid_of(spec)) p *= q;
    return p;
}

ElementSet block_elements(const SparsitySpec& spec, std::int64_t block_ordinal) {
    const std::vector<std::int64_t> g = grid_shape_of(spec);
    const std::int64_t nb = num_blocks(spec);
    if (block_ordinal < 0 || block_ordinal >= nb) {
        throw OutOfBoundsError("block ordinal " + std::to_string(block_ordinal) +
                               " out of range [0, " + std::to_string(nb) + ")");
    }
    const std::vector<std::int64_t> j = unpack_last_fastest(g, block_ordinal);

    std::int64_t block_size = 1;
    for (std::int64_t b : spec.block) block_size *= b;

    std::vector<std::int64_t> out;
    out.reserve(static_cast<std::size_t>(block_size));
    std::vector<std::int64_t> offs(spec.block.size(), 0);
    for (std::int64_t t = 0; t < block_size; ++t) {
        std::int64_t rem = t;
        std::int64_t idx = 0;
        for (std::size_t k = spec.block.size(); k-- > 0;) {
            offs[k] = rem % spec.block[k];
            rem /= spec.block[k];
        }
        for (std::size_t k = 0; k < spec.block.size(); ++k) {
            idx += (j[k] * spec.block[k] + offs[k]) * spec.view.stride()[k];
        }
        out.push_back(embed_index(spec, idx));
    }
    return ElementSet::from_indices(std::move(out));
}

namespace {

/// Grid coordinate of the block containing a physical element, found by
/// inverting the view map (enumeration; views are desk scale).
std::vector<std::int64_t> grid_coord_of_element(const SparsitySpec& spec, std::int64_t element) {
    const std::int64_t n = spec.view.size();
    for (std::int64_t o = 0; o < n; ++o) {
        if (embed_index(spec, spec.view.index_at(o)) == element) {
            Coord v = spec.view.coord(o);
            std::vector<std::int64_t> j(v.size());
            for (std::size_t k = 0; k < v.size(); ++k) j[k] = v[k] / spec.block[k];
            return j;
        }
    }
    throw NotInViewError("element " + std::to_string(element) + " not reachable by the view");
}

}  // namespace

std::int64_t element_to_block(const SparsitySpec& spec, std::int64_t element) {
    return pack_last_fastest(grid_shape_of(spec), grid_coord_of_element(spec, element));
}

std::int64_t element_to_block_packed(const SparsitySpec& spec, std::int64_t element) {
    return pack_first_fastest(grid_shape_of(spec), grid_coord_of_element(spec, element));
}

std::int64_t block_ordinal_to_packed(const SparsitySpec& spec, std::int64_t ordinal) {
    const std::vector<std::int64_t> g = grid_shape_of(spec);
    return pack_first_fastest(g, unpack_last_fastest(g, ordinal));
}

std::int64_t packed_to_block_ordinal(const SparsitySpec& spec, std::int64_t packed) {
    const std::vector<std::int64_t> g = grid_shape_of(spec);
    std::vector<std::int64_t> j(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
        j[k] = packed % g[k];
        packed /= g[k];
    }
    return pack_last_fastest(g, j);
}

std::int64_t scope_of_block(const SparsitySpec& spec, std::int64_t block_ordinal) {
    const std::vector<std::int64_t> g = grid_shape_of(spec);
    std::vector<std::int64_t> j = unpack_last_fastest(g, block_ordinal);
    for (std::size_t k = 0; k < j.size(); ++k) j[k] /= spec.scope[k];
    return pack_last_fastest(scope_grid_of(spec), j);
}

std::vector<std::int64_t> scope_blocks(const SparsitySpec& spec, std::int64_t scope_ordinal) {
    const std::vector<std::int64_t> q = scope_grid_of(spec);
    const std::int64_t ns = num_scopes(spec);
    if (scope_ordinal < 0 || scope_ordinal >= ns) {
        throw OutOfBoundsError("scope ordinal " + std::to_string(scope_ordinal) +
                               " out of range [0, " + std::to_string(ns) + ")");
    }
    const std::vector<std::int64_t> t = unpack_last_fastest(q, scope_ordinal);
    const std::vector<std::int64_t> g = grid_shape_of(spec);

    const std::int64_t per_scope = blocks_per_scope(spec);
    std::vector<std::int64_t> out;
    out.reserve(static_cast<std::size_t>(per_scope));
    std::vector<std::int64_t> j(g.size());
    for (std::int64_t u = 0; u < per_scope; ++u) {
        std::int64_t rem = u;
        for (std::size_t k = spec.scope.size(); k-- > 0;) {
            j[k] = t[k] * spec.scope[k] + rem % spec.scope[k];
            rem /= spec.scope[k];
        }
        out.push_back(pack_last_fastest(g, j));
    }
    std::sort(out.begin(), out.end());
    return out;
}

ElementSet scope_elements(const SparsitySpec& spec, std::int64_t scope_ordinal) {
    std::vector<std::int64_t> all;
    for (std::int64_t b : scope_blocks(spec, scope_ordinal)) {
        const auto& e = block_elements(spec, b).indices();
        all.insert(all.end(), e.begin(), e.end());
    }
    return ElementSet::from_indices(std::move(all));
}

std::vector<Rational> achievable_sparsities(const SparsitySpec& spec) {
    const std::int64_t per_scope = blocks_per_scope(spec);
    std::vector<Rational> out;
    out.reserve(static_cast<std::size_t>(per_scope) + 1);
    for (std::int64_t k = 0; k <= per_scope; ++k) {
        out.push_back(Rational::reduced(k, per_scope));
    }
    return out;
}

SpecTables build_tables(const SparsitySpec& spec) {
    SpecTables t;
    const std::int64_t nb = num_blocks(spec);
    const std::int64_t ns = num_scopes(spec);
    t.elements.reserve(static_cast<std::size_t>(nb));
    for (std::int64_t b = 0; b < nb; ++b) {
        t.elements.push_back(block_elements(spec, b).indices());
    }
    t.blocks.reserve(static_cast<std::size_t>(ns));
    for (std::int64_t s = 0; s < ns; ++s) {
        t.blocks.push_back(scope_blocks(spec, s));
    }
    return t;
}

std::int64_t MaskGrid::retained_count() const {
    return std::count(retained.begin(), retained.end(), std::uint8_t{1});
}

MaskGrid hard_threshold(const SparsitySpec& spec, const std::vector<double>& scores) {
    const std::int64_t nb = num_blocks(spec);
    if (static_cast<std::int64_t>(scores.size()) != nb) {
        throw SizeMismatchError("expected " + std::to_string(nb) + " scores, got " +
                                std::to_string(scores.size()));
    }
    for (double s : scores) {
        if (!std::isfinite(s)) throw NonFiniteScoreError("non-finite block score");
    }

    MaskGrid mask{spec, std::vector<std::uint8_t>(static_cast<std::size_t>(nb), 0)};
    const std::int64_t ns = num_scopes(spec);
    for (std::int64_t s = 0; s < ns; ++s) {
        std::vector<std::int64_t> blocks = scope_blocks(spec, s);
        std::stable_sort(blocks.begin(), blocks.end(), [&](std::int64_t a, std::int64_t b) {
            if (scores[static_cast<std::size_t>(a)] != scores[static_cast<std::size_t>(b)]) {
                return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
            }
            return a < b;  // ties: lower ordinal retained first
        });
        for (std::int64_t i = 0; i < spec.keep && i < static_cast<std::int64_t>(blocks.size());
             ++i) {
            mask.retained[static_cast<std::size_t>(blocks[static_cast<std::size_t>(i)])] = 1;
        }
    }
    return mask;
}

ElementSet element_mask(const MaskGrid& mask) {
    std::vector<std::int64_t> zeroed;
    for (std::int64_t b = 0; b < static_cast<std::int64_t>(mask.retained.size()); ++b) {
        if (mask.retained[static_cast<std::size_t>(b)]) continue;
        const auto& e = block_elements(mask.spec, b).indices();
        zeroed.insert(zeroed.end(), e.begin(), e.end());
    }
    return ElementSet::from_indices(std::move(zeroed));
}

namespace {

std::vector<std::int64_t> member_grid_shape(const CouplingMember& m, CouplingLevel level) {
    std::vector<std::int64_t> g = block_grid(m.spec).grid_shape;
    if (level == CouplingLevel::Scope) {
        for (std::size_t k = 0; k < g.size(); ++k) g[k] /= m.spec.scope[k];
    }
    if (m.permutation.size() != g.size()) {
        throw GridShapeMismatchError("permutation arity " + std::to_string(m.permutation.size()) +
                                     " != grid arity " + std::to_string(g.size()) + " for tensor " +
                                     m.tensor_id);
    }
    std::vector<bool> seen(g.size(), false);
    for (std::int64_t p : m.permutation) {
        if (p < 0 || p >= static_cast<std::int64_t>(g.size()) ||
            seen[static_cast<std::size_t>(p)]) {
            throw GridShapeMismatchError("invalid grid permutation for tensor " + m.tensor_id);
        }
        seen[static_cast<std::size_t>(p)] = true;
    }
    std::vector<std::int64_t> permuted(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
        permuted[k] = g[static_cast<std::size_t>(m.permutation[k])];
    }
    return permuted;
}

}  // namespace

std::vector<std::int64_t> coupled_grid_shape(const CouplingSpec& coupling) {
    if (coupling.members.empty()) {
        throw GridShapeMismatchError("coupling has no members");
    }
    std::vector<std::int64_t> common = member_grid_shape(coupling.members.front(), coupling.level);
    for (const auto& m : coupling.members) {
        if (member_grid_shape(m, coupling.level) != common) {
            throw GridShapeMismatchError("permuted grid shapes disagree (tensor " + m.tensor_id +
                                         ")");
        }
    }
    return common;
}

std::vector<std::pair<std::string, ElementSet>> coupled_block_elements(
    const CouplingSpec& coupling, std::span<const std::int64_t> grid_coord) {
    const std::vector<std::int64_t> common = coupled_grid_shape(coupling);
    if (grid_coord.size() != common.size()) {
        throw OutOfBoundsError("coupled grid coordinate arity mismatch");
    }
    for (std::size_t k = 0; k < common.size(); ++k) {
        if (grid_coord[k] < 0 || grid_coord[k] >= common[k]) {
            throw OutOfBoundsError("coupled grid coordinate out of bounds at dim " +
                                   std::to_string(k));
        }
    }

    std::vector<std::pair<std::string, ElementSet>> out;
    out.reserve(coupling.members.size());
    for (const auto& m : coupling.members) {
        std::vector<std::int64_t> g = block_grid(m.spec).grid_shape;
        if (coupling.level == CouplingLevel::Scope) {
            for (std::size_t k = 0; k < g.size(); ++k) g[k] /= m.spec.scope[k];
        }
        std::vector<std::int64_t> j(g.size());
        for (std::size_t k = 0; k < g.size(); ++k) {
            j[static_cast<std::size_t>(m.permutation[k])] = grid_coord[k];
        }
        std::int64_t ordinal = pack_last_fastest(g, j);
        out.emplace_back(m.tensor_id, coupling.level == CouplingLevel::Block
                                          ? block_elements(m.spec, ordinal)
                                          : scope_elements(m.spec, ordinal));
    }
    return out;
}

}  // namespace s3kit
