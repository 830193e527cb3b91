#pragma once

#include "s3kit/domain.hpp"
#include "s3kit/layout.hpp"
#include "s3kit/rational.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace s3kit {

/// The block grid: one cell per block, extents g_k = s_k^(V) / b_k and
/// strides d_grid,k = b_k * d_k^(V) (the linear start offset of each block).
struct BlockGrid {
    std::vector<std::int64_t> grid_shape;
    std::vector<std::int64_t> grid_strides;

    std::int64_t num_blocks() const {
        std::int64_t p = 1;
        for (std::int64_t g : grid_shape) p *= g;
        return p;
    }
};

/// The full sparsity specification: View layout, Block shape, Scope shape,
/// keep count, and an optional Domain restricting it to a sub-tensor.
///
/// With a domain, the view addresses the domain as a virtual dense tensor
/// (row-major over the domain extents); element indices are then mapped
/// through the domain embedding to physical indices, which requires the
/// physical layout to be bound in `phys`.
///
/// Block and scope ordinals are canonical throughout: mixed radix with the
/// last dimension fastest, matching coordinate enumeration. The packing used
/// by the element-to-block formula (dimension 0 fastest) is available via the
/// *_packed conversions.
struct SparsitySpec {
    Layout view;
    std::vector<std::int64_t> block;
    std::vector<std::int64_t> scope;
    std::int64_t keep = 0;
    std::optional<DomainDef> domain;
    std::optional<Layout> phys;
    std::optional<std::int64_t> declared_phys_size;

    /// Number of elements the spec governs: |D| with a domain, otherwise the
    /// declared physical size (defaulting to the view size).
    std::int64_t target_size() const;
};

struct Violation {
    std::string constraint;  // short id of the failed constraint
    int dim = -1;            // dimension involved, -1 when not applicable
    std::string message;
};

/// Empty iff every invariant holds. Violations are data, not exceptions.
std::vector<Violation> validate_spec(const SparsitySpec& spec);

/// Throws SpecInvalidError when validate_spec is non-empty.
void require_valid(const SparsitySpec& spec);

BlockGrid block_grid(const SparsitySpec& spec);
std::int64_t num_blocks(const SparsitySpec& spec);
std::int64_t blocks_per_scope(const SparsitySpec& spec);
std::int64_t num_scopes(const SparsitySpec& spec);

/// Physical indices of block `block_ordinal` (canonical ordinal), exactly
/// prod(b) of them: idx(j,o) = sum_k (j_k b_k + o_k) d_k^(V), embedded through
/// the domain when one is present.
ElementSet block_elements(const SparsitySpec& spec, std::int64_t block_ordinal);

/// Inverse of block_elements: the canonical ordinal of the block containing
/// a physical element index. Throws NotInViewError for unreachable indices.
std::int64_t element_to_block(const SparsitySpec& spec, std::int64_t element);

/// Same mapping packed with dimension 0 fastest,
/// beta(e) = sum_k floor(v_k/b_k) * prod_{l<k} g_l.
std::int64_t element_to_block_packed(const SparsitySpec& spec, std::int64_t element);

/// Conversions between the canonical block ordinal (last dim fastest) and the
/// dim-0-fastest packing used by the beta formula.
std::int64_t block_ordinal_to_packed(const SparsitySpec& spec, std::int64_t ordinal);
std::int64_t packed_to_block_ordinal(const SparsitySpec& spec, std::int64_t packed);

/// Scope index of a block: gamma(j), canonical over the scope grid.
std::int64_t scope_of_block(const SparsitySpec& spec, std::int64_t block_ordinal);

/// Canonical block ordinals belonging to scope `scope_ordinal`, ascending.
std::vector<std::int64_t> scope_blocks(const SparsitySpec& spec, std::int64_t scope_ordinal);

/// Union of block_elements over the scope's blocks.
ElementSet scope_elements(const SparsitySpec& spec, std::int64_t scope_ordinal);

/// { k / |S|_B : k = 0..|S|_B }, reduced, ascending.
std::vector<Rational> achievable_sparsities(const SparsitySpec& spec);

/// Precomputed per-block element lists and per-scope block lists; the pure
/// per-ordinal operations above re-derive these on demand.
struct SpecTables {
    std::vector<std::vector<std::int64_t>> elements;  // by block ordinal
    std::vector<std::vector<std::int64_t>> blocks;    // by scope ordinal
};
SpecTables build_tables(const SparsitySpec& spec);

/// Per-block binary retention decisions over the block grid.
struct MaskGrid {
    SparsitySpec spec;
    std::vector<std::uint8_t> retained;  // one flag per canonical block ordinal

    std::int64_t retained_count() const;
};

/// Within each scope retain exactly the `keep` highest-scoring blocks.
/// Deterministic: ties are broken by retaining the lower block ordinal first.
/// Throws NonFiniteScoreError on NaN/inf scores.
MaskGrid hard_threshold(const SparsitySpec& spec, const std::vector<double>& scores);

/// Physical indices zeroed by the mask: union of block_elements over all
/// non-retained blocks.
ElementSet element_mask(const MaskGrid& mask);

enum class CouplingLevel { Block, Scope };

struct CouplingMember {
    std::string tensor_id;
    SparsitySpec spec;
    std::vector<std::int64_t> permutation;  // permuted_shape[k] = grid_shape[perm[k]]
};

/// Aligns block (or scope) grids of several tensors so pruning decisions are
/// shared; the permuted grid shapes of all members must agree.
struct CouplingSpec {
    std::vector<CouplingMember> members;
    CouplingLevel level = CouplingLevel::Block;
};

/// The common permuted grid shape; throws GridShapeMismatchError when member
/// grids disagree or a permutation is invalid.
std::vector<std::int64_t> coupled_grid_shape(const CouplingSpec& coupling);

/// Per-tensor element sets of the coupled block at a permuted grid coordinate.
std::vector<std::pair<std::string, ElementSet>> coupled_block_elements(
    const CouplingSpec& coupling, std::span<const std::int64_t> grid_coord);

}  // namespace s3kit
