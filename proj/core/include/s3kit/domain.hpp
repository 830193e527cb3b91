#pragma once

#include "s3kit/layout.hpp"

#include <cstdint>
#include <variant>
#include <vector>

namespace s3kit {

/// Ordered set of distinct linear indices into physical storage.
/// Strictly sorted, no duplicates.
class ElementSet {
public:
    ElementSet() = default;

    /// Sorts and rejects duplicates.
    static ElementSet from_indices(std::vector<std::int64_t> indices);

    /// Input already strictly sorted (checked).
    static ElementSet from_sorted(std::vector<std::int64_t> indices);

    const std::vector<std::int64_t>& indices() const noexcept { return indices_; }
    std::size_t size() const noexcept { return indices_.size(); }
    bool empty() const noexcept { return indices_.empty(); }
    bool contains(std::int64_t e) const;

    friend bool operator==(const ElementSet&, const ElementSet&) = default;

private:
    std::vector<std::int64_t> indices_;
};

/// Axis-aligned sub-tensor: starting coordinates and extents in the physical
/// tensor, o_k + e_k <= s_k for all k.
struct DomainSpec {
    std::vector<std::int64_t> offset;
    std::vector<std::int64_t> extent;

    std::int64_t size() const;

    /// The induced layout e_D : d_phys together with the linear base offset,
    /// i.e. the equivalent GeneralizedDomain.
    Layout domain_layout(const Layout& phys) const;
};

/// Strided sub-tensor selection: a layout whose strides address the physical
/// tensor directly, plus a linear base offset.
struct GeneralizedDomain {
    Layout layout;
    std::int64_t base_offset = 0;
};

using DomainDef = std::variant<DomainSpec, GeneralizedDomain>;

std::int64_t domain_size(const DomainDef& domain);

/// Physical linear indices covered by the domain. Indices are validated
/// against the physical layout's cosize; duplicate indices (a non-injective
/// generalized domain) are rejected.
ElementSet domain_elements(const DomainDef& domain, const Layout& phys);

/// Physical index of the domain-local dense ordinal (row-major over the
/// domain extents). This is the embedding used when a sparsity spec's view
/// addresses a domain instead of the whole tensor.
std::int64_t domain_embed(const DomainDef& domain, const Layout& phys, std::int64_t local);

ElementSet domain_union(const ElementSet& a, const ElementSet& b);
ElementSet domain_complement(const ElementSet& a, std::int64_t tensor_size);

}  // namespace s3kit
