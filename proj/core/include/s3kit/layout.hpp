#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace s3kit {

using Coord = std::vector<std::int64_t>;

/// Shape/stride pair mapping multi-dimensional coordinates to linear storage
/// indices. Extents are >= 1, strides are >= 0 (zero strides are legal here;
/// the view validator rejects them because views must be bijections).
///
/// Enumeration order is fixed project-wide: the last dimension varies fastest
/// (row-major-style mixed radix), so ordinal 0 is the all-zero coordinate.
class Layout {
public:
    /// Singleton layout (1,):(0,).
    Layout() : Layout({1}, {0}) {}

    Layout(std::vector<std::int64_t> shape, std::vector<std::int64_t> stride);

    /// Dense row-major layout for a shape.
    static Layout row_major(std::vector<std::int64_t> shape);

    const std::vector<std::int64_t>& shape() const noexcept { return shape_; }
    const std::vector<std::int64_t>& stride() const noexcept { return stride_; }
    std::size_t arity() const noexcept { return shape_.size(); }

    /// Product of extents.
    std::int64_t size() const noexcept { return size_; }

    /// 1 + sum_k (s_k - 1) * d_k: the highest reachable linear index plus one.
    std::int64_t cosize() const noexcept;

    /// Coordinate -> linear index, sum_k i_k * d_k. Throws OutOfBoundsError
    /// when any i_k is outside [0, s_k).
    std::int64_t index(std::span<const std::int64_t> coord) const;

    /// Inverse of the enumeration order: decodes an ordinal in [0, size) as a
    /// mixed-radix coordinate with the last dimension fastest.
    Coord coord(std::int64_t ordinal) const;

    /// Mixed-radix packing of a coordinate to its enumeration ordinal
    /// (last dimension fastest); the inverse of coord().
    std::int64_t ordinal(std::span<const std::int64_t> coord) const;

    /// Linear index of the ordinal-th enumerated element.
    std::int64_t index_at(std::int64_t ordinal) const { return index(coord(ordinal)); }

    /// True when distinct coordinates always map to distinct indices.
    /// Checked by enumeration; layouts bigger than `enumeration_cap` are not
    /// enumerated and report nullopt.
    std::optional<bool> is_injective(std::int64_t enumeration_cap = (1 << 16)) const;

    std::string to_string() const;

    friend bool operator==(const Layout&, const Layout&) = default;

private:
    std::vector<std::int64_t> shape_;
    std::vector<std::int64_t> stride_;
    std::int64_t size_;
};

/// Result of layout composition. Carries a closed-form strided layout when one
/// exists (derived by stride factoring and verified pointwise); otherwise the
/// map is materialized as an explicit ordinal -> index table over the outer
/// shape.
class ComposedLayout {
public:
    ComposedLayout(std::vector<std::int64_t> shape, Layout strided);
    ComposedLayout(std::vector<std::int64_t> shape, std::vector<std::int64_t> table);

    const std::vector<std::int64_t>& shape() const noexcept { return shape_; }
    std::int64_t size() const noexcept;
    bool has_strided_form() const noexcept { return strided_.has_value(); }
    const Layout& strided() const { return *strided_; }

    std::int64_t index(std::span<const std::int64_t> coord) const;
    std::int64_t index_at(std::int64_t ordinal) const;

private:
    std::vector<std::int64_t> shape_;
    std::optional<Layout> strided_;
    std::vector<std::int64_t> table_;
};

/// Composition fixed by the view-factorization semantics: the outer layout's
/// coordinates index the inner layout's enumeration ordinals,
///   r(c) = index(inner, coord(inner, index(outer, c))).
/// Requires size(outer) == size(inner) and the outer image to stay inside
/// [0, size(inner)); throws SizeMismatchError otherwise.
ComposedLayout layout_compose(const Layout& outer, const Layout& inner);

}  // namespace s3kit
