#include "s3kit/layout.hpp"

#include "s3kit/errors.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace s3kit {

namespace {

std::int64_t checked_product(const std::vector<std::int64_t>& extents) {
    std::int64_t p = 1;
    for (std::int64_t e : extents) {
        if (e > 0 && p > (std::int64_t{1} << 62) / e) {
            throw TooLargeError("layout size overflows 63 bits");
        }
        p *= e;
    }
    return p;
}

}  // namespace

Layout::Layout(std::vector<std::int64_t> shape, std::vector<std::int64_t> stride)
    : shape_(std::move(shape)), stride_(std::move(stride)) {
    if (shape_.empty() || shape_.size() != stride_.size()) {
        throw SizeMismatchError("layout shape/stride arity mismatch or empty");
    }
    for (std::size_t k = 0; k < shape_.size(); ++k) {
        if (shape_[k] < 1) {
            throw OutOfBoundsError("layout extent must be >= 1 at dim " + std::to_string(k));
        }
        if (stride_[k] < 0) {
            throw OutOfBoundsError("negative stride at dim " + std::to_string(k));
        }
    }
    size_ = checked_product(shape_);
}

Layout Layout::row_major(std::vector<std::int64_t> shape) {
    std::vector<std::int64_t> stride(shape.size(), 1);
    for (std::size_t k = shape.size(); k-- > 1;) {
        stride[k - 1] = stride[k] * shape[k];
    }
    return Layout(std::move(shape), std::move(stride));
}

std::int64_t Layout::cosize() const noexcept {
    std::int64_t c = 1;
    for (std::size_t k = 0; k < shape_.size(); ++k) {
        c += (shape_[k] - 1) * stride_[k];
    }
    return c;
}

std::int64_t Layout::index(std::span<const std::int64_t> coord) const {
    if (coord.size() != shape_.size()) {
        throw OutOfBoundsError("coordinate arity " + std::to_string(coord.size()) +
                               " != layout arity " + std::to_string(shape_.size()));
    }
    std::int64_t idx = 0;
    for (std::size_t k = 0; k < shape_.size(); ++k) {
        if (coord[k] < 0 || coord[k] >= shape_[k]) {
            throw OutOfBoundsError("coordinate " + std::to_string(coord[k]) +
                                   " out of bounds for extent " + std::to_string(shape_[k]) +
                                   " at dim " + std::to_string(k));
        }
        idx += coord[k] * stride_[k];
    }
    return idx;
}

Coord Layout::coord(std::int64_t ordinal) const {
    if (ordinal < 0 || ordinal >= size_) {
        throw OutOfBoundsError("ordinal " + std::to_string(ordinal) + " out of range [0, " +
                               std::to_string(size_) + ")");
    }
    Coord c(shape_.size(), 0);
    for (std::size_t k = shape_.size(); k-- > 0;) {
        c[k] = ordinal % shape_[k];
        ordinal /= shape_[k];
    }
    return c;
}

std::int64_t Layout::ordinal(std::span<const std::int64_t> coord) const {
    if (coord.size() != shape_.size()) {
        throw OutOfBoundsError("coordinate arity mismatch in ordinal()");
    }
    std::int64_t o = 0;
    for (std::size_t k = 0; k < shape_.size(); ++k) {
        if (coord[k] < 0 || coord[k] >= shape_[k]) {
            throw OutOfBoundsError("coordinate out of bounds in ordinal() at dim " +
                                   std::to_string(k));
        }
        o = o * shape_[k] + coord[k];
    }
    return o;
}

std::optional<bool> Layout::is_injective(std::int64_t enumeration_cap) const {
    if (size_ > enumeration_cap) return std::nullopt;
    std::unordered_set<std::int64_t> seen;
    seen.reserve(static_cast<std::size_t>(size_));
    for (std::int64_t o = 0; o < size_; ++o) {
        if (!seen.insert(index_at(o)).second) return false;
    }
    return true;
}

std::string Layout::to_string() const {
    std::ostringstream out;
    auto tuple = [&out](const std::vector<std::int64_t>& v) {
        out << '(';
        for (std::size_t k = 0; k < v.size(); ++k) {
            if (k) out << ',';
            out << v[k];
        }
        out << ')';
    };
    tuple(shape_);
    out << ':';
    tuple(stride_);
    return out.str();
}

ComposedLayout::ComposedLayout(std::vector<std::int64_t> shape, Layout strided)
    : shape_(std::move(shape)), strided_(std::move(strided)) {}

ComposedLayout::ComposedLayout(std::vector<std::int64_t> shape, std::vector<std::int64_t> table)
    : shape_(std::move(shape)), table_(std::move(table)) {}

std::int64_t ComposedLayout::size() const noexcept {
    std::int64_t p = 1;
    for (std::int64_t e : shape_) p *= e;
    return p;
}

std::int64_t ComposedLayout::index(std::span<const std::int64_t> coord) const {
    if (strided_) return strided_->index(coord);
    // Table is ordinal-indexed; reuse a layout over the outer shape for packing.
    Layout shape_only(shape_, std::vector<std::int64_t>(shape_.size(), 0));
    return table_[static_cast<std::size_t>(shape_only.ordinal(coord))];
}

std::int64_t ComposedLayout::index_at(std::int64_t ordinal) const {
    if (strided_) return strided_->index_at(ordinal);
    if (ordinal < 0 || ordinal >= size()) {
        throw OutOfBoundsError("composed-layout ordinal out of range");
    }
    return table_[static_cast<std::size_t>(ordinal)];
}

ComposedLayout layout_compose(const Layout& outer, const Layout& inner) {
    if (outer.size() != inner.size()) {
        throw SizeMismatchError("compose size mismatch: outer " + std::to_string(outer.size()) +
                                " != inner " + std::to_string(inner.size()));
    }
    if (outer.cosize() > inner.size()) {
        throw SizeMismatchError("compose: outer image [0, " + std::to_string(outer.cosize()) +
                                ") exceeds inner ordinal range [0, " +
                                std::to_string(inner.size()) + ")");
    }
    const std::int64_t n = outer.size();
    if (n > (1 << 24)) {
        throw TooLargeError("compose enumeration over " + std::to_string(n) + " elements");
    }

    // inner_enum[o] is the o-th enumerated physical index of `inner`.
    std::vector<std::int64_t> inner_enum(static_cast<std::size_t>(n));
    for (std::int64_t o = 0; o < n; ++o) {
        inner_enum[static_cast<std::size_t>(o)] = inner.index_at(o);
    }

    const auto& shape = outer.shape();
    std::vector<std::int64_t> table(static_cast<std::size_t>(n));
    for (std::int64_t o = 0; o < n; ++o) {
        Coord c = outer.coord(o);
        table[static_cast<std::size_t>(o)] =
            inner_enum[static_cast<std::size_t>(outer.index(c))];
    }

    // Stride factoring: candidate stride per dim is the image of that dim's
    // unit step; accept only if the linear form reproduces the whole table.
    std::vector<std::int64_t> cand(shape.size(), 0);
    for (std::size_t k = 0; k < shape.size(); ++k) {
        if (shape[k] == 1) continue;
        Coord unit(shape.size(), 0);
        unit[k] = 1;
        cand[k] = inner_enum[static_cast<std::size_t>(outer.index(unit))];
    }
    bool factorable = true;
    for (std::int64_t o = 0; o < n && factorable; ++o) {
        Coord c = outer.coord(o);
        std::int64_t lin = 0;
        for (std::size_t k = 0; k < shape.size(); ++k) lin += c[k] * cand[k];
        factorable = (lin == table[static_cast<std::size_t>(o)]);
    }
    if (factorable) {
        return ComposedLayout(shape, Layout(shape, std::move(cand)));
    }
    return ComposedLayout(shape, std::move(table));
}

}  // namespace s3kit
