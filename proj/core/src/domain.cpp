#include "s3kit/domain.hpp"

#include "s3kit/errors.hpp"

#include <algorithm>

namespace s3kit {

ElementSet ElementSet::from_indices(std::vector<std::int64_t> indices) {
    std::sort(indices.begin(), indices.end());
    return from_sorted(std::move(indices));
}

ElementSet ElementSet::from_sorted(std::vector<std::int64_t> indices) {
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] < 0) throw OutOfBoundsError("negative element index");
        if (i > 0 && indices[i] <= indices[i - 1]) {
            throw InvalidDomainError("element set not strictly sorted (duplicate index " +
                                     std::to_string(indices[i]) + ")");
        }
    }
    ElementSet s;
    s.indices_ = std::move(indices);
    return s;
}

bool ElementSet::contains(std::int64_t e) const {
    return std::binary_search(indices_.begin(), indices_.end(), e);
}

std::int64_t DomainSpec::size() const {
    std::int64_t p = 1;
    for (std::int64_t e : extent) p *= e;
    return p;
}

Layout DomainSpec::domain_layout(const Layout& phys) const {
    if (offset.size() != extent.size() || offset.size() != phys.arity()) {
        throw InvalidDomainError("domain arity does not match physical layout");
    }
    return Layout(extent, phys.stride());
}

namespace {

void check_domain_bounds(const DomainSpec& d, const Layout& phys) {
    if (d.offset.size() != phys.arity() || d.extent.size() != phys.arity()) {
        throw InvalidDomainError("domain arity does not match physical layout");
    }
    for (std::size_t k = 0; k < phys.arity(); ++k) {
        if (d.offset[k] < 0 || d.extent[k] < 1) {
            throw InvalidDomainError("domain offset/extent invalid at dim " + std::to_string(k));
        }
        if (d.offset[k] + d.extent[k] > phys.shape()[k]) {
            throw OutOfBoundsError("domain exceeds physical extent at dim " + std::to_string(k) +
                                   ": " + std::to_string(d.offset[k]) + "+" +
                                   std::to_string(d.extent[k]) + " > " +
                                   std::to_string(phys.shape()[k]));
        }
    }
}

}  // namespace

std::int64_t domain_size(const DomainDef& domain) {
    if (const auto* d = std::get_if<DomainSpec>(&domain)) return d->size();
    return std::get<GeneralizedDomain>(domain).layout.size();
}

std::int64_t domain_embed(const DomainDef& domain, const Layout& phys, std::int64_t local) {
    if (const auto* d = std::get_if<DomainSpec>(&domain)) {
        Layout local_shape = Layout(d->extent, std::vector<std::int64_t>(d->extent.size(), 0));
        Coord c = local_shape.coord(local);
        for (std::size_t k = 0; k < c.size(); ++k) c[k] += d->offset[k];
        return phys.index(c);
    }
    const auto& g = std::get<GeneralizedDomain>(domain);
    return g.base_offset + g.layout.index_at(local);
}

ElementSet domain_elements(const DomainDef& domain, const Layout& phys) {
    const std::int64_t bound = phys.cosize();
    std::vector<std::int64_t> out;

    if (const auto* d = std::get_if<DomainSpec>(&domain)) {
        check_domain_bounds(*d, phys);
        const std::int64_t n = d->size();
        out.reserve(static_cast<std::size_t>(n));
        Layout dl = d->domain_layout(phys);
        const std::int64_t base = phys.index(d->offset);
        for (std::int64_t o = 0; o < n; ++o) {
            out.push_back(base + dl.index_at(o));
        }
    } else {
        const auto& g = std::get<GeneralizedDomain>(domain);
        if (g.base_offset < 0) throw InvalidDomainError("negative base offset");
        const std::int64_t n = g.layout.size();
        out.reserve(static_cast<std::size_t>(n));
        for (std::int64_t o = 0; o < n; ++o) {
            out.push_back(g.base_offset + g.layout.index_at(o));
        }
    }

    for (std::int64_t e : out) {
        if (e >= bound) {
            throw OutOfBoundsError("domain index " + std::to_string(e) +
                                   " outside physical bound " + std::to_string(bound));
        }
    }
    return ElementSet::from_indices(std::move(out));
}

ElementSet domain_union(const ElementSet& a, const ElementSet& b) {
    std::vector<std::int64_t> out;
    out.reserve(a.size() + b.size());
    std::set_union(a.indices().begin(), a.indices().end(), b.indices().begin(),
                   b.indices().end(), std::back_inserter(out));
    return ElementSet::from_sorted(std::move(out));
}

ElementSet domain_complement(const ElementSet& a, std::int64_t tensor_size) {
    if (!a.empty() && a.indices().back() >= tensor_size) {
        throw OutOfBoundsError("element index exceeds tensor size in complement");
    }
    std::vector<std::int64_t> out;
    out.reserve(static_cast<std::size_t>(tensor_size) - a.size());
    auto it = a.indices().begin();
    for (std::int64_t e = 0; e < tensor_size; ++e) {
        if (it != a.indices().end() && *it == e) {
            ++it;
        } else {
            out.push_back(e);
        }
    }
    return ElementSet::from_sorted(std::move(out));
}

}  // namespace s3kit
