#include "s3kit/patterns.hpp"

#include "s3kit/errors.hpp"

namespace s3kit {

namespace {

std::int64_t need(const DimMap& dims, const std::string& key) {
    auto it = dims.find(key);
    if (it == dims.end()) throw DimensionError("missing dimension '" + key + "'");
    if (it->second < 1) throw DimensionError("dimension '" + key + "' must be >= 1");
    return it->second;
}

std::int64_t get_or(const DimMap& dims, const std::string& key, std::int64_t fallback) {
    auto it = dims.find(key);
    if (it == dims.end()) return fallback;
    if (it->second < 1) throw DimensionError("dimension '" + key + "' must be >= 1");
    return it->second;
}

void need_divides(std::int64_t a, std::int64_t b, const std::string& what) {
    if (b % a != 0) {
        throw DimensionError(std::to_string(a) + " does not divide " + std::to_string(b) +
                             " (" + what + ")");
    }
}

SparsitySpec matrix_spec(std::int64_t m, std::int64_t k, std::vector<std::int64_t> block,
                         std::vector<std::int64_t> scope, std::int64_t keep) {
    return SparsitySpec{Layout({m, k}, {k, 1}), std::move(block), std::move(scope), keep,
                        std::nullopt, std::nullopt, std::nullopt};
}

CouplingSpec head_coupling(std::int64_t h, std::int64_t d, std::int64_t keep) {
    need_divides(h, d, "heads per model dim");
    const std::int64_t dh = d / h;
    // Q/K/V: rows grouped by head; O: columns grouped by head. Permutations
    // bring each member's head dimension to the front of the (h,1,1) grid.
    SparsitySpec qkv{Layout({h, dh, d}, {dh * d, d, 1}), {1, dh, d}, {h, 1, 1}, keep,
                     std::nullopt, std::nullopt, std::nullopt};
    SparsitySpec out{Layout({d, h, dh}, {d, dh, 1}), {d, 1, dh}, {1, h, 1}, keep,
                     std::nullopt, std::nullopt, std::nullopt};
    CouplingSpec c;
    c.level = CouplingLevel::Block;
    c.members = {
        {"q", qkv, {0, 1, 2}},
        {"k", qkv, {0, 1, 2}},
        {"v", qkv, {0, 1, 2}},
        {"o", out, {1, 0, 2}},
    };
    return c;
}

}  // namespace

Pattern make_pattern(const std::string& name, const DimMap& dims) {
    if (name == "unstructured") {
        const std::int64_t m = need(dims, "M"), k = need(dims, "K");
        const std::int64_t keep = get_or(dims, "k", m * k);
        return matrix_spec(m, k, {1, 1}, {m, k}, keep);
    }
    if (name == "nm") {
        const std::int64_t n = need(dims, "N"), m = need(dims, "M"), k = need(dims, "K");
        const std::int64_t rows = get_or(dims, "rows", 1);
        if (n > m) throw DimensionError("N must be <= M for N:M sparsity");
        need_divides(m, k, "N:M group over columns");
        return matrix_spec(rows, k, {1, 1}, {1, m}, n);
    }
    if (name == "two_four") {
        const std::int64_t m = need(dims, "M"), k = need(dims, "K");
        need_divides(4, k, "2:4 scopes over columns");
        return matrix_spec(m, k, {1, 1}, {1, 4}, 2);
    }
    if (name == "four_eight") {
        const std::int64_t m = need(dims, "M"), k = need(dims, "K");
        need_divides(8, k, "4:8 scopes over columns");
        return matrix_spec(m, k, {1, 2}, {1, 4}, 2);
    }
    if (name == "block_bxb") {
        const std::int64_t m = need(dims, "M"), k = need(dims, "K"), b = need(dims, "b");
        const std::int64_t keep = need(dims, "k");
        need_divides(b, m, "block rows");
        need_divides(b, k, "block columns");
        return matrix_spec(m, k, {b, b}, {1, k / b}, keep);
    }
    if (name == "channel") {
        const std::int64_t c = need(dims, "C"), k = need(dims, "K");
        const std::int64_t keep = need(dims, "k");
        return matrix_spec(c, k, {1, k}, {c, 1}, keep);
    }
    if (name == "head") {
        const std::int64_t h = need(dims, "h"), d = need(dims, "d");
        const std::int64_t keep = need(dims, "k");
        need_divides(h, d, "heads per model dim");
        const std::int64_t dh = d / h;
        return SparsitySpec{Layout({h, dh, d}, {dh * d, d, 1}), {1, dh, d}, {h, 1, 1}, keep,
                            std::nullopt, std::nullopt, std::nullopt};
    }
    if (name == "coupled_two_four") {
        const std::int64_t m = need(dims, "M"), k = need(dims, "K");
        need_divides(16, k, "coupled 2:4 column segments");
        return SparsitySpec{Layout({m, k / 16, 8, 2}, {k, 16, 1, 8}), {1, 1, 1, 2},
                            {1, 1, 4, 1},    2,
                            std::nullopt,    std::nullopt,
                            std::nullopt};
    }
    if (name == "coupled_two_four_v8") {
        const std::int64_t m = need(dims, "M"), k = need(dims, "K");
        need_divides(8, k, "coupled 2:4 (v8) column segments");
        return SparsitySpec{Layout({m, k / 8, 4, 2}, {k, 8, 1, 4}), {1, 1, 1, 2},
                            {1, 1, 4, 1},   2,
                            std::nullopt,   std::nullopt,
                            std::nullopt};
    }
    if (name == "col16_block") {
        const std::int64_t k = need(dims, "K");
        need_divides(16, k, "16-column blocks");
        return SparsitySpec{Layout({8, 2, k}, {k, 8 * k, 1}), {1, 1, 16}, {1, 2, 1}, 1,
                            std::nullopt, std::nullopt, std::nullopt};
    }
    if (name == "partial_24") {
        const std::int64_t d = need(dims, "d");
        need_divides(4, d, "dense/sparse row split");
        SparsitySpec spec{Layout({3 * d / 4, d / 4, 4}, {d, 4, 1}),
                          {1, 1, 1},
                          {1, 1, 4},
                          2,
                          DomainSpec{{d / 4, 0}, {3 * d / 4, d}},
                          Layout({d, d}, {d, 1}),
                          std::nullopt};
        return spec;
    }
    if (name == "head_coupled") {
        return head_coupling(need(dims, "h"), need(dims, "d"), need(dims, "k"));
    }
    throw UnknownPatternError("unknown pattern '" + name + "'");
}

SparsitySpec make_pattern_spec(const std::string& name, const DimMap& dims) {
    Pattern p = make_pattern(name, dims);
    if (auto* spec = std::get_if<SparsitySpec>(&p)) return std::move(*spec);
    throw UnknownPatternError("pattern '" + name + "' is a coupling, not a single-tensor spec");
}

std::vector<std::string> pattern_names() {
    return {"unstructured",     "nm",          "two_four",    "four_eight",
            "block_bxb",        "channel",     "head",        "coupled_two_four",
            "coupled_two_four_v8", "col16_block", "partial_24", "head_coupled"};
}

std::pair<SparsitySpec, std::int64_t> hyperrect_block_spec(
    const std::vector<std::int64_t>& tensor_shape, const std::vector<std::int64_t>& offset,
    const std::vector<std::int64_t>& extent) {
    const std::size_t n = tensor_shape.size();
    if (offset.size() != n || extent.size() != n || n == 0) {
        throw DimensionError("hyperrectangle arity mismatch");
    }
    Layout phys = Layout::row_major(tensor_shape);

    // Split every axis into (s_k/e_k, e_k); the rectangle then sits at grid
    // coordinate (o_k/e_k, 0) as a single (1, e_k, ...) block.
    std::vector<std::int64_t> vshape, vstride, block, scope, grid_coord;
    for (std::size_t k = 0; k < n; ++k) {
        if (extent[k] < 1 || tensor_shape[k] % extent[k] != 0 || offset[k] % extent[k] != 0 ||
            offset[k] + extent[k] > tensor_shape[k]) {
            throw DimensionError("hyperrectangle not aligned at dim " + std::to_string(k));
        }
        const std::int64_t d = phys.stride()[k];
        vshape.push_back(tensor_shape[k] / extent[k]);
        vstride.push_back(extent[k] * d);
        vshape.push_back(extent[k]);
        vstride.push_back(d);
        block.push_back(1);
        block.push_back(extent[k]);
        grid_coord.push_back(offset[k] / extent[k]);
        grid_coord.push_back(0);
    }
    SparsitySpec spec{Layout(vshape, vstride), block, {}, 0, std::nullopt, std::nullopt,
                      std::nullopt};
    BlockGrid grid = block_grid(spec);
    spec.scope = grid.grid_shape;  // one global scope
    spec.keep = grid.num_blocks() - 1;

    std::int64_t ordinal = 0;
    for (std::size_t k = 0; k < grid.grid_shape.size(); ++k) {
        ordinal = ordinal * grid.grid_shape[k] + grid_coord[k];
    }
    return {std::move(spec), ordinal};
}

}  // namespace s3kit
