#pragma once

#include "s3kit/spec.hpp"

#include <map>
#include <string>
#include <variant>
#include <vector>

namespace s3kit {

using DimMap = std::map<std::string, std::int64_t>;
using Pattern = std::variant<SparsitySpec, CouplingSpec>;

/// Canonical pattern catalog. Names:
///   unstructured(M,K,k)        scalar blocks, one global scope
///   nm(N,M,K[,rows])           N of every M consecutive innermost elements
///   two_four(M,K)              2 of 4 consecutive columns
///   four_eight(M,K)            2 of 4 column-pair blocks (4 of 8 columns)
///   block_bxb(M,K,b,k)         b x b blocks, row-wise scopes
///   channel(C,K,k)             one block per output channel, global scope
///   head(h,d,k)                head-sized blocks of a d x d projection
///   coupled_two_four(M,K)      2:4 over column pairs {c, c+8} per 16-col segment
///   coupled_two_four_v8(M,K)   variant pairing columns 4 apart per 8-col segment
///   col16_block(K)             16-column blocks, paired rows 8 apart (16 x K)
///   partial_24(d)              2:4 on the last 3d/4 rows, first d/4 rows dense
///   head_coupled(h,d,k)        Q/K/V/O coupling along the head dimension
/// Throws UnknownPatternError / DimensionError.
Pattern make_pattern(const std::string& name, const DimMap& dims);

/// Convenience for the names that always produce a single-tensor spec.
SparsitySpec make_pattern_spec(const std::string& name, const DimMap& dims);

std::vector<std::string> pattern_names();

/// Constructs a view + block pair such that an axis-aligned hyperrectangle of
/// a dense row-major tensor is exactly one block's element set. Requires the
/// aligned case (extent[k] divides shape[k] and offset[k]); returns the spec
/// and the canonical ordinal of the rectangle's block.
std::pair<SparsitySpec, std::int64_t> hyperrect_block_spec(
    const std::vector<std::int64_t>& tensor_shape, const std::vector<std::int64_t>& offset,
    const std::vector<std::int64_t>& extent);

}  // namespace s3kit
