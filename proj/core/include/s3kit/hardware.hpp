#pragma once

#include "s3kit/rational.hpp"
#include "s3kit/spec.hpp"

#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace s3kit {

/// Fragment kinds of the m16n8k16 fp16 tile: A is 16x16 row-major, B is 16x8
/// column-major, C is 16x8.
enum class FragmentKind { A, B, C };

/// Per-thread element ownership within one fragment. With g = floor(t/4) and
/// tau = t mod 4:
///   A: rows {g, g+8},               cols {2tau, 2tau+1, 2tau+8, 2tau+9}
///   B: rows {2tau, 2tau+1, 2tau+8, 2tau+9}, col {g}
///   C: rows {g, g+8},               cols {2tau, 2tau+1}
struct FragmentAssignment {
    FragmentKind matrix_kind = FragmentKind::A;
    int thread = 0;
    std::set<int> rows;
    std::set<int> cols;
};

/// Fragment extents: A 16x16, B 16x8, C 16x8.
std::pair<int, int> fragment_extent(FragmentKind kind);

/// The lane (0..31) owning an element. Throws OutOfBoundsError outside the
/// fragment bounds.
int mma_fragment_owner(FragmentKind kind, int row, int col);

FragmentAssignment fragment_assignment(FragmentKind kind, int thread);

enum class QuotePattern { standard_24, coupled_24 };

/// Compressed-size accounting for a 2:4 scope: retained values plus the 4-bit
/// scope mask over the uncompressed values. At 4-bit precision element pairs
/// share metadata, doubling the values a mask covers.
struct CompressionQuote {
    QuotePattern pattern = QuotePattern::standard_24;
    int value_bits = 16;
    int mask_bits = 4;  // per scope
    std::int64_t uncompressed_bits = 0;
    std::int64_t compressed_bits = 0;
    Rational ratio;  // compressed / uncompressed, lowest terms
    double mask_overhead_bits_per_weight = 0.0;

    std::string to_json(int indent = 2) const;
};

/// value_bits must be one of {4, 8, 16, 32}; throws UnsupportedBitsError.
/// 16-bit: standard_24 -> 36/64 = 9/16, coupled_24 -> 68/128 = 17/32.
CompressionQuote compression_quote(QuotePattern pattern, int value_bits);

struct TensorCoreCheck {
    bool ok = false;
    std::vector<std::string> diagnostics;
};

/// True iff the spec's per-scope (and per-block) element sets structurally
/// equal the canonical hardware 2:4 pattern on an M x K tensor: scalar
/// blocks, scopes of 4 consecutive columns, keep 2.
TensorCoreCheck check_tensorcore_24(const SparsitySpec& spec, std::int64_t M, std::int64_t K);

}  // namespace s3kit
