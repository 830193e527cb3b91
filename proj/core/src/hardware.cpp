#include "s3kit/hardware.hpp"

#include "s3kit/errors.hpp"
#include "s3kit/patterns.hpp"

#include <algorithm>
#include <json.hpp>

namespace s3kit {

std::pair<int, int> fragment_extent(FragmentKind kind) {
    switch (kind) {
        case FragmentKind::A: return {16, 16};
        case FragmentKind::B: return {16, 8};
        case FragmentKind::C: return {16, 8};
    }
    return {0, 0};
}

int mma_fragment_owner(FragmentKind kind, int row, int col) {
    const auto [nrows, ncols] = fragment_extent(kind);
    if (row < 0 || row >= nrows || col < 0 || col >= ncols) {
        throw OutOfBoundsError("fragment index (" + std::to_string(row) + "," +
                               std::to_string(col) + ") outside " + std::to_string(nrows) + "x" +
                               std::to_string(ncols));
    }
    int g = 0;    // thread block, floor(t/4)
    int tau = 0;  // within-block offset, t mod 4
    switch (kind) {
        case FragmentKind::A:
            g = row % 8;
            tau = (col % 8) / 2;
            break;
        case FragmentKind::B:
            g = col;
            tau = (row % 8) / 2;
            break;
        case FragmentKind::C:
            g = row % 8;
            tau = col / 2;
            break;
    }
    return 4 * g + tau;
}

FragmentAssignment fragment_assignment(FragmentKind kind, int thread) {
    if (thread < 0 || thread >= 32) throw OutOfBoundsError("lane index must be in [0, 32)");
    const int g = thread / 4;
    const int tau = thread % 4;

    FragmentAssignment fa;
    fa.matrix_kind = kind;
    fa.thread = thread;
    switch (kind) {
        case FragmentKind::A:
            fa.rows = {g, g + 8};
            fa.cols = {2 * tau, 2 * tau + 1, 2 * tau + 8, 2 * tau + 9};
            break;
        case FragmentKind::B:
            fa.rows = {2 * tau, 2 * tau + 1, 2 * tau + 8, 2 * tau + 9};
            fa.cols = {g};
            break;
        case FragmentKind::C:
            fa.rows = {g, g + 8};
            fa.cols = {2 * tau, 2 * tau + 1};
            break;
    }
    return fa;
}

std::string CompressionQuote::to_json(int indent) const {
    nlohmann::json j;
    j["pattern"] = pattern == QuotePattern::standard_24 ? "standard_24" : "coupled_24";
    j["value_bits"] = value_bits;
    j["mask_bits"] = mask_bits;
    j["uncompressed_bits"] = uncompressed_bits;
    j["compressed_bits"] = compressed_bits;
    j["ratio"] = nlohmann::json{{"num", ratio.num}, {"den", ratio.den}};
    j["mask_overhead_bits_per_weight"] = mask_overhead_bits_per_weight;
    return j.dump(indent);
}

CompressionQuote compression_quote(QuotePattern pattern, int value_bits) {
    if (value_bits != 4 && value_bits != 8 && value_bits != 16 && value_bits != 32) {
        throw UnsupportedBitsError("value_bits must be one of 4, 8, 16, 32");
    }
    CompressionQuote q;
    q.pattern = pattern;
    q.value_bits = value_bits;
    q.mask_bits = 4;

    const std::int64_t keep = 2;
    std::int64_t pair = pattern == QuotePattern::coupled_24 ? 2 : 1;  // elements per block
    if (value_bits == 4) pair *= 2;  // sub-byte packing: pairs share mask bits
    const std::int64_t scope_values = 4 * pair;

    q.uncompressed_bits = scope_values * value_bits;
    q.compressed_bits = keep * value_bits * pair + q.mask_bits;
    q.ratio = Rational::reduced(q.compressed_bits, q.uncompressed_bits);
    q.mask_overhead_bits_per_weight =
        static_cast<double>(q.mask_bits) / static_cast<double>(scope_values);
    return q;
}

namespace {

std::vector<std::vector<std::int64_t>> sorted_family(const SparsitySpec& spec, bool scopes) {
    std::vector<std::vector<std::int64_t>> fam;
    const std::int64_t n = scopes ? num_scopes(spec) : num_blocks(spec);
    fam.reserve(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        fam.push_back(scopes ? scope_elements(spec, i).indices()
                             : block_elements(spec, i).indices());
    }
    std::sort(fam.begin(), fam.end());
    return fam;
}

}  // namespace

TensorCoreCheck check_tensorcore_24(const SparsitySpec& spec, std::int64_t M, std::int64_t K) {
    TensorCoreCheck out;
    if (K % 4 != 0) {
        out.diagnostics.push_back("K=" + std::to_string(K) + " is not a multiple of 4");
        return out;
    }
    auto violations = validate_spec(spec);
    if (!violations.empty()) {
        out.diagnostics.push_back("spec invalid: " + violations.front().message);
        return out;
    }

    const SparsitySpec canonical =
        make_pattern_spec("two_four", DimMap{{"M", M}, {"K", K}});

    if (spec.keep != canonical.keep) {
        out.diagnostics.push_back("keep " + std::to_string(spec.keep) + " != 2");
    }

    const auto spec_scopes = sorted_family(spec, true);
    const auto hw_scopes = sorted_family(canonical, true);
    if (spec_scopes != hw_scopes) {
        // Name the mismatch the way a reader would see it.
        std::int64_t span = spec_scopes.empty() ? 0
                                                : static_cast<std::int64_t>(
                                                      spec_scopes.front().size());
        if (span != 4) {
            out.diagnostics.push_back("scope spans " + std::to_string(span) + " columns");
        } else {
            out.diagnostics.push_back("scope element sets differ from 4-consecutive-column "
                                      "hardware scopes");
        }
    }

    const auto spec_blocks = sorted_family(spec, false);
    const auto hw_blocks = sorted_family(canonical, false);
    if (spec_blocks != hw_blocks) {
        bool noncontiguous_pair = false;
        for (const auto& b : spec_blocks) {
            if (b.size() == 2 && b[1] != b[0] + 1) noncontiguous_pair = true;
        }
        out.diagnostics.push_back(noncontiguous_pair ? "non-contiguous pairs"
                                                     : "blocks are not hardware scalar blocks");
    }

    out.ok = out.diagnostics.empty();
    return out;
}

}  // namespace s3kit
