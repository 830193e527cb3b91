#include "s3kit/oracle.hpp"

#include "s3kit/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace s3kit {
namespace oracle {

CompensatedLoss exact_compensated_loss(const Eigen::VectorXd& w_row,
                                       const Eigen::MatrixXd& H_damped,
                                       const ElementSet& zero_set) {
    const Eigen::Index n = w_row.size();
    if (H_damped.rows() != n || H_damped.cols() != n) {
        throw SizeMismatchError("Hessian dimension does not match row length");
    }
    for (std::int64_t e : zero_set.indices()) {
        if (e >= n) throw OutOfBoundsError("zero-set index exceeds row length");
    }

    if (zero_set.empty()) return {0.0, w_row};

    std::vector<Eigen::Index> free;
    free.reserve(static_cast<std::size_t>(n) - zero_set.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!zero_set.contains(i)) free.push_back(i);
    }

    Eigen::VectorXd dw = Eigen::VectorXd::Zero(n);
    for (std::int64_t e : zero_set.indices()) dw(e) = -w_row(e);

    if (!free.empty()) {
        // Stationarity over free coords: H_RR dw_R = -H_RZ dw_Z.
        const auto nf = static_cast<Eigen::Index>(free.size());
        Eigen::MatrixXd Hrr(nf, nf);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nf);
        for (Eigen::Index r = 0; r < nf; ++r) {
            for (Eigen::Index c = 0; c < nf; ++c) Hrr(r, c) = H_damped(free[r], free[c]);
            for (std::int64_t z : zero_set.indices()) rhs(r) -= H_damped(free[r], z) * dw(z);
        }
        Eigen::LDLT<Eigen::MatrixXd> ldlt(Hrr);
        if (ldlt.info() != Eigen::Success) {
            throw SingularError("free-coordinate system is singular");
        }
        Eigen::VectorXd dwr = ldlt.solve(rhs);
        if (!dwr.allFinite()) throw SingularError("free-coordinate solve is not finite");
        for (Eigen::Index r = 0; r < nf; ++r) dw(free[r]) = dwr(r);
    }

    CompensatedLoss out;
    out.loss = 0.5 * dw.dot(H_damped * dw);
    out.row = w_row + dw;
    for (std::int64_t e : zero_set.indices()) out.row(e) = 0.0;
    return out;
}

namespace {

void enumerate_keep_subsets(std::int64_t count, std::int64_t keep,
                            std::vector<std::vector<std::int64_t>>& out) {
    std::vector<std::int64_t> pick(static_cast<std::size_t>(keep));
    // Lexicographic k-combinations of [0, count).
    for (std::int64_t i = 0; i < keep; ++i) pick[static_cast<std::size_t>(i)] = i;
    while (true) {
        out.push_back(pick);
        std::int64_t i = keep - 1;
        while (i >= 0 && pick[static_cast<std::size_t>(i)] == count - keep + i) --i;
        if (i < 0) break;
        ++pick[static_cast<std::size_t>(i)];
        for (std::int64_t j = i + 1; j < keep; ++j) {
            pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
        }
    }
    if (keep == 0) {
        out.clear();
        out.push_back({});
    }
}

double binomial(std::int64_t n, std::int64_t k) {
    double r = 1.0;
    for (std::int64_t i = 0; i < k; ++i) r = r * static_cast<double>(n - i) / (i + 1.0);
    return r;
}

}  // namespace

OracleResult brute_force_best_mask(const SparsitySpec& spec, const Eigen::VectorXd& w_row,
                                   const Eigen::MatrixXd& H_damped) {
    require_valid(spec);
    const std::int64_t ns = num_scopes(spec);
    const std::int64_t per_scope = blocks_per_scope(spec);

    const double total = std::pow(binomial(per_scope, spec.keep), static_cast<double>(ns));
    if (total > 1e6) {
        throw TooLargeError("mask enumeration would visit " + std::to_string(total) + " masks");
    }

    SpecTables tables = build_tables(spec);

    std::vector<std::vector<std::int64_t>> keep_subsets;
    enumerate_keep_subsets(per_scope, spec.keep, keep_subsets);

    OracleResult result;
    result.best_loss = std::numeric_limits<double>::infinity();

    std::vector<std::size_t> choice(static_cast<std::size_t>(ns), 0);
    while (true) {
        std::vector<std::int64_t> retained;
        for (std::int64_t s = 0; s < ns; ++s) {
            const auto& blocks = tables.blocks[static_cast<std::size_t>(s)];
            for (std::int64_t pos : keep_subsets[choice[static_cast<std::size_t>(s)]]) {
                retained.push_back(blocks[static_cast<std::size_t>(pos)]);
            }
        }
        std::sort(retained.begin(), retained.end());

        std::vector<std::int64_t> zeroed;
        for (std::int64_t b = 0; b < num_blocks(spec); ++b) {
            if (!std::binary_search(retained.begin(), retained.end(), b)) {
                const auto& e = tables.elements[static_cast<std::size_t>(b)];
                zeroed.insert(zeroed.end(), e.begin(), e.end());
            }
        }
        const double loss =
            exact_compensated_loss(w_row, H_damped, ElementSet::from_indices(std::move(zeroed)))
                .loss;
        result.all_losses.emplace(retained, loss);
        if (loss < result.best_loss) {
            result.best_loss = loss;
            result.best_mask = retained;
        }

        std::size_t s = 0;
        while (s < choice.size()) {
            if (++choice[s] < keep_subsets.size()) break;
            choice[s] = 0;
            ++s;
        }
        if (s == choice.size()) break;
    }
    return result;
}

}  // namespace oracle
}  // namespace s3kit
