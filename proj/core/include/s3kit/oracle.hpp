#pragma once

#include "s3kit/spec.hpp"

#include <Eigen/Dense>
#include <map>
#include <vector>

namespace s3kit {
namespace oracle {

/// Exact minimizer of the constrained quadratic
///   min_dw 1/2 dw^T H dw   s.t.  (w + dw)[zero_set] = 0
/// solved by eliminating the constrained coordinates and solving the reduced
/// linear system directly (dense solve; deliberately independent from the
/// Schur machinery it validates).
struct CompensatedLoss {
    double loss = 0.0;
    Eigen::VectorXd row;
};
CompensatedLoss exact_compensated_loss(const Eigen::VectorXd& w_row,
                                       const Eigen::MatrixXd& H_damped,
                                       const ElementSet& zero_set);

struct OracleResult {
    std::vector<std::int64_t> best_mask;  // retained block ordinals, ascending
    double best_loss = 0.0;
    std::map<std::vector<std::int64_t>, double> all_losses;
};

/// Enumerates every per-scope keep-subset (product over scopes of
/// C(|S|_B, keep) masks) and returns the global optimum under
/// exact_compensated_loss. Throws TooLargeError beyond 1e6 masks.
/// Elements of the spec are interpreted as coordinates of the single row.
OracleResult brute_force_best_mask(const SparsitySpec& spec, const Eigen::VectorXd& w_row,
                                   const Eigen::MatrixXd& H_damped);

}  // namespace oracle
}  // namespace s3kit
