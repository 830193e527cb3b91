#pragma once

#include "s3kit/domain.hpp"

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace s3kit {

/// Calibration inputs X (N samples of K features), all finite.
struct CalibrationSet {
    Eigen::MatrixXd samples;
};

/// H = X^T X / N. Throws NonFiniteError on NaN/inf inputs.
Eigen::MatrixXd empirical_hessian(const CalibrationSet& calib);

/// Spectral condition estimate max|eig| / min|eig| of a symmetric matrix
/// (infinity when the smallest magnitude vanishes).
double sym_condition_estimate(const Eigen::MatrixXd& A);

/// Damped Hessian together with its maintained inverse. The inverse is kept
/// consistent under Schur pruning: rows/columns of eliminated coordinates are
/// exactly zero and the surviving sub-matrix of H_inv equals the inverse of
/// the surviving sub-matrix of H + lambda*I.
struct HessianState {
    Eigen::MatrixXd H;      // undamped symmetric input
    Eigen::MatrixXd H_inv;  // inverse of (H + lambda*I) over surviving coords
    double lambda = 0.0;    // absolute damping, lambda_rel * mean(diag(H))
    std::vector<std::uint8_t> pruned;

    std::int64_t dim() const { return H.rows(); }
    bool is_pruned(std::int64_t i) const { return pruned[static_cast<std::size_t>(i)] != 0; }
    Eigen::MatrixXd damped() const;
};

/// Inverts H + lambda*I with lambda = lambda_rel * mean(diag(H)).
/// Throws SingularAfterDampingError when the condition estimate exceeds 1e14.
HessianState damp_and_invert(const Eigen::MatrixXd& H, double lambda_rel);

/// [H^-1]_jj, the sub-matrix of H_inv at rows/cols = elements.
/// Throws AlreadyPrunedError if any element was eliminated.
Eigen::MatrixXd block_inv_submatrix(const HessianState& state, const ElementSet& elements);

/// Inverse-Hessian update after pruning the element set:
///   H'^-1 = H^-1 - H^-1[:,I] ([H^-1]_II)^-1 H^-1[I,:]
/// with the eliminated rows/cols zeroed exactly and symmetry re-enforced.
/// Throws SingularBlockError when [H^-1]_II has condition estimate > 1e12.
HessianState schur_prune(const HessianState& state, const ElementSet& elements);

}  // namespace s3kit
