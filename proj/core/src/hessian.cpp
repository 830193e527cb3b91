#include "s3kit/hessian.hpp"

#include "s3kit/errors.hpp"

#include <cmath>
#include <limits>

namespace s3kit {

namespace {

constexpr double kInvertConditionLimit = 1e14;
constexpr double kBlockConditionLimit = 1e12;

void check_symmetric(const Eigen::MatrixXd& H) {
    if (H.rows() != H.cols()) throw SizeMismatchError("Hessian must be square");
    const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
    const double asym = (H - H.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10 * scale) {
        throw NonFiniteError("Hessian asymmetry " + std::to_string(asym / scale) +
                             " exceeds 1e-10 relative");
    }
}

}  // namespace

double sym_condition_estimate(const Eigen::MatrixXd& A) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    const double hi = ev.cwiseAbs().maxCoeff();
    const double lo = ev.cwiseAbs().minCoeff();
    if (hi == 0.0 || lo == 0.0) return std::numeric_limits<double>::infinity();
    return hi / lo;
}

Eigen::MatrixXd empirical_hessian(const CalibrationSet& calib) {
    const auto& X = calib.samples;
    if (X.rows() < 1 || X.cols() < 1) throw SizeMismatchError("calibration set is empty");
    if (!X.allFinite()) throw NonFiniteError("calibration samples contain NaN/inf");
    Eigen::MatrixXd H = (X.transpose() * X) / static_cast<double>(X.rows());
    return (H + H.transpose()) / 2.0;
}

Eigen::MatrixXd HessianState::damped() const {
    Eigen::MatrixXd D = H;
    D.diagonal().array() += lambda;
    return D;
}

HessianState damp_and_invert(const Eigen::MatrixXd& H, double lambda_rel) {
    check_symmetric(H);
    if (!H.allFinite()) throw NonFiniteError("Hessian contains NaN/inf");
    if (lambda_rel < 0.0) throw OutOfBoundsError("lambda_rel must be non-negative");

    HessianState state;
    state.H = (H + H.transpose()) / 2.0;
    state.lambda = lambda_rel * state.H.diagonal().mean();
    state.pruned.assign(static_cast<std::size_t>(H.rows()), 0);

    Eigen::MatrixXd damped = state.damped();
    if (sym_condition_estimate(damped) > kInvertConditionLimit) {
        throw SingularAfterDampingError("damped Hessian condition estimate exceeds 1e14");
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
    if (ldlt.info() != Eigen::Success) {
        throw SingularAfterDampingError("LDLT factorization of damped Hessian failed");
    }
    Eigen::MatrixXd inv =
        ldlt.solve(Eigen::MatrixXd::Identity(H.rows(), H.cols()));
    state.H_inv = (inv + inv.transpose()) / 2.0;
    if (!state.H_inv.allFinite()) {
        throw SingularAfterDampingError("damped Hessian inverse is not finite");
    }
    return state;
}

Eigen::MatrixXd block_inv_submatrix(const HessianState& state, const ElementSet& elements) {
    const std::int64_t n = state.dim();
    for (std::int64_t e : elements.indices()) {
        if (e >= n) throw OutOfBoundsError("element index exceeds Hessian dimension");
        if (state.is_pruned(e)) {
            throw AlreadyPrunedError("element " + std::to_string(e) + " already pruned");
        }
    }
    const auto m = static_cast<Eigen::Index>(elements.size());
    Eigen::MatrixXd sub(m, m);
    for (Eigen::Index r = 0; r < m; ++r) {
        for (Eigen::Index c = 0; c < m; ++c) {
            sub(r, c) = state.H_inv(elements.indices()[static_cast<std::size_t>(r)],
                                    elements.indices()[static_cast<std::size_t>(c)]);
        }
    }
    return sub;
}

HessianState schur_prune(const HessianState& state, const ElementSet& elements) {
    if (elements.empty()) return state;
    Eigen::MatrixXd block = block_inv_submatrix(state, elements);
    if (sym_condition_estimate(block) > kBlockConditionLimit) {
        throw SingularBlockError("inverse-Hessian block condition estimate exceeds 1e12");
    }

    const std::int64_t n = state.dim();
    const auto m = static_cast<Eigen::Index>(elements.size());
    Eigen::MatrixXd cols(n, m);
    for (Eigen::Index c = 0; c < m; ++c) {
        cols.col(c) = state.H_inv.col(elements.indices()[static_cast<std::size_t>(c)]);
    }

    Eigen::LDLT<Eigen::MatrixXd> ldlt(block);
    if (ldlt.info() != Eigen::Success) {
        throw SingularBlockError("inverse-Hessian block factorization failed");
    }

    HessianState next = state;
    next.H_inv -= cols * ldlt.solve(cols.transpose());
    next.H_inv = (next.H_inv + next.H_inv.transpose()).eval() / 2.0;
    for (std::int64_t e : elements.indices()) {
        next.H_inv.row(e).setZero();
        next.H_inv.col(e).setZero();
        next.pruned[static_cast<std::size_t>(e)] = 1;
    }
    if (!next.H_inv.allFinite()) {
        throw SingularBlockError("Schur update produced non-finite inverse");
    }
    return next;
}

}  // namespace s3kit
