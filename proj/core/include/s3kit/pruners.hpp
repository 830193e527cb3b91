#pragma once

#include "s3kit/hessian.hpp"
#include "s3kit/spec.hpp"

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace s3kit {

enum class Method { S_OBD, S_OBS, WANDA, SPARSEGPT_LIKE };
enum class OrderMode { STATIC, GREEDY_RECOMPUTE };

std::string to_string(Method m);
std::string to_string(OrderMode m);

struct PruneConfig {
    Method method = Method::S_OBS;
    OrderMode order_mode = OrderMode::GREEDY_RECOMPUTE;
    double lambda_rel = 0.01;
    std::optional<std::int64_t> keep;  // overrides the spec's keep when set
    int threads = 1;                   // 0 = hardware concurrency
};

struct ScopeReport {
    std::int64_t scope = 0;
    std::vector<std::int64_t> retained;  // block ordinals, ascending
    double pruned_saliency_sum = 0.0;
};

struct PruneReport {
    Method method = Method::S_OBS;
    OrderMode order_mode = OrderMode::GREEDY_RECOMPUTE;
    std::vector<double> per_block_saliency;  // scored against the initial state
    std::vector<ScopeReport> per_scope;      // ascending scope ordinal
    double predicted_loss_increase = 0.0;    // sum of pruned saliencies at prune time
    double relative_output_error = 0.0;
    double wall_time_s = 0.0;
    std::vector<std::int64_t> fallback_rows;  // rows pruned by magnitude fallback

    std::string to_json(int indent = 2) const;
};

struct PruneResult {
    Eigen::MatrixXd weights;
    MaskGrid mask;
    PruneReport report;
};

/// S_j = 1/2 sum_{e in Elements(j)} H_ee w_e^2 under a diagonal Hessian
/// approximation; diagH holds one entry per column of W.
std::vector<double> saliency_obd(const SparsitySpec& spec, const Eigen::MatrixXd& W,
                                 const Eigen::VectorXd& diagH);

/// S_j = 1/2 w_j^T ([H^-1]_jj)^-1 w_j for one block of one row; `cols` are
/// in-row column indices.
double block_saliency_obs(const Eigen::VectorXd& w_row, const HessianState& state,
                          const ElementSet& cols);

/// Per-block OBS saliencies of a weight matrix against a shared (initial)
/// Hessian state; multi-row blocks sum their per-row quadratic forms.
std::vector<double> saliency_obs(const SparsitySpec& spec, const Eigen::MatrixXd& W,
                                 const HessianState& state);

/// Wanda scores: S_ij = |W_ij| * ||X_:,j||_2 summed over block elements.
std::vector<double> saliency_wanda(const SparsitySpec& spec, const Eigen::MatrixXd& W,
                                   const Eigen::MatrixXd& X);

/// Optimal update zeroing `cols` of a row:
///   dw = -H^-1[:,I] ([H^-1]_II)^-1 w_I,
/// with exact zeros enforced on the pruned coordinates.
Eigen::VectorXd obs_update(const Eigen::VectorXd& w_row, const HessianState& state,
                           const ElementSet& cols);

/// Structured OBS pruning over scopes (Algorithm-1 style). Every output row
/// carries an independent copy of the initial inverse Hessian; rows coupled
/// through a scope form one sequential work unit. STATIC selects and orders
/// victims by the initial saliencies; GREEDY_RECOMPUTE re-scores surviving
/// blocks after every Schur update and prunes the current minimum.
/// Rows that hit a singular block fall back to magnitude pruning and are
/// listed in the report. When X is provided the report's relative output
/// error uses ||X (W_hat - W)^T||_F / ||X W^T||_F, otherwise the equivalent
/// Hessian-trace form.
PruneResult prune_scope_obs(const SparsitySpec& spec, const Eigen::MatrixXd& W,
                            const HessianState& initial, const PruneConfig& config,
                            const Eigen::MatrixXd* X = nullptr);

/// Mask-only pruning from externally computed block scores (S-OBD, Wanda):
/// hard-threshold per scope, zero the pruned blocks, no compensation.
PruneResult prune_by_scores(const SparsitySpec& spec, const Eigen::MatrixXd& W,
                            const std::vector<double>& scores, const PruneConfig& config,
                            const Eigen::MatrixXd* X = nullptr);

/// SparseGPT-style baseline: one shared inverse-Hessian trajectory for all
/// rows, sweeping columns left to right. At each scope boundary the keep
/// blocks per row are chosen by the w^2/d^2 criterion (d = current diagonal
/// of H^-1); pruned entries are compensated onto the columns to their right.
/// Requires scopes that are contiguous per-row column ranges, aligned across
/// rows (SpecInvalidError otherwise).
PruneResult sparsegpt_like(const SparsitySpec& spec, const Eigen::MatrixXd& W,
                           const HessianState& initial, const PruneConfig& config,
                           const Eigen::MatrixXd* X = nullptr);

/// Elementwise sum of member scores aligned on the common permuted grid.
/// Member scores are indexed by that member's canonical ordinals.
std::vector<double> aggregate_coupled_saliency(
    const CouplingSpec& coupling, const std::vector<std::vector<double>>& per_member_scores);

/// ||X (W_hat - W)^T||_F / ||X W^T||_F. Throws ZeroReferenceError when the
/// reference norm vanishes.
double relative_output_error(const Eigen::MatrixXd& X, const Eigen::MatrixXd& W,
                             const Eigen::MatrixXd& W_hat);

}  // namespace s3kit
