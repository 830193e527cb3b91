#include "s3kit/pruners.hpp"

#include "s3kit/errors.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <cmath>
#include <json.hpp>
#include <map>
#include <thread>

namespace s3kit {

namespace {

std::int64_t pack_last_fastest(const std::vector<std::int64_t>& shape,
                               const std::vector<std::int64_t>& coord) {
    std::int64_t o = 0;
    for (std::size_t k = 0; k < shape.size(); ++k) o = o * shape[k] + coord[k];
    return o;
}

std::vector<std::int64_t> unpack_last_fastest(const std::vector<std::int64_t>& shape,
                                              std::int64_t ordinal) {
    std::vector<std::int64_t> c(shape.size(), 0);
    for (std::size_t k = shape.size(); k-- > 0;) {
        c[k] = ordinal % shape[k];
        ordinal /= shape[k];
    }
    return c;
}

/// One block restricted to one output row.
struct RowSlice {
    std::int64_t row;
    std::vector<std::int64_t> cols;
};

std::vector<RowSlice> block_row_slices(const std::vector<std::int64_t>& elements,
                                       std::int64_t K) {
    std::vector<RowSlice> slices;
    for (std::int64_t e : elements) {
        const std::int64_t row = e / K;
        if (slices.empty() || slices.back().row != row) slices.push_back({row, {}});
        slices.back().cols.push_back(e % K);
    }
    return slices;
}

SparsitySpec apply_keep(const SparsitySpec& spec, const PruneConfig& config) {
    SparsitySpec s = spec;
    if (config.keep) s.keep = *config.keep;
    return s;
}

void check_spec_matches(const SparsitySpec& spec, std::int64_t M, std::int64_t K) {
    require_valid(spec);
    if (spec.domain) {
        if (!spec.phys || spec.phys->shape() != std::vector<std::int64_t>{M, K}) {
            throw SpecInvalidError("domain spec is not bound to the weight shape");
        }
    } else if (spec.view.size() != M * K) {
        throw SpecInvalidError("view size " + std::to_string(spec.view.size()) +
                               " does not match weight tensor size " + std::to_string(M * K));
    }
}

double h_based_relative_error(const Eigen::MatrixXd& H, const Eigen::MatrixXd& W,
                              const Eigen::MatrixXd& W_hat) {
    const Eigen::MatrixXd delta = W_hat - W;
    const double num = (delta * H * delta.transpose()).trace();
    const double den = (W * H * W.transpose()).trace();
    if (den <= 0.0) return 0.0;
    return std::sqrt(std::max(0.0, num) / den);
}

void fill_output_error(PruneReport& report, const Eigen::MatrixXd* X,
                       const Eigen::MatrixXd& H, const Eigen::MatrixXd& W,
                       const Eigen::MatrixXd& W_hat) {
    if (X != nullptr) {
        report.relative_output_error = relative_output_error(*X, W, W_hat);
    } else {
        report.relative_output_error = h_based_relative_error(H, W, W_hat);
    }
}

/// Victim choice shared by selection paths: lowest score wins, ties go to the
/// lower block ordinal.
bool better_victim(double score_a, std::int64_t a, double score_b, std::int64_t b) {
    if (score_a != score_b) return score_a < score_b;
    return a < b;
}

struct ScopeGeometry {
    std::vector<std::vector<std::int64_t>> elements;  // per block
    std::vector<std::vector<std::int64_t>> blocks;    // per scope
    std::vector<std::vector<RowSlice>> slices;        // per block
    std::vector<std::vector<std::int64_t>> groups;    // scope ordinals per row group
    std::vector<std::vector<std::int64_t>> group_rows;
};

ScopeGeometry build_geometry(const SparsitySpec& spec, std::int64_t M, std::int64_t K) {
    ScopeGeometry geo;
    SpecTables tables = build_tables(spec);
    geo.elements = std::move(tables.elements);
    geo.blocks = std::move(tables.blocks);

    geo.slices.reserve(geo.elements.size());
    for (const auto& e : geo.elements) geo.slices.push_back(block_row_slices(e, K));

    // Rows linked through a common scope form one sequential work unit.
    std::vector<std::int64_t> parent(static_cast<std::size_t>(M));
    for (std::int64_t r = 0; r < M; ++r) parent[static_cast<std::size_t>(r)] = r;
    std::function<std::int64_t(std::int64_t)> find = [&](std::int64_t x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    };

    const std::int64_t ns = static_cast<std::int64_t>(geo.blocks.size());
    for (std::int64_t s = 0; s < ns; ++s) {
        std::int64_t first_row = -1;
        for (std::int64_t b : geo.blocks[static_cast<std::size_t>(s)]) {
            for (const auto& slice : geo.slices[static_cast<std::size_t>(b)]) {
                if (first_row < 0) {
                    first_row = slice.row;
                } else {
                    parent[static_cast<std::size_t>(find(slice.row))] = find(first_row);
                }
            }
        }
    }

    std::map<std::int64_t, std::size_t> root_to_group;
    for (std::int64_t s = 0; s < ns; ++s) {
        std::int64_t row = -1;
        for (std::int64_t b : geo.blocks[static_cast<std::size_t>(s)]) {
            if (!geo.slices[static_cast<std::size_t>(b)].empty()) {
                row = geo.slices[static_cast<std::size_t>(b)].front().row;
                break;
            }
        }
        if (row < 0) continue;
        const std::int64_t root = find(row);
        auto [it, inserted] = root_to_group.emplace(root, geo.groups.size());
        if (inserted) {
            geo.groups.emplace_back();
            geo.group_rows.emplace_back();
        }
        geo.groups[it->second].push_back(s);
    }
    for (std::int64_t r = 0; r < M; ++r) {
        auto it = root_to_group.find(find(r));
        if (it != root_to_group.end()) geo.group_rows[it->second].push_back(r);
    }
    return geo;
}

}  // namespace

std::string to_string(Method m) {
    switch (m) {
        case Method::S_OBD: return "s-obd";
        case Method::S_OBS: return "s-obs";
        case Method::WANDA: return "wanda";
        case Method::SPARSEGPT_LIKE: return "sparsegpt";
    }
    return "?";
}

std::string to_string(OrderMode m) {
    return m == OrderMode::STATIC ? "static" : "greedy";
}

std::string PruneReport::to_json(int indent) const {
    nlohmann::json j;
    j["method"] = s3kit::to_string(method);
    j["order_mode"] = s3kit::to_string(order_mode);
    nlohmann::json scopes = nlohmann::json::array();
    for (const auto& s : per_scope) {
        scopes.push_back(nlohmann::json{{"scope", s.scope},
                                        {"retained", s.retained},
                                        {"pruned_saliency_sum", s.pruned_saliency_sum}});
    }
    j["per_scope"] = scopes;
    j["relative_output_error"] = relative_output_error;
    j["wall_time_s"] = wall_time_s;
    j["fallback_rows"] = fallback_rows;
    return j.dump(indent);
}

std::vector<double> saliency_obd(const SparsitySpec& spec, const Eigen::MatrixXd& W,
                                 const Eigen::VectorXd& diagH) {
    check_spec_matches(spec, W.rows(), W.cols());
    if (diagH.size() != W.cols()) throw SizeMismatchError("diagH length != column count");
    if ((diagH.array() < 0.0).any()) throw OutOfBoundsError("diagH must be non-negative");

    const std::int64_t K = W.cols();
    const std::int64_t nb = num_blocks(spec);
    std::vector<double> out(static_cast<std::size_t>(nb), 0.0);
    for (std::int64_t b = 0; b < nb; ++b) {
        double s = 0.0;
        for (std::int64_t e : block_elements(spec, b).indices()) {
            const double w = W(e / K, e % K);
            s += diagH(e % K) * w * w;
        }
        out[static_cast<std::size_t>(b)] = 0.5 * s;
    }
    return out;
}

double block_saliency_obs(const Eigen::VectorXd& w_row, const HessianState& state,
                          const ElementSet& cols) {
    Eigen::MatrixXd B = block_inv_submatrix(state, cols);
    if (sym_condition_estimate(B) > 1e12) {
        throw SingularBlockError("inverse-Hessian block condition estimate exceeds 1e12");
    }
    const auto m = static_cast<Eigen::Index>(cols.size());
    Eigen::VectorXd wj(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        wj(i) = w_row(cols.indices()[static_cast<std::size_t>(i)]);
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(B);
    if (ldlt.info() != Eigen::Success) throw SingularBlockError("block factorization failed");
    return 0.5 * wj.dot(ldlt.solve(wj));
}

std::vector<double> saliency_obs(const SparsitySpec& spec, const Eigen::MatrixXd& W,
                                 const HessianState& state) {
    check_spec_matches(spec, W.rows(), W.cols());
    const std::int64_t K = W.cols();
    const std::int64_t nb = num_blocks(spec);
    std::vector<double> out(static_cast<std::size_t>(nb), 0.0);
    for (std::int64_t b = 0; b < nb; ++b) {
        double s = 0.0;
        for (const auto& slice : block_row_slices(block_elements(spec, b).indices(), K)) {
            s += block_saliency_obs(W.row(slice.row), state, ElementSet::from_sorted(slice.cols));
        }
        out[static_cast<std::size_t>(b)] = s;
    }
    return out;
}

std::vector<double> saliency_wanda(const SparsitySpec& spec, const Eigen::MatrixXd& W,
                                   const Eigen::MatrixXd& X) {
    check_spec_matches(spec, W.rows(), W.cols());
    if (X.cols() != W.cols()) throw SizeMismatchError("calibration features != weight columns");

    const std::int64_t K = W.cols();
    Eigen::VectorXd col_norms(K);
    for (std::int64_t j = 0; j < K; ++j) col_norms(j) = X.col(j).norm();

    const std::int64_t nb = num_blocks(spec);
    std::vector<double> out(static_cast<std::size_t>(nb), 0.0);
    for (std::int64_t b = 0; b < nb; ++b) {
        double s = 0.0;
        for (std::int64_t e : block_elements(spec, b).indices()) {
            s += std::abs(W(e / K, e % K)) * col_norms(e % K);
        }
        out[static_cast<std::size_t>(b)] = s;
    }
    return out;
}

Eigen::VectorXd obs_update(const Eigen::VectorXd& w_row, const HessianState& state,
                           const ElementSet& cols) {
    Eigen::MatrixXd B = block_inv_submatrix(state, cols);
    if (sym_condition_estimate(B) > 1e12) {
        throw SingularBlockError("inverse-Hessian block condition estimate exceeds 1e12");
    }
    const auto m = static_cast<Eigen::Index>(cols.size());
    Eigen::VectorXd wj(m);
    Eigen::MatrixXd inv_cols(w_row.size(), m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const std::int64_t c = cols.indices()[static_cast<std::size_t>(i)];
        wj(i) = w_row(c);
        inv_cols.col(i) = state.H_inv.col(c);
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(B);
    if (ldlt.info() != Eigen::Success) throw SingularBlockError("block factorization failed");

    Eigen::VectorXd updated = w_row - inv_cols * ldlt.solve(wj);
    for (std::int64_t c : cols.indices()) updated(c) = 0.0;
    return updated;
}

namespace {

struct GroupOutcome {
    bool fallback = false;
};

/// Sequentially prunes all scopes of one row group; writes rows of W, the
/// mask flags, and the scope reports it owns.
GroupOutcome process_group(const SparsitySpec& spec, const ScopeGeometry& geo,
                           const std::vector<std::int64_t>& scopes, const HessianState& initial,
                           OrderMode order, Eigen::MatrixXd& W,
                           std::vector<std::uint8_t>& retained,
                           std::vector<ScopeReport>& scope_reports) {
    std::map<std::int64_t, HessianState> row_state;
    auto state_of = [&](std::int64_t row) -> HessianState& {
        auto it = row_state.find(row);
        if (it == row_state.end()) it = row_state.emplace(row, initial).first;
        return it->second;
    };

    auto score_block = [&](std::int64_t b) {
        double s = 0.0;
        for (const auto& slice : geo.slices[static_cast<std::size_t>(b)]) {
            s += block_saliency_obs(W.row(slice.row), state_of(slice.row),
                                    ElementSet::from_sorted(slice.cols));
        }
        return s;
    };
    auto prune_block = [&](std::int64_t b) {
        for (const auto& slice : geo.slices[static_cast<std::size_t>(b)]) {
            HessianState& st = state_of(slice.row);
            ElementSet cols = ElementSet::from_sorted(slice.cols);
            W.row(slice.row) = obs_update(W.row(slice.row), st, cols);
            st = schur_prune(st, cols);
        }
        retained[static_cast<std::size_t>(b)] = 0;
    };

    for (std::int64_t s : scopes) {
        const auto& blocks = geo.blocks[static_cast<std::size_t>(s)];
        const std::int64_t victims =
            static_cast<std::int64_t>(blocks.size()) - spec.keep;
        ScopeReport& rep = scope_reports[static_cast<std::size_t>(s)];
        rep.scope = s;

        if (order == OrderMode::STATIC) {
            std::vector<std::pair<double, std::int64_t>> scored;
            scored.reserve(blocks.size());
            for (std::int64_t b : blocks) scored.emplace_back(score_block(b), b);
            std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
                return better_victim(a.first, a.second, b.first, b.second);
            });
            for (std::int64_t v = 0; v < victims; ++v) {
                const std::int64_t b = scored[static_cast<std::size_t>(v)].second;
                rep.pruned_saliency_sum += score_block(b);  // saliency at prune time
                prune_block(b);
            }
        } else {
            std::vector<std::int64_t> alive(blocks.begin(), blocks.end());
            for (std::int64_t v = 0; v < victims; ++v) {
                double best_score = 0.0;
                std::size_t best_pos = alive.size();
                for (std::size_t i = 0; i < alive.size(); ++i) {
                    const double sc = score_block(alive[i]);
                    if (best_pos == alive.size() ||
                        better_victim(sc, alive[i], best_score,
                                      alive[static_cast<std::size_t>(best_pos)])) {
                        best_score = sc;
                        best_pos = i;
                    }
                }
                rep.pruned_saliency_sum += best_score;
                prune_block(alive[best_pos]);
                alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(best_pos));
            }
        }

        for (std::int64_t b : blocks) {
            if (retained[static_cast<std::size_t>(b)]) rep.retained.push_back(b);
        }
    }
    return {};
}

/// Magnitude-only fallback for a whole row group: original weights restored,
/// blocks ranked by sum of squares, no compensation.
void process_group_fallback(const SparsitySpec& spec, const ScopeGeometry& geo,
                            const std::vector<std::int64_t>& scopes,
                            const std::vector<std::int64_t>& rows,
                            const Eigen::MatrixXd& W_original, Eigen::MatrixXd& W,
                            std::vector<std::uint8_t>& retained,
                            std::vector<ScopeReport>& scope_reports) {
    for (std::int64_t r : rows) W.row(r) = W_original.row(r);

    const std::int64_t K = W.cols();
    for (std::int64_t s : scopes) {
        const auto& blocks = geo.blocks[static_cast<std::size_t>(s)];
        ScopeReport& rep = scope_reports[static_cast<std::size_t>(s)];
        rep = ScopeReport{};
        rep.scope = s;

        std::vector<std::pair<double, std::int64_t>> scored;
        for (std::int64_t b : blocks) {
            double mag = 0.0;
            for (std::int64_t e : geo.elements[static_cast<std::size_t>(b)]) {
                const double w = W(e / K, e % K);
                mag += w * w;
            }
            scored.emplace_back(mag, b);
            retained[static_cast<std::size_t>(b)] = 1;
        }
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            return better_victim(a.first, a.second, b.first, b.second);
        });
        const std::int64_t victims = static_cast<std::int64_t>(blocks.size()) - spec.keep;
        for (std::int64_t v = 0; v < victims; ++v) {
            const std::int64_t b = scored[static_cast<std::size_t>(v)].second;
            rep.pruned_saliency_sum += scored[static_cast<std::size_t>(v)].first;
            for (std::int64_t e : geo.elements[static_cast<std::size_t>(b)]) {
                W(e / K, e % K) = 0.0;
            }
            retained[static_cast<std::size_t>(b)] = 0;
        }
        for (std::int64_t b : blocks) {
            if (retained[static_cast<std::size_t>(b)]) rep.retained.push_back(b);
        }
    }
}

}  // namespace

PruneResult prune_scope_obs(const SparsitySpec& spec_in, const Eigen::MatrixXd& W,
                            const HessianState& initial, const PruneConfig& config,
                            const Eigen::MatrixXd* X) {
    const auto t0 = std::chrono::steady_clock::now();
    SparsitySpec spec = apply_keep(spec_in, config);
    check_spec_matches(spec, W.rows(), W.cols());
    if (initial.dim() != W.cols()) {
        throw SizeMismatchError("Hessian dimension does not match weight columns");
    }

    const std::int64_t M = W.rows();
    const std::int64_t K = W.cols();
    ScopeGeometry geo = build_geometry(spec, M, K);

    PruneResult result;
    result.weights = W;
    result.mask.spec = spec;
    result.mask.retained.assign(static_cast<std::size_t>(num_blocks(spec)), 1);
    result.report.method = Method::S_OBS;
    result.report.order_mode = config.order_mode;
    result.report.per_block_saliency = saliency_obs(spec, W, initial);
    result.report.per_scope.assign(static_cast<std::size_t>(num_scopes(spec)), ScopeReport{});

    std::vector<std::uint8_t> fallback_flag(geo.groups.size(), 0);

    auto run_group = [&](std::size_t g) {
        try {
            process_group(spec, geo, geo.groups[g], initial, config.order_mode, result.weights,
                          result.mask.retained, result.report.per_scope);
        } catch (const SingularBlockError&) {
            fallback_flag[g] = 1;
            process_group_fallback(spec, geo, geo.groups[g], geo.group_rows[g], W,
                                   result.weights, result.mask.retained,
                                   result.report.per_scope);
        }
    };

    int threads = config.threads;
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min<int>(threads, static_cast<int>(geo.groups.size())));

    if (threads <= 1) {
        for (std::size_t g = 0; g < geo.groups.size(); ++g) run_group(g);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
        const std::size_t per = (geo.groups.size() + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                try {
                    const std::size_t lo = static_cast<std::size_t>(t) * per;
                    const std::size_t hi = std::min(geo.groups.size(), lo + per);
                    for (std::size_t g = lo; g < hi; ++g) run_group(g);
                } catch (...) {
                    errors[static_cast<std::size_t>(t)] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (const auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    for (std::size_t g = 0; g < geo.groups.size(); ++g) {
        if (!fallback_flag[g]) continue;
        result.report.fallback_rows.insert(result.report.fallback_rows.end(),
                                           geo.group_rows[g].begin(), geo.group_rows[g].end());
    }
    std::sort(result.report.fallback_rows.begin(), result.report.fallback_rows.end());

    for (const auto& s : result.report.per_scope) {
        result.report.predicted_loss_increase += s.pruned_saliency_sum;
    }
    fill_output_error(result.report, X, initial.H, W, result.weights);
    result.report.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

PruneResult prune_by_scores(const SparsitySpec& spec_in, const Eigen::MatrixXd& W,
                            const std::vector<double>& scores, const PruneConfig& config,
                            const Eigen::MatrixXd* X) {
    const auto t0 = std::chrono::steady_clock::now();
    SparsitySpec spec = apply_keep(spec_in, config);
    check_spec_matches(spec, W.rows(), W.cols());

    PruneResult result;
    result.weights = W;
    result.mask = hard_threshold(spec, scores);
    result.report.method = config.method;
    result.report.order_mode = config.order_mode;
    result.report.per_block_saliency = scores;
    result.report.per_scope.assign(static_cast<std::size_t>(num_scopes(spec)), ScopeReport{});

    const std::int64_t K = W.cols();
    for (std::int64_t e : element_mask(result.mask).indices()) {
        result.weights(e / K, e % K) = 0.0;
    }

    for (std::int64_t s = 0; s < num_scopes(spec); ++s) {
        ScopeReport& rep = result.report.per_scope[static_cast<std::size_t>(s)];
        rep.scope = s;
        for (std::int64_t b : scope_blocks(spec, s)) {
            if (result.mask.retained[static_cast<std::size_t>(b)]) {
                rep.retained.push_back(b);
            } else {
                rep.pruned_saliency_sum += scores[static_cast<std::size_t>(b)];
            }
        }
        result.report.predicted_loss_increase += rep.pruned_saliency_sum;
    }

    Eigen::MatrixXd H;
    if (X != nullptr) {
        fill_output_error(result.report, X, H, W, result.weights);
    }
    result.report.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

namespace {

struct ColumnScope {
    std::int64_t ordinal;
    std::int64_t row;
    std::int64_t col_begin;
    std::int64_t col_end;  // exclusive
    std::vector<std::int64_t> blocks;
};

}  // namespace

PruneResult sparsegpt_like(const SparsitySpec& spec_in, const Eigen::MatrixXd& W,
                           const HessianState& initial, const PruneConfig& config,
                           const Eigen::MatrixXd* X) {
    const auto t0 = std::chrono::steady_clock::now();
    SparsitySpec spec = apply_keep(spec_in, config);
    check_spec_matches(spec, W.rows(), W.cols());
    if (initial.dim() != W.cols()) {
        throw SizeMismatchError("Hessian dimension does not match weight columns");
    }

    const std::int64_t M = W.rows();
    const std::int64_t K = W.cols();
    SpecTables tables = build_tables(spec);

    // Scopes must be contiguous per-row column ranges so the shared
    // column-sequential sweep lines up with selection boundaries.
    std::vector<ColumnScope> scopes;
    for (std::int64_t s = 0; s < num_scopes(spec); ++s) {
        ColumnScope cs{s, -1, 0, 0, tables.blocks[static_cast<std::size_t>(s)]};
        std::vector<std::int64_t> cols;
        for (std::int64_t b : cs.blocks) {
            for (std::int64_t e : tables.elements[static_cast<std::size_t>(b)]) {
                const std::int64_t row = e / K;
                if (cs.row < 0) cs.row = row;
                if (cs.row != row) {
                    throw SpecInvalidError("scope " + std::to_string(s) +
                                           " spans multiple rows; sparsegpt_like needs "
                                           "column-dimension scopes");
                }
                cols.push_back(e % K);
            }
        }
        std::sort(cols.begin(), cols.end());
        for (std::size_t i = 1; i < cols.size(); ++i) {
            if (cols[i] != cols[i - 1] + 1) {
                throw SpecInvalidError("scope " + std::to_string(s) +
                                       " is not a contiguous column range");
            }
        }
        cs.col_begin = cols.front();
        cs.col_end = cols.back() + 1;
        scopes.push_back(std::move(cs));
    }

    // Selection boundaries: scopes starting at each column.
    std::vector<std::vector<std::size_t>> starting_at(static_cast<std::size_t>(K));
    for (std::size_t i = 0; i < scopes.size(); ++i) {
        starting_at[static_cast<std::size_t>(scopes[i].col_begin)].push_back(i);
    }

    PruneResult result;
    result.weights = W;
    result.mask.spec = spec;
    result.mask.retained.assign(static_cast<std::size_t>(num_blocks(spec)), 1);
    result.report.method = Method::SPARSEGPT_LIKE;
    result.report.order_mode = config.order_mode;
    result.report.per_scope.assign(static_cast<std::size_t>(num_scopes(spec)), ScopeReport{});

    // Initial w^2/d^2 block scores for the report.
    result.report.per_block_saliency.assign(static_cast<std::size_t>(num_blocks(spec)), 0.0);
    for (std::int64_t b = 0; b < num_blocks(spec); ++b) {
        double sc = 0.0;
        for (std::int64_t e : tables.elements[static_cast<std::size_t>(b)]) {
            const double d = initial.H_inv(e % K, e % K);
            const double w = W(e / K, e % K);
            sc += (w * w) / (d * d);
        }
        result.report.per_block_saliency[static_cast<std::size_t>(b)] = sc;
    }

    Eigen::MatrixXd Hinv = initial.H_inv;
    Eigen::MatrixXd& Wp = result.weights;
    std::vector<std::uint8_t> col_pruned(static_cast<std::size_t>(M * K), 0);

    const double tiny = 1e-30;
    for (std::int64_t j = 0; j < K; ++j) {
        for (std::size_t si : starting_at[static_cast<std::size_t>(j)]) {
            ColumnScope& cs = scopes[si];
            ScopeReport& rep = result.report.per_scope[static_cast<std::size_t>(cs.ordinal)];
            rep.scope = cs.ordinal;

            std::vector<std::pair<double, std::int64_t>> scored;
            for (std::int64_t b : cs.blocks) {
                double sc = 0.0;
                for (std::int64_t e : tables.elements[static_cast<std::size_t>(b)]) {
                    const double d = Hinv(e % K, e % K);
                    if (std::abs(d) < tiny) {
                        throw SingularBlockError("vanishing H^-1 diagonal in column sweep");
                    }
                    const double w = Wp(e / K, e % K);
                    sc += (w * w) / (d * d);
                }
                scored.emplace_back(sc, b);
            }
            std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
                return better_victim(a.first, a.second, b.first, b.second);
            });
            const std::int64_t victims =
                static_cast<std::int64_t>(cs.blocks.size()) - spec.keep;
            for (std::int64_t v = 0; v < victims; ++v) {
                const std::int64_t b = scored[static_cast<std::size_t>(v)].second;
                rep.pruned_saliency_sum += scored[static_cast<std::size_t>(v)].first;
                result.mask.retained[static_cast<std::size_t>(b)] = 0;
                for (std::int64_t e : tables.elements[static_cast<std::size_t>(b)]) {
                    col_pruned[static_cast<std::size_t>(e)] = 1;
                }
            }
            for (std::int64_t b : cs.blocks) {
                if (result.mask.retained[static_cast<std::size_t>(b)]) {
                    rep.retained.push_back(b);
                }
            }
        }

        // Column-sequential compensation: pruned entries push their error onto
        // the columns to the right, then column j leaves the active set.
        const double d = Hinv(j, j);
        if (std::abs(d) < tiny) {
            throw SingularBlockError("vanishing H^-1 diagonal in column sweep");
        }
        Eigen::VectorXd err = Eigen::VectorXd::Zero(M);
        bool any = false;
        for (std::int64_t m = 0; m < M; ++m) {
            if (col_pruned[static_cast<std::size_t>(m * K + j)]) {
                err(m) = Wp(m, j) / d;
                Wp(m, j) = 0.0;
                any = true;
            }
        }
        if (any && j + 1 < K) {
            Wp.rightCols(K - j - 1).noalias() -=
                err * Hinv.row(j).segment(j + 1, K - j - 1);
        }
        if (j + 1 < K) {
            Eigen::VectorXd col = Hinv.col(j);
            Hinv.noalias() -= (col / d) * col.transpose();
        }
        Hinv.row(j).setZero();
        Hinv.col(j).setZero();
    }

    for (const auto& s : result.report.per_scope) {
        result.report.predicted_loss_increase += s.pruned_saliency_sum;
    }
    fill_output_error(result.report, X, initial.H, W, result.weights);
    result.report.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

std::vector<double> aggregate_coupled_saliency(
    const CouplingSpec& coupling, const std::vector<std::vector<double>>& per_member_scores) {
    const std::vector<std::int64_t> common = coupled_grid_shape(coupling);
    if (per_member_scores.size() != coupling.members.size()) {
        throw GridShapeMismatchError("score list count != coupling member count");
    }
    std::int64_t n = 1;
    for (std::int64_t e : common) n *= e;

    std::vector<double> out(static_cast<std::size_t>(n), 0.0);
    for (std::size_t i = 0; i < coupling.members.size(); ++i) {
        const auto& m = coupling.members[i];
        std::vector<std::int64_t> grid = block_grid(m.spec).grid_shape;
        if (coupling.level == CouplingLevel::Scope) {
            for (std::size_t k = 0; k < grid.size(); ++k) grid[k] /= m.spec.scope[k];
        }
        if (static_cast<std::int64_t>(per_member_scores[i].size()) != n) {
            throw GridShapeMismatchError("score vector size mismatch for tensor " + m.tensor_id);
        }
        for (std::int64_t o = 0; o < n; ++o) {
            const std::vector<std::int64_t> t = unpack_last_fastest(common, o);
            std::vector<std::int64_t> j(grid.size());
            for (std::size_t k = 0; k < grid.size(); ++k) {
                j[static_cast<std::size_t>(m.permutation[k])] = t[k];
            }
            out[static_cast<std::size_t>(o)] +=
                per_member_scores[i][static_cast<std::size_t>(pack_last_fastest(grid, j))];
        }
    }
    return out;
}

double relative_output_error(const Eigen::MatrixXd& X, const Eigen::MatrixXd& W,
                             const Eigen::MatrixXd& W_hat) {
    if (X.cols() != W.cols() || W.rows() != W_hat.rows() || W.cols() != W_hat.cols()) {
        throw SizeMismatchError("shape mismatch in relative_output_error");
    }
    const double den = (X * W.transpose()).norm();
    if (den == 0.0) throw ZeroReferenceError("reference output norm is zero");
    return (X * (W_hat - W).transpose()).norm() / den;
}

}  // namespace s3kit
