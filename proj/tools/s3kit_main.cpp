// s3kit command-line tool: validate specs, generate catalog patterns, prune
// tensors stored as SKT files, and quote compression ratios.

#include "s3kit/errors.hpp"
#include "s3kit/hardware.hpp"
#include "s3kit/hessian.hpp"
#include "s3kit/json_io.hpp"
#include "s3kit/oracle.hpp"
#include "s3kit/patterns.hpp"
#include "s3kit/pruners.hpp"
#include "s3kit/skt.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDomain = 1;
constexpr int kExitIo = 2;

int exit_code_for(const s3kit::Error& e) {
    return e.kind() == s3kit::ErrorKind::Io ? kExitIo : kExitDomain;
}

s3kit::DimMap parse_dims(const std::vector<std::string>& args) {
    s3kit::DimMap dims;
    for (const auto& a : args) {
        const auto eq = a.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == a.size()) {
            throw s3kit::DimensionError("expected KEY=VALUE, got '" + a + "'");
        }
        try {
            dims[a.substr(0, eq)] = std::stoll(a.substr(eq + 1));
        } catch (const std::exception&) {
            throw s3kit::DimensionError("bad integer in '" + a + "'");
        }
    }
    return dims;
}

int cmd_validate(const std::string& spec_path) {
    s3kit::SpecDocument doc = s3kit::spec_document_from_json_file(spec_path);
    const auto violations = s3kit::validate_spec(doc.spec);
    for (const auto& v : violations) {
        std::cerr << v.constraint << ": " << v.message << "\n";
    }
    return violations.empty() ? kExitOk : kExitDomain;
}

int cmd_pattern(const std::string& name, const std::vector<std::string>& dim_args) {
    const s3kit::DimMap dims = parse_dims(dim_args);
    const s3kit::SparsitySpec spec = s3kit::make_pattern_spec(name, dims);
    std::cout << s3kit::spec_to_json(spec) << "\n";
    return kExitOk;
}

int cmd_quote(const std::string& pattern, int value_bits) {
    s3kit::QuotePattern p;
    if (pattern == "standard_24") {
        p = s3kit::QuotePattern::standard_24;
    } else if (pattern == "coupled_24") {
        p = s3kit::QuotePattern::coupled_24;
    } else {
        throw s3kit::UnknownPatternError("quote pattern must be standard_24 or coupled_24");
    }
    std::cout << s3kit::compression_quote(p, value_bits).to_json() << "\n";
    return kExitOk;
}

struct PruneArgs {
    std::string spec_path;
    std::string weights_path;
    std::string calib_path;
    std::string method = "s-obs";
    std::string order = "greedy";
    double lambda_rel = 0.01;
    std::int64_t keep = -1;  // <0: use the spec's keep
    std::string out_weights;
    std::string out_mask;
    std::string out_report;
    std::int64_t seed = 0;
    int threads = 0;  // resolved from flag or S3KIT_THREADS, default 1
};

Eigen::MatrixXd to_matrix(const s3kit::TensorFile& t, const std::string& what) {
    if (t.shape.size() != 2) {
        throw s3kit::SpecInvalidError(what + " must be a 2-D tensor");
    }
    Eigen::MatrixXd m(t.shape[0], t.shape[1]);
    for (std::int64_t r = 0; r < t.shape[0]; ++r) {
        for (std::int64_t c = 0; c < t.shape[1]; ++c) {
            m(r, c) = t.data[static_cast<std::size_t>(r * t.shape[1] + c)];
        }
    }
    return m;
}

int cmd_prune(const PruneArgs& args) {
    s3kit::SpecDocument doc = s3kit::spec_document_from_json_file(args.spec_path);
    const s3kit::TensorFile wfile = s3kit::skt_read(args.weights_path);
    const s3kit::TensorFile cfile = s3kit::skt_read(args.calib_path);

    Eigen::MatrixXd W = to_matrix(wfile, "weights");
    Eigen::MatrixXd X = to_matrix(cfile, "calibration set");
    if (X.cols() != W.cols()) {
        throw s3kit::SpecInvalidError("calibration feature count " + std::to_string(X.cols()) +
                                      " != weight columns " + std::to_string(W.cols()));
    }

    s3kit::SparsitySpec spec = doc.spec;
    s3kit::bind_phys_shape(spec, wfile.shape);
    const auto violations = s3kit::validate_spec(spec);
    if (!violations.empty()) {
        for (const auto& v : violations) std::cerr << v.constraint << ": " << v.message << "\n";
        return kExitDomain;
    }

    s3kit::PruneConfig config;
    config.lambda_rel = args.lambda_rel;
    config.threads = args.threads;
    if (args.keep >= 0) config.keep = args.keep;
    if (args.order == "static") {
        config.order_mode = s3kit::OrderMode::STATIC;
    } else if (args.order == "greedy") {
        config.order_mode = s3kit::OrderMode::GREEDY_RECOMPUTE;
    } else {
        throw s3kit::SpecInvalidError("--order must be static or greedy");
    }

    const Eigen::MatrixXd H = s3kit::empirical_hessian({X});
    s3kit::PruneResult result;
    if (args.method == "s-obd") {
        config.method = s3kit::Method::S_OBD;
        const auto scores = s3kit::saliency_obd(spec, W, H.diagonal());
        result = s3kit::prune_by_scores(spec, W, scores, config, &X);
    } else if (args.method == "wanda") {
        config.method = s3kit::Method::WANDA;
        const auto scores = s3kit::saliency_wanda(spec, W, X);
        result = s3kit::prune_by_scores(spec, W, scores, config, &X);
    } else if (args.method == "s-obs") {
        config.method = s3kit::Method::S_OBS;
        const auto state = s3kit::damp_and_invert(H, config.lambda_rel);
        result = s3kit::prune_scope_obs(spec, W, state, config, &X);
    } else if (args.method == "sparsegpt") {
        config.method = s3kit::Method::SPARSEGPT_LIKE;
        const auto state = s3kit::damp_and_invert(H, config.lambda_rel);
        result = s3kit::sparsegpt_like(spec, W, state, config, &X);
    } else {
        throw s3kit::SpecInvalidError("--method must be s-obd, s-obs, wanda or sparsegpt");
    }

    // Outputs: pruned weights in the input dtype, element mask as f32 0/1,
    // report JSON. Partial files are removed if any write fails.
    std::vector<std::string> written;
    try {
        if (!args.out_weights.empty()) {
            s3kit::TensorFile out = wfile;
            out.raw_header.reset();
            for (std::int64_t r = 0; r < W.rows(); ++r) {
                for (std::int64_t c = 0; c < W.cols(); ++c) {
                    out.data[static_cast<std::size_t>(r * W.cols() + c)] =
                        result.weights(r, c);
                }
            }
            written.push_back(args.out_weights);
            s3kit::skt_write(args.out_weights, out);
        }
        if (!args.out_mask.empty()) {
            std::vector<double> mask(static_cast<std::size_t>(W.rows() * W.cols()), 1.0);
            for (std::int64_t e : s3kit::element_mask(result.mask).indices()) {
                mask[static_cast<std::size_t>(e)] = 0.0;
            }
            written.push_back(args.out_mask);
            s3kit::skt_write(args.out_mask, s3kit::TensorFile::f32(wfile.shape, mask));
        }
        if (!args.out_report.empty()) {
            written.push_back(args.out_report);
            std::ofstream out(args.out_report, std::ios::binary | std::ios::trunc);
            if (!out) throw s3kit::IoError("cannot write " + args.out_report);
            out << result.report.to_json() << "\n";
            if (!out) throw s3kit::IoError("write failed for " + args.out_report);
        }
    } catch (...) {
        for (const auto& f : written) {
            std::error_code ec;
            std::filesystem::remove(f, ec);
        }
        throw;
    }

    std::cerr << "pruned " << wfile.shape[0] << "x" << wfile.shape[1] << " with "
              << args.method << ", relative output error "
              << result.report.relative_output_error << "\n";
    return kExitOk;
}

/// Hidden oracle cross-check: greedy S-OBS against brute-force enumeration on
/// seeded synthetic instances.
int cmd_verify(std::int64_t seed, int trials) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    std::normal_distribution<double> gauss(0.0, 1.0);

    bool ok = true;
    for (int t = 0; t < trials; ++t) {
        const std::int64_t K = 8;
        Eigen::MatrixXd A(K, K);
        for (std::int64_t i = 0; i < K; ++i) {
            for (std::int64_t j = 0; j < K; ++j) A(i, j) = gauss(rng);
        }
        Eigen::MatrixXd H = A.transpose() * A / static_cast<double>(K) +
                            0.05 * Eigen::MatrixXd::Identity(K, K);
        Eigen::MatrixXd W(1, K);
        for (std::int64_t j = 0; j < K; ++j) W(0, j) = gauss(rng);

        const auto spec = s3kit::make_pattern_spec("two_four", {{"M", 1}, {"K", K}});
        const auto state = s3kit::damp_and_invert(H, 0.0);

        s3kit::PruneConfig config;
        config.order_mode = s3kit::OrderMode::GREEDY_RECOMPUTE;
        const auto result = s3kit::prune_scope_obs(spec, W, state, config);

        const auto oracle = s3kit::oracle::brute_force_best_mask(spec, W.row(0), state.damped());

        std::vector<std::int64_t> zeroed;
        for (std::int64_t e : s3kit::element_mask(result.mask).indices()) zeroed.push_back(e);
        const double greedy_loss =
            s3kit::oracle::exact_compensated_loss(W.row(0), state.damped(),
                                                  s3kit::ElementSet::from_indices(zeroed))
                .loss;

        const bool lower_bounded = greedy_loss >= oracle.best_loss - 1e-9;
        const bool joint = std::abs(result.report.predicted_loss_increase - greedy_loss) <=
                           1e-8 * std::max(1.0, std::abs(greedy_loss));
        std::cout << "trial " << t << ": greedy " << greedy_loss << " oracle "
                  << oracle.best_loss << (lower_bounded && joint ? " ok" : " MISMATCH") << "\n";
        ok = ok && lower_bounded && joint;
    }
    return ok ? kExitOk : kExitDomain;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"S3 structured-sparsity toolkit"};
    app.require_subcommand(1);

    std::string spec_path;
    auto* validate = app.add_subcommand("validate", "Check a spec JSON document");
    validate->add_option("--spec,spec", spec_path, "spec JSON file")->required();

    std::string pattern_name;
    std::vector<std::string> dim_args;
    auto* pattern = app.add_subcommand("pattern", "Emit a catalog pattern as spec JSON");
    pattern->add_option("name", pattern_name, "pattern name")->required();
    pattern->add_option("dims", dim_args, "dimensions as KEY=VALUE");

    std::string quote_pattern;
    int value_bits = 16;
    auto* quote = app.add_subcommand("quote", "Compression ratio for a 2:4 pattern");
    quote->add_option("pattern", quote_pattern, "standard_24 or coupled_24")->required();
    quote->add_option("value_bits", value_bits, "bits per value (4, 8, 16, 32)")->required();

    PruneArgs pa;
    int threads_flag = -1;
    auto* prune = app.add_subcommand("prune", "Prune an SKT weight tensor");
    prune->add_option("--spec", pa.spec_path)->required();
    prune->add_option("--weights", pa.weights_path)->required();
    prune->add_option("--calib", pa.calib_path)->required();
    prune->add_option("--method", pa.method, "s-obd | s-obs | wanda | sparsegpt");
    prune->add_option("--order", pa.order, "static | greedy");
    prune->add_option("--lambda-rel", pa.lambda_rel, "relative damping");
    prune->add_option("--keep", pa.keep, "override the spec's keep");
    prune->add_option("--out-weights", pa.out_weights);
    prune->add_option("--out-mask", pa.out_mask);
    prune->add_option("--out-report", pa.out_report);
    prune->add_option("--seed", pa.seed);
    prune->add_option("--threads", threads_flag, "worker threads (0 = all cores)");

    std::int64_t verify_seed = 0;
    int verify_trials = 5;
    auto* verify = app.add_subcommand("verify", "");
    verify->group("");  // hidden: oracle cross-checks
    verify->add_option("--seed", verify_seed);
    verify->add_option("--trials", verify_trials);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitIo;
    }

    try {
        if (*validate) return cmd_validate(spec_path);
        if (*pattern) return cmd_pattern(pattern_name, dim_args);
        if (*quote) return cmd_quote(quote_pattern, value_bits);
        if (*prune) {
            if (threads_flag >= 0) {
                pa.threads = threads_flag;
            } else if (const char* env = std::getenv("S3KIT_THREADS")) {
                pa.threads = std::max(0, std::atoi(env));
            } else {
                pa.threads = 1;
            }
            return cmd_prune(pa);
        }
        if (*verify) return cmd_verify(verify_seed, verify_trials);
    } catch (const s3kit::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDomain;
    }
    return kExitOk;
}
