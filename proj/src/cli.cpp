#include "endnet/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <limits>
#include <ostream>
#include <sstream>

#include "endnet/abundance.hpp"
#include "endnet/eval.hpp"
#include "endnet/gradcheck.hpp"
#include "endnet/init.hpp"
#include "endnet/io.hpp"
#include "endnet/synth.hpp"
#include "endnet/trainer.hpp"

namespace endnet {

namespace fs = std::filesystem;

namespace {

int exit_code_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::Io:
    case ErrorCode::MalformedHeader:
    case ErrorCode::SizeMismatch:
    case ErrorCode::NonFiniteValue:
        return kExitIo;
    case ErrorCode::NumericalDivergence:
        return kExitDivergence;
    default:
        return kExitConfig;
    }
}

struct CubeArgs {
    std::string input;
    std::string format = "auto";
    bool no_normalize = false;

    void add(CLI::App* app, bool required = true) {
        auto* opt = app->add_option("--input", input, "Hyperspectral cube (ENVI .hdr/payload or CSV)");
        if (required) opt->required();
        app->add_option("--format", format, "Cube format")
            ->check(CLI::IsMember({"auto", "envi", "csv"}))
            ->capture_default_str();
        app->add_flag("--no-normalize", no_normalize, "Skip division by the global maximum");
    }

    HyperCube load(std::ostream& err) const {
        const CubeFormat f = format == "auto" ? guess_format(input)
                             : format == "csv" ? CubeFormat::Csv
                                               : CubeFormat::Envi;
        std::vector<std::string> warnings;
        HyperCube cube = load_cube(input, f, &warnings);
        for (const auto& w : warnings) err << "warning: " << w << "\n";
        return no_normalize ? cube : normalize_cube(cube);
    }
};

// Flags shared by every command that trains a model.
struct TrainArgs {
    TrainConfig cfg;
    Index k = 4;
    std::string init = "dmaxd";

    void add(CLI::App* app) {
        app->add_option("--k", k, "Number of endmembers")->capture_default_str();
        app->add_option("--init", init, "Endmember initializer")
            ->check(CLI::IsMember({"vca", "dmaxd"}))
            ->capture_default_str();
        app->add_option("--iters", cfg.iters, "Training iterations")->capture_default_str();
        app->add_option("--lr", cfg.lr, "Adam learning rate")->capture_default_str();
        app->add_option("--batch", cfg.batch_size, "Mini-batch size")->capture_default_str();
        app->add_option("--beta1", cfg.beta1, "Adam first-moment decay")->capture_default_str();
        app->add_option("--beta2", cfg.beta2, "Adam second-moment decay")->capture_default_str();
        app->add_option("--adam-eps", cfg.adam_eps, "Adam stabilizer")->capture_default_str();
        app->add_option("--lambda0", cfg.hyper.lambda0, "Weight of the Euclidean reconstruction term")
            ->capture_default_str();
        app->add_option("--lambda1", cfg.hyper.lambda1, "Weight of the angular (-log C) term")
            ->capture_default_str();
        app->add_option("--lambda2", cfg.hyper.lambda2, "Weight of the l1 sparsity term on z")
            ->capture_default_str();
        app->add_option("--lambda3", cfg.hyper.lambda3, "Weight of |W_enc|^2")->capture_default_str();
        app->add_option("--lambda4", cfg.hyper.lambda4, "Weight of |W_dec|^2")->capture_default_str();
        app->add_option("--lambda5", cfg.hyper.lambda5, "Weight of |rho|^2")->capture_default_str();
        app->add_option("--dropout", cfg.hyper.dropout_p, "Dropout keep probability p")
            ->capture_default_str();
        app->add_option("--top-n", cfg.hyper.top_n, "Number of activations kept per sample")
            ->capture_default_str();
        app->add_option("--mask-noise", cfg.corrupt_mask_frac, "Maximum fraction of bands corrupted")
            ->capture_default_str();
        app->add_option("--noise-sigma", cfg.corrupt_sigma,
                        "Std of the additive corruption noise (negative: 0.1 x cube std)")
            ->capture_default_str();
        app->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
        app->add_option("--log-every", cfg.log_every, "Iterations per training-log row")
            ->capture_default_str();
    }

    InitMethod init_method() const { return init == "vca" ? InitMethod::Vca : InitMethod::Dmaxd; }

    void validate_all() const {
        if (k < 2) throw Error(ErrorCode::Config, "--k must be at least 2");
        validate(cfg, k);
    }
};

TrainResult run_extract(const HyperCube& cube, const TrainArgs& t, std::uint64_t seed) {
    TrainConfig cfg = t.cfg;
    cfg.seed = seed;
    const InitResult init = initialize(cube, t.k, t.init_method(), seed);
    return train(cube, init, cfg);
}

SpectraMatrix decoder_spectra(const Model& model) { return SpectraMatrix(model.w_dec); }

std::optional<AbundanceMap> maybe_abundances(const std::string& path, Index height, Index width) {
    if (path.empty()) return std::nullopt;
    return load_abundances_csv(path, height, width);
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create directory " + dir.string() + ": " + ec.message());
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Hyperspectral unmixing with a two-staged sparse autoencoder"};
    app.require_subcommand(1);

    // synth
    SynthSpec synth_spec;
    std::string synth_out = "synth";
    std::string synth_format = "csv";
    auto* synth = app.add_subcommand("synth", "Generate a synthetic linear-mixing scene");
    synth->add_option("--k", synth_spec.k, "Number of endmembers")->capture_default_str();
    synth->add_option("--bands", synth_spec.bands, "Spectral bands")->capture_default_str();
    synth->add_option("--pixels", synth_spec.n_pixels, "Pixel count")->capture_default_str();
    synth->add_option("--snr", synth_spec.snr_db, "SNR in dB (inf for noiseless)")->capture_default_str();
    synth->add_option("--pure-fraction", synth_spec.pure_pixel_fraction, "Fraction of pure pixels")
        ->capture_default_str();
    synth->add_option("--alpha", synth_spec.dirichlet_alpha, "Dirichlet concentration")
        ->capture_default_str();
    synth->add_option("--seed", synth_spec.seed, "Random seed")->capture_default_str();
    synth->add_option("--format", synth_format, "Cube output format")
        ->check(CLI::IsMember({"csv", "envi"}))
        ->capture_default_str();
    synth->add_option("--out-dir", synth_out, "Output directory")->capture_default_str();

    // extract
    CubeArgs extract_cube;
    TrainArgs extract_train;
    std::string extract_out = ".";
    auto* extract = app.add_subcommand("extract", "Initialize and train a model; write endmembers");
    extract_cube.add(extract);
    extract_train.add(extract);
    extract->add_option("--out-dir", extract_out, "Output directory")->capture_default_str();

    // abundances
    CubeArgs abund_cube;
    std::string abund_checkpoint;
    std::string abund_method = "spu";
    std::string abund_out = ".";
    HyperParams abund_hyper;
    auto* abund = app.add_subcommand("abundances", "Estimate per-pixel abundances from a checkpoint");
    abund_cube.add(abund);
    abund->add_option("--checkpoint", abund_checkpoint, "Model checkpoint")->required();
    abund->add_option("--method", abund_method, "Estimator")
        ->check(CLI::IsMember({"spu", "hidden"}))
        ->capture_default_str();
    abund->add_option("--top-n", abund_hyper.top_n, "Activations kept (hidden method)")
        ->capture_default_str();
    abund->add_option("--out-dir", abund_out, "Output directory")->capture_default_str();

    // eval
    std::string eval_estimated, eval_estimated_abund, eval_truth, eval_truth_abund;
    std::string eval_out = ".";
    int eval_repeats = 0;
    bool eval_greedy = false;
    CubeArgs eval_cube;
    TrainArgs eval_train;
    auto* eval = app.add_subcommand(
        "eval", "Score estimated endmembers/abundances against ground truth, or rerun extract --repeats times");
    eval->add_option("--estimated", eval_estimated, "Estimated spectra CSV");
    eval->add_option("--estimated-abundances", eval_estimated_abund, "Estimated abundance CSV");
    eval->add_option("--truth", eval_truth, "Ground-truth spectra CSV")->required();
    eval->add_option("--truth-abundances", eval_truth_abund, "Ground-truth abundance CSV");
    eval->add_option("--repeats", eval_repeats,
                     "Rerun extract + SPU with seeds seed..seed+R-1 on --input and aggregate")
        ->capture_default_str();
    eval->add_flag("--greedy", eval_greedy, "Match each truth to its most similar estimate (may reuse)");
    eval->add_option("--out-dir", eval_out, "Output directory")->capture_default_str();
    eval_cube.add(eval, false);
    eval_train.add(eval);

    // gradcheck
    GradCheckConfig gc;
    std::string fault = "none";
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every analytic gradient");
    gradcheck->add_option("--trials", gc.trials, "Random instances")->capture_default_str();
    gradcheck->add_option("--seed", gc.seed, "Random seed")->capture_default_str();
    gradcheck->add_option("--tolerance", gc.tolerance, "Maximum relative error")->capture_default_str();
    gradcheck->add_option("--inject-fault", fault, "Flip the sign of one analytic gradient")
        ->check(CLI::IsMember({"none", "sad", "batchnorm", "l1norm", "loss"}))
        ->group("");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*synth) {
            validate(synth_spec);
            const SynthScene scene = synth_scene(synth_spec);
            const fs::path dir = synth_out;
            ensure_dir(dir);
            if (synth_format == "csv") {
                save_cube_csv(scene.cube, dir / "cube.csv");
            } else {
                save_envi(scene.cube, dir / "cube.img", Interleave::Bip, EnviDataType::Float64);
            }
            save_spectra_csv(scene.endmembers, dir / "endmembers.csv");
            save_abundances_csv(scene.abundances, dir / "abundances.csv");
            out << "wrote scene " << scene.cube.height() << "x" << scene.cube.width() << "x"
                << scene.cube.bands() << " with " << synth_spec.k << " endmembers to " << dir.string() << "\n";
            return kExitOk;
        }

        if (*extract) {
            extract_train.validate_all();
            const HyperCube cube = extract_cube.load(err);
            const TrainResult result = run_extract(cube, extract_train, extract_train.cfg.seed);
            const fs::path dir = extract_out;
            ensure_dir(dir);
            save_checkpoint(result.model, dir / "model.endn");
            atomic_write(dir / "train_log.csv", result.log.to_csv());
            save_spectra_csv(decoder_spectra(result.model), dir / "endmembers.csv");
            if (!result.log.entries.empty()) {
                const auto& last = result.log.entries.back();
                out << "iter " << last.iter << " loss " << last.loss << " z_l1 " << last.z_l1
                    << " recon_sad " << last.recon_sad << "\n";
            }
            out << "wrote " << (dir / "model.endn").string() << ", train_log.csv, endmembers.csv\n";
            return kExitOk;
        }

        if (*abund) {
            validate(abund_hyper, abund_hyper.top_n);
            const Model model = load_checkpoint(abund_checkpoint);
            const HyperCube cube = abund_cube.load(err);
            if (cube.bands() != model.w_dec.rows())
                throw Error(ErrorCode::DimensionMismatch, "cube has " + std::to_string(cube.bands()) +
                                                              " bands, model expects " +
                                                              std::to_string(model.w_dec.rows()));
            if (abund_hyper.top_n > model.w_dec.cols())
                throw Error(ErrorCode::Config, "--top-n exceeds the model's endmember count");
            const AbundanceMap map = estimate_abundances(
                model, cube, abund_method == "spu" ? AbundanceMethod::Spu : AbundanceMethod::Hidden, abund_hyper);
            ensure_dir(abund_out);
            const auto files = save_abundance_maps(map, abund_out);
            out << "wrote " << files.size() << " files to " << abund_out << "\n";
            return kExitOk;
        }

        if (*eval) {
            const SpectraMatrix truth = load_spectra_csv(eval_truth);
            const MatchMode mode = eval_greedy ? MatchMode::Greedy : MatchMode::Optimal;
            const fs::path dir = eval_out;
            if (eval_repeats > 0) {
                if (eval_cube.input.empty())
                    throw Error(ErrorCode::Config, "--repeats needs --input");
                eval_train.validate_all();
                const HyperCube cube = eval_cube.load(err);
                if (cube.bands() != truth.bands())
                    throw Error(ErrorCode::DimensionMismatch, "cube and ground truth band counts differ");
                const auto truth_map = maybe_abundances(eval_truth_abund, cube.height(), cube.width());
                std::vector<EvalReport> reports;
                ensure_dir(dir);
                for (int r = 0; r < eval_repeats; ++r) {
                    const std::uint64_t seed = eval_train.cfg.seed + static_cast<std::uint64_t>(r);
                    const TrainResult result = run_extract(cube, eval_train, seed);
                    const SpectraMatrix est = decoder_spectra(result.model);
                    std::optional<AbundanceMap> est_map;
                    if (truth_map) est_map = estimate_abundances(result.model, cube, AbundanceMethod::Spu);
                    reports.push_back(evaluate(est, est_map ? &*est_map : nullptr, truth,
                                               truth_map ? &*truth_map : nullptr, mode));
                    atomic_write(dir / ("report_seed" + std::to_string(seed) + ".csv"), reports.back().to_csv());
                    out << "run " << (r + 1) << "/" << eval_repeats << " seed " << seed << " avg SAD "
                        << reports.back().avg_sad << "\n";
                }
                const RepeatSummary summary = summarize(reports);
                atomic_write(dir / "summary.csv", summary.to_csv());
                atomic_write(dir / "summary.txt", summary.to_text());
                out << summary.to_text();
                return kExitOk;
            }
            if (eval_estimated.empty())
                throw Error(ErrorCode::Config, "eval needs --estimated or --repeats with --input");
            const SpectraMatrix est = load_spectra_csv(eval_estimated);
            const auto est_map = maybe_abundances(eval_estimated_abund, -1, -1);
            const auto truth_map = maybe_abundances(eval_truth_abund, -1, -1);
            const EvalReport report = evaluate(est, est_map ? &*est_map : nullptr, truth,
                                               truth_map ? &*truth_map : nullptr, mode);
            ensure_dir(dir);
            atomic_write(dir / "report.csv", report.to_csv());
            atomic_write(dir / "report.txt", report.to_text());
            out << report.to_text();
            return kExitOk;
        }

        if (*gradcheck) {
            if (fault == "sad") gc.fault = GradFault::Sad;
            else if (fault == "batchnorm") gc.fault = GradFault::BatchNorm;
            else if (fault == "l1norm") gc.fault = GradFault::L1Norm;
            else if (fault == "loss") gc.fault = GradFault::FullLoss;
            const GradCheckReport report = run_gradcheck(gc);
            out << report.to_text();
            return report.passed() ? kExitOk : kExitGradCheck;
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitConfig;
}

} // namespace endnet
