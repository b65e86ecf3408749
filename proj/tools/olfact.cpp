// ============================================================================
// olfact - command-line experiment runner for the sensor-side machine
// olfaction pipeline. Subcommands cover synthetic data generation, dataset
// validation, preprocessing inspection, GC-MS embedding construction,
// training, evaluation, sweeps and ablations.
// ============================================================================
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "olfact/analysis.hpp"
#include "olfact/csv.hpp"
#include "olfact/experiment.hpp"
#include "olfact/gcms.hpp"
#include "olfact/manifest.hpp"
#include "olfact/preprocess.hpp"
#include "olfact/synth.hpp"
#include "olfact/util.hpp"

namespace fs = std::filesystem;
using namespace olfact;

namespace {

// exit codes: 0 ok, 2 config error, 3 data error, 4 numeric failure
int guarded(const std::function<void()>& body) {
    try {
        body();
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

ExperimentConfig load_config(const std::string& path, const std::string& out_override,
                             const std::string& root_override) {
    ExperimentConfig cfg = parse_experiment_config(read_text_file(path));
    if (!out_override.empty()) cfg.output_dir = out_override;
    if (const char* env = std::getenv("OLFACT_OUTPUT_DIR"); env && out_override.empty())
        cfg.output_dir = env;
    if (!root_override.empty()) cfg.dataset_root = root_override;
    return cfg;
}

void print_classification(const ClassificationReport& r) {
    std::cout << "windows " << r.total << "  acc@1 " << format_double(r.acc1) << "  acc@5 "
              << format_double(r.acc5) << "  macro-F1 " << format_double(r.macro_f1) << "\n";
    for (std::size_t c = 0; c < r.per_category_acc.size(); ++c)
        std::cout << "  acc@1[" << r.category_names[c] << "] "
                  << format_double(r.per_category_acc[c]) << "\n";
}

void print_mixture(const char* split, const MixtureReport& r) {
    std::cout << split << ": windows " << r.total << "  MAE " << format_double(r.mae)
              << "  Top-1@0.1 " << format_double(r.top1_at_01) << "  DynTopK "
              << format_double(r.dyn_topk) << "  KL " << format_double(r.kl) << "  cosine "
              << format_double(r.cosine) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sensor-side machine olfaction pipeline"};
    app.require_subcommand(1);

    // --- synth ------------------------------------------------------------
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
    std::string synth_out;
    SyntheticConfig synth_cfg;
    SyntheticMixtureConfig synth_mix_cfg;
    bool synth_mixture = false;
    synth_cmd->add_option("--out", synth_out, "output dataset root")->required();
    synth_cmd->add_flag("--mixture", synth_mixture, "generate the mixture dataset instead");
    synth_cmd->add_option("--classes", synth_cfg.num_classes, "number of base classes");
    synth_cmd->add_option("--sessions", synth_cfg.sessions_per_class, "sessions (days) per class");
    synth_cmd->add_option("--steps", synth_cfg.duration_steps, "time steps per session");
    synth_cmd->add_option("--channels", synth_cfg.channels, "sensor channels");
    synth_cmd->add_option("--noise-std", synth_cfg.noise_std, "gaussian noise std");
    synth_cmd->add_option("--drift-std", synth_cfg.drift_std, "AR(1) innovation std");
    synth_cmd->add_option("--drift-coeff", synth_cfg.drift_coeff, "AR(1) coefficient");
    synth_cmd->add_option("--day-shift-std", synth_cfg.day_shift_std, "per-day offset std");
    synth_cmd->add_option("--shift-day", synth_cfg.shift_day, "day given an extra offset");
    synth_cmd->add_option("--shift-day-std", synth_cfg.shift_day_std, "extra offset std");
    synth_cmd->add_option("--seed", synth_cfg.seed, "generator seed");
    synth_cmd->add_option("--mix-steps", synth_mix_cfg.duration_steps, "mixture session steps");
    synth_cmd->add_option("--mix-noise-std", synth_mix_cfg.noise_std, "mixture noise std");

    // --- ingest-check -------------------------------------------------------
    auto* check_cmd = app.add_subcommand("ingest-check", "validate a dataset tree and summarize");
    std::string check_root, check_registry;
    bool check_mixture = false, check_strict = false, check_day_order = false;
    check_cmd->add_option("--root", check_root, "dataset root")->required();
    check_cmd->add_flag("--mixture", check_mixture, "mixture dataset layout");
    check_cmd->add_flag("--strict", check_strict, "enforce the 6-sessions-per-ingredient layout");
    check_cmd->add_flag("--assume-day-order", check_day_order,
                        "infer missing day indices from file order");
    check_cmd->add_option("--registry", check_registry, "registry manifest override");

    // --- preprocess ---------------------------------------------------------
    auto* prep_cmd = app.add_subcommand("preprocess", "report window counts and fit statistics");
    std::string prep_config;
    prep_cmd->add_option("--config", prep_config, "experiment config JSON")->required();

    // --- gcms-embed -----------------------------------------------------------
    auto* gcms_cmd = app.add_subcommand("gcms-embed", "build ingredient GC-MS embeddings");
    std::string gcms_spectra, gcms_formulas, gcms_out, gcms_kind = "spec";
    gcms_cmd->add_option("--spectra", gcms_spectra, "spectra table (spec embeddings)");
    gcms_cmd->add_option("--formulas", gcms_formulas, "formula table (atom embeddings)");
    gcms_cmd->add_option("--kind", gcms_kind, "spec or atom")->check(CLI::IsMember({"spec", "atom"}));
    gcms_cmd->add_option("--out", gcms_out, "output embeddings file")->required();

    // --- train / eval ----------------------------------------------------------
    auto* train_cmd = app.add_subcommand("train", "run a full training experiment");
    std::string train_config, train_out, train_root, train_family;
    std::size_t train_epochs = 0, train_window = 0;
    std::uint64_t train_seed = 0;
    double train_lr = 0;
    int train_lag = 0;
    train_cmd->add_option("--config", train_config, "experiment config JSON")->required();
    train_cmd->add_option("--out", train_out, "output run directory override");
    train_cmd->add_option("--root", train_root, "dataset root override");
    train_cmd->add_option("--epochs", train_epochs, "epoch budget override");
    train_cmd->add_option("--seed", train_seed, "seed override");
    train_cmd->add_option("--lr", train_lr, "learning rate override");
    train_cmd->add_option("--window", train_window, "window size override");
    train_cmd->add_option("--lag", train_lag, "temporal difference lag override");
    train_cmd->add_option("--model", train_family, "model family override")
        ->check(CLI::IsMember({"mlp", "cnn", "lstm", "transformer"}));

    auto* eval_cmd = app.add_subcommand("eval", "re-evaluate a stored run directory");
    std::string eval_run, eval_out;
    eval_cmd->add_option("--run", eval_run, "run directory")->required();
    eval_cmd->add_option("--out", eval_out, "write recomputed metrics JSON here");

    // --- sweep -------------------------------------------------------------------
    auto* sweep_cmd = app.add_subcommand("sweep", "grid over lr x window x diff lag");
    std::string sweep_config, sweep_out, sweep_root;
    std::vector<double> sweep_lrs;
    std::vector<std::size_t> sweep_windows{50, 100};
    std::vector<int> sweep_lags{0, 25};
    sweep_cmd->add_option("--config", sweep_config, "experiment config JSON")->required();
    sweep_cmd->add_option("--out", sweep_out, "output directory override");
    sweep_cmd->add_option("--root", sweep_root, "dataset root override");
    sweep_cmd->add_option("--lr", sweep_lrs, "learning rates (default: config lr_grid)");
    sweep_cmd->add_option("--window", sweep_windows, "window sizes");
    sweep_cmd->add_option("--lag", sweep_lags, "temporal difference lags");

    // --- lodo ---------------------------------------------------------------------
    auto* lodo_cmd = app.add_subcommand("lodo", "leave-one-day-out over the 6 acquisition days");
    std::string lodo_config, lodo_out, lodo_root;
    lodo_cmd->add_option("--config", lodo_config, "experiment config JSON")->required();
    lodo_cmd->add_option("--out", lodo_out, "output directory override");
    lodo_cmd->add_option("--root", lodo_root, "dataset root override");

    // --- ablations -------------------------------------------------------------------
    auto* mask_cmd = app.add_subcommand("ablate-channels", "single-channel mask ablation");
    std::string mask_run;
    mask_cmd->add_option("--run", mask_run, "trained run directory")->required();

    auto* ts_cmd = app.add_subcommand("ablate-timestamps", "truncated-session ablation");
    std::string ts_config, ts_out, ts_root;
    std::vector<std::size_t> ts_steps;
    ts_cmd->add_option("--config", ts_config, "experiment config JSON")->required();
    ts_cmd->add_option("--steps", ts_steps, "initial time steps to keep")->required();
    ts_cmd->add_option("--out", ts_out, "output directory override");
    ts_cmd->add_option("--root", ts_root, "dataset root override");

    // --- analyze --------------------------------------------------------------------
    auto* an_cmd = app.add_subcommand("analyze", "PCA loadings and channel correlation");
    std::string an_root, an_out;
    bool an_standardized = false;
    an_cmd->add_option("--root", an_root, "dataset root")->required();
    an_cmd->add_option("--out", an_out, "output directory")->required();
    an_cmd->add_flag("--standardized", an_standardized, "z-score rows before PCA");

    CLI11_PARSE(app, argc, argv);

    if (synth_cmd->parsed())
        return guarded([&] {
            if (synth_mixture) {
                synth_mix_cfg.seed = synth_cfg.seed;
                generate_synthetic_mixture(synth_mix_cfg, synth_out);
            } else {
                generate_synthetic(synth_cfg, synth_out);
            }
            std::cout << "wrote synthetic dataset under " << synth_out << "\n";
        });

    if (check_cmd->parsed())
        return guarded([&] {
            ChannelSchema schema =
                check_mixture ? mixture_schema() : infer_schema(check_root, Task::base_classify);
            auto manifest = scan_dataset(check_root, schema, check_mixture, check_day_order);
            Registry registry = check_registry.empty()
                                    ? (fs::exists(check_root + "/registry.tsv")
                                           ? Registry::load(check_root + "/registry.tsv")
                                           : Registry::builtin_base())
                                    : Registry::load(check_registry);
            if (check_mixture) {
                auto sessions = load_sessions(manifest, registry);
                std::cout << summary_table(summarize(sessions), schema);
            } else {
                validate_manifest(manifest, registry, check_strict);
                auto sessions = load_sessions(manifest, registry);
                std::cout << summary_table(summarize(sessions), schema);
            }
            std::cout << "ok: " << manifest.sessions.size() << " sessions\n";
        });

    if (prep_cmd->parsed())
        return guarded([&] {
            ExperimentConfig cfg = load_config(prep_config, "", "");
            Registry registry = fs::exists(cfg.dataset_root + "/registry.tsv")
                                    ? Registry::load(cfg.dataset_root + "/registry.tsv")
                                    : Registry::builtin_base();
            ChannelSchema schema = infer_schema(cfg.dataset_root, cfg.task);
            auto manifest = scan_dataset(cfg.dataset_root, schema, cfg.task == Task::mixture);
            manifest = build_splits(manifest, cfg.split_policy, cfg.holdout_day);
            auto sessions = load_sessions(manifest, registry);
            std::size_t train_count = 0, test_count = 0;
            std::vector<Window> train_windows;
            for (const auto& s : sessions) {
                auto windows = preprocess_session(
                    cfg.preprocess.diff_lag > 0
                        ? temporal_difference(s, cfg.preprocess.diff_lag)
                        : s,
                    PreprocessConfig{0, cfg.preprocess.window, cfg.preprocess.stride,
                                     cfg.preprocess.pad_final});
                if (s.split_tag == SplitTag::train) {
                    train_count += windows.size();
                    train_windows.insert(train_windows.end(), windows.begin(), windows.end());
                } else {
                    test_count += windows.size();
                }
            }
            auto stats = fit_standardizer(train_windows, schema);
            std::cout << "train windows " << train_count << ", eval windows " << test_count
                      << "\nstats id " << stats.id << "\n";
            for (std::size_t ch = 0; ch < schema.num_channels(); ++ch)
                std::cout << schema.channels[ch] << "\tmean " << format_double(stats.mean[ch])
                          << "\tstd " << format_double(stats.stddev[ch]) << "\n";
        });

    if (gcms_cmd->parsed())
        return guarded([&] {
            std::vector<GcmsEmbedding> embeddings;
            if (gcms_kind == "spec") {
                if (gcms_spectra.empty()) throw ConfigError("--kind spec needs --spectra");
                embeddings = build_spec_embeddings(load_spectra_table(gcms_spectra));
            } else {
                if (gcms_formulas.empty()) throw ConfigError("--kind atom needs --formulas");
                embeddings = build_atom_embeddings(load_formula_table(gcms_formulas));
            }
            save_embeddings(gcms_out, embeddings);
            std::cout << "wrote " << embeddings.size() << " " << gcms_kind << " embeddings to "
                      << gcms_out << "\n";
        });

    if (train_cmd->parsed())
        return guarded([&] {
            ExperimentConfig cfg = load_config(train_config, train_out, train_root);
            if (train_cmd->count("--epochs")) cfg.epochs = train_epochs;
            if (train_cmd->count("--seed")) cfg.seed = train_seed;
            if (train_cmd->count("--lr")) cfg.learning_rate = train_lr;
            if (train_cmd->count("--window")) {
                cfg.preprocess.window = train_window;
                cfg.preprocess.stride = 0;
            }
            if (train_cmd->count("--lag")) cfg.preprocess.diff_lag = train_lag;
            if (train_cmd->count("--model")) {
                auto family = nn::family_from_name(train_family);
                if (family != cfg.model.family)
                    cfg.model = nn::ModelConfig::defaults(family, cfg.model.input_dim);
            }
            RunResult result = run_experiment(cfg);
            std::cout << "run directory: " << result.run_dir << "\n";
            if (result.classification) print_classification(*result.classification);
            if (result.mixture_seen) print_mixture("test-seen", *result.mixture_seen);
            if (result.mixture_unseen) print_mixture("test-unseen", *result.mixture_unseen);
        });

    if (eval_cmd->parsed())
        return guarded([&] {
            EvalResult result = evaluate_run(eval_run);
            if (!eval_out.empty())
                write_text_file(eval_out, result.metrics_json);
            else
                std::cout << result.metrics_json;
            if (result.metrics_unseen_json && eval_out.empty())
                std::cout << *result.metrics_unseen_json;
        });

    if (sweep_cmd->parsed())
        return guarded([&] {
            ExperimentConfig cfg = load_config(sweep_config, sweep_out, sweep_root);
            auto lrs = sweep_lrs.empty() ? cfg.lr_grid : sweep_lrs;
            auto cells = sweep(cfg, lrs, sweep_windows, sweep_lags);
            const std::string table = sweep_table(cells, cfg.task);
            fs::create_directories(cfg.output_dir);
            write_text_file(cfg.output_dir + "/sweep.tsv", table);
            std::cout << table;
        });

    if (lodo_cmd->parsed())
        return guarded([&] {
            ExperimentConfig cfg = load_config(lodo_config, lodo_out, lodo_root);
            LodoResult result = leave_one_day_out(cfg);
            const std::string table = lodo_table(result);
            fs::create_directories(cfg.output_dir);
            write_text_file(cfg.output_dir + "/lodo.tsv", table);
            std::cout << table;
        });

    if (mask_cmd->parsed())
        return guarded([&] {
            ExperimentConfig cfg =
                parse_experiment_config(read_text_file(mask_run + "/config.json"));
            if (cfg.task == Task::mixture)
                throw ConfigError("channel ablation applies to classification runs");
            auto model = load_checkpoint(mask_run + "/checkpoint.json");
            Registry registry = cfg.registry_file.empty()
                                    ? (fs::exists(cfg.dataset_root + "/registry.tsv")
                                           ? Registry::load(cfg.dataset_root + "/registry.tsv")
                                           : Registry::builtin_base())
                                    : Registry::load(cfg.registry_file);
            ChannelSchema schema = infer_schema(cfg.dataset_root, cfg.task);
            auto manifest = scan_dataset(cfg.dataset_root, schema, false);
            manifest = build_splits(manifest, cfg.split_policy, cfg.holdout_day);
            auto sessions = load_sessions(manifest, registry);
            StandardizationStats stats;
            {
                auto j = nlohmann::json::parse(read_text_file(mask_run + "/stats.json"));
                stats.fitted_on = j.at("fitted_on").get<std::string>();
                stats.id = j.at("id").get<std::string>();
                stats.mean = j.at("mean").get<std::vector<double>>();
                stats.stddev = j.at("stddev").get<std::vector<double>>();
            }
            std::vector<Window> eval_windows;
            for (const auto& s : sessions) {
                if (s.split_tag != SplitTag::test_seen) continue;
                for (auto& w : preprocess_session(s, cfg.preprocess))
                    eval_windows.push_back(standardize(w, stats));
            }
            auto eval_set = pack_windows(eval_windows);
            auto rows = channel_mask_ablation(*model, eval_set, schema.channels);
            const std::string table = ablation_table(rows);
            write_text_file(mask_run + "/channel_ablation.tsv", table);
            std::cout << table;
        });

    if (ts_cmd->parsed())
        return guarded([&] {
            ExperimentConfig cfg = load_config(ts_config, ts_out, ts_root);
            auto rows = timestamp_ablation(cfg, ts_steps);
            const std::string table = timestamp_table(rows);
            fs::create_directories(cfg.output_dir);
            write_text_file(cfg.output_dir + "/timestamp_ablation.tsv", table);
            std::cout << table;
        });

    if (an_cmd->parsed())
        return guarded([&] {
            ChannelSchema schema = infer_schema(an_root, Task::base_classify);
            auto manifest = scan_dataset(an_root, schema, false);
            Registry registry = fs::exists(an_root + "/registry.tsv")
                                    ? Registry::load(an_root + "/registry.tsv")
                                    : Registry::builtin_base();
            auto sessions = load_sessions(manifest, registry);
            auto rows = session_rows(sessions);
            if (an_standardized) {
                std::vector<double> mean(schema.num_channels(), 0.0),
                    stddev(schema.num_channels(), 0.0);
                for (const auto& r : rows)
                    for (std::size_t j = 0; j < r.size(); ++j) mean[j] += r[j];
                for (double& m : mean) m /= double(rows.size());
                for (const auto& r : rows)
                    for (std::size_t j = 0; j < r.size(); ++j)
                        stddev[j] += (r[j] - mean[j]) * (r[j] - mean[j]);
                for (std::size_t j = 0; j < stddev.size(); ++j) {
                    stddev[j] = std::sqrt(stddev[j] / double(rows.size()));
                    if (stddev[j] <= 0.0) throw DataError("constant channel");
                }
                for (auto& r : rows)
                    for (std::size_t j = 0; j < r.size(); ++j) r[j] = (r[j] - mean[j]) / stddev[j];
            }
            auto result = pca(rows, 2);
            auto corr = pearson_correlation(rows);
            fs::create_directories(an_out);
            write_text_file(an_out + "/pca_loadings.tsv",
                            pca_loading_table(result, schema.channels));
            write_text_file(an_out + "/explained_variance.tsv",
                            cat("PC1\t", format_double(result.explained_variance_ratio[0]),
                                "\nPC2\t", format_double(result.explained_variance_ratio[1]),
                                "\n"));
            write_text_file(an_out + "/correlation.tsv",
                            correlation_table(corr, schema.channels));
            std::cout << "wrote PCA loadings and correlation tables to " << an_out << "\n";
        });

    return 0;
}
