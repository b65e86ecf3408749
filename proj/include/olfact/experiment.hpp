// ============================================================================
// experiment.hpp - Config-driven experiment runner: end-to-end training runs,
// lr/window/lag sweeps, leave-one-day-out evaluation and the timestamp
// ablation, with self-describing run directories.
// ============================================================================
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "olfact/manifest.hpp"
#include "olfact/metrics.hpp"
#include "olfact/nn.hpp"
#include "olfact/objectives.hpp"
#include "olfact/optim.hpp"
#include "olfact/preprocess.hpp"

namespace olfact {

enum class Task { base_classify, base_contrastive, mixture };
const char* task_name(Task t);
Task task_from_name(const std::string& name);

struct ExperimentConfig {
    Task task = Task::base_classify;
    std::string dataset_root;
    std::string output_dir;
    std::uint64_t seed = 42;
    std::size_t epochs = 90;      // 60 for the mixture task
    std::size_t batch_size = 32;  // 64 for the mixture task
    double learning_rate = 1e-3;
    std::vector<double> lr_grid = {3e-4, 1e-3, 3e-3};
    SplitPolicy split_policy = SplitPolicy::last_day;
    int holdout_day = 6;
    PreprocessConfig preprocess;  // w=50, stride w/2; p=25 base, p=0 mixture
    nn::ModelConfig model;
    ContrastiveConfig contrastive;
    MixtureLossConfig mixture;
    std::string gcms_embeddings_file;  // empty: <root>/gcms_embeddings.tsv,
                                       // else derived from <root>/gcms_spectra.tsv
    std::string registry_file;         // empty: <root>/registry.tsv, else built-in
    bool assume_day_order = false;     // infer missing day indices from file order
    bool select_by_validation = true;  // sweep lr selection
    double validation_fraction = 0.1;  // train sessions held out for selection
    std::size_t truncate_steps = 0;    // 0 = full sessions

    // Task-consistent defaults (epochs, batch size, diff lag).
    static ExperimentConfig defaults(Task task);
    void validate() const;
};

// Strict JSON codec: unknown keys are errors with field paths.
ExperimentConfig parse_experiment_config(const std::string& json_text);
std::string experiment_config_json(const ExperimentConfig& config);

struct RunResult {
    std::string run_dir;
    std::optional<ClassificationReport> classification;
    std::optional<MixtureReport> mixture_seen;
    std::optional<MixtureReport> mixture_unseen;
    LossTrace trace;

    double acc1() const;
};

// Full pipeline: ingest, split, preprocess, train, evaluate, and write a
// self-describing run directory (config, provenance, stats, checkpoint,
// loss trace, metric reports).
RunResult run_experiment(const ExperimentConfig& config);

// Re-evaluates a stored checkpoint against its recorded config; reproduces
// the stored metric reports byte-for-byte.
struct EvalResult {
    std::string metrics_json;
    std::optional<std::string> metrics_unseen_json;
};
EvalResult evaluate_run(const std::string& run_dir);

struct SweepCell {
    std::size_t window = 0;
    int diff_lag = 0;
    double lr = 0;
    bool selected = false;  // best validation acc within its (w,p) group
    bool failed = false;
    std::string error;
    std::optional<ClassificationReport> sensor_only;
    std::optional<ClassificationReport> cross_modal;
    std::optional<MixtureReport> mixture;
    double validation_acc1 = 0;
};

// Grid over lr x window x lag. For the cross-modal task each cell trains a
// sensor-only baseline as well and reports the accuracy delta. Failed cells
// are marked and the sweep continues.
std::vector<SweepCell> sweep(const ExperimentConfig& config, const std::vector<double>& lrs,
                             const std::vector<std::size_t>& windows,
                             const std::vector<int>& lags);
std::string sweep_table(const std::vector<SweepCell>& cells, Task task);

struct LodoFold {
    int day = 0;
    double acc1 = 0, acc5 = 0, f1 = 0;
};
struct LodoResult {
    std::vector<LodoFold> folds;  // exactly 6
    double mean_acc1 = 0, std_acc1 = 0;
    double mean_acc5 = 0, std_acc5 = 0;
    double mean_f1 = 0, std_f1 = 0;
};

LodoResult leave_one_day_out(const ExperimentConfig& config);
std::string lodo_table(const LodoResult& result);

struct TimestampAblationRow {
    std::size_t steps = 0;
    double acc1 = 0, acc5 = 0, f1 = 0;
};

// Trains and evaluates with sessions truncated to their first n steps.
std::vector<TimestampAblationRow> timestamp_ablation(const ExperimentConfig& config,
                                                     const std::vector<std::size_t>& steps);
std::string timestamp_table(const std::vector<TimestampAblationRow>& rows);

// Column sniffing for dataset roots whose schema is not the standard one.
ChannelSchema infer_schema(const std::string& dataset_root, Task task);

// Model checkpoints: config + named parameter/buffer arrays as JSON.
void save_checkpoint(const std::string& path, nn::Model& model,
                     nn::GcmsEncoder* encoder = nullptr);
std::unique_ptr<nn::Model> load_checkpoint(const std::string& path);

}  // namespace olfact
