#include "olfact/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "olfact/csv.hpp"
#include "olfact/gcms.hpp"
#include "olfact/synth.hpp"
#include "olfact/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace olfact {

const char* task_name(Task t) {
    switch (t) {
        case Task::base_classify: return "base-classify";
        case Task::base_contrastive: return "base-contrastive";
        case Task::mixture: return "mixture";
    }
    return "?";
}

Task task_from_name(const std::string& name) {
    if (name == "base-classify") return Task::base_classify;
    if (name == "base-contrastive") return Task::base_contrastive;
    if (name == "mixture") return Task::mixture;
    throw ConfigError(cat("unknown task '", name, "'"));
}

ExperimentConfig ExperimentConfig::defaults(Task task) {
    ExperimentConfig c;
    c.task = task;
    c.model = nn::ModelConfig::defaults(nn::Family::transformer, 6);
    c.preprocess.window = 50;
    c.preprocess.stride = 0;  // w/2
    if (task == Task::mixture) {
        c.epochs = 60;
        c.batch_size = 64;
        c.split_policy = SplitPolicy::mixture;
        c.preprocess.diff_lag = 0;  // mixtures train on raw windows
        c.model.input_dim = 4;
    } else {
        c.epochs = 90;
        c.batch_size = 32;
        c.split_policy = SplitPolicy::last_day;
        c.preprocess.diff_lag = 25;
    }
    return c;
}

void ExperimentConfig::validate() const {
    if (epochs < 1 || batch_size < 1) throw ConfigError("epochs and batch_size must be >= 1");
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be > 0");
    for (double lr : lr_grid)
        if (lr <= 0.0) throw ConfigError("lr_grid entries must be > 0");
    if (validation_fraction < 0.0 || validation_fraction >= 1.0)
        throw ConfigError("validation_fraction must be in [0,1)");
    if (task == Task::mixture && split_policy != SplitPolicy::mixture)
        throw ConfigError("the mixture task requires the mixture split policy");
    if (task != Task::mixture && split_policy == SplitPolicy::mixture)
        throw ConfigError("base tasks require a day-based split policy");
    preprocess.validate();
    model.validate();
    mixture.validate();
    if (contrastive.temperature <= 0.0) throw ConfigError("contrastive.temperature must be > 0");
    if (contrastive.weight < 0.0) throw ConfigError("contrastive.weight must be >= 0");
}

// --- config JSON ----------------------------------------------------------------

namespace {

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& path) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError(cat("unknown config key '", path, it.key(), "'"));
}

template <typename T>
void read_into(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(cat("config is not valid JSON: ", e.what()));
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    if (!j.contains("task")) throw ConfigError("config key 'task' is required");

    ExperimentConfig c = ExperimentConfig::defaults(task_from_name(j.at("task").get<std::string>()));
    check_keys(j,
               {"task", "dataset_root", "output_dir", "seed", "epochs", "batch_size",
                "learning_rate", "lr_grid", "split_policy", "holdout_day", "preprocess", "model",
                "contrastive", "mixture_loss", "gcms_embeddings_file", "registry_file",
                "assume_day_order", "select_by_validation", "validation_fraction",
                "truncate_steps"},
               "");
    read_into(j, "dataset_root", c.dataset_root);
    read_into(j, "output_dir", c.output_dir);
    read_into(j, "seed", c.seed);
    read_into(j, "epochs", c.epochs);
    read_into(j, "batch_size", c.batch_size);
    read_into(j, "learning_rate", c.learning_rate);
    read_into(j, "lr_grid", c.lr_grid);
    if (j.contains("split_policy"))
        c.split_policy = split_policy_from_name(j.at("split_policy").get<std::string>());
    read_into(j, "holdout_day", c.holdout_day);
    read_into(j, "gcms_embeddings_file", c.gcms_embeddings_file);
    read_into(j, "registry_file", c.registry_file);
    read_into(j, "assume_day_order", c.assume_day_order);
    read_into(j, "select_by_validation", c.select_by_validation);
    read_into(j, "validation_fraction", c.validation_fraction);
    read_into(j, "truncate_steps", c.truncate_steps);

    if (j.contains("preprocess")) {
        const json& p = j.at("preprocess");
        check_keys(p, {"diff_lag", "window", "stride", "pad_final"}, "preprocess.");
        read_into(p, "diff_lag", c.preprocess.diff_lag);
        read_into(p, "window", c.preprocess.window);
        read_into(p, "stride", c.preprocess.stride);
        read_into(p, "pad_final", c.preprocess.pad_final);
    }
    if (j.contains("model")) {
        const json& m = j.at("model");
        check_keys(m,
                   {"family", "input_dim", "latent_dim", "layers", "heads", "dropout", "pooling",
                    "use_positional", "use_cls", "mlp_hidden", "cnn_channels", "cnn_kernel",
                    "lstm_bidirectional", "batch_norm", "num_classes"},
                   "model.");
        if (m.contains("family"))
            c.model = nn::ModelConfig::defaults(
                nn::family_from_name(m.at("family").get<std::string>()), c.model.input_dim);
        read_into(m, "input_dim", c.model.input_dim);
        read_into(m, "latent_dim", c.model.latent_dim);
        read_into(m, "layers", c.model.layers);
        read_into(m, "heads", c.model.heads);
        read_into(m, "dropout", c.model.dropout);
        if (m.contains("pooling"))
            c.model.pooling = nn::pooling_from_name(m.at("pooling").get<std::string>());
        read_into(m, "use_positional", c.model.use_positional);
        read_into(m, "use_cls", c.model.use_cls);
        read_into(m, "mlp_hidden", c.model.mlp_hidden);
        read_into(m, "cnn_channels", c.model.cnn_channels);
        read_into(m, "cnn_kernel", c.model.cnn_kernel);
        read_into(m, "lstm_bidirectional", c.model.lstm_bidirectional);
        read_into(m, "batch_norm", c.model.batch_norm);
        read_into(m, "num_classes", c.model.num_classes);
    }
    if (j.contains("contrastive")) {
        const json& ct = j.at("contrastive");
        check_keys(ct,
                   {"temperature", "weight", "hidden", "output_dim", "dropout",
                    "input_layer_norm", "l2_normalize"},
                   "contrastive.");
        read_into(ct, "temperature", c.contrastive.temperature);
        read_into(ct, "weight", c.contrastive.weight);
        read_into(ct, "hidden", c.contrastive.encoder.hidden);
        read_into(ct, "output_dim", c.contrastive.encoder.output_dim);
        read_into(ct, "dropout", c.contrastive.encoder.dropout);
        read_into(ct, "input_layer_norm", c.contrastive.encoder.input_layer_norm);
        read_into(ct, "l2_normalize", c.contrastive.encoder.l2_normalize);
    }
    if (j.contains("mixture_loss")) {
        const json& m = j.at("mixture_loss");
        check_keys(m, {"alpha", "beta", "epsilon", "focal_alpha", "focal_gamma"},
                   "mixture_loss.");
        read_into(m, "alpha", c.mixture.alpha);
        read_into(m, "beta", c.mixture.beta);
        read_into(m, "epsilon", c.mixture.epsilon);
        read_into(m, "focal_alpha", c.mixture.focal_alpha);
        read_into(m, "focal_gamma", c.mixture.focal_gamma);
    }
    c.validate();
    return c;
}

namespace {

json model_config_json(const nn::ModelConfig& m) {
    json out;
    out["family"] = nn::family_name(m.family);
    out["input_dim"] = m.input_dim;
    out["latent_dim"] = m.latent_dim;
    out["layers"] = m.layers;
    out["heads"] = m.heads;
    out["dropout"] = m.dropout;
    out["pooling"] = nn::pooling_name(m.pooling);
    out["use_positional"] = m.use_positional;
    out["use_cls"] = m.use_cls;
    out["mlp_hidden"] = m.mlp_hidden;
    out["cnn_channels"] = m.cnn_channels;
    out["cnn_kernel"] = m.cnn_kernel;
    out["lstm_bidirectional"] = m.lstm_bidirectional;
    out["batch_norm"] = m.batch_norm;
    out["num_classes"] = m.num_classes;
    return out;
}

nn::ModelConfig model_config_from_json(const json& m) {
    nn::ModelConfig c = nn::ModelConfig::defaults(
        nn::family_from_name(m.at("family").get<std::string>()),
        m.at("input_dim").get<std::size_t>());
    c.latent_dim = m.at("latent_dim").get<std::size_t>();
    c.layers = m.at("layers").get<std::size_t>();
    c.heads = m.at("heads").get<std::size_t>();
    c.dropout = m.at("dropout").get<double>();
    c.pooling = nn::pooling_from_name(m.at("pooling").get<std::string>());
    c.use_positional = m.at("use_positional").get<bool>();
    c.use_cls = m.at("use_cls").get<bool>();
    c.mlp_hidden = m.at("mlp_hidden").get<std::vector<std::size_t>>();
    c.cnn_channels = m.at("cnn_channels").get<std::vector<std::size_t>>();
    c.cnn_kernel = m.at("cnn_kernel").get<std::size_t>();
    c.lstm_bidirectional = m.at("lstm_bidirectional").get<bool>();
    c.batch_norm = m.at("batch_norm").get<bool>();
    c.num_classes = m.at("num_classes").get<std::size_t>();
    return c;
}

}  // namespace

std::string experiment_config_json(const ExperimentConfig& c) {
    json j;
    j["task"] = task_name(c.task);
    j["dataset_root"] = c.dataset_root;
    j["output_dir"] = c.output_dir;
    j["seed"] = c.seed;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["learning_rate"] = c.learning_rate;
    j["lr_grid"] = c.lr_grid;
    j["split_policy"] = split_policy_name(c.split_policy);
    j["holdout_day"] = c.holdout_day;
    j["preprocess"] = {{"diff_lag", c.preprocess.diff_lag},
                       {"window", c.preprocess.window},
                       {"stride", c.preprocess.stride},
                       {"pad_final", c.preprocess.pad_final}};
    j["model"] = model_config_json(c.model);
    j["contrastive"] = {{"temperature", c.contrastive.temperature},
                        {"weight", c.contrastive.weight},
                        {"hidden", c.contrastive.encoder.hidden},
                        {"output_dim", c.contrastive.encoder.output_dim},
                        {"dropout", c.contrastive.encoder.dropout},
                        {"input_layer_norm", c.contrastive.encoder.input_layer_norm},
                        {"l2_normalize", c.contrastive.encoder.l2_normalize}};
    j["mixture_loss"] = {{"alpha", c.mixture.alpha},
                         {"beta", c.mixture.beta},
                         {"epsilon", c.mixture.epsilon},
                         {"focal_alpha", c.mixture.focal_alpha},
                         {"focal_gamma", c.mixture.focal_gamma}};
    j["gcms_embeddings_file"] = c.gcms_embeddings_file;
    j["registry_file"] = c.registry_file;
    j["assume_day_order"] = c.assume_day_order;
    j["select_by_validation"] = c.select_by_validation;
    j["validation_fraction"] = c.validation_fraction;
    j["truncate_steps"] = c.truncate_steps;
    return j.dump(2) + "\n";
}

// --- pipeline -------------------------------------------------------------------

ChannelSchema infer_schema(const std::string& dataset_root, Task task) {
    if (task == Task::mixture) return mixture_schema();
    if (!fs::is_directory(dataset_root))
        throw DataError(cat("dataset root '", dataset_root, "' is not a directory"));
    // sniff the header of the lexicographically first session file
    std::vector<std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(dataset_root))
        if (entry.is_regular_file() && entry.path().extension() == ".csv")
            files.push_back(entry.path().string());
    if (files.empty()) throw DataError(cat("no session files under '", dataset_root, "'"));
    std::sort(files.begin(), files.end());
    std::ifstream in(files.front());
    std::string header;
    if (!std::getline(in, header)) throw DataError(cat(files.front(), ": empty file"));
    ChannelSchema schema;
    schema.sample_rate_hz = 1.0;
    std::stringstream ss(header);
    std::string col;
    while (std::getline(ss, col, ',')) {
        if (!col.empty() && col.back() == '\r') col.pop_back();
        schema.channels.push_back(col);
    }
    ChannelSchema base = base_schema();
    bool is_base = schema.channels.size() == base.channels.size();
    if (is_base)
        for (std::size_t i = 0; i < base.channels.size(); ++i)
            is_base = is_base && schema.channel_index(base.channels[i]) >= 0;
    return is_base ? base : schema;
}

namespace {

struct RegistryInfo {
    std::size_t num_classes = 0;
    std::string version;
    std::vector<int> category_of_class;
    std::vector<std::string> category_names;
    Registry registry;
};

RegistryInfo load_registry_info(const ExperimentConfig& config) {
    RegistryInfo info;
    std::string path = config.registry_file;
    if (path.empty() && fs::exists(config.dataset_root + "/registry.tsv"))
        path = config.dataset_root + "/registry.tsv";
    info.registry = path.empty() ? Registry::builtin_base() : Registry::load(path);
    info.num_classes = info.registry.size();
    info.version = info.registry.version();
    for (const auto& l : info.registry.labels())
        info.category_of_class.push_back(static_cast<int>(l.category));
    for (std::size_t c = 0; c < kNumCategories; ++c)
        info.category_names.push_back(category_name(static_cast<Category>(c)));
    return info;
}

struct PreparedData {
    WindowDataset train, test_seen, test_unseen;
    StandardizationStats stats;
    ChannelSchema schema;
    std::vector<std::string> train_session_ids;
};

std::vector<Window> preprocess_split(const std::vector<SensorSession>& sessions, SplitTag tag,
                                     const PreprocessConfig& cfg, std::size_t truncate_steps) {
    std::vector<Window> windows;
    for (const auto& s : sessions) {
        if (s.split_tag != tag) continue;
        SensorSession work = s;
        if (truncate_steps > 0) {
            if (truncate_steps > s.num_steps)
                throw DataError(cat("session ", s.session_id, ": cannot truncate to ",
                                    truncate_steps, " steps, only ", s.num_steps, " recorded"));
            work.num_steps = truncate_steps;
            work.readings.resize(truncate_steps * s.schema.num_channels());
        }
        auto cut = preprocess_session(work, cfg);
        windows.insert(windows.end(), cut.begin(), cut.end());
    }
    return windows;
}

PreparedData prepare_data(const ExperimentConfig& config, const RegistryInfo& registry) {
    PreparedData out;
    out.schema = infer_schema(config.dataset_root, config.task);
    if (config.truncate_steps > 0 &&
        config.truncate_steps <
            config.preprocess.window + static_cast<std::size_t>(config.preprocess.diff_lag))
        throw DataError(cat("truncation to ", config.truncate_steps,
                            " steps leaves no full window (need >= ",
                            config.preprocess.window +
                                static_cast<std::size_t>(config.preprocess.diff_lag),
                            ")"));

    auto manifest = scan_dataset(config.dataset_root, out.schema, config.task == Task::mixture,
                                 config.assume_day_order);
    manifest = build_splits(manifest, config.split_policy, config.holdout_day);
    auto sessions = load_sessions(manifest, registry.registry);

    auto train_windows =
        preprocess_split(sessions, SplitTag::train, config.preprocess, config.truncate_steps);
    if (train_windows.empty()) throw DataError("no training windows after preprocessing");
    out.stats = fit_standardizer(train_windows, out.schema, "train");
    out.train = pack_windows(standardize(train_windows, out.stats));
    out.test_seen = pack_windows(standardize(
        preprocess_split(sessions, SplitTag::test_seen, config.preprocess, config.truncate_steps),
        out.stats));
    out.test_unseen = pack_windows(standardize(
        preprocess_split(sessions, SplitTag::test_unseen, config.preprocess,
                         config.truncate_steps),
        out.stats));
    for (const auto& s : sessions)
        if (s.split_tag == SplitTag::train) out.train_session_ids.push_back(s.session_id);
    return out;
}

std::map<std::string, std::vector<double>> load_gcms_table(const ExperimentConfig& config) {
    std::vector<GcmsEmbedding> embeddings;
    std::string path = config.gcms_embeddings_file;
    if (path.empty() && fs::exists(config.dataset_root + "/gcms_embeddings.tsv"))
        path = config.dataset_root + "/gcms_embeddings.tsv";
    if (!path.empty()) {
        embeddings = load_embeddings(path);
    } else if (fs::exists(config.dataset_root + "/gcms_spectra.tsv")) {
        embeddings =
            build_spec_embeddings(load_spectra_table(config.dataset_root + "/gcms_spectra.tsv"));
    } else {
        throw DataError(
            "cross-modal training needs gcms_embeddings_file, <root>/gcms_embeddings.tsv or "
            "<root>/gcms_spectra.tsv");
    }
    std::map<std::string, std::vector<double>> table;
    for (auto& e : embeddings) {
        if (!table.emplace(e.ingredient, e.vector).second)
            throw DataError(cat("duplicate GC-MS embedding for '", e.ingredient, "'"));
        if (e.vector.size() != embeddings.front().vector.size())
            throw DataError("GC-MS embeddings have inconsistent widths");
    }
    return table;
}

void write_run_file(const std::string& dir, const std::string& name,
                    const std::string& content) {
    write_text_file(dir + "/" + name, content);
}

json stats_json(const StandardizationStats& stats) {
    json j;
    j["fitted_on"] = stats.fitted_on;
    j["id"] = stats.id;
    j["mean"] = stats.mean;
    j["stddev"] = stats.stddev;
    return j;
}

StandardizationStats stats_from_json(const json& j) {
    StandardizationStats s;
    s.fitted_on = j.at("fitted_on").get<std::string>();
    s.id = j.at("id").get<std::string>();
    s.mean = j.at("mean").get<std::vector<double>>();
    s.stddev = j.at("stddev").get<std::vector<double>>();
    return s;
}

}  // namespace

// --- checkpoints ----------------------------------------------------------------

void save_checkpoint(const std::string& path, nn::Model& model, nn::GcmsEncoder* encoder) {
    json j;
    j["format"] = "olfact-checkpoint";
    j["version"] = 1;
    j["model"] = model_config_json(model.config());
    json params;
    for (auto& p : model.named_params()) params[p.name] = p.tensor.values();
    j["params"] = std::move(params);
    json buffers;
    for (auto& b : model.named_buffers()) buffers[b.name] = *b.values;
    j["buffers"] = std::move(buffers);
    if (encoder) {
        json enc;
        enc["config"] = {{"input_dim", encoder->config().input_dim},
                         {"hidden", encoder->config().hidden},
                         {"output_dim", encoder->config().output_dim},
                         {"dropout", encoder->config().dropout},
                         {"input_layer_norm", encoder->config().input_layer_norm},
                         {"l2_normalize", encoder->config().l2_normalize}};
        json enc_params;
        for (auto& p : encoder->named_params()) enc_params[p.name] = p.tensor.values();
        enc["params"] = std::move(enc_params);
        j["gcms_encoder"] = std::move(enc);
    }
    write_text_file(path, j.dump(2) + "\n");
}

std::unique_ptr<nn::Model> load_checkpoint(const std::string& path) {
    json j = json::parse(read_text_file(path));
    if (j.at("format").get<std::string>() != "olfact-checkpoint")
        throw DataError(cat(path, ": not an olfact checkpoint"));
    auto model = std::make_unique<nn::Model>(model_config_from_json(j.at("model")), 0);
    const json& params = j.at("params");
    for (auto& p : model->named_params()) {
        if (!params.contains(p.name))
            throw DataError(cat(path, ": checkpoint is missing parameter '", p.name, "'"));
        auto values = params.at(p.name).get<std::vector<double>>();
        if (values.size() != p.tensor.size())
            throw DataError(cat(path, ": parameter '", p.name, "' has wrong size"));
        std::copy(values.begin(), values.end(), p.tensor.data());
    }
    const json& buffers = j.at("buffers");
    for (auto& b : model->named_buffers()) {
        if (!buffers.contains(b.name))
            throw DataError(cat(path, ": checkpoint is missing buffer '", b.name, "'"));
        *b.values = buffers.at(b.name).get<std::vector<double>>();
    }
    return model;
}

// --- run ------------------------------------------------------------------------

double RunResult::acc1() const {
    if (classification) return classification->acc1;
    if (mixture_seen) return mixture_seen->top1_at_01;
    throw DataError("run produced no report");
}

RunResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    if (config.dataset_root.empty()) throw ConfigError("dataset_root is required");
    if (config.output_dir.empty())
        throw ConfigError("output_dir is required (config key, --out, or OLFACT_OUTPUT_DIR)");
    if (config.task == Task::mixture && config.preprocess.diff_lag != 0)
        std::cerr << "warning: mixture models train on raw (non-differenced) windows; "
                     "diff_lag="
                  << config.preprocess.diff_lag << " was requested\n";

    RegistryInfo registry = load_registry_info(config);
    ExperimentConfig resolved = config;
    resolved.model.num_classes =
        config.task == Task::mixture ? resolved.model.num_classes : registry.num_classes;

    PreparedData data = prepare_data(resolved, registry);
    resolved.model.input_dim = data.schema.num_channels();
    resolved.model.validate();

    fs::create_directories(resolved.output_dir);
    const std::string& dir = resolved.output_dir;

    nn::Model model(resolved.model, resolved.seed);
    std::unique_ptr<nn::GcmsEncoder> encoder;
    ContrastiveSupervision supervision;
    TrainConfig tc{resolved.epochs, resolved.batch_size, resolved.learning_rate, resolved.seed};

    RunResult result;
    result.run_dir = dir;
    if (resolved.task == Task::mixture) {
        result.trace = train_mixture(model, data.train, tc, resolved.mixture);
    } else if (resolved.task == Task::base_contrastive) {
        supervision.embedding_table = load_gcms_table(resolved);
        nn::GcmsEncoderConfig enc_cfg = resolved.contrastive.encoder;
        enc_cfg.input_dim = supervision.embedding_table.begin()->second.size();
        enc_cfg.output_dim = model.embed_dim();  // cosine needs matching widths
        encoder = std::make_unique<nn::GcmsEncoder>(enc_cfg, resolved.seed + 1);
        supervision.encoder = encoder.get();
        supervision.temperature = resolved.contrastive.temperature;
        supervision.weight = resolved.contrastive.weight;
        result.trace = train_classifier(model, data.train, tc, &supervision);
    } else {
        result.trace = train_classifier(model, data.train, tc);
    }

    // evaluation on the held-out split(s); predictions go to a per-window file
    auto prediction_rows = [](const WindowDataset& split,
                              const std::vector<std::vector<double>>& scores) {
        std::ostringstream os;
        for (std::size_t i = 0; i < split.size(); ++i) {
            os << split.window_ids[i];
            for (double v : scores[i]) os << "\t" << format_double(v);
            os << "\n";
        }
        return os.str();
    };
    if (resolved.task == Task::mixture) {
        if (data.test_seen.empty()) throw DataError("mixture dataset has no test-seen split");
        auto seen_pred = predict_mixture_proportions(model, data.test_seen);
        result.mixture_seen = mixture_report(seen_pred, data.test_seen.targets);
        write_run_file(dir, "predictions.tsv", prediction_rows(data.test_seen, seen_pred));
        if (!data.test_unseen.empty()) {
            auto unseen_pred = predict_mixture_proportions(model, data.test_unseen);
            result.mixture_unseen = mixture_report(unseen_pred, data.test_unseen.targets);
            write_run_file(dir, "predictions_unseen.tsv",
                           prediction_rows(data.test_unseen, unseen_pred));
        }
    } else {
        if (data.test_seen.empty()) throw DataError("dataset has no test split");
        auto probs = predict_class_probs(model, data.test_seen);
        result.classification = classification_report(
            probs, data.test_seen.class_labels, registry.num_classes,
            &registry.category_of_class, &registry.category_names);
        write_run_file(dir, "predictions.tsv", prediction_rows(data.test_seen, probs));
    }

    // self-describing run directory
    const std::string config_json = experiment_config_json(resolved);
    write_run_file(dir, "config.json", config_json);
    write_run_file(dir, "stats.json", stats_json(data.stats).dump(2) + "\n");
    save_checkpoint(dir + "/checkpoint.json", model, encoder.get());
    write_run_file(dir, "loss_trace.csv", result.trace.to_csv());
    json prov;
    prov["config_hash"] = fnv1a_hex(config_json);
    prov["registry_version"] = registry.version;
    prov["stats_id"] = data.stats.id;
    prov["schema"] = data.schema.channels;
    prov["train_windows"] = data.train.size();
    prov["test_seen_windows"] = data.test_seen.size();
    prov["test_unseen_windows"] = data.test_unseen.size();
    prov["diff_lag"] = resolved.preprocess.diff_lag;
    prov["window"] = resolved.preprocess.window;
    write_run_file(dir, "provenance.json", prov.dump(2) + "\n");
    if (result.classification) {
        write_run_file(dir, "metrics.json", to_json(*result.classification));
        write_run_file(dir, "metrics.tsv", to_tsv(*result.classification));
        write_run_file(dir, "confusion.csv", confusion_csv(result.classification->confusion));
    }
    if (result.mixture_seen) {
        write_run_file(dir, "metrics.json", to_json(*result.mixture_seen));
        write_run_file(dir, "metrics.tsv", to_tsv(*result.mixture_seen));
    }
    if (result.mixture_unseen)
        write_run_file(dir, "metrics_unseen.json", to_json(*result.mixture_unseen));
    return result;
}

EvalResult evaluate_run(const std::string& run_dir) {
    ExperimentConfig config = parse_experiment_config(read_text_file(run_dir + "/config.json"));
    RegistryInfo registry = load_registry_info(config);
    auto stats = stats_from_json(json::parse(read_text_file(run_dir + "/stats.json")));
    auto model = load_checkpoint(run_dir + "/checkpoint.json");

    ChannelSchema schema = infer_schema(config.dataset_root, config.task);
    auto manifest = scan_dataset(config.dataset_root, schema, config.task == Task::mixture,
                                 config.assume_day_order);
    manifest = build_splits(manifest, config.split_policy, config.holdout_day);
    auto sessions = load_sessions(manifest, registry.registry);

    EvalResult out;
    if (config.task == Task::mixture) {
        auto seen = pack_windows(standardize(
            preprocess_split(sessions, SplitTag::test_seen, config.preprocess,
                             config.truncate_steps),
            stats));
        out.metrics_json =
            to_json(mixture_report(predict_mixture_proportions(*model, seen), seen.targets));
        auto unseen = pack_windows(standardize(
            preprocess_split(sessions, SplitTag::test_unseen, config.preprocess,
                             config.truncate_steps),
            stats));
        if (!unseen.empty())
            out.metrics_unseen_json = to_json(
                mixture_report(predict_mixture_proportions(*model, unseen), unseen.targets));
    } else {
        auto test = pack_windows(standardize(
            preprocess_split(sessions, SplitTag::test_seen, config.preprocess,
                             config.truncate_steps),
            stats));
        out.metrics_json = to_json(classification_report(
            predict_class_probs(*model, test), test.class_labels, registry.num_classes,
            &registry.category_of_class, &registry.category_names));
    }
    return out;
}

// --- sweep ----------------------------------------------------------------------

namespace {

// splits off a session-level validation subset of the train split
void split_validation(std::vector<SensorSession>& sessions, double fraction,
                      std::uint64_t seed, std::vector<std::string>* val_ids) {
    std::vector<std::size_t> train_idx;
    for (std::size_t i = 0; i < sessions.size(); ++i)
        if (sessions[i].split_tag == SplitTag::train) train_idx.push_back(i);
    Rng rng(seed ^ 0x5eed0f0ull);
    rng.shuffle(train_idx);
    const auto hold = static_cast<std::size_t>(std::floor(fraction * double(train_idx.size())));
    for (std::size_t i = 0; i < hold; ++i) {
        sessions[train_idx[i]].split_tag = SplitTag::test_unseen;  // reused as validation bucket
        if (val_ids) val_ids->push_back(sessions[train_idx[i]].session_id);
    }
}

}  // namespace

namespace {

SweepCell run_sweep_cell(const ExperimentConfig& config, std::size_t w, int p, double lr) {
    SweepCell cell;
    cell.window = w;
    cell.diff_lag = p;
    cell.lr = lr;
    ExperimentConfig run_cfg = config;
    run_cfg.preprocess.window = w;
    run_cfg.preprocess.stride = 0;
    run_cfg.preprocess.diff_lag = p;
    run_cfg.learning_rate = lr;
    run_cfg.output_dir = cat(config.output_dir, "/w", w, "_p", p, "_lr", format_double(lr));
    try {
        RegistryInfo registry = load_registry_info(run_cfg);
        run_cfg.model.num_classes = run_cfg.task == Task::mixture ? run_cfg.model.num_classes
                                                                  : registry.num_classes;

        ChannelSchema schema = infer_schema(run_cfg.dataset_root, run_cfg.task);
        run_cfg.model.input_dim = schema.num_channels();
        auto manifest = scan_dataset(run_cfg.dataset_root, schema,
                                     run_cfg.task == Task::mixture, run_cfg.assume_day_order);
        manifest = build_splits(manifest, run_cfg.split_policy, run_cfg.holdout_day);
        auto sessions = load_sessions(manifest, registry.registry);
        const bool with_validation = run_cfg.select_by_validation &&
                                     run_cfg.validation_fraction > 0.0 &&
                                     run_cfg.task != Task::mixture;
        if (with_validation)
            split_validation(sessions, run_cfg.validation_fraction, run_cfg.seed, nullptr);

        auto train_windows = preprocess_split(sessions, SplitTag::train, run_cfg.preprocess, 0);
        auto stats = fit_standardizer(train_windows, schema, "train");
        auto train = pack_windows(standardize(train_windows, stats));
        auto test = pack_windows(standardize(
            preprocess_split(sessions, SplitTag::test_seen, run_cfg.preprocess, 0), stats));
        auto validation = pack_windows(standardize(
            preprocess_split(sessions, SplitTag::test_unseen, run_cfg.preprocess, 0), stats));

        TrainConfig tc{run_cfg.epochs, run_cfg.batch_size, lr, run_cfg.seed};
        if (run_cfg.task == Task::mixture) {
            nn::Model model(run_cfg.model, run_cfg.seed);
            train_mixture(model, train, tc, run_cfg.mixture);
            cell.mixture = mixture_report(predict_mixture_proportions(model, test), test.targets);
        } else {
            // sensor-only baseline
            nn::Model sensor_model(run_cfg.model, run_cfg.seed);
            train_classifier(sensor_model, train, tc);
            cell.sensor_only = classification_report(
                predict_class_probs(sensor_model, test), test.class_labels, registry.num_classes,
                &registry.category_of_class, &registry.category_names);
            nn::Model* selected_model = &sensor_model;

            std::unique_ptr<nn::Model> cm_model;
            std::unique_ptr<nn::GcmsEncoder> encoder;
            if (run_cfg.task == Task::base_contrastive) {
                ContrastiveSupervision sup;
                sup.embedding_table = load_gcms_table(run_cfg);
                nn::GcmsEncoderConfig enc_cfg = run_cfg.contrastive.encoder;
                enc_cfg.input_dim = sup.embedding_table.begin()->second.size();
                cm_model = std::make_unique<nn::Model>(run_cfg.model, run_cfg.seed);
                enc_cfg.output_dim = cm_model->embed_dim();
                encoder = std::make_unique<nn::GcmsEncoder>(enc_cfg, run_cfg.seed + 1);
                sup.encoder = encoder.get();
                sup.temperature = run_cfg.contrastive.temperature;
                sup.weight = run_cfg.contrastive.weight;
                train_classifier(*cm_model, train, tc, &sup);
                cell.cross_modal = classification_report(
                    predict_class_probs(*cm_model, test), test.class_labels,
                    registry.num_classes, &registry.category_of_class, &registry.category_names);
                selected_model = cm_model.get();
            }
            if (with_validation && !validation.empty())
                cell.validation_acc1 =
                    topk_accuracy(predict_class_probs(*selected_model, validation),
                                  validation.class_labels, 1);
        }
    } catch (const std::exception& e) {
        cell.failed = true;
        cell.error = e.what();
    }
    return cell;
}

}  // namespace

std::vector<SweepCell> sweep(const ExperimentConfig& config, const std::vector<double>& lrs,
                             const std::vector<std::size_t>& windows,
                             const std::vector<int>& lags) {
    if (lrs.empty() || windows.empty() || lags.empty())
        throw ConfigError("sweep: the lr/window/lag grid must be non-empty");
    if (config.dataset_root.empty()) throw ConfigError("dataset_root is required");
    if (config.output_dir.empty()) throw ConfigError("output_dir is required");

    struct CellSpec {
        std::size_t window;
        int lag;
        double lr;
    };
    std::vector<CellSpec> grid;
    for (std::size_t w : windows)
        for (int p : lags)
            for (double lr : lrs) grid.push_back({w, p, lr});

    // cells are independent: isolated run directories, no shared mutable state
    std::vector<SweepCell> cells(grid.size());
    run_parallel(grid.size(), [&](std::size_t i) {
        cells[i] = run_sweep_cell(config, grid[i].window, grid[i].lag, grid[i].lr);
    });

    // mark the best validation cell within each (w,p) group
    if (config.select_by_validation)
        for (std::size_t w : windows)
            for (int p : lags) {
                SweepCell* best = nullptr;
                for (auto& cell : cells)
                    if (!cell.failed && cell.window == w && cell.diff_lag == p &&
                        (!best || cell.validation_acc1 > best->validation_acc1))
                        best = &cell;
                if (best) best->selected = true;
            }
    return cells;
}

std::string sweep_table(const std::vector<SweepCell>& cells, Task task) {
    std::ostringstream os;
    if (task == Task::mixture) {
        os << "window\tp\tlr\tmae\ttop1_at_0.1\tdynamic_topk\tstatus\n";
        for (const auto& c : cells) {
            os << c.window << "\t" << c.diff_lag << "\t" << format_double(c.lr) << "\t";
            if (c.failed)
                os << "-\t-\t-\tfailed: " << c.error << "\n";
            else
                os << format_double(c.mixture->mae) << "\t" << format_double(c.mixture->top1_at_01)
                   << "\t" << format_double(c.mixture->dyn_topk) << "\tok\n";
        }
        return os.str();
    }
    os << "window\tp\tlr\tacc1\tacc5\tf1\txm_acc1\txm_acc5\txm_f1\tdelta_acc1\tselected\tstatus\n";
    for (const auto& c : cells) {
        os << c.window << "\t" << c.diff_lag << "\t" << format_double(c.lr) << "\t";
        if (c.failed) {
            os << "-\t-\t-\t-\t-\t-\t-\t-\tfailed: " << c.error << "\n";
            continue;
        }
        os << format_double(c.sensor_only->acc1) << "\t" << format_double(c.sensor_only->acc5)
           << "\t" << format_double(c.sensor_only->macro_f1) << "\t";
        if (c.cross_modal)
            os << format_double(c.cross_modal->acc1) << "\t" << format_double(c.cross_modal->acc5)
               << "\t" << format_double(c.cross_modal->macro_f1) << "\t"
               << format_double(c.cross_modal->acc1 - c.sensor_only->acc1) << "\t";
        else
            os << "-\t-\t-\t-\t";
        os << (c.selected ? "*" : "") << "\tok\n";
    }
    return os.str();
}

// --- leave-one-day-out ------------------------------------------------------------

LodoResult leave_one_day_out(const ExperimentConfig& config) {
    if (config.task == Task::mixture)
        throw ConfigError("leave-one-day-out applies to the base dataset");
    LodoResult result;
    result.folds.resize(6);
    // folds are independent runs with isolated output directories
    run_parallel(6, [&](std::size_t i) {
        const int day = static_cast<int>(i) + 1;
        ExperimentConfig fold = config;
        fold.split_policy = SplitPolicy::leave_one_day_out;
        fold.holdout_day = day;
        fold.output_dir = cat(config.output_dir, "/day", day);
        RunResult run = run_experiment(fold);
        result.folds[i] = {day, run.classification->acc1, run.classification->acc5,
                           run.classification->macro_f1};
    });
    std::vector<double> a1, a5, f1;
    for (const auto& fold : result.folds) {
        a1.push_back(fold.acc1);
        a5.push_back(fold.acc5);
        f1.push_back(fold.f1);
    }
    auto mean_std = [](const std::vector<double>& v) {
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= double(v.size());
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        return std::pair<double, double>{mean, std::sqrt(var / double(v.size()))};
    };
    std::tie(result.mean_acc1, result.std_acc1) = mean_std(a1);
    std::tie(result.mean_acc5, result.std_acc5) = mean_std(a5);
    std::tie(result.mean_f1, result.std_f1) = mean_std(f1);
    return result;
}

std::string lodo_table(const LodoResult& result) {
    std::ostringstream os;
    os << "day\tacc1\tacc5\tmacro_f1\n";
    for (const auto& fold : result.folds)
        os << fold.day << "\t" << format_double(fold.acc1) << "\t" << format_double(fold.acc5)
           << "\t" << format_double(fold.f1) << "\n";
    os << "mean\t" << format_double(result.mean_acc1) << "\t" << format_double(result.mean_acc5)
       << "\t" << format_double(result.mean_f1) << "\n";
    os << "std\t" << format_double(result.std_acc1) << "\t" << format_double(result.std_acc5)
       << "\t" << format_double(result.std_f1) << "\n";
    return os.str();
}

// --- timestamp ablation -------------------------------------------------------------

std::vector<TimestampAblationRow> timestamp_ablation(const ExperimentConfig& config,
                                                     const std::vector<std::size_t>& steps) {
    if (steps.empty()) throw ConfigError("timestamp ablation: empty step list");
    std::vector<TimestampAblationRow> rows;
    for (std::size_t n : steps) {
        ExperimentConfig cfg = config;
        cfg.truncate_steps = n;
        cfg.output_dir = cat(config.output_dir, "/steps", n);
        RunResult run = run_experiment(cfg);
        TimestampAblationRow row;
        row.steps = n;
        row.acc1 = run.classification->acc1;
        row.acc5 = run.classification->acc5;
        row.f1 = run.classification->macro_f1;
        rows.push_back(row);
    }
    return rows;
}

std::string timestamp_table(const std::vector<TimestampAblationRow>& rows) {
    std::ostringstream os;
    os << "steps\tacc1\tacc5\tmacro_f1\n";
    for (const auto& r : rows)
        os << r.steps << "\t" << format_double(r.acc1) << "\t" << format_double(r.acc5) << "\t"
           << format_double(r.f1) << "\n";
    return os.str();
}

}  // namespace olfact
