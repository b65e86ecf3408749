// ============================================================================
// optim.hpp - Adam, window batching and the training / evaluation loops.
// ============================================================================
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "olfact/nn.hpp"
#include "olfact/objectives.hpp"
#include "olfact/types.hpp"

namespace olfact {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    Adam(std::vector<nn::Param> params, AdamConfig config);
    void zero_grad();
    void step();

private:
    struct Slot {
        Tensor param;
        std::vector<double> m, v;
    };
    std::vector<Slot> slots_;
    AdamConfig config_;
    long step_count_ = 0;
};

// Windows packed into one contiguous (N,w,d) buffer with aligned labels.
struct WindowDataset {
    std::size_t steps = 0;
    std::size_t channels = 0;
    std::vector<double> values;  // N*steps*channels
    std::vector<int> class_labels;
    std::vector<MixtureTarget> targets;
    std::vector<std::string> ingredients;
    std::vector<std::string> window_ids;

    std::size_t size() const { return window_ids.size(); }
    bool empty() const { return window_ids.empty(); }
    Tensor batch(const std::vector<std::size_t>& indices) const;
};

WindowDataset pack_windows(const std::vector<Window>& windows);

struct TrainConfig {
    std::size_t epochs = 90;
    std::size_t batch_size = 32;
    double lr = 1e-3;
    std::uint64_t seed = 42;
};

// Per-step loss-term breakdown; serializes to the trace CSV
// (epoch, step, total, <terms...>).
struct LossTrace {
    std::vector<std::string> term_names;  // includes leading "total"
    std::vector<std::size_t> epochs, steps;
    std::vector<std::vector<double>> rows;

    void push(std::size_t epoch, std::size_t step, std::vector<double> values);
    std::string to_csv() const;
    double first_total() const;
    double last_total() const;
};

// Optional cross-modal supervision: a fixed ingredient-level embedding table
// plus the trainable GC-MS encoder.
struct ContrastiveSupervision {
    std::map<std::string, std::vector<double>> embedding_table;
    nn::GcmsEncoder* encoder = nullptr;
    double temperature = 0.07;
    double weight = 1.0;
};

// Supervised (and optionally contrastive) classification training. Aborts
// with a NumericError naming epoch/step when the loss goes non-finite.
LossTrace train_classifier(nn::Model& model, const WindowDataset& data,
                           const TrainConfig& config,
                           ContrastiveSupervision* contrastive = nullptr);

LossTrace train_mixture(nn::Model& model, const WindowDataset& data, const TrainConfig& config,
                        const MixtureLossConfig& loss_config);

// Softmax class probabilities, (N, num_classes), evaluation mode.
std::vector<std::vector<double>> predict_class_probs(nn::Model& model, const WindowDataset& data,
                                                     std::size_t batch_size = 64);
// Mixture proportions, (N, 12), evaluation mode.
std::vector<std::vector<double>> predict_mixture_proportions(nn::Model& model,
                                                             const WindowDataset& data,
                                                             std::size_t batch_size = 64);

}  // namespace olfact
