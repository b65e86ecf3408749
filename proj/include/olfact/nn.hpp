// ============================================================================
// nn.hpp - Layers, batch masks and the model families: MLP, 1-D CNN, LSTM
// and the pre-norm Transformer encoder with masked pooling and auxiliary
// mixture heads, plus the GC-MS side encoder for contrastive training.
// ============================================================================
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "olfact/tensor.hpp"
#include "olfact/util.hpp"

namespace olfact::nn {

// Valid-prefix mask. padding[b][t] is true for padded positions,
// i.e. t >= lengths[b].
struct BatchMask {
    std::vector<std::size_t> lengths;
    std::vector<std::vector<bool>> padding;

    static BatchMask full(std::size_t batch, std::size_t steps);
    static BatchMask from_lengths(std::vector<std::size_t> lengths, std::size_t steps);

    std::size_t batch() const { return lengths.size(); }
    std::vector<std::vector<bool>> valid() const;
    void validate(std::size_t batch, std::size_t steps) const;
};

struct Param {
    std::string name;
    Tensor tensor;
};

// Mutable non-trained state (batch-norm running statistics).
struct BufferRef {
    std::string name;
    std::vector<double>* values;
};

// --- layers -----------------------------------------------------------------

struct LinearLayer {
    Tensor weight, bias;  // (out,in), (out)
    LinearLayer() = default;
    LinearLayer(std::size_t in, std::size_t out, Rng& rng);
    Tensor forward(const Tensor& x) const { return linear(x, weight, bias); }
    void params(std::vector<Param>& out, const std::string& prefix) const;
};

struct LayerNormLayer {
    Tensor gamma, beta;
    LayerNormLayer() = default;
    explicit LayerNormLayer(std::size_t dim);
    Tensor forward(const Tensor& x) const { return layer_norm(x, gamma, beta); }
    void params(std::vector<Param>& out, const std::string& prefix) const;
};

struct BatchNormLayer {
    Tensor gamma, beta;
    std::vector<double> running_mean, running_var;
    BatchNormLayer() = default;
    explicit BatchNormLayer(std::size_t dim);
    Tensor forward(const Tensor& x, bool training) {
        return batch_norm(x, gamma, beta, running_mean, running_var, training);
    }
    void params(std::vector<Param>& out, const std::string& prefix) const;
    void buffers(std::vector<BufferRef>& out, const std::string& prefix);
};

struct Conv1dLayer {
    Tensor weight, bias;  // (out,in,k), (out)
    Conv1dLayer() = default;
    Conv1dLayer(std::size_t in, std::size_t out, std::size_t kernel, Rng& rng);
    Tensor forward(const Tensor& x) const { return conv1d_same(x, weight, bias); }
    void params(std::vector<Param>& out, const std::string& prefix) const;
};

// One direction of an LSTM; gate order i, f, g, o.
struct LstmCell {
    Tensor w_ih, w_hh, bias;  // (4H,in), (4H,H), (4H)
    std::size_t hidden = 0;
    LstmCell() = default;
    LstmCell(std::size_t in, std::size_t hidden, Rng& rng);
    // One step: returns (h', c').
    std::pair<Tensor, Tensor> step(const Tensor& x_t, const Tensor& h, const Tensor& c) const;
    void params(std::vector<Param>& out, const std::string& prefix) const;
};

struct MultiheadAttention {
    LinearLayer wq, wk, wv, wo;
    std::size_t heads = 1;
    MultiheadAttention() = default;
    MultiheadAttention(std::size_t dim, std::size_t heads, Rng& rng);
    // Self-attention with key-padding mask; padded keys get exactly zero
    // weight. Optionally returns the (B,H,T,T) attention probabilities.
    Tensor forward(const Tensor& x, const BatchMask& mask, double drop, bool training,
                   Rng* drop_rng, Tensor* attn_out = nullptr) const;
    void params(std::vector<Param>& out, const std::string& prefix) const;
};

struct TransformerLayer {
    LayerNormLayer ln1, ln2;
    MultiheadAttention attn;
    LinearLayer ffn1, ffn2;  // D -> 4D -> D
    TransformerLayer() = default;
    TransformerLayer(std::size_t dim, std::size_t heads, Rng& rng);
    Tensor forward(const Tensor& x, const BatchMask& mask, double drop, bool training,
                   Rng* drop_rng) const;
    void params(std::vector<Param>& out, const std::string& prefix) const;
};

// Sinusoidal positional encodings for `steps` positions of width dim.
std::vector<double> sinusoidal_positions(std::size_t steps, std::size_t dim);

// --- model configuration -------------------------------------------------------

enum class Family { mlp, cnn, lstm, transformer };
const char* family_name(Family f);
Family family_from_name(const std::string& name);

enum class Pooling { mean, cls, last, max };
const char* pooling_name(Pooling p);
Pooling pooling_from_name(const std::string& name);

struct ModelConfig {
    Family family = Family::transformer;
    std::size_t input_dim = 6;   // d
    std::size_t latent_dim = 128;  // D
    std::size_t layers = 4;      // encoder / LSTM layers
    std::size_t heads = 8;
    double dropout = 0.1;
    Pooling pooling = Pooling::mean;
    bool use_positional = true;
    bool use_cls = false;
    std::vector<std::size_t> mlp_hidden = {256, 256};
    std::vector<std::size_t> cnn_channels = {64, 128, 256};
    std::size_t cnn_kernel = 5;
    bool lstm_bidirectional = true;
    bool batch_norm = true;  // MLP / CNN blocks
    std::size_t num_classes = 50;
    std::size_t mixture_dim = 12;

    // Family defaults from the hyperparameter table.
    static ModelConfig defaults(Family family, std::size_t input_dim);
    void validate() const;
};

struct MixtureOutput {
    Tensor presence_logits;    // u_hat, (B,12)
    Tensor proportion_logits;  // z, (B,12)
    Tensor proportions;        // softmax(z)
};

// --- model -------------------------------------------------------------------

class Model {
public:
    Model(ModelConfig config, std::uint64_t seed);

    const ModelConfig& config() const { return config_; }
    std::size_t embed_dim() const { return embed_dim_; }

    // Pooled embedding h, (B, embed_dim). Rejects examples with no valid
    // steps. drop_rng may be null when training is false.
    Tensor embed(const Tensor& x, const BatchMask& mask, bool training = false,
                 Rng* drop_rng = nullptr);
    // Class logits (B, num_classes).
    Tensor classify(const Tensor& x, const BatchMask& mask, bool training = false,
                    Rng* drop_rng = nullptr);
    Tensor classify_from_embedding(const Tensor& h, bool training, Rng* drop_rng);
    // Presence and proportion heads off the shared pooled embedding.
    MixtureOutput mixture_forward(const Tensor& x, const BatchMask& mask, bool training = false,
                                  Rng* drop_rng = nullptr);
    MixtureOutput mixture_from_embedding(const Tensor& h);

    std::vector<Param> named_params();
    std::vector<BufferRef> named_buffers();

private:
    Tensor embed_transformer(const Tensor& x, const BatchMask& mask, bool training, Rng* rng);
    Tensor embed_mlp(const Tensor& x, const BatchMask& mask, bool training, Rng* rng);
    Tensor embed_cnn(const Tensor& x, const BatchMask& mask, bool training, Rng* rng);
    Tensor embed_lstm(const Tensor& x, const BatchMask& mask, bool training, Rng* rng);
    Tensor lstm_direction(const std::vector<Tensor>& inputs, const LstmCell& cell,
                          const BatchMask& mask, bool reverse) const;

    ModelConfig config_;
    std::size_t embed_dim_ = 0;

    // transformer
    LinearLayer stem_;
    LayerNormLayer stem_norm_;
    Tensor cls_token_;
    std::vector<TransformerLayer> encoder_;
    LinearLayer head1_, head2_;  // D -> D/2 -> C

    // mlp / cnn
    std::vector<LinearLayer> mlp_blocks_;
    std::vector<BatchNormLayer> mlp_norms_;
    std::vector<Conv1dLayer> conv_blocks_;
    std::vector<BatchNormLayer> conv_norms_;
    LinearLayer flat_head_;  // single linear head for mlp / cnn

    // lstm
    std::vector<LstmCell> lstm_fwd_, lstm_bwd_;
    LinearLayer lstm_proj_, lstm_head_;

    // mixture heads
    LinearLayer presence_head_, proportion_head_;
};

// GC-MS side encoder: optional input LayerNorm, MLP with ReLU and dropout,
// final linear to the shared embedding width.
struct GcmsEncoderConfig {
    std::size_t input_dim = 460;
    std::vector<std::size_t> hidden = {512, 256};
    std::size_t output_dim = 256;
    double dropout = 0.1;
    bool input_layer_norm = true;
    bool l2_normalize = false;
};

class GcmsEncoder {
public:
    GcmsEncoder(GcmsEncoderConfig config, std::uint64_t seed);
    Tensor forward(const Tensor& g, bool training = false, Rng* drop_rng = nullptr);
    std::vector<Param> named_params();
    const GcmsEncoderConfig& config() const { return config_; }

private:
    GcmsEncoderConfig config_;
    LayerNormLayer input_norm_;
    std::vector<LinearLayer> blocks_;
    LinearLayer out_;
};

}  // namespace olfact::nn
