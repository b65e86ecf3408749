#include "olfact/nn.hpp"

#include <cmath>

namespace olfact::nn {

// --- BatchMask ----------------------------------------------------------------

BatchMask BatchMask::full(std::size_t batch, std::size_t steps) {
    BatchMask m;
    m.lengths.assign(batch, steps);
    m.padding.assign(batch, std::vector<bool>(steps, false));
    return m;
}

BatchMask BatchMask::from_lengths(std::vector<std::size_t> lengths, std::size_t steps) {
    BatchMask m;
    m.lengths = std::move(lengths);
    m.padding.resize(m.lengths.size());
    for (std::size_t b = 0; b < m.lengths.size(); ++b) {
        if (m.lengths[b] > steps)
            throw NumericError("BatchMask: length exceeds sequence steps");
        m.padding[b].assign(steps, false);
        for (std::size_t t = m.lengths[b]; t < steps; ++t) m.padding[b][t] = true;
    }
    return m;
}

std::vector<std::vector<bool>> BatchMask::valid() const {
    std::vector<std::vector<bool>> v(padding.size());
    for (std::size_t b = 0; b < padding.size(); ++b) {
        v[b].resize(padding[b].size());
        for (std::size_t t = 0; t < padding[b].size(); ++t) v[b][t] = !padding[b][t];
    }
    return v;
}

void BatchMask::validate(std::size_t batch, std::size_t steps) const {
    if (lengths.size() != batch || padding.size() != batch)
        throw NumericError("BatchMask: batch size mismatch");
    for (std::size_t b = 0; b < batch; ++b) {
        if (padding[b].size() != steps) throw NumericError("BatchMask: step count mismatch");
        for (std::size_t t = 0; t < steps; ++t)
            if (padding[b][t] != (t >= lengths[b]))
                throw NumericError("BatchMask: padding flags do not match lengths");
    }
}

// --- layer construction ---------------------------------------------------------

namespace {

// Kaiming-uniform over fan_in.
Tensor init_weight(Shape shape, std::size_t fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / double(fan_in));
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    std::vector<double> data(n);
    for (double& v : data) v = rng.uniform(-bound, bound);
    return Tensor::from_data(std::move(shape), std::move(data), true);
}

Tensor init_const(Shape shape, double value) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return Tensor::from_data(std::move(shape), std::vector<double>(n, value), true);
}

}  // namespace

LinearLayer::LinearLayer(std::size_t in, std::size_t out, Rng& rng)
    : weight(init_weight({out, in}, in, rng)), bias(init_const({out}, 0.0)) {}

void LinearLayer::params(std::vector<Param>& out, const std::string& prefix) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
}

LayerNormLayer::LayerNormLayer(std::size_t dim)
    : gamma(init_const({dim}, 1.0)), beta(init_const({dim}, 0.0)) {}

void LayerNormLayer::params(std::vector<Param>& out, const std::string& prefix) const {
    out.push_back({prefix + ".gamma", gamma});
    out.push_back({prefix + ".beta", beta});
}

BatchNormLayer::BatchNormLayer(std::size_t dim)
    : gamma(init_const({dim}, 1.0)),
      beta(init_const({dim}, 0.0)),
      running_mean(dim, 0.0),
      running_var(dim, 1.0) {}

void BatchNormLayer::params(std::vector<Param>& out, const std::string& prefix) const {
    out.push_back({prefix + ".gamma", gamma});
    out.push_back({prefix + ".beta", beta});
}

void BatchNormLayer::buffers(std::vector<BufferRef>& out, const std::string& prefix) {
    out.push_back({prefix + ".running_mean", &running_mean});
    out.push_back({prefix + ".running_var", &running_var});
}

Conv1dLayer::Conv1dLayer(std::size_t in, std::size_t out, std::size_t kernel, Rng& rng)
    : weight(init_weight({out, in, kernel}, in * kernel, rng)), bias(init_const({out}, 0.0)) {}

void Conv1dLayer::params(std::vector<Param>& out, const std::string& prefix) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
}

LstmCell::LstmCell(std::size_t in, std::size_t hidden_dim, Rng& rng) : hidden(hidden_dim) {
    const double bound = 1.0 / std::sqrt(double(hidden_dim));
    auto uniform = [&rng, bound](Shape shape) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        std::vector<double> data(n);
        for (double& v : data) v = rng.uniform(-bound, bound);
        return Tensor::from_data(std::move(shape), std::move(data), true);
    };
    w_ih = uniform({4 * hidden_dim, in});
    w_hh = uniform({4 * hidden_dim, hidden_dim});
    bias = uniform({4 * hidden_dim});
}

std::pair<Tensor, Tensor> LstmCell::step(const Tensor& x_t, const Tensor& h,
                                         const Tensor& c) const {
    const std::size_t H = hidden;
    Tensor gates = add(linear(x_t, w_ih, bias), linear_no_bias(h, w_hh));
    Tensor i_gate = sigmoid(slice_cols(gates, 0, H));
    Tensor f_gate = sigmoid(slice_cols(gates, H, H));
    Tensor g_gate = tanh_op(slice_cols(gates, 2 * H, H));
    Tensor o_gate = sigmoid(slice_cols(gates, 3 * H, H));
    Tensor c_next = add(mul(f_gate, c), mul(i_gate, g_gate));
    Tensor h_next = mul(o_gate, tanh_op(c_next));
    return {h_next, c_next};
}

void LstmCell::params(std::vector<Param>& out, const std::string& prefix) const {
    out.push_back({prefix + ".w_ih", w_ih});
    out.push_back({prefix + ".w_hh", w_hh});
    out.push_back({prefix + ".bias", bias});
}

// --- attention ------------------------------------------------------------------

MultiheadAttention::MultiheadAttention(std::size_t dim, std::size_t head_count, Rng& rng)
    : wq(dim, dim, rng), wk(dim, dim, rng), wv(dim, dim, rng), wo(dim, dim, rng),
      heads(head_count) {
    if (dim % head_count != 0)
        throw NumericError("attention: latent dim must be divisible by heads");
}

Tensor MultiheadAttention::forward(const Tensor& x, const BatchMask& mask, double drop,
                                   bool training, Rng* drop_rng, Tensor* attn_out) const {
    const std::size_t B = x.dim(0), T = x.dim(1), D = x.dim(2);
    mask.validate(B, T);
    const std::size_t dh = D / heads;

    Tensor q = split_heads(wq.forward(x), heads);  // (B,H,T,dh)
    Tensor k = split_heads(wk.forward(x), heads);
    Tensor v = split_heads(wv.forward(x), heads);

    Tensor scores = scale(batched_matmul_nt(q, k), 1.0 / std::sqrt(double(dh)));

    // additive key-padding bias, broadcast over (B,H,Tq): exp() underflows to
    // exactly zero for padded keys
    constexpr double kMaskBias = -1e30;
    std::vector<double> bias(B * heads * T * T, 0.0);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t tk = 0; tk < T; ++tk)
            if (mask.padding[b][tk])
                for (std::size_t h = 0; h < heads; ++h)
                    for (std::size_t tq = 0; tq < T; ++tq)
                        bias[((b * heads + h) * T + tq) * T + tk] = kMaskBias;
    scores = add_const_broadcast(scores, bias);

    Tensor probs = softmax_lastdim(scores);
    if (attn_out) *attn_out = probs;
    if (training && drop > 0.0) probs = dropout(probs, drop, training, drop_rng->next_u64());

    Tensor ctx = merge_heads(batched_matmul(probs, v));  // (B,T,D)
    return wo.forward(ctx);
}

void MultiheadAttention::params(std::vector<Param>& out, const std::string& prefix) const {
    wq.params(out, prefix + ".wq");
    wk.params(out, prefix + ".wk");
    wv.params(out, prefix + ".wv");
    wo.params(out, prefix + ".wo");
}

// --- transformer layer ------------------------------------------------------------

TransformerLayer::TransformerLayer(std::size_t dim, std::size_t heads, Rng& rng)
    : ln1(dim), ln2(dim), attn(dim, heads, rng), ffn1(dim, 4 * dim, rng),
      ffn2(4 * dim, dim, rng) {}

Tensor TransformerLayer::forward(const Tensor& x, const BatchMask& mask, double drop,
                                 bool training, Rng* drop_rng) const {
    Tensor a = attn.forward(ln1.forward(x), mask, drop, training, drop_rng);
    if (training && drop > 0.0) a = dropout(a, drop, training, drop_rng->next_u64());
    Tensor u = add(x, a);

    Tensor f = gelu(ffn1.forward(ln2.forward(u)));
    if (training && drop > 0.0) f = dropout(f, drop, training, drop_rng->next_u64());
    f = ffn2.forward(f);
    if (training && drop > 0.0) f = dropout(f, drop, training, drop_rng->next_u64());
    return add(u, f);
}

void TransformerLayer::params(std::vector<Param>& out, const std::string& prefix) const {
    ln1.params(out, prefix + ".ln1");
    attn.params(out, prefix + ".attn");
    ln2.params(out, prefix + ".ln2");
    ffn1.params(out, prefix + ".ffn1");
    ffn2.params(out, prefix + ".ffn2");
}

std::vector<double> sinusoidal_positions(std::size_t steps, std::size_t dim) {
    std::vector<double> pe(steps * dim, 0.0);
    for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t j = 0; j < dim; ++j) {
            const double exponent = double(2 * (j / 2)) / double(dim);
            const double angle = double(t) / std::pow(10000.0, exponent);
            pe[t * dim + j] = (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    return pe;
}

// --- config ---------------------------------------------------------------------

const char* family_name(Family f) {
    switch (f) {
        case Family::mlp: return "mlp";
        case Family::cnn: return "cnn";
        case Family::lstm: return "lstm";
        case Family::transformer: return "transformer";
    }
    return "?";
}

Family family_from_name(const std::string& name) {
    if (name == "mlp") return Family::mlp;
    if (name == "cnn") return Family::cnn;
    if (name == "lstm") return Family::lstm;
    if (name == "transformer") return Family::transformer;
    throw ConfigError(cat("unknown model family '", name, "'"));
}

const char* pooling_name(Pooling p) {
    switch (p) {
        case Pooling::mean: return "mean";
        case Pooling::cls: return "cls";
        case Pooling::last: return "last";
        case Pooling::max: return "max";
    }
    return "?";
}

Pooling pooling_from_name(const std::string& name) {
    if (name == "mean") return Pooling::mean;
    if (name == "cls") return Pooling::cls;
    if (name == "last") return Pooling::last;
    if (name == "max") return Pooling::max;
    throw ConfigError(cat("unknown pooling '", name, "'"));
}

ModelConfig ModelConfig::defaults(Family family, std::size_t input_dim) {
    ModelConfig c;
    c.family = family;
    c.input_dim = input_dim;
    switch (family) {
        case Family::transformer:
            c.layers = 4;
            c.heads = 8;
            c.dropout = 0.1;
            break;
        case Family::lstm:
            c.layers = 1;
            c.dropout = 0.1;
            c.lstm_bidirectional = true;
            break;
        case Family::cnn:
            c.dropout = 0.2;
            break;
        case Family::mlp:
            c.dropout = 0.2;
            break;
    }
    return c;
}

void ModelConfig::validate() const {
    if (input_dim < 1 || latent_dim < 1) throw ConfigError("model: dims must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("model: dropout must be in [0,1)");
    if (num_classes < 2) throw ConfigError("model: num_classes must be >= 2");
    switch (family) {
        case Family::transformer:
            if (heads < 1 || latent_dim % heads != 0)
                throw ConfigError("model: latent_dim must be divisible by heads");
            if (layers < 1) throw ConfigError("model: transformer needs >= 1 layer");
            if (pooling == Pooling::cls && !use_cls)
                throw ConfigError("model: cls pooling requires use_cls");
            if (pooling == Pooling::last || pooling == Pooling::max)
                throw ConfigError("model: transformer pooling must be mean or cls");
            break;
        case Family::lstm:
            if (layers < 1) throw ConfigError("model: lstm needs >= 1 layer");
            if (pooling == Pooling::cls) throw ConfigError("model: lstm has no cls token");
            break;
        case Family::cnn:
            if (cnn_channels.empty()) throw ConfigError("model: cnn needs channels");
            if (cnn_kernel < 1) throw ConfigError("model: cnn kernel must be >= 1");
            if (pooling != Pooling::mean)
                throw ConfigError("model: cnn uses mean (global average) pooling");
            break;
        case Family::mlp:
            if (mlp_hidden.empty()) throw ConfigError("model: mlp needs hidden sizes");
            if (pooling != Pooling::mean && pooling != Pooling::max)
                throw ConfigError("model: mlp pooling must be mean or max");
            break;
    }
}

}  // namespace olfact::nn
