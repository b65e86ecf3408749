#include <cmath>

#include "olfact/nn.hpp"

namespace olfact::nn {

namespace {

void check_input(const Tensor& x, const BatchMask& mask, const ModelConfig& cfg) {
    if (x.rank() != 3) throw NumericError("model input must be (B,T,d)");
    if (x.dim(1) == 0) throw NumericError("model input has zero time steps");
    if (x.dim(2) != cfg.input_dim)
        throw NumericError(cat("model input has ", x.dim(2), " channels, configured for ",
                               cfg.input_dim));
    mask.validate(x.dim(0), x.dim(1));
    for (std::size_t b = 0; b < mask.lengths.size(); ++b)
        if (mask.lengths[b] == 0)
            throw NumericError(cat("example ", b, " is all padding (zero valid steps)"));
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!std::isfinite(x.data()[i])) throw NumericError("model input has non-finite values");
}

// zero out padded steps so convolutions treat them like boundary padding
std::vector<double> valid_step_mask(const BatchMask& mask, std::size_t channels) {
    std::vector<double> m;
    m.reserve(mask.padding.size() * mask.padding[0].size() * channels);
    for (const auto& row : mask.padding)
        for (bool pad : row)
            for (std::size_t c = 0; c < channels; ++c) m.push_back(pad ? 0.0 : 1.0);
    return m;
}

}  // namespace

Model::Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
    config_.validate();
    Rng rng(seed);
    const std::size_t d = config_.input_dim;
    const std::size_t D = config_.latent_dim;

    switch (config_.family) {
        case Family::transformer: {
            stem_ = LinearLayer(d, D, rng);
            stem_norm_ = LayerNormLayer(D);
            if (config_.use_cls) {
                std::vector<double> cls(D);
                for (double& v : cls) v = rng.gaussian(0.0, 0.02);
                cls_token_ = Tensor::from_data({D}, std::move(cls), true);
            }
            for (std::size_t l = 0; l < config_.layers; ++l)
                encoder_.emplace_back(D, config_.heads, rng);
            head1_ = LinearLayer(D, D / 2, rng);
            head2_ = LinearLayer(D / 2, config_.num_classes, rng);
            embed_dim_ = D;
            break;
        }
        case Family::mlp: {
            std::size_t in = d;
            for (std::size_t h : config_.mlp_hidden) {
                mlp_blocks_.emplace_back(in, h, rng);
                if (config_.batch_norm) mlp_norms_.emplace_back(h);
                in = h;
            }
            flat_head_ = LinearLayer(in, config_.num_classes, rng);
            embed_dim_ = in;
            break;
        }
        case Family::cnn: {
            std::size_t in = d;
            for (std::size_t ch : config_.cnn_channels) {
                conv_blocks_.emplace_back(in, ch, config_.cnn_kernel, rng);
                if (config_.batch_norm) conv_norms_.emplace_back(ch);
                in = ch;
            }
            flat_head_ = LinearLayer(in, config_.num_classes, rng);
            embed_dim_ = in;
            break;
        }
        case Family::lstm: {
            const std::size_t dirs = config_.lstm_bidirectional ? 2 : 1;
            std::size_t in = d;
            for (std::size_t l = 0; l < config_.layers; ++l) {
                lstm_fwd_.emplace_back(in, D, rng);
                if (config_.lstm_bidirectional) lstm_bwd_.emplace_back(in, D, rng);
                in = dirs * D;
            }
            lstm_proj_ = LinearLayer(dirs * D, D, rng);
            lstm_head_ = LinearLayer(D, config_.num_classes, rng);
            embed_dim_ = D;
            break;
        }
    }
    presence_head_ = LinearLayer(embed_dim_, config_.mixture_dim, rng);
    proportion_head_ = LinearLayer(embed_dim_, config_.mixture_dim, rng);
}

Tensor Model::embed(const Tensor& x, const BatchMask& mask, bool training, Rng* drop_rng) {
    check_input(x, mask, config_);
    if (training && config_.dropout > 0.0 && drop_rng == nullptr)
        throw NumericError("training forward needs a dropout rng");
    switch (config_.family) {
        case Family::transformer: return embed_transformer(x, mask, training, drop_rng);
        case Family::mlp: return embed_mlp(x, mask, training, drop_rng);
        case Family::cnn: return embed_cnn(x, mask, training, drop_rng);
        case Family::lstm: return embed_lstm(x, mask, training, drop_rng);
    }
    throw NumericError("unhandled family");
}

Tensor Model::embed_transformer(const Tensor& x, const BatchMask& mask, bool training,
                                Rng* rng) {
    const std::size_t B = x.dim(0), T = x.dim(1), D = config_.latent_dim;
    Tensor h = stem_norm_.forward(stem_.forward(x));
    if (config_.use_positional) h = add_const_broadcast(h, sinusoidal_positions(T, D));

    BatchMask enc_mask = mask;
    if (config_.use_cls) {
        h = concat_time(tile_rows(cls_token_, B), h);
        enc_mask.padding.assign(B, std::vector<bool>(T + 1, false));
        for (std::size_t b = 0; b < B; ++b) {
            enc_mask.lengths[b] = mask.lengths[b] + 1;
            for (std::size_t t = 0; t < T; ++t)
                enc_mask.padding[b][t + 1] = mask.padding[b][t];
        }
    }
    for (const auto& layer : encoder_)
        h = layer.forward(h, enc_mask, config_.dropout, training, rng);

    if (config_.pooling == Pooling::cls) return select_time(h, 0);
    auto valid = enc_mask.valid();
    if (config_.use_cls)
        for (auto& row : valid) row[0] = false;  // mean over real tokens only
    return masked_mean_pool(h, valid);
}

Tensor Model::embed_mlp(const Tensor& x, const BatchMask& mask, bool training, Rng* rng) {
    auto valid = mask.valid();
    Tensor h = config_.pooling == Pooling::max ? masked_max_pool(x, valid)
                                               : masked_mean_pool(x, valid);
    for (std::size_t i = 0; i < mlp_blocks_.size(); ++i) {
        h = mlp_blocks_[i].forward(h);
        if (config_.batch_norm) h = mlp_norms_[i].forward(h, training);
        h = relu(h);
        if (training && config_.dropout > 0.0)
            h = dropout(h, config_.dropout, training, rng->next_u64());
    }
    return h;
}

Tensor Model::embed_cnn(const Tensor& x, const BatchMask& mask, bool training, Rng* rng) {
    Tensor h = mul_const(x, valid_step_mask(mask, x.dim(2)));
    h = time_to_channel_major(h);
    for (std::size_t i = 0; i < conv_blocks_.size(); ++i) {
        h = conv_blocks_[i].forward(h);
        if (config_.batch_norm) h = conv_norms_[i].forward(h, training);
        h = relu(h);
        if (training && config_.dropout > 0.0)
            h = dropout(h, config_.dropout, training, rng->next_u64());
    }
    return masked_mean_pool(channel_to_time_major(h), mask.valid());
}

Tensor Model::lstm_direction(const std::vector<Tensor>& inputs, const LstmCell& cell,
                             const BatchMask& mask, bool reverse) const {
    const std::size_t T = inputs.size();
    const std::size_t B = inputs[0].dim(0);
    Tensor h = Tensor::zeros({B, cell.hidden});
    Tensor c = Tensor::zeros({B, cell.hidden});
    std::vector<Tensor> states(T);
    for (std::size_t s = 0; s < T; ++s) {
        const std::size_t t = reverse ? T - 1 - s : s;
        auto [h2, c2] = cell.step(inputs[t], h, c);
        std::vector<bool> active(B);
        for (std::size_t b = 0; b < B; ++b) active[b] = t < mask.lengths[b];
        h = where_rows(active, h2, h);
        c = where_rows(active, c2, c);
        states[t] = h;
    }
    return stack_time(states);  // (B,T,H); padded steps hold the frozen state
}

Tensor Model::embed_lstm(const Tensor& x, const BatchMask& mask, bool training, Rng* rng) {
    const std::size_t T = x.dim(1);
    Tensor seq = x;
    for (std::size_t l = 0; l < lstm_fwd_.size(); ++l) {
        std::vector<Tensor> inputs(T);
        for (std::size_t t = 0; t < T; ++t) inputs[t] = select_time(seq, t);
        Tensor fwd = lstm_direction(inputs, lstm_fwd_[l], mask, false);
        if (config_.lstm_bidirectional) {
            Tensor bwd = lstm_direction(inputs, lstm_bwd_[l], mask, true);
            std::vector<Tensor> merged(T);
            for (std::size_t t = 0; t < T; ++t)
                merged[t] = concat_cols(select_time(fwd, t), select_time(bwd, t));
            seq = stack_time(merged);
        } else {
            seq = fwd;
        }
        // inter-layer dropout only applies between stacked layers
        if (training && config_.dropout > 0.0 && l + 1 < lstm_fwd_.size())
            seq = dropout(seq, config_.dropout, training, rng->next_u64());
    }

    Tensor pooled;
    switch (config_.pooling) {
        case Pooling::mean: pooled = masked_mean_pool(seq, mask.valid()); break;
        case Pooling::max: pooled = masked_max_pool(seq, mask.valid()); break;
        case Pooling::last: {
            // forward state is frozen past each length, so the final step holds
            // h_{len-1}; the reverse state at t=0 has consumed the whole row
            const std::size_t dirs = config_.lstm_bidirectional ? 2 : 1;
            const std::size_t H = config_.latent_dim;
            Tensor last = select_time(seq, T - 1);
            if (dirs == 2) {
                Tensor fwd_last = slice_cols(last, 0, H);
                Tensor bwd_first = slice_cols(select_time(seq, 0), H, H);
                pooled = concat_cols(fwd_last, bwd_first);
            } else {
                pooled = last;
            }
            break;
        }
        case Pooling::cls: throw NumericError("lstm has no cls token");
    }
    return lstm_proj_.forward(pooled);
}

Tensor Model::classify_from_embedding(const Tensor& h, bool training, Rng* drop_rng) {
    switch (config_.family) {
        case Family::transformer: {
            Tensor z = gelu(head1_.forward(h));
            if (training && config_.dropout > 0.0)
                z = dropout(z, config_.dropout, training, drop_rng->next_u64());
            return head2_.forward(z);
        }
        case Family::mlp:
        case Family::cnn: return flat_head_.forward(h);
        case Family::lstm: return lstm_head_.forward(h);
    }
    throw NumericError("unhandled family");
}

Tensor Model::classify(const Tensor& x, const BatchMask& mask, bool training, Rng* drop_rng) {
    return classify_from_embedding(embed(x, mask, training, drop_rng), training, drop_rng);
}

MixtureOutput Model::mixture_from_embedding(const Tensor& h) {
    MixtureOutput out;
    out.presence_logits = presence_head_.forward(h);
    out.proportion_logits = proportion_head_.forward(h);
    out.proportions = softmax_lastdim(out.proportion_logits);
    return out;
}

MixtureOutput Model::mixture_forward(const Tensor& x, const BatchMask& mask, bool training,
                                     Rng* drop_rng) {
    return mixture_from_embedding(embed(x, mask, training, drop_rng));
}

std::vector<Param> Model::named_params() {
    std::vector<Param> out;
    switch (config_.family) {
        case Family::transformer:
            stem_.params(out, "stem");
            stem_norm_.params(out, "stem_norm");
            if (config_.use_cls) out.push_back({"cls_token", cls_token_});
            for (std::size_t l = 0; l < encoder_.size(); ++l)
                encoder_[l].params(out, cat("encoder.", l));
            head1_.params(out, "head1");
            head2_.params(out, "head2");
            break;
        case Family::mlp:
            for (std::size_t i = 0; i < mlp_blocks_.size(); ++i) {
                mlp_blocks_[i].params(out, cat("blocks.", i));
                if (config_.batch_norm) mlp_norms_[i].params(out, cat("norms.", i));
            }
            flat_head_.params(out, "head");
            break;
        case Family::cnn:
            for (std::size_t i = 0; i < conv_blocks_.size(); ++i) {
                conv_blocks_[i].params(out, cat("conv.", i));
                if (config_.batch_norm) conv_norms_[i].params(out, cat("norms.", i));
            }
            flat_head_.params(out, "head");
            break;
        case Family::lstm:
            for (std::size_t l = 0; l < lstm_fwd_.size(); ++l) {
                lstm_fwd_[l].params(out, cat("lstm.", l, ".fwd"));
                if (config_.lstm_bidirectional) lstm_bwd_[l].params(out, cat("lstm.", l, ".bwd"));
            }
            lstm_proj_.params(out, "proj");
            lstm_head_.params(out, "head");
            break;
    }
    presence_head_.params(out, "presence_head");
    proportion_head_.params(out, "proportion_head");
    return out;
}

std::vector<BufferRef> Model::named_buffers() {
    std::vector<BufferRef> out;
    for (std::size_t i = 0; i < mlp_norms_.size(); ++i)
        mlp_norms_[i].buffers(out, cat("norms.", i));
    for (std::size_t i = 0; i < conv_norms_.size(); ++i)
        conv_norms_[i].buffers(out, cat("norms.", i));
    return out;
}

// --- GC-MS encoder ---------------------------------------------------------------

GcmsEncoder::GcmsEncoder(GcmsEncoderConfig config, std::uint64_t seed)
    : config_(std::move(config)) {
    Rng rng(seed);
    if (config_.input_layer_norm) input_norm_ = LayerNormLayer(config_.input_dim);
    std::size_t in = config_.input_dim;
    for (std::size_t h : config_.hidden) {
        blocks_.emplace_back(in, h, rng);
        in = h;
    }
    out_ = LinearLayer(in, config_.output_dim, rng);
}

Tensor GcmsEncoder::forward(const Tensor& g, bool training, Rng* drop_rng) {
    if (g.shape().back() != config_.input_dim)
        throw NumericError(cat("gcms encoder expects input dim ", config_.input_dim, ", got ",
                               g.shape().back()));
    Tensor h = g;
    if (config_.input_layer_norm) h = input_norm_.forward(h);
    for (auto& block : blocks_) {
        h = relu(block.forward(h));
        if (training && config_.dropout > 0.0)
            h = dropout(h, config_.dropout, training, drop_rng->next_u64());
    }
    h = out_.forward(h);
    if (config_.l2_normalize) h = l2_normalize_rows(h);
    return h;
}

std::vector<Param> GcmsEncoder::named_params() {
    std::vector<Param> out;
    if (config_.input_layer_norm) input_norm_.params(out, "input_norm");
    for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].params(out, cat("blocks.", i));
    out_.params(out, "out");
    return out;
}

}  // namespace olfact::nn
