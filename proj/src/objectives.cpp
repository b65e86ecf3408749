#include "olfact/objectives.hpp"

#include <cmath>

#include "olfact/util.hpp"

namespace olfact {

namespace {
constexpr double kProbFloor = 1e-12;
}

void MixtureLossConfig::validate() const {
    if (alpha < 0.0 || beta < 0.0) throw ConfigError("mixture loss: weights must be >= 0");
    if (epsilon < 0.0 || epsilon >= 1.0)
        throw ConfigError("mixture loss: epsilon must be in [0,1)");
    if (focal_alpha <= 0.0 || focal_alpha >= 1.0)
        throw ConfigError("mixture loss: focal_alpha must be in (0,1)");
    if (focal_gamma < 0.0) throw ConfigError("mixture loss: focal_gamma must be >= 0");
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    return nll_from_log_probs(log_softmax_lastdim(logits), labels);
}

Tensor symmetric_contrastive(const Tensor& z_sensor, const Tensor& z_gcms, double tau) {
    if (tau <= 0.0) throw ConfigError("contrastive temperature must be > 0");
    if (z_sensor.rank() != 2 || z_gcms.rank() != 2 ||
        z_sensor.shape() != z_gcms.shape())
        throw NumericError("contrastive embeddings must both be (N,D)");
    const std::size_t n = z_sensor.dim(0);
    std::vector<int> diag(n);
    for (std::size_t i = 0; i < n; ++i) diag[i] = static_cast<int>(i);

    Tensor zs = l2_normalize_rows(z_sensor);
    Tensor zg = l2_normalize_rows(z_gcms);
    Tensor sim_sg = scale(batched_matmul_nt(zs, zg), 1.0 / tau);  // rows: sensor -> gcms
    Tensor sim_gs = scale(batched_matmul_nt(zg, zs), 1.0 / tau);  // rows: gcms -> sensor
    Tensor loss_sg = nll_from_log_probs(log_softmax_lastdim(sim_sg), diag);
    Tensor loss_gs = nll_from_log_probs(log_softmax_lastdim(sim_gs), diag);
    return add(loss_sg, loss_gs);
}

Tensor focal_bce(const Tensor& presence_logits, const std::vector<double>& presence,
                 double alpha_f, double gamma) {
    return focal_bce_with_logits(presence_logits, presence, alpha_f, gamma);
}

MixtureLossParts mixture_loss(const Tensor& proportion_logits, const Tensor& presence_logits,
                              const std::vector<MixtureTarget>& targets,
                              const MixtureLossConfig& config) {
    config.validate();
    if (proportion_logits.rank() != 2 || presence_logits.shape() != proportion_logits.shape())
        throw NumericError("mixture loss: heads must both be (B,K)");
    const std::size_t B = proportion_logits.dim(0);
    const std::size_t K = proportion_logits.dim(1);
    if (targets.size() != B) throw NumericError("mixture loss: target count mismatch");

    std::vector<double> kl_weights(B * K), hinge_weights(B * K), neg_p(B * K),
        presence(B * K);
    double target_entropy_term = 0.0;  // sum p log p, batch-meaned
    for (std::size_t b = 0; b < B; ++b) {
        const auto& t = targets[b];
        if (t.proportions.size() != K || t.num_present < 1)
            throw NumericError("mixture loss: invalid target");
        for (std::size_t i = 0; i < K; ++i) {
            const double p = t.proportions[i];
            kl_weights[b * K + i] = p / double(B);
            hinge_weights[b * K + i] = t.presence[i] / (double(t.num_present) * double(B));
            neg_p[b * K + i] = -p;
            presence[b * K + i] = t.presence[i];
            if (p > 0.0) target_entropy_term += p * std::log(p) / double(B);
        }
    }

    // KL(p||p_hat) = sum p log p - sum p log p_hat, with p_hat floored
    Tensor log_p_hat = clamp_min(log_softmax_lastdim(proportion_logits), std::log(kProbFloor));
    Tensor kl = add_scalar(neg(weighted_sum(log_p_hat, kl_weights)), target_entropy_term);

    // hinge-l1 on present components beyond the epsilon tolerance
    Tensor p_hat = softmax_lastdim(proportion_logits);
    Tensor excess = relu(add_scalar(abs_op(add_const_broadcast(p_hat, neg_p)), -config.epsilon));
    Tensor hinge = weighted_sum(excess, hinge_weights);

    Tensor focal = focal_bce_with_logits(presence_logits, presence, config.focal_alpha,
                                         config.focal_gamma);

    MixtureLossParts parts;
    parts.kl = kl;
    parts.hinge = hinge;
    parts.focal = focal;
    parts.total = add(kl, add(scale(hinge, config.alpha), scale(focal, config.beta)));
    return parts;
}

double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw NumericError("kl: size mismatch");
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) continue;
        kl += p[i] * std::log(p[i] / std::max(q[i], kProbFloor));
    }
    return kl;
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw NumericError("cosine: size mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na <= 0.0 || nb <= 0.0) throw NumericError("cosine: zero vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace olfact
