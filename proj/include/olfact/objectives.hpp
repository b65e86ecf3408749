// ============================================================================
// objectives.hpp - Training objectives: cross-entropy classification,
// symmetric sensor<->GC-MS contrastive alignment, and the composite mixture
// loss (KL + hinge-l1 on present components + focal BCE on presence).
// ============================================================================
#pragma once

#include <vector>

#include "olfact/nn.hpp"
#include "olfact/tensor.hpp"
#include "olfact/types.hpp"

namespace olfact {

struct ContrastiveConfig {
    double temperature = 0.07;
    double weight = 1.0;  // total = CE + weight * contrastive
    nn::GcmsEncoderConfig encoder;
};

struct MixtureLossConfig {
    double alpha = 1.0;     // hinge weight
    double beta = 1.0;      // focal weight
    double epsilon = 0.02;  // hinge tolerance
    double focal_alpha = 0.75;
    double focal_gamma = 2.0;

    void validate() const;
};

// Mean over the batch of -log softmax(logits)[label], log-sum-exp stabilized.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// Two-direction InfoNCE over the NxN cosine-similarity matrix scaled by 1/tau:
// row i's positive is column i and vice versa. Throws on zero-norm rows.
Tensor symmetric_contrastive(const Tensor& z_sensor, const Tensor& z_gcms, double tau);

// Focal binary cross-entropy over presence logits and 0/1 targets.
Tensor focal_bce(const Tensor& presence_logits, const std::vector<double>& presence,
                 double alpha_f, double gamma);

struct MixtureLossParts {
    Tensor total;
    Tensor kl;     // unweighted
    Tensor hinge;  // unweighted
    Tensor focal;  // unweighted
};

// L = KL(p || softmax(z)) + alpha * hinge + beta * focal, batch-meaned, with
// the per-term breakdown for trace reporting.
MixtureLossParts mixture_loss(const Tensor& proportion_logits, const Tensor& presence_logits,
                              const std::vector<MixtureTarget>& targets,
                              const MixtureLossConfig& config);

// Plain-number KL(p||q) with q clamped to >= 1e-12 and 0*log(0) = 0.
double kl_divergence(const std::vector<double>& p, const std::vector<double>& q);
double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace olfact
