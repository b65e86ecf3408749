// ============================================================================
// analysis.hpp - Offline analysis: PCA with loading tables, Pearson channel
// correlation, and single-channel mask ablation of a trained model.
// ============================================================================
#pragma once

#include <string>
#include <vector>

#include "olfact/nn.hpp"
#include "olfact/optim.hpp"
#include "olfact/types.hpp"

namespace olfact {

struct PcaResult {
    std::vector<std::vector<double>> components;  // k rows of length d, orthonormal
    std::vector<double> explained_variance_ratio;  // eigenvalue / trace
    std::vector<std::vector<double>> projected;    // N x k scores
    std::vector<double> mean;                      // centering vector
};

// Principal axes of the mean-centered covariance in descending eigenvalue
// order. Sign convention: the largest-magnitude loading of each component is
// positive. Throws when the data has rank below k.
PcaResult pca(const std::vector<std::vector<double>>& rows, std::size_t k);

// Loading table in the "feature, PC1, PC2, magnitude" shape, sorted by
// magnitude, for the first two components.
std::string pca_loading_table(const PcaResult& result,
                              const std::vector<std::string>& feature_names);

// Symmetric correlation matrix with unit diagonal; throws on a constant
// channel.
std::vector<std::vector<double>> pearson_correlation(
    const std::vector<std::vector<double>>& rows);

std::string correlation_table(const std::vector<std::vector<double>>& corr,
                              const std::vector<std::string>& feature_names);

// Flattens sessions to per-timestep rows for PCA / correlation.
std::vector<std::vector<double>> session_rows(const std::vector<SensorSession>& sessions);

// --- channel masking ---------------------------------------------------------

// Copy of the dataset with the named channels replaced by zero (the training
// mean in standardized space).
WindowDataset mask_channels(const WindowDataset& data, const std::vector<std::size_t>& channels);

struct ChannelAblation {
    std::string channel;
    double baseline_acc1 = 0;
    double masked_acc1 = 0;
    double delta_acc1 = 0;  // masked - baseline
};

// Re-evaluates with one channel masked at a time; rows sorted by |delta|.
// Evaluation only: model parameters are untouched.
std::vector<ChannelAblation> channel_mask_ablation(nn::Model& model, const WindowDataset& eval,
                                                   const std::vector<std::string>& channel_names);

std::string ablation_table(const std::vector<ChannelAblation>& rows);

}  // namespace olfact
