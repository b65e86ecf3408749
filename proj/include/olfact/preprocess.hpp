// ============================================================================
// preprocess.hpp - Temporal differencing, sliding-window segmentation and
// train-statistics standardization.
//
// Pipeline order is fixed: difference -> slice -> standardize. Every window
// records the lag and standardization stats id it was produced under.
// ============================================================================
#pragma once

#include <cstddef>
#include <vector>

#include "olfact/types.hpp"

namespace olfact {

struct PreprocessConfig {
    int diff_lag = 0;          // p; 0 skips differencing
    std::size_t window = 50;   // w
    std::size_t stride = 0;    // s; 0 means w/2 (w must be even then)
    bool pad_final = false;

    std::size_t effective_stride() const;
    void validate() const;
};

// Lag-p change of the full stream: out[t] = x[t+p] - x[t], length T-p.
// p = 0 returns the signal unchanged.
SensorSession temporal_difference(const SensorSession& session, int p);

// Number of length-w windows at stride s over a length-T sequence:
// floor((T-w)/s)+1 when T >= w, else 0; ceiling instead of floor when
// pad_final is set.
std::size_t count_windows(std::size_t T, std::size_t w, std::size_t s, bool pad_final = false);

// Cuts windows from an (already differenced) session. Windows are ordered by
// offset and carry provenance. A final padded window repeats the last row
// when pad_final is set.
std::vector<Window> slice_windows(const SensorSession& session, const PreprocessConfig& config);

// Per-channel mean / population std over all rows of all training windows.
// Rejects degenerate (zero variance) channels, naming the channel.
StandardizationStats fit_standardizer(const std::vector<Window>& train_windows,
                                      const ChannelSchema& schema,
                                      const std::string& fitted_on = "train");

// out = (in - mean) / std per channel; stamps stats.id into provenance.
std::vector<Window> standardize(const std::vector<Window>& windows,
                                const StandardizationStats& stats);
Window standardize(const Window& w, const StandardizationStats& stats);

// Inverse transform, used by round-trip checks.
Window destandardize(const Window& w, const StandardizationStats& stats);

// difference -> slice, for one session.
std::vector<Window> preprocess_session(const SensorSession& session,
                                       const PreprocessConfig& config);

}  // namespace olfact
