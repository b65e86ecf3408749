// ============================================================================
// synth.hpp - Synthetic dataset generation for desk-scale verification.
//
// Base sessions follow
//   x_t[ch] = signature[c][ch] + osc[c][ch](t) + drift_t[ch] + day_off[ch]
//             + noise,
// where osc is a class-specific sinusoid (it survives temporal differencing,
// so lagged inputs stay informative), drift is AR(1) and day_off is a fresh
// per-day channel offset. Fixed seed gives byte-identical output trees.
// ============================================================================
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "olfact/manifest.hpp"
#include "olfact/types.hpp"

namespace olfact {

struct SyntheticConfig {
    std::size_t num_classes = 5;
    std::size_t sessions_per_class = 6;  // one session per day; the last day is the test split
    std::size_t duration_steps = 600;
    std::size_t channels = 6;

    // Per-class per-channel signature levels; generated in
    // [signature_lo, signature_hi] when empty.
    std::vector<std::vector<double>> signatures;
    double signature_lo = 100.0;
    double signature_hi = 700.0;

    // Class dynamics: sinusoid amplitude and frequency (cycles per step).
    double osc_amp_lo = 20.0;
    double osc_amp_hi = 60.0;
    double osc_freq_lo = 0.012;
    double osc_freq_hi = 0.028;

    double drift_coeff = 0.995;  // AR(1) coefficient
    double drift_std = 0.0;      // AR(1) innovation std
    double noise_std = 2.0;
    double day_shift_std = 0.0;  // per-day per-channel offset std

    // Extra offset applied to a single day (0 disables); used to construct
    // a known-hard leave-one-day-out fold.
    int shift_day = 0;
    double shift_day_std = 0.0;

    bool write_gcms = true;  // emit per-class spectra + formula tables
    std::uint64_t seed = 42;

    void validate() const;
    std::vector<std::string> class_names() const;  // class00, class01, ...
};

// Writes the base tree under root (train/<class>/day<k>.csv plus
// test/<class>/day<last>.csv, a registry.tsv and optional GC-MS tables)
// and returns the scanned manifest.
DatasetManifest generate_synthetic(const SyntheticConfig& config, const std::string& root);

struct SyntheticMixtureConfig {
    std::size_t odorants_used = 4;  // leading entries of the 12-odorant palette
    std::size_t duration_steps = 200;
    std::size_t train_sessions_per_recipe = 3;
    std::size_t seen_sessions_per_recipe = 1;

    double signature_lo = 50.0;
    double signature_hi = 400.0;
    double osc_amp_lo = 5.0;
    double osc_amp_hi = 20.0;
    double osc_freq_lo = 0.012;
    double osc_freq_hi = 0.028;
    double noise_std = 1.0;

    std::uint64_t seed = 42;

    void validate() const;
};

// Binary/ternary recipes over the first odorants_used odorants on a 0.1
// ratio grid. Train and test-seen share recipes (fresh sessions); the
// test-unseen split holds novel ratios and combinations.
DatasetManifest generate_synthetic_mixture(const SyntheticMixtureConfig& config,
                                           const std::string& root);

}  // namespace olfact
