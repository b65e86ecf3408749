// ============================================================================
// types.hpp - Domain types shared across ingestion, preprocessing, modeling
// and evaluation.
// ============================================================================
#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

namespace olfact {

// Number of base odorants in a mixture target.
inline constexpr std::size_t kMixtureDim = 12;

enum class Category { nuts, spices, herbs, fruits, vegetables };

const char* category_name(Category c);
Category category_from_name(const std::string& name);
inline constexpr std::size_t kNumCategories = 5;

struct SubstanceLabel {
    int class_index = -1;
    std::string name;
    Category category = Category::nuts;
};

// Normalized mixture composition over the 12 base odorants.
struct MixtureTarget {
    std::vector<double> proportions;  // sums to 1
    std::vector<int> presence;        // presence[i] = 1 iff proportions[i] > 0
    int num_present = 0;
};

// proportions = raw / sum(raw); presence and num_present derived.
// Throws on all-zero, negative or non-finite input, and when more than
// max_present components are present (mixtures are at most ternary).
MixtureTarget make_mixture_target(const std::vector<double>& raw, int max_present = 3);

struct ChannelSchema {
    std::vector<std::string> channels;
    double sample_rate_hz = 1.0;

    std::size_t num_channels() const { return channels.size(); }
    // Index of a channel name, or -1.
    int channel_index(const std::string& name) const;
};

// Six-channel base schema at 1 Hz.
ChannelSchema base_schema();
// Four-channel mixture schema at 10 Hz.
ChannelSchema mixture_schema();

enum class SplitTag { train, test_seen, test_unseen };
const char* split_tag_name(SplitTag t);

using Label = std::variant<std::monostate, SubstanceLabel, MixtureTarget>;

// One recorded stream: T rows by d channels, row-major.
struct SensorSession {
    std::vector<double> readings;  // T*d
    std::size_t num_steps = 0;     // T
    ChannelSchema schema;
    Label label;
    int day_index = 0;  // [1,6] for base sessions, 0 when absent
    std::string session_id;
    SplitTag split_tag = SplitTag::train;

    double at(std::size_t t, std::size_t ch) const {
        return readings[t * schema.num_channels() + ch];
    }
    double& at(std::size_t t, std::size_t ch) {
        return readings[t * schema.num_channels() + ch];
    }
};

// Checks the SensorSession invariants (shape, finiteness). Throws on violation.
void validate_session(const SensorSession& s);

struct PreprocessProvenance {
    int diff_lag = 0;
    std::string stats_id;  // empty until standardized
};

// Fixed-length multichannel segment, the unit consumed by models.
struct Window {
    std::vector<double> values;  // w*d, row-major
    std::size_t length = 0;      // w
    std::size_t channels = 0;    // d
    Label label;
    std::string source_session;
    std::size_t offset = 0;  // start index in the (post-differencing) sequence
    PreprocessProvenance preprocessing;

    double at(std::size_t t, std::size_t ch) const { return values[t * channels + ch]; }
    double& at(std::size_t t, std::size_t ch) { return values[t * channels + ch]; }
};

struct StandardizationStats {
    std::vector<double> mean;
    std::vector<double> stddev;  // population convention, > 0 per channel
    std::string fitted_on;       // split identifier
    std::string id;              // content hash, recorded in window provenance
};

}  // namespace olfact
