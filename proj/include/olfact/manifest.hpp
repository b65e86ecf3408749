// ============================================================================
// manifest.hpp - Dataset discovery, split construction and summary statistics.
//
// Expected layout: <root>/<split>/<ingredient>/<session>.csv with split one
// of train|test (base) or train|test-seen|test-unseen (mixture). Mixture
// recipes live in <root>/recipes.tsv (session_id + 12 raw proportions).
// ============================================================================
#pragma once

#include <map>
#include <string>
#include <vector>

#include "olfact/registry.hpp"
#include "olfact/types.hpp"

namespace olfact {

struct SessionRef {
    std::string path;        // file path on disk
    std::string session_id;  // root-relative path without extension
    std::string ingredient;  // directory name
    int day_index = 0;       // from a day<k> token in the file name, 0 if absent
    SplitTag split_tag = SplitTag::train;
};

struct DatasetManifest {
    std::string root;
    ChannelSchema schema;
    bool is_mixture = false;
    std::vector<SessionRef> sessions;                     // sorted by session_id
    std::map<std::string, std::vector<double>> recipes;   // session_id -> 12 raw proportions

    std::size_t count(SplitTag tag) const;
};

enum class SplitPolicy { last_day, leave_one_day_out, mixture };
const char* split_policy_name(SplitPolicy p);
SplitPolicy split_policy_from_name(const std::string& name);

// Scans the directory tree. assume_day_order assigns missing day indices by
// lexicographic file order within each ingredient (train files first).
DatasetManifest scan_dataset(const std::string& root, const ChannelSchema& schema,
                             bool is_mixture, bool assume_day_order = false);

// Reassigns split tags. last-day puts day 6 in test; leave-one-day-out(k)
// puts day k in test; mixture keeps the tags from directory placement.
DatasetManifest build_splits(const DatasetManifest& manifest, SplitPolicy policy,
                             int holdout_day = 6);

// Parses every referenced file and attaches labels, day and split metadata.
// Base ingredients are resolved against the registry; mixture sessions get
// their target from the recipe table.
std::vector<SensorSession> load_sessions(const DatasetManifest& manifest,
                                         const Registry& registry);

// Full validation pass: every file parses, schema matches, labels resolve,
// base layout holds (6 sessions per ingredient when strict).
void validate_manifest(const DatasetManifest& manifest, const Registry& registry,
                       bool strict_layout = false);

// Per-channel descriptive statistics over all rows of all sessions in a
// split. Quartiles use linear interpolation between closest ranks; std is
// the population convention.
struct ChannelSummary {
    double mean = 0, stddev = 0, min = 0, q25 = 0, q50 = 0, q75 = 0, max = 0;
    std::size_t rows = 0;
};
std::map<std::string, std::vector<ChannelSummary>> summarize(
    const std::vector<SensorSession>& sessions);

std::string summary_table(const std::map<std::string, std::vector<ChannelSummary>>& summary,
                          const ChannelSchema& schema);

}  // namespace olfact
