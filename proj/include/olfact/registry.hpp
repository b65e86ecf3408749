// ============================================================================
// registry.hpp - Substance and odorant registries.
//
// The base registry maps the 50 substance names to class indices and
// categories; the mixture registry fixes the 12-odorant index order.
// Both are loaded from versioned text manifests shipped under data/.
// ============================================================================
#pragma once

#include <string>
#include <vector>

#include "olfact/types.hpp"

namespace olfact {

class Registry {
public:
    // Loads a manifest with one "name<TAB>category" line per substance.
    // Class indices are assigned by lexicographic name order.
    static Registry load(const std::string& path);
    // The manifests shipped with the repo.
    static Registry builtin_base();
    static std::vector<std::string> builtin_mixture_odorants();

    const std::string& version() const { return version_; }
    std::size_t size() const { return labels_.size(); }
    const std::vector<SubstanceLabel>& labels() const { return labels_; }

    // Throws an unknown-name error listing the nearest matches.
    const SubstanceLabel& lookup(const std::string& name) const;
    const SubstanceLabel& at(int class_index) const;
    bool contains(const std::string& name) const;

private:
    std::string version_;
    std::vector<SubstanceLabel> labels_;  // sorted by name, index == class_index
};

// Loads the odorant manifest (one name per line, alphabetical order fixes
// the mixture target index).
std::vector<std::string> load_odorants(const std::string& path);

// Directory holding the shipped registry manifests.
std::string default_data_dir();

}  // namespace olfact
