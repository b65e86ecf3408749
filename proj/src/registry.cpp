#include "olfact/registry.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "olfact/util.hpp"

namespace olfact {

std::string default_data_dir() {
#ifdef OLFACT_DATA_DIR
    return OLFACT_DATA_DIR;
#else
    return "data";
#endif
}

namespace {

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError(cat("cannot open registry manifest '", path, "'"));
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

std::string parse_version(const std::vector<std::string>& lines) {
    if (!lines.empty() && lines[0].rfind("# ", 0) == 0) return lines[0].substr(2);
    return "unversioned";
}

}  // namespace

Registry Registry::load(const std::string& path) {
    Registry r;
    auto lines = read_lines(path);
    r.version_ = parse_version(lines);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string& line = lines[i];
        if (line.empty() || line[0] == '#') continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw DataError(cat(path, ":", i + 1, ": expected 'name<TAB>category'"));
        SubstanceLabel label;
        label.name = line.substr(0, tab);
        label.category = category_from_name(line.substr(tab + 1));
        r.labels_.push_back(std::move(label));
    }
    if (r.labels_.empty()) throw DataError(cat("registry manifest '", path, "' has no entries"));
    std::sort(r.labels_.begin(), r.labels_.end(),
              [](const SubstanceLabel& a, const SubstanceLabel& b) { return a.name < b.name; });
    for (std::size_t i = 1; i < r.labels_.size(); ++i)
        if (r.labels_[i].name == r.labels_[i - 1].name)
            throw DataError(cat("duplicate registry entry '", r.labels_[i].name, "'"));
    for (std::size_t i = 0; i < r.labels_.size(); ++i)
        r.labels_[i].class_index = static_cast<int>(i);
    return r;
}

Registry Registry::builtin_base() {
    return load(default_data_dir() + "/base_substances.tsv");
}

std::vector<std::string> Registry::builtin_mixture_odorants() {
    return load_odorants(default_data_dir() + "/mixture_odorants.tsv");
}

const SubstanceLabel& Registry::lookup(const std::string& name) const {
    for (const auto& l : labels_)
        if (l.name == name) return l;
    std::vector<std::string> names;
    names.reserve(labels_.size());
    for (const auto& l : labels_) names.push_back(l.name);
    auto near = nearest_names(name, names);
    std::string hint;
    for (std::size_t i = 0; i < near.size(); ++i) hint += (i ? ", " : "") + near[i];
    throw DataError(cat("unknown substance '", name, "' (nearest: ", hint, ")"));
}

const SubstanceLabel& Registry::at(int class_index) const {
    if (class_index < 0 || class_index >= static_cast<int>(labels_.size()))
        throw DataError(cat("class index ", class_index, " out of range [0,",
                            labels_.size() - 1, "]"));
    return labels_[static_cast<std::size_t>(class_index)];
}

bool Registry::contains(const std::string& name) const {
    for (const auto& l : labels_)
        if (l.name == name) return true;
    return false;
}

std::vector<std::string> load_odorants(const std::string& path) {
    auto lines = read_lines(path);
    std::vector<std::string> odorants;
    for (const auto& line : lines) {
        if (line.empty() || line[0] == '#') continue;
        odorants.push_back(line);
    }
    if (odorants.size() != kMixtureDim)
        throw DataError(cat("odorant manifest '", path, "' has ", odorants.size(),
                            " entries, expected ", kMixtureDim));
    if (!std::is_sorted(odorants.begin(), odorants.end()))
        throw DataError(cat("odorant manifest '", path, "' must be alphabetical"));
    return odorants;
}

}  // namespace olfact
