#include "olfact/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "olfact/csv.hpp"
#include "olfact/util.hpp"

namespace fs = std::filesystem;

namespace olfact {

std::size_t DatasetManifest::count(SplitTag tag) const {
    std::size_t n = 0;
    for (const auto& s : sessions)
        if (s.split_tag == tag) ++n;
    return n;
}

const char* split_policy_name(SplitPolicy p) {
    switch (p) {
        case SplitPolicy::last_day: return "last-day";
        case SplitPolicy::leave_one_day_out: return "leave-one-day-out";
        case SplitPolicy::mixture: return "mixture";
    }
    return "?";
}

SplitPolicy split_policy_from_name(const std::string& name) {
    if (name == "last-day") return SplitPolicy::last_day;
    if (name == "leave-one-day-out") return SplitPolicy::leave_one_day_out;
    if (name == "mixture") return SplitPolicy::mixture;
    throw ConfigError(cat("unknown split policy '", name,
                          "' (expected last-day, leave-one-day-out or mixture)"));
}

namespace {

int parse_day_token(const std::string& stem) {
    auto pos = stem.rfind("day");
    if (pos == std::string::npos) return 0;
    std::size_t i = pos + 3;
    int day = 0;
    bool any = false;
    while (i < stem.size() && stem[i] >= '0' && stem[i] <= '9') {
        day = day * 10 + (stem[i] - '0');
        ++i;
        any = true;
    }
    return any ? day : 0;
}

SplitTag split_from_dir(const std::string& name, bool is_mixture, const std::string& root) {
    if (name == "train") return SplitTag::train;
    if (name == "test" || name == "test-seen") return SplitTag::test_seen;
    if (name == "test-unseen") {
        if (!is_mixture)
            throw DataError(cat(root, ": test-unseen split is only valid for mixture datasets"));
        return SplitTag::test_unseen;
    }
    throw DataError(cat(root, ": unexpected split directory '", name, "'"));
}

std::map<std::string, std::vector<double>> load_recipes(const std::string& path) {
    std::map<std::string, std::vector<double>> recipes;
    std::ifstream in(path);
    if (!in) throw DataError(cat("cannot open recipe table '", path, "'"));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string id, cell;
        if (!std::getline(ss, id, '\t'))
            throw DataError(cat(path, ":", lineno, ": missing session id"));
        std::vector<double> props;
        while (std::getline(ss, cell, '\t')) {
            char* end = nullptr;
            double v = std::strtod(cell.c_str(), &end);
            if (cell.empty() || end != cell.c_str() + cell.size())
                throw DataError(cat(path, ":", lineno, ": non-numeric proportion '", cell, "'"));
            props.push_back(v);
        }
        if (props.size() != kMixtureDim)
            throw DataError(cat(path, ":", lineno, ": expected ", kMixtureDim,
                                " proportions, got ", props.size()));
        recipes[id] = std::move(props);
    }
    return recipes;
}

}  // namespace

DatasetManifest scan_dataset(const std::string& root, const ChannelSchema& schema,
                             bool is_mixture, bool assume_day_order) {
    if (!fs::is_directory(root)) throw DataError(cat("dataset root '", root, "' is not a directory"));
    DatasetManifest m;
    m.root = root;
    m.schema = schema;
    m.is_mixture = is_mixture;

    for (const auto& split_entry : fs::directory_iterator(root)) {
        if (!split_entry.is_directory()) continue;
        const std::string split_name = split_entry.path().filename().string();
        const SplitTag tag = split_from_dir(split_name, is_mixture, root);
        for (const auto& ing_entry : fs::directory_iterator(split_entry.path())) {
            if (!ing_entry.is_directory()) continue;
            const std::string ingredient = ing_entry.path().filename().string();
            for (const auto& file : fs::directory_iterator(ing_entry.path())) {
                if (!file.is_regular_file() || file.path().extension() != ".csv") continue;
                SessionRef ref;
                ref.path = file.path().string();
                ref.session_id = split_name + "/" + ingredient + "/" + file.path().stem().string();
                ref.ingredient = ingredient;
                ref.day_index = parse_day_token(file.path().stem().string());
                ref.split_tag = tag;
                m.sessions.push_back(std::move(ref));
            }
        }
    }
    std::sort(m.sessions.begin(), m.sessions.end(),
              [](const SessionRef& a, const SessionRef& b) { return a.session_id < b.session_id; });
    if (m.sessions.empty()) throw DataError(cat("no session files found under '", root, "'"));

    if (assume_day_order && !is_mixture) {
        std::map<std::string, std::vector<SessionRef*>> per_ingredient;
        for (auto& s : m.sessions) per_ingredient[s.ingredient].push_back(&s);
        for (auto& [ing, refs] : per_ingredient) {
            std::stable_sort(refs.begin(), refs.end(), [](SessionRef* a, SessionRef* b) {
                // train files before test, lexicographic within a split
                if (a->split_tag != b->split_tag) return a->split_tag == SplitTag::train;
                return a->session_id < b->session_id;
            });
            int day = 1;
            for (auto* r : refs)
                if (r->day_index == 0) r->day_index = day++;
        }
    }

    const std::string recipe_path = root + "/recipes.tsv";
    if (is_mixture) {
        if (!fs::exists(recipe_path))
            throw DataError(cat("mixture dataset is missing '", recipe_path, "'"));
        m.recipes = load_recipes(recipe_path);
    }
    return m;
}

DatasetManifest build_splits(const DatasetManifest& manifest, SplitPolicy policy,
                             int holdout_day) {
    DatasetManifest out = manifest;
    switch (policy) {
        case SplitPolicy::mixture:
            if (!manifest.is_mixture)
                throw ConfigError("mixture split policy requires a mixture dataset");
            return out;  // tags come from directory placement
        case SplitPolicy::last_day:
            holdout_day = 6;
            [[fallthrough]];
        case SplitPolicy::leave_one_day_out: {
            if (manifest.is_mixture)
                throw ConfigError("day-based split policies require a base dataset");
            if (holdout_day < 1 || holdout_day > 6)
                throw ConfigError(cat("holdout day ", holdout_day, " out of range [1,6]"));
            for (auto& s : out.sessions) {
                if (s.day_index < 1)
                    throw DataError(cat("session ", s.session_id,
                                        ": missing day metadata (no day<k> token in file name; "
                                        "rescan with assume_day_order to infer)"));
                s.split_tag = s.day_index == holdout_day ? SplitTag::test_seen : SplitTag::train;
            }
            return out;
        }
    }
    throw ConfigError("unhandled split policy");
}

std::vector<SensorSession> load_sessions(const DatasetManifest& manifest,
                                         const Registry& registry) {
    std::vector<SensorSession> sessions;
    sessions.reserve(manifest.sessions.size());
    for (const auto& ref : manifest.sessions) {
        SensorSession s = parse_session_csv(ref.path, manifest.schema);
        s.session_id = ref.session_id;
        s.day_index = ref.day_index;
        s.split_tag = ref.split_tag;
        if (manifest.is_mixture) {
            auto it = manifest.recipes.find(ref.session_id);
            if (it == manifest.recipes.end())
                throw DataError(cat("session ", ref.session_id, " has no recipe entry"));
            s.label = make_mixture_target(it->second);
        } else {
            s.label = registry.lookup(ref.ingredient);
        }
        validate_session(s);
        sessions.push_back(std::move(s));
    }
    return sessions;
}

void validate_manifest(const DatasetManifest& manifest, const Registry& registry,
                       bool strict_layout) {
    std::set<std::string> seen_ids;
    for (const auto& ref : manifest.sessions)
        if (!seen_ids.insert(ref.session_id).second)
            throw DataError(cat("duplicate session id ", ref.session_id));
    load_sessions(manifest, registry);  // parses and validates every file
    if (strict_layout && !manifest.is_mixture) {
        std::map<std::string, std::size_t> counts;
        std::map<std::string, std::set<int>> days;
        for (const auto& ref : manifest.sessions) {
            ++counts[ref.ingredient];
            if (ref.day_index > 0 && !days[ref.ingredient].insert(ref.day_index).second)
                throw DataError(cat("ingredient '", ref.ingredient, "' has two sessions for day ",
                                    ref.day_index));
        }
        for (const auto& [ing, n] : counts) {
            if (n != 6)
                throw DataError(cat("ingredient '", ing, "' has ", n,
                                    " session files, base layout expects 6"));
            for (int day = 1; day <= 6; ++day)
                if (!days[ing].empty() && !days[ing].count(day))
                    throw DataError(cat("ingredient '", ing, "' is missing day ", day));
        }
    }
}

std::map<std::string, std::vector<ChannelSummary>> summarize(
    const std::vector<SensorSession>& sessions) {
    if (sessions.empty()) throw DataError("cannot summarize an empty session set");
    const std::size_t d = sessions.front().schema.num_channels();
    std::map<std::string, std::vector<std::vector<double>>> values;  // split -> channel -> rows
    for (const auto& s : sessions) {
        auto& per_channel = values[split_tag_name(s.split_tag)];
        per_channel.resize(d);
        for (std::size_t t = 0; t < s.num_steps; ++t)
            for (std::size_t ch = 0; ch < d; ++ch) per_channel[ch].push_back(s.at(t, ch));
    }

    std::map<std::string, std::vector<ChannelSummary>> out;
    for (auto& [split, per_channel] : values) {
        std::vector<ChannelSummary> row(d);
        for (std::size_t ch = 0; ch < d; ++ch) {
            auto& v = per_channel[ch];
            if (v.empty()) throw DataError(cat("split '", split, "' is empty"));
            std::sort(v.begin(), v.end());
            ChannelSummary cs;
            cs.rows = v.size();
            for (double x : v) cs.mean += x;
            cs.mean /= static_cast<double>(v.size());
            for (double x : v) cs.stddev += (x - cs.mean) * (x - cs.mean);
            cs.stddev = std::sqrt(cs.stddev / static_cast<double>(v.size()));
            auto quantile = [&v](double p) {
                const double h = p * static_cast<double>(v.size() - 1);
                const std::size_t lo = static_cast<std::size_t>(h);
                const double frac = h - static_cast<double>(lo);
                if (lo + 1 >= v.size()) return v.back();
                return v[lo] + frac * (v[lo + 1] - v[lo]);
            };
            cs.min = v.front();
            cs.q25 = quantile(0.25);
            cs.q50 = quantile(0.50);
            cs.q75 = quantile(0.75);
            cs.max = v.back();
            row[ch] = cs;
        }
        out[split] = std::move(row);
    }
    return out;
}

std::string summary_table(const std::map<std::string, std::vector<ChannelSummary>>& summary,
                          const ChannelSchema& schema) {
    std::ostringstream os;
    for (const auto& [split, row] : summary) {
        os << "split\t" << split << "\trows\t" << (row.empty() ? 0 : row[0].rows) << "\n";
        os << "stat";
        for (const auto& ch : schema.channels) os << "\t" << ch;
        os << "\n";
        auto emit = [&](const char* name, auto pick) {
            os << name;
            for (const auto& cs : row) os << "\t" << format_double(pick(cs));
            os << "\n";
        };
        emit("mean", [](const ChannelSummary& c) { return c.mean; });
        emit("std", [](const ChannelSummary& c) { return c.stddev; });
        emit("min", [](const ChannelSummary& c) { return c.min; });
        emit("25%", [](const ChannelSummary& c) { return c.q25; });
        emit("50%", [](const ChannelSummary& c) { return c.q50; });
        emit("75%", [](const ChannelSummary& c) { return c.q75; });
        emit("max", [](const ChannelSummary& c) { return c.max; });
    }
    return os.str();
}

}  // namespace olfact
