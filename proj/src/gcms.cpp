#include "olfact/gcms.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "olfact/util.hpp"

namespace olfact {

const char* embedding_kind_name(EmbeddingKind k) {
    return k == EmbeddingKind::spec ? "spec" : "atom";
}

EmbeddingKind embedding_kind_from_name(const std::string& name) {
    if (name == "spec") return EmbeddingKind::spec;
    if (name == "atom") return EmbeddingKind::atom;
    throw DataError(cat("unknown embedding kind '", name, "'"));
}

std::vector<double> accumulate_bins(const EiSpectrum& spectrum, double lo, double hi) {
    if (!(lo < hi)) throw ConfigError("bin range requires lo < hi");
    if (spectrum.peaks.empty())
        throw DataError(cat("spectrum ", spectrum.compound_id, " has no peaks"));
    const std::size_t bins = static_cast<std::size_t>(hi - lo);
    std::vector<double> out(bins, 0.0);
    for (const auto& [mz, intensity] : spectrum.peaks) {
        if (!(mz > 0.0) || !std::isfinite(intensity) || intensity < 0.0)
            throw DataError(cat("spectrum ", spectrum.compound_id, " has an invalid peak"));
        if (mz < lo || mz >= hi) continue;
        out[static_cast<std::size_t>(mz - lo)] += intensity;
    }
    return out;
}

std::vector<double> bin_spectrum(const EiSpectrum& spectrum, double lo, double hi) {
    auto binned = accumulate_bins(spectrum, lo, hi);
    double mx = 0.0;
    for (double v : binned) mx = std::max(mx, v);
    if (mx <= 0.0)
        throw DataError(cat("spectrum ", spectrum.compound_id, ": every peak lies outside [",
                            lo, ",", hi, ")"));
    for (double& v : binned) v /= mx;
    return binned;
}

GcmsEmbedding ingredient_spec_embedding(const std::string& ingredient,
                                        const std::vector<EiSpectrum>& spectra,
                                        double lo, double hi) {
    // group replicate spectra by compound, preserving first-seen order
    std::vector<std::string> order;
    std::map<std::string, std::vector<const EiSpectrum*>> by_compound;
    for (const auto& s : spectra) {
        if (by_compound.find(s.compound_id) == by_compound.end()) order.push_back(s.compound_id);
        by_compound[s.compound_id].push_back(&s);
    }

    const std::size_t bins = static_cast<std::size_t>(hi - lo);
    std::vector<double> acc(bins, 0.0);
    std::size_t compounds_used = 0;
    for (const auto& compound : order) {
        std::vector<double> compound_mean(bins, 0.0);
        std::size_t used = 0;
        for (const auto* s : by_compound[compound]) {
            std::vector<double> normalized;
            try {
                normalized = bin_spectrum(*s, lo, hi);
            } catch (const DataError&) {
                continue;  // out-of-range replicate
            }
            for (std::size_t i = 0; i < bins; ++i) compound_mean[i] += normalized[i];
            ++used;
        }
        if (used == 0) continue;
        for (std::size_t i = 0; i < bins; ++i) acc[i] += compound_mean[i] / double(used);
        ++compounds_used;
    }
    if (compounds_used == 0)
        throw DataError(cat("ingredient '", ingredient, "': no usable spectra in range"));
    for (double& v : acc) v /= double(compounds_used);

    GcmsEmbedding e;
    e.ingredient = ingredient;
    e.kind = EmbeddingKind::spec;
    e.vector = std::move(acc);
    return e;
}

std::function<double(double)> mz_coverage_cdf(const std::vector<EiSpectrum>& spectra,
                                              double lo) {
    if (spectra.empty()) throw DataError("coverage cdf needs at least one spectrum");
    // per-spectrum normalized cumulative mass at the query bound, averaged
    struct Spec {
        std::vector<std::pair<double, double>> sorted_peaks;
        double total = 0.0;
    };
    auto specs = std::make_shared<std::vector<Spec>>();
    for (const auto& s : spectra) {
        Spec sp;
        for (const auto& p : s.peaks)
            if (p.first >= lo) sp.sorted_peaks.push_back(p);
        if (sp.sorted_peaks.empty()) continue;
        std::sort(sp.sorted_peaks.begin(), sp.sorted_peaks.end());
        for (const auto& p : sp.sorted_peaks) sp.total += p.second;
        if (sp.total > 0.0) specs->push_back(std::move(sp));
    }
    if (specs->empty()) throw DataError(cat("no peaks at or above ", lo, " m/z"));

    return [specs](double upper_bound) {
        double sum = 0.0;
        for (const auto& sp : *specs) {
            double mass = 0.0;
            for (const auto& [mz, intensity] : sp.sorted_peaks) {
                if (mz > upper_bound) break;
                mass += intensity;
            }
            sum += mass / sp.total;
        }
        return sum / double(specs->size());
    };
}

std::vector<std::string> default_element_set() { return {"C", "H", "O", "N", "S", "Cl"}; }

std::map<std::string, int> parse_formula(const std::string& formula) {
    std::map<std::string, int> counts;
    std::size_t i = 0;
    while (i < formula.size()) {
        if (!std::isupper(static_cast<unsigned char>(formula[i])))
            throw DataError(cat("cannot parse formula '", formula, "' at position ", i));
        std::string element(1, formula[i++]);
        while (i < formula.size() && std::islower(static_cast<unsigned char>(formula[i])))
            element += formula[i++];
        int count = 0;
        bool any = false;
        while (i < formula.size() && std::isdigit(static_cast<unsigned char>(formula[i]))) {
            count = count * 10 + (formula[i++] - '0');
            any = true;
        }
        counts[element] += any ? count : 1;
    }
    if (counts.empty()) throw DataError(cat("empty formula '", formula, "'"));
    return counts;
}

std::vector<double> atom_counts(const std::vector<std::string>& formulas,
                                const std::vector<std::string>& element_set,
                                std::map<std::string, int>* dropped) {
    std::vector<double> g(element_set.size(), 0.0);
    for (const auto& formula : formulas) {
        auto counts = parse_formula(formula);
        for (const auto& [element, n] : counts) {
            auto it = std::find(element_set.begin(), element_set.end(), element);
            if (it == element_set.end()) {
                if (dropped) (*dropped)[element] += n;
                continue;
            }
            g[static_cast<std::size_t>(it - element_set.begin())] += n;
        }
    }
    return g;
}

AtomStandardizer fit_atom_standardizer(const std::vector<std::vector<double>>& raw_descriptors,
                                       const std::vector<std::string>& element_set) {
    if (raw_descriptors.size() < 2)
        throw DataError("atom standardizer needs at least 2 training descriptors");
    const std::size_t d = element_set.size();
    AtomStandardizer st;
    st.element_set = element_set;
    st.mean.assign(d, 0.0);
    st.stddev.assign(d, 0.0);
    for (const auto& g : raw_descriptors) {
        if (g.size() != d) throw DataError("descriptor length does not match element set");
        for (std::size_t j = 0; j < d; ++j) st.mean[j] += g[j];
    }
    for (std::size_t j = 0; j < d; ++j) st.mean[j] /= double(raw_descriptors.size());
    for (const auto& g : raw_descriptors)
        for (std::size_t j = 0; j < d; ++j)
            st.stddev[j] += (g[j] - st.mean[j]) * (g[j] - st.mean[j]);
    for (std::size_t j = 0; j < d; ++j) {
        st.stddev[j] = std::sqrt(st.stddev[j] / double(raw_descriptors.size()));
        if (st.stddev[j] <= 0.0)
            throw DataError(cat("atom standardizer: element '", element_set[j],
                                "' has zero variance across training ingredients"));
    }
    return st;
}

GcmsEmbedding atom_descriptor(const std::string& ingredient,
                              const std::vector<std::string>& formulas,
                              const AtomStandardizer& stats) {
    std::map<std::string, int> dropped;
    auto g = atom_counts(formulas, stats.element_set, &dropped);
    for (const auto& [element, n] : dropped)
        std::cerr << "warning: ingredient '" << ingredient << "': dropped " << n << " atoms of '"
                  << element << "' outside the element set\n";
    GcmsEmbedding e;
    e.ingredient = ingredient;
    e.kind = EmbeddingKind::atom;
    e.vector.resize(g.size());
    for (std::size_t j = 0; j < g.size(); ++j)
        e.vector[j] = (g[j] - stats.mean[j]) / stats.stddev[j];
    return e;
}

// --- file formats -----------------------------------------------------------

std::vector<EiSpectrum> load_spectra_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError(cat("cannot open spectra table '", path, "'"));
    std::vector<EiSpectrum> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        EiSpectrum s;
        std::string cell;
        if (!std::getline(ss, s.compound_id, '\t') || !std::getline(ss, s.ingredient, '\t'))
            throw DataError(cat(path, ":", lineno, ": expected compound_id, ingredient, peaks"));
        while (std::getline(ss, cell, '\t')) {
            auto colon = cell.find(':');
            if (colon == std::string::npos)
                throw DataError(cat(path, ":", lineno, ": peak '", cell, "' is not mz:intensity"));
            char* end = nullptr;
            const std::string mz_s = cell.substr(0, colon), in_s = cell.substr(colon + 1);
            const double mz = std::strtod(mz_s.c_str(), &end);
            if (end != mz_s.c_str() + mz_s.size())
                throw DataError(cat(path, ":", lineno, ": bad m/z '", mz_s, "'"));
            const double intensity = std::strtod(in_s.c_str(), &end);
            if (end != in_s.c_str() + in_s.size())
                throw DataError(cat(path, ":", lineno, ": bad intensity '", in_s, "'"));
            s.peaks.emplace_back(mz, intensity);
        }
        if (s.peaks.empty()) throw DataError(cat(path, ":", lineno, ": spectrum has no peaks"));
        out.push_back(std::move(s));
    }
    if (out.empty()) throw DataError(cat("spectra table '", path, "' is empty"));
    return out;
}

std::vector<CompoundFormula> load_formula_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError(cat("cannot open formula table '", path, "'"));
    std::vector<CompoundFormula> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        CompoundFormula f;
        if (!std::getline(ss, f.compound_id, '\t') || !std::getline(ss, f.ingredient, '\t') ||
            !std::getline(ss, f.formula, '\t'))
            throw DataError(cat(path, ":", lineno, ": expected compound_id, ingredient, formula"));
        if (!f.formula.empty() && f.formula.back() == '\r') f.formula.pop_back();
        out.push_back(std::move(f));
    }
    if (out.empty()) throw DataError(cat("formula table '", path, "' is empty"));
    return out;
}

void save_embeddings(const std::string& path, const std::vector<GcmsEmbedding>& embeddings) {
    std::ostringstream os;
    for (const auto& e : embeddings) {
        os << e.ingredient << "\t" << embedding_kind_name(e.kind);
        for (double v : e.vector) os << "\t" << format_double(v);
        os << "\n";
    }
    write_text_file(path, os.str());
}

std::vector<GcmsEmbedding> load_embeddings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError(cat("cannot open embeddings file '", path, "'"));
    std::vector<GcmsEmbedding> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        GcmsEmbedding e;
        std::string cell;
        if (!std::getline(ss, e.ingredient, '\t') || !std::getline(ss, cell, '\t'))
            throw DataError(cat(path, ":", lineno, ": expected ingredient, kind, values"));
        e.kind = embedding_kind_from_name(cell);
        while (std::getline(ss, cell, '\t')) {
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (cell.empty() || end != cell.c_str() + cell.size())
                throw DataError(cat(path, ":", lineno, ": bad value '", cell, "'"));
            e.vector.push_back(v);
        }
        if (e.vector.empty()) throw DataError(cat(path, ":", lineno, ": empty embedding"));
        out.push_back(std::move(e));
    }
    if (out.empty()) throw DataError(cat("embeddings file '", path, "' is empty"));
    return out;
}

std::vector<GcmsEmbedding> build_spec_embeddings(const std::vector<EiSpectrum>& spectra) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<EiSpectrum>> by_ingredient;
    for (const auto& s : spectra) {
        if (by_ingredient.find(s.ingredient) == by_ingredient.end()) order.push_back(s.ingredient);
        by_ingredient[s.ingredient].push_back(s);
    }
    std::sort(order.begin(), order.end());
    std::vector<GcmsEmbedding> out;
    for (const auto& ing : order)
        out.push_back(ingredient_spec_embedding(ing, by_ingredient[ing]));
    return out;
}

std::vector<GcmsEmbedding> build_atom_embeddings(const std::vector<CompoundFormula>& formulas) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<std::string>> by_ingredient;
    for (const auto& f : formulas) {
        if (by_ingredient.find(f.ingredient) == by_ingredient.end()) order.push_back(f.ingredient);
        by_ingredient[f.ingredient].push_back(f.formula);
    }
    std::sort(order.begin(), order.end());

    const auto elements = default_element_set();
    std::vector<std::vector<double>> raw;
    for (const auto& ing : order) raw.push_back(atom_counts(by_ingredient[ing], elements));
    const auto stats = fit_atom_standardizer(raw, elements);

    std::vector<GcmsEmbedding> out;
    for (const auto& ing : order)
        out.push_back(atom_descriptor(ing, by_ingredient[ing], stats));
    return out;
}

}  // namespace olfact
