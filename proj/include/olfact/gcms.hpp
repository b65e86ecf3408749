// ============================================================================
// gcms.hpp - Ingredient-level GC-MS embeddings.
//
// Two encodings: a binned mass-spectral vector (spec) built from EI spectra
// over 40-500 m/z with 1 Da half-open bins, and a standardized
// elemental-composition descriptor (atom) over the element set
// {C,H,O,N,S,Cl}.
// ============================================================================
#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "olfact/types.hpp"

namespace olfact {

// Half-open bins [m, m+1) for m = lo .. hi-1.
inline constexpr double kSpectrumLoMz = 40.0;
inline constexpr double kSpectrumHiMz = 500.0;
inline constexpr std::size_t kSpectrumBins = 460;

struct EiSpectrum {
    std::string compound_id;
    std::string ingredient;
    std::vector<std::pair<double, double>> peaks;  // (m/z, intensity)
};

enum class EmbeddingKind { spec, atom };
const char* embedding_kind_name(EmbeddingKind k);
EmbeddingKind embedding_kind_from_name(const std::string& name);

struct GcmsEmbedding {
    std::string ingredient;
    EmbeddingKind kind = EmbeddingKind::spec;
    std::vector<double> vector;
};

// Intensities summed into 1 Da bins; peaks outside [lo, hi) are dropped.
std::vector<double> accumulate_bins(const EiSpectrum& spectrum, double lo = kSpectrumLoMz,
                                    double hi = kSpectrumHiMz);

// accumulate_bins followed by max-normalization; the output max is exactly 1.
// Throws when every peak lies outside the range.
std::vector<double> bin_spectrum(const EiSpectrum& spectrum, double lo = kSpectrumLoMz,
                                 double hi = kSpectrumHiMz);

// Mean of per-compound means of binned, normalized spectra (two-level
// averaging: replicate spectra of one compound collapse first).
GcmsEmbedding ingredient_spec_embedding(const std::string& ingredient,
                                        const std::vector<EiSpectrum>& spectra,
                                        double lo = kSpectrumLoMz, double hi = kSpectrumHiMz);

// Cumulative fraction of total spectral intensity below an upper m/z bound,
// averaged over spectra. Monotone, reaches 1 at the largest observed m/z.
std::function<double(double)> mz_coverage_cdf(const std::vector<EiSpectrum>& spectra,
                                              double lo = kSpectrumLoMz);

// --- elemental-composition descriptor -------------------------------------

std::vector<std::string> default_element_set();  // C, H, O, N, S, Cl

// Hill-notation molecular formula -> element counts. Elements outside the
// set are parsed, counted into `dropped` and otherwise ignored.
std::map<std::string, int> parse_formula(const std::string& formula);

// Raw descriptor: element counts summed across an ingredient's compounds.
std::vector<double> atom_counts(const std::vector<std::string>& formulas,
                                const std::vector<std::string>& element_set,
                                std::map<std::string, int>* dropped = nullptr);

struct AtomStandardizer {
    std::vector<double> mean;
    std::vector<double> stddev;
    std::vector<std::string> element_set;
};

// Per-dimension mean/std over the training ingredients' raw descriptors.
// A zero-variance dimension is a fit error naming the element.
AtomStandardizer fit_atom_standardizer(const std::vector<std::vector<double>>& raw_descriptors,
                                       const std::vector<std::string>& element_set);

GcmsEmbedding atom_descriptor(const std::string& ingredient,
                              const std::vector<std::string>& formulas,
                              const AtomStandardizer& stats);

// --- file formats -----------------------------------------------------------

// Spectra table: compound_id <TAB> ingredient <TAB> mz:intensity ...
std::vector<EiSpectrum> load_spectra_table(const std::string& path);

// Formula table: compound_id <TAB> ingredient <TAB> formula
struct CompoundFormula {
    std::string compound_id, ingredient, formula;
};
std::vector<CompoundFormula> load_formula_table(const std::string& path);

// Embedding table: ingredient <TAB> kind <TAB> v0 <TAB> v1 ...
void save_embeddings(const std::string& path, const std::vector<GcmsEmbedding>& embeddings);
std::vector<GcmsEmbedding> load_embeddings(const std::string& path);

// Builds one embedding per ingredient found in the spectra table.
std::vector<GcmsEmbedding> build_spec_embeddings(const std::vector<EiSpectrum>& spectra);
// Builds standardized atom descriptors for every ingredient in the table.
std::vector<GcmsEmbedding> build_atom_embeddings(const std::vector<CompoundFormula>& formulas);

}  // namespace olfact
