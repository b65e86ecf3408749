#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "olfact/gcms.hpp"
#include "olfact/util.hpp"

using namespace olfact;

namespace {

EiSpectrum spectrum(const std::string& id, std::initializer_list<std::pair<double, double>> peaks) {
    EiSpectrum s;
    s.compound_id = id;
    s.ingredient = "ing";
    s.peaks = peaks;
    return s;
}

}  // namespace

TEST_CASE("binning puts a single peak into the right bin and normalizes to one") {
    auto binned = bin_spectrum(spectrum("c", {{41.3, 7.0}}));
    REQUIRE(binned.size() == kSpectrumBins);
    REQUIRE(binned.size() == 460);
    CHECK(binned[1] == 1.0);  // [41,42) is bin index 1
    for (std::size_t i = 0; i < binned.size(); ++i)
        if (i != 1) CHECK(binned[i] == 0.0);
}

TEST_CASE("peaks within one dalton share a bin before normalization") {
    auto raw = accumulate_bins(spectrum("c", {{41.2, 3.0}, {41.8, 5.0}}));
    CHECK(raw[1] == doctest::Approx(8.0));
    auto normalized = bin_spectrum(spectrum("c", {{41.2, 3.0}, {41.8, 5.0}, {100.5, 4.0}}));
    CHECK(normalized[1] == 1.0);  // 8 is the max
    CHECK(normalized[60] == doctest::Approx(0.5));
}

TEST_CASE("peaks outside the range are dropped; all-outside errors") {
    auto binned = bin_spectrum(spectrum("c", {{39.9, 100.0}, {500.0, 50.0}, {53.0, 10.0}}));
    CHECK(binned[13] == 1.0);
    CHECK_THROWS_AS(bin_spectrum(spectrum("c", {{520.0, 5.0}})), DataError);
    CHECK_THROWS_AS(bin_spectrum(spectrum("c", {{39.99, 5.0}})), DataError);
}

TEST_CASE("binned maximum is exactly one for random in-range spectra") {
    Rng rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        EiSpectrum s;
        s.compound_id = "r";
        const int n = 1 + static_cast<int>(rng.index(40));
        for (int i = 0; i < n; ++i)
            s.peaks.emplace_back(rng.uniform(40.0, 499.99), rng.uniform(0.0, 999.0));
        s.peaks.emplace_back(rng.uniform(40.0, 499.99), 1.0);  // guarantee nonzero mass
        auto binned = bin_spectrum(s);
        double mx = 0.0;
        for (double v : binned) mx = std::max(mx, v);
        CHECK(mx == 1.0);
    }
}

TEST_CASE("ingredient embedding of a single spectrum is the binned spectrum") {
    auto s = spectrum("c", {{41.5, 2.0}, {100.2, 8.0}});
    auto e = ingredient_spec_embedding("ing", {s});
    CHECK(e.kind == EmbeddingKind::spec);
    CHECK(e.vector == bin_spectrum(s));
}

TEST_CASE("two-level averaging collapses replicates before crossing compounds") {
    auto a = spectrum("A", {{50.5, 10.0}});
    auto b = spectrum("B", {{60.5, 10.0}});
    // compound A has two identical replicates, B has one spectrum
    auto e = ingredient_spec_embedding("ing", {a, a, b});
    auto va = bin_spectrum(a), vb = bin_spectrum(b);
    // two-level: (A + B) / 2; flat would give (2A + B) / 3
    CHECK(e.vector[10] == doctest::Approx(0.5));
    CHECK(e.vector[20] == doctest::Approx(0.5));

    double flat10 = (2.0 * va[10] + vb[10]) / 3.0;
    CHECK(flat10 == doctest::Approx(2.0 / 3.0));
    CHECK(e.vector[10] != doctest::Approx(flat10));  // the two routes genuinely differ
}

TEST_CASE("identical input spectra are a fixed point of the averaging") {
    auto s = spectrum("X", {{45.5, 3.0}, {46.5, 9.0}});
    auto e = ingredient_spec_embedding("ing", {s, s, s});
    CHECK(e.vector == bin_spectrum(s));
}

TEST_CASE("embedding entries stay within [0,1] and are permutation invariant") {
    Rng rng(2);
    std::vector<EiSpectrum> spectra;
    for (int c = 0; c < 4; ++c)
        for (int r = 0; r < 2; ++r) {
            EiSpectrum s;
            s.compound_id = "c" + std::to_string(c);
            for (int i = 0; i < 12; ++i)
                s.peaks.emplace_back(rng.uniform(40.0, 499.0), rng.uniform(0.1, 50.0));
            spectra.push_back(std::move(s));
        }
    auto e = ingredient_spec_embedding("ing", spectra);
    for (double v : e.vector) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    Rng shuffle_rng(3);
    auto shuffled = spectra;
    shuffle_rng.shuffle(shuffled);
    auto e2 = ingredient_spec_embedding("ing", shuffled);
    for (std::size_t i = 0; i < e.vector.size(); ++i)
        CHECK(e.vector[i] == doctest::Approx(e2.vector[i]).epsilon(1e-12));
}

TEST_CASE("coverage cdf is a step function for a single peak") {
    auto cdf = mz_coverage_cdf({spectrum("c", {{100.0, 5.0}})});
    CHECK(cdf(99.0) == 0.0);
    CHECK(cdf(100.0) == 1.0);
    CHECK(cdf(400.0) == 1.0);
}

TEST_CASE("coverage cdf with equal peaks at 50/150/250") {
    auto cdf = mz_coverage_cdf({spectrum("c", {{50.0, 1.0}, {150.0, 1.0}, {250.0, 1.0}})});
    CHECK(cdf(160.0) == doctest::Approx(2.0 / 3.0));
    CHECK(cdf(49.0) == 0.0);
    CHECK(cdf(500.0) == 1.0);
}

TEST_CASE("coverage cdf is monotone and reaches one") {
    Rng rng(4);
    std::vector<EiSpectrum> spectra;
    for (int i = 0; i < 5; ++i) {
        EiSpectrum s;
        s.compound_id = "c" + std::to_string(i);
        for (int k = 0; k < 20; ++k)
            s.peaks.emplace_back(rng.uniform(41.0, 499.0), rng.uniform(0.1, 10.0));
        spectra.push_back(std::move(s));
    }
    auto cdf = mz_coverage_cdf(spectra);
    double prev = -1.0;
    for (double upper = 40.0; upper <= 510.0; upper += 2.5) {
        const double v = cdf(upper);
        CHECK(v >= prev - 1e-12);
        prev = v;
    }
    CHECK(cdf(500.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("formula parsing follows Hill notation") {
    auto counts = parse_formula("C2H6O");
    CHECK(counts["C"] == 2);
    CHECK(counts["H"] == 6);
    CHECK(counts["O"] == 1);
    auto chlorinated = parse_formula("C6H5Cl");
    CHECK(chlorinated["Cl"] == 1);
    auto repeated = parse_formula("CH3CH3");  // repeated elements accumulate
    CHECK(repeated["C"] == 2);
    CHECK(repeated["H"] == 6);
    CHECK_THROWS_AS(parse_formula(""), DataError);
    CHECK_THROWS_AS(parse_formula("c2h6"), DataError);
}

TEST_CASE("atom counts sum over compounds and drop foreign elements") {
    auto g = atom_counts({"C2H6O"}, default_element_set());
    CHECK(g == std::vector<double>{2, 6, 1, 0, 0, 0});

    auto two = atom_counts({"C1H4", "C2H6O"}, default_element_set());
    CHECK(two == std::vector<double>{3, 10, 1, 0, 0, 0});

    std::map<std::string, int> dropped;
    auto with_si = atom_counts({"C2H6Si"}, default_element_set(), &dropped);
    CHECK(with_si == std::vector<double>{2, 6, 0, 0, 0, 0});
    CHECK(dropped["Si"] == 1);
}

TEST_CASE("atom standardizer gives zero mean unit variance on its training set") {
    Rng rng(5);
    std::vector<std::vector<double>> raw;
    for (int i = 0; i < 30; ++i) {
        std::vector<double> g(6);
        for (double& v : g) v = rng.uniform(0.0, 40.0);
        raw.push_back(std::move(g));
    }
    auto stats = fit_atom_standardizer(raw, default_element_set());
    std::vector<double> mean(6, 0.0), var(6, 0.0);
    for (const auto& g : raw)
        for (int j = 0; j < 6; ++j) mean[j] += (g[j] - stats.mean[j]) / stats.stddev[j];
    for (double& m : mean) m /= 30.0;
    for (const auto& g : raw)
        for (int j = 0; j < 6; ++j) {
            const double z = (g[j] - stats.mean[j]) / stats.stddev[j];
            var[j] += (z - mean[j]) * (z - mean[j]);
        }
    for (int j = 0; j < 6; ++j) {
        CHECK(std::fabs(mean[j]) < 1e-9);
        CHECK(std::fabs(var[j] / 30.0 - 1.0) < 1e-9);
    }
}

TEST_CASE("atom standardizer rejects constant dimensions by element name") {
    std::vector<std::vector<double>> raw{{1, 2, 3, 0, 0, 0}, {4, 5, 6, 0, 0, 0}};
    CHECK_THROWS_WITH_AS(fit_atom_standardizer(raw, default_element_set()),
                         doctest::Contains("N"), DataError);
}

TEST_CASE("gcms tables round-trip through files") {
    testutil::TempDir tmp("gcms");
    // spectra file
    write_text_file(tmp.sub("spectra.tsv"),
                    "cmpd0\tapple\t41.3:7\t55.2:3\n"
                    "cmpd0\tapple\t41.4:6\t55.1:4\n"
                    "cmpd1\tapple\t60.0:2\n"
                    "cmpd2\tbanana\t70.5:9\n");
    auto spectra = load_spectra_table(tmp.sub("spectra.tsv"));
    REQUIRE(spectra.size() == 4);
    CHECK(spectra[0].peaks.size() == 2);

    auto embeddings = build_spec_embeddings(spectra);
    REQUIRE(embeddings.size() == 2);  // apple, banana
    CHECK(embeddings[0].ingredient == "apple");
    CHECK(embeddings[0].vector.size() == 460);

    save_embeddings(tmp.sub("emb.tsv"), embeddings);
    auto loaded = load_embeddings(tmp.sub("emb.tsv"));
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[1].ingredient == "banana");
    CHECK(loaded[0].vector == embeddings[0].vector);

    // formula file and atom embeddings
    write_text_file(tmp.sub("formulas.tsv"),
                    "cmpd0\tapple\tC6H12O6\n"
                    "cmpd1\tapple\tC2H6O\n"
                    "cmpd2\tbanana\tC5H10O2\n"
                    "cmpd3\tcherry\tC4H8S\n");
    auto formulas = load_formula_table(tmp.sub("formulas.tsv"));
    REQUIRE(formulas.size() == 4);
    // N and Cl are constant (all zero) across ingredients here, so the
    // standardizer must refuse
    CHECK_THROWS_AS(build_atom_embeddings(formulas), DataError);

    write_text_file(tmp.sub("formulas2.tsv"),
                    "cmpd0\tapple\tC6H12O6N2Cl1S1\n"
                    "cmpd1\tbanana\tC5H10O2\n"
                    "cmpd2\tcherry\tC4H8S2N1Cl3\n");
    auto atom = build_atom_embeddings(load_formula_table(tmp.sub("formulas2.tsv")));
    REQUIRE(atom.size() == 3);
    CHECK(atom[0].kind == EmbeddingKind::atom);
    CHECK(atom[0].vector.size() == 6);
}

TEST_CASE("malformed gcms inputs are rejected with context") {
    testutil::TempDir tmp("gcms_bad");
    write_text_file(tmp.sub("bad.tsv"), "cmpd0\tapple\t41.3;7\n");
    CHECK_THROWS_AS(load_spectra_table(tmp.sub("bad.tsv")), DataError);
    write_text_file(tmp.sub("bad2.tsv"), "cmpd0\tapple\tx:7\n");
    CHECK_THROWS_AS(load_spectra_table(tmp.sub("bad2.tsv")), DataError);
}
