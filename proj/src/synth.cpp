#include "olfact/synth.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "olfact/csv.hpp"
#include "olfact/util.hpp"

namespace fs = std::filesystem;

namespace olfact {

namespace {
constexpr double kTau = 6.283185307179586;

std::string two_digit(std::size_t i) {
    std::string s = std::to_string(i);
    return s.size() < 2 ? "0" + s : s;
}
}  // namespace

void SyntheticConfig::validate() const {
    if (num_classes < 1 || sessions_per_class < 1) throw ConfigError("synthetic: empty dataset");
    if (duration_steps < 1 || channels < 1) throw ConfigError("synthetic: empty sessions");
    if (noise_std < 0 || drift_std < 0 || day_shift_std < 0 || shift_day_std < 0)
        throw ConfigError("synthetic: variances must be >= 0");
    if (!signatures.empty()) {
        if (signatures.size() != num_classes)
            throw ConfigError("synthetic: signatures must have one row per class");
        for (const auto& s : signatures)
            if (s.size() != channels)
                throw ConfigError("synthetic: signature rows must have one entry per channel");
    }
}

std::vector<std::string> SyntheticConfig::class_names() const {
    std::vector<std::string> names;
    for (std::size_t c = 0; c < num_classes; ++c) names.push_back("class" + two_digit(c));
    return names;
}

namespace {

struct ClassParams {
    std::vector<double> signature;  // per channel
    std::vector<double> amp;
    std::vector<double> freq;
    std::vector<double> phase;
};

ClassParams draw_class_params(Rng rng, std::size_t channels, const SyntheticConfig& cfg,
                              const std::vector<double>* fixed_signature) {
    ClassParams p;
    p.signature.resize(channels);
    p.amp.resize(channels);
    p.freq.resize(channels);
    p.phase.resize(channels);
    for (std::size_t ch = 0; ch < channels; ++ch) {
        p.signature[ch] = fixed_signature ? (*fixed_signature)[ch]
                                          : rng.uniform(cfg.signature_lo, cfg.signature_hi);
        p.amp[ch] = rng.uniform(cfg.osc_amp_lo, cfg.osc_amp_hi);
        p.freq[ch] = rng.uniform(cfg.osc_freq_lo, cfg.osc_freq_hi);
        p.phase[ch] = rng.uniform(0.0, kTau);
    }
    return p;
}

ChannelSchema synth_schema(std::size_t channels) {
    ChannelSchema base = base_schema();
    if (channels == base.num_channels()) return base;
    ChannelSchema s;
    s.sample_rate_hz = 1.0;
    for (std::size_t ch = 0; ch < channels; ++ch) s.channels.push_back("ch" + two_digit(ch));
    return s;
}

void write_synthetic_gcms(const std::string& root, const std::vector<std::string>& names,
                          Rng rng) {
    std::ostringstream spectra, formulas;
    int compound_serial = 0;
    for (const auto& name : names) {
        Rng class_rng = rng.fork(static_cast<std::uint64_t>(compound_serial) + 7001);
        for (int k = 0; k < 2; ++k) {
            const std::string compound_id = "cmpd" + std::to_string(compound_serial++);
            // a handful of characteristic peaks per compound
            std::vector<std::pair<int, double>> peaks;
            const int num_peaks = 4 + static_cast<int>(class_rng.index(4));
            for (int i = 0; i < num_peaks; ++i)
                peaks.emplace_back(41 + static_cast<int>(class_rng.index(440)),
                                   class_rng.uniform(5.0, 100.0));
            for (int rep = 0; rep < 2; ++rep) {
                spectra << compound_id << "\t" << name;
                for (auto& [mz, inten] : peaks)
                    spectra << "\t" << mz << ":"
                            << format_double(inten * (1.0 + 0.05 * class_rng.gaussian()));
                spectra << "\n";
            }
            formulas << compound_id << "\t" << name << "\tC" << (2 + class_rng.index(10)) << "H"
                     << (4 + class_rng.index(20)) << "O" << (1 + class_rng.index(4));
            if (class_rng.uniform() < 0.5) formulas << "N" << (1 + class_rng.index(3));
            if (class_rng.uniform() < 0.4) formulas << "S" << (1 + class_rng.index(2));
            if (class_rng.uniform() < 0.3) formulas << "Cl" << (1 + class_rng.index(3));
            formulas << "\n";
        }
    }
    write_text_file(root + "/gcms_spectra.tsv", spectra.str());
    write_text_file(root + "/gcms_formulas.tsv", formulas.str());
}

}  // namespace

DatasetManifest generate_synthetic(const SyntheticConfig& config, const std::string& root) {
    config.validate();
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) throw DataError(cat("cannot create '", root, "': ", ec.message()));

    const ChannelSchema schema = synth_schema(config.channels);
    const auto names = config.class_names();
    Rng master(config.seed);

    // class parameters
    std::vector<ClassParams> params;
    for (std::size_t c = 0; c < config.num_classes; ++c)
        params.push_back(draw_class_params(master.fork(c + 1), config.channels, config,
                                           config.signatures.empty() ? nullptr
                                                                     : &config.signatures[c]));

    // per-day channel offsets, shared across classes within a day
    std::vector<std::vector<double>> day_offset(config.sessions_per_class + 1,
                                                std::vector<double>(config.channels, 0.0));
    for (std::size_t day = 1; day <= config.sessions_per_class; ++day) {
        Rng day_rng = master.fork(9000 + day);
        for (std::size_t ch = 0; ch < config.channels; ++ch) {
            day_offset[day][ch] = day_rng.gaussian(0.0, config.day_shift_std);
            if (static_cast<int>(day) == config.shift_day)
                day_offset[day][ch] += day_rng.gaussian(0.0, config.shift_day_std);
        }
    }

    // registry for the synthetic classes, categories assigned round-robin
    {
        std::ostringstream reg;
        reg << "# synthetic registry seed " << config.seed << "\n";
        for (std::size_t c = 0; c < names.size(); ++c)
            reg << names[c] << "\t"
                << category_name(static_cast<Category>(c % kNumCategories)) << "\n";
        write_text_file(root + "/registry.tsv", reg.str());
    }

    for (std::size_t c = 0; c < config.num_classes; ++c) {
        for (std::size_t day = 1; day <= config.sessions_per_class; ++day) {
            const bool is_test = day == config.sessions_per_class;
            const std::string dir = root + "/" + (is_test ? "test" : "train") + "/" + names[c];
            fs::create_directories(dir);

            Rng rng = master.fork(c * 1000 + day);
            SensorSession s;
            s.schema = schema;
            s.num_steps = config.duration_steps;
            s.readings.resize(config.duration_steps * config.channels);
            std::vector<double> drift(config.channels, 0.0);
            for (std::size_t t = 0; t < config.duration_steps; ++t) {
                for (std::size_t ch = 0; ch < config.channels; ++ch) {
                    drift[ch] = config.drift_coeff * drift[ch] +
                                rng.gaussian(0.0, config.drift_std);
                    const auto& p = params[c];
                    double v = p.signature[ch] +
                               p.amp[ch] * std::sin(kTau * p.freq[ch] * static_cast<double>(t) +
                                                    p.phase[ch]) +
                               drift[ch] + day_offset[day][ch] +
                               rng.gaussian(0.0, config.noise_std);
                    s.readings[t * config.channels + ch] = v;
                }
            }
            write_session_csv(dir + "/day" + std::to_string(day) + ".csv", s);
        }
    }

    if (config.write_gcms) write_synthetic_gcms(root, names, master.fork(777));
    return scan_dataset(root, schema, /*is_mixture=*/false);
}

void SyntheticMixtureConfig::validate() const {
    if (odorants_used < 2 || odorants_used > kMixtureDim)
        throw ConfigError("synthetic mixture: odorants_used out of range");
    if (duration_steps < 1) throw ConfigError("synthetic mixture: empty sessions");
    if (noise_std < 0) throw ConfigError("synthetic mixture: variances must be >= 0");
}

DatasetManifest generate_synthetic_mixture(const SyntheticMixtureConfig& config,
                                           const std::string& root) {
    config.validate();
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) throw DataError(cat("cannot create '", root, "': ", ec.message()));

    const ChannelSchema schema = mixture_schema();
    const std::size_t d = schema.num_channels();
    const std::size_t K = config.odorants_used;
    Rng master(config.seed);

    // odorant response parameters over the 4 mixture channels; each odorant
    // responds strongest on its primary channel so the mixing map stays
    // well-conditioned, mirroring the cross-sensitive-but-dominant behavior
    // of real MOX channels
    struct Odorant {
        std::vector<double> sig, amp, freq, phase;
    };
    const double span = config.signature_hi - config.signature_lo;
    std::vector<Odorant> odorants(K);
    for (std::size_t i = 0; i < K; ++i) {
        Rng rng = master.fork(100 + i);
        auto& o = odorants[i];
        o.sig.resize(d);
        o.amp.resize(d);
        o.freq.resize(d);
        o.phase.resize(d);
        for (std::size_t ch = 0; ch < d; ++ch) {
            o.sig[ch] = ch == i % d
                            ? rng.uniform(config.signature_hi - 0.25 * span, config.signature_hi)
                            : rng.uniform(config.signature_lo, config.signature_lo + 0.2 * span);
            o.amp[ch] = rng.uniform(config.osc_amp_lo, config.osc_amp_hi);
            o.freq[ch] = rng.uniform(config.osc_freq_lo, config.osc_freq_hi);
            o.phase[ch] = rng.uniform(0.0, kTau);
        }
    }

    struct RecipeDef {
        std::vector<double> raw;  // 12 entries
        std::string slug;
    };
    auto recipe = [&](std::initializer_list<std::pair<std::size_t, double>> parts) {
        RecipeDef r;
        r.raw.assign(kMixtureDim, 0.0);
        for (auto& [idx, frac] : parts) {
            r.raw[idx] = frac;
            if (!r.slug.empty()) r.slug += "_";
            r.slug += "o" + std::to_string(idx) + "-" +
                      std::to_string(static_cast<int>(std::lround(frac * 100)));
        }
        return r;
    };

    std::vector<RecipeDef> known, unseen;
    for (std::size_t i = 0; i < K; ++i) known.push_back(recipe({{i, 1.0}}));
    for (std::size_t i = 0; i < K; ++i)
        for (std::size_t j = i + 1; j < K; ++j)
            for (double f : {0.3, 0.5, 0.7}) known.push_back(recipe({{i, f}, {j, 1.0 - f}}));
    known.push_back(recipe({{0, 0.1}, {1, 0.3}, {2, 0.6}}));
    if (K >= 4) known.push_back(recipe({{1, 0.1}, {2, 0.3}, {3, 0.6}}));

    for (std::size_t i = 0; i < K; ++i)
        for (std::size_t j = i + 1; j < K; ++j)
            for (double f : {0.1, 0.9}) unseen.push_back(recipe({{i, f}, {j, 1.0 - f}}));
    unseen.push_back(recipe({{0, 0.2}, {1, 0.3}, {2, 0.5}}));

    std::ostringstream recipes_tsv;
    std::uint64_t serial = 0;
    auto emit_sessions = [&](const RecipeDef& r, const char* split, std::size_t count) {
        const std::string dir = root + "/" + split + "/" + r.slug;
        fs::create_directories(dir);
        for (std::size_t k = 0; k < count; ++k) {
            Rng rng = master.fork(50000 + serial++);
            SensorSession s;
            s.schema = schema;
            s.num_steps = config.duration_steps;
            s.readings.resize(config.duration_steps * d);
            double total = 0.0;
            for (double v : r.raw) total += v;
            for (std::size_t t = 0; t < config.duration_steps; ++t) {
                for (std::size_t ch = 0; ch < d; ++ch) {
                    double v = 0.0;
                    for (std::size_t i = 0; i < K; ++i) {
                        const double pi = r.raw[i] / total;
                        if (pi == 0.0) continue;
                        const auto& o = odorants[i];
                        v += pi * (o.sig[ch] +
                                   o.amp[ch] * std::sin(kTau * o.freq[ch] *
                                                            static_cast<double>(t) +
                                                        o.phase[ch]));
                    }
                    s.readings[t * d + ch] = v + rng.gaussian(0.0, config.noise_std);
                }
            }
            const std::string file = "s" + std::to_string(k);
            write_session_csv(dir + "/" + file + ".csv", s);
            recipes_tsv << split << "/" << r.slug << "/" << file;
            for (double v : r.raw) recipes_tsv << "\t" << format_double(v);
            recipes_tsv << "\n";
        }
    };

    for (const auto& r : known) emit_sessions(r, "train", config.train_sessions_per_recipe);
    for (const auto& r : known) emit_sessions(r, "test-seen", config.seen_sessions_per_recipe);
    for (const auto& r : unseen) emit_sessions(r, "test-unseen", 1);
    write_text_file(root + "/recipes.tsv", recipes_tsv.str());

    return scan_dataset(root, schema, /*is_mixture=*/true);
}

}  // namespace olfact
