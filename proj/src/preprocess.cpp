#include "olfact/preprocess.hpp"

#include <cmath>

#include "olfact/util.hpp"

namespace olfact {

std::size_t PreprocessConfig::effective_stride() const {
    return stride == 0 ? window / 2 : stride;
}

void PreprocessConfig::validate() const {
    if (window < 1) throw ConfigError("preprocess.window must be >= 1");
    if (diff_lag < 0) throw ConfigError("preprocess.diff_lag must be >= 0");
    if (stride == 0 && window % 2 != 0)
        throw ConfigError("preprocess.window must be even when stride defaults to w/2");
    if (effective_stride() > window)
        throw ConfigError("preprocess.stride must be <= window");
}

SensorSession temporal_difference(const SensorSession& session, int p) {
    if (p < 0) throw ConfigError("diff lag must be >= 0");
    if (p == 0) return session;
    const std::size_t T = session.num_steps;
    const std::size_t d = session.schema.num_channels();
    if (static_cast<std::size_t>(p) >= T)
        throw DataError(cat("session ", session.session_id, ": length ", T,
                            " too short for diff lag ", p));
    SensorSession out = session;
    out.num_steps = T - static_cast<std::size_t>(p);
    out.readings.resize(out.num_steps * d);
    for (std::size_t t = 0; t < out.num_steps; ++t)
        for (std::size_t ch = 0; ch < d; ++ch)
            out.readings[t * d + ch] = session.at(t + p, ch) - session.at(t, ch);
    return out;
}

std::size_t count_windows(std::size_t T, std::size_t w, std::size_t s, bool pad_final) {
    if (w < 1 || s < 1) throw ConfigError("window and stride must be >= 1");
    if (T < w) return 0;
    const std::size_t span = T - w;
    if (pad_final) return (span + s - 1) / s + 1;
    return span / s + 1;
}

std::vector<Window> slice_windows(const SensorSession& session, const PreprocessConfig& config) {
    config.validate();
    const std::size_t w = config.window;
    const std::size_t s = config.effective_stride();
    const std::size_t d = session.schema.num_channels();
    const std::size_t n = count_windows(session.num_steps, w, s, config.pad_final);

    std::vector<Window> windows;
    windows.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Window win;
        win.length = w;
        win.channels = d;
        win.label = session.label;
        win.source_session = session.session_id;
        win.offset = i * s;
        win.preprocessing.diff_lag = config.diff_lag;
        win.values.resize(w * d);
        for (std::size_t t = 0; t < w; ++t) {
            // the final padded window repeats the last row past the end
            std::size_t src = std::min(win.offset + t, session.num_steps - 1);
            for (std::size_t ch = 0; ch < d; ++ch)
                win.values[t * d + ch] = session.at(src, ch);
        }
        windows.push_back(std::move(win));
    }
    return windows;
}

StandardizationStats fit_standardizer(const std::vector<Window>& train_windows,
                                      const ChannelSchema& schema,
                                      const std::string& fitted_on) {
    const std::size_t d = schema.num_channels();
    std::size_t rows = 0;
    for (const auto& w : train_windows) {
        if (w.channels != d)
            throw DataError(cat("window from ", w.source_session, " has ", w.channels,
                                " channels, schema has ", d));
        rows += w.length;
    }
    if (rows < 2) throw DataError("need at least 2 rows to fit standardization statistics");

    StandardizationStats stats;
    stats.mean.assign(d, 0.0);
    stats.stddev.assign(d, 0.0);
    stats.fitted_on = fitted_on;

    for (const auto& w : train_windows)
        for (std::size_t t = 0; t < w.length; ++t)
            for (std::size_t ch = 0; ch < d; ++ch) stats.mean[ch] += w.at(t, ch);
    for (std::size_t ch = 0; ch < d; ++ch) stats.mean[ch] /= static_cast<double>(rows);

    for (const auto& w : train_windows)
        for (std::size_t t = 0; t < w.length; ++t)
            for (std::size_t ch = 0; ch < d; ++ch) {
                const double delta = w.at(t, ch) - stats.mean[ch];
                stats.stddev[ch] += delta * delta;
            }
    for (std::size_t ch = 0; ch < d; ++ch) {
        stats.stddev[ch] = std::sqrt(stats.stddev[ch] / static_cast<double>(rows));
        if (stats.stddev[ch] <= 0.0)
            throw DataError(cat("cannot standardize: channel '", schema.channels[ch],
                                "' has zero variance on the fit split"));
    }

    std::string blob = fitted_on;
    for (std::size_t ch = 0; ch < d; ++ch)
        blob += "|" + format_double(stats.mean[ch]) + "," + format_double(stats.stddev[ch]);
    stats.id = fnv1a_hex(blob);
    return stats;
}

Window standardize(const Window& w, const StandardizationStats& stats) {
    if (w.channels != stats.mean.size())
        throw DataError(cat("channel count mismatch: window has ", w.channels,
                            ", stats fitted on ", stats.mean.size()));
    Window out = w;
    for (std::size_t t = 0; t < w.length; ++t)
        for (std::size_t ch = 0; ch < w.channels; ++ch)
            out.at(t, ch) = (w.at(t, ch) - stats.mean[ch]) / stats.stddev[ch];
    out.preprocessing.stats_id = stats.id;
    return out;
}

std::vector<Window> standardize(const std::vector<Window>& windows,
                                const StandardizationStats& stats) {
    std::vector<Window> out;
    out.reserve(windows.size());
    for (const auto& w : windows) out.push_back(standardize(w, stats));
    return out;
}

Window destandardize(const Window& w, const StandardizationStats& stats) {
    if (w.channels != stats.mean.size()) throw DataError("channel count mismatch");
    Window out = w;
    for (std::size_t t = 0; t < w.length; ++t)
        for (std::size_t ch = 0; ch < w.channels; ++ch)
            out.at(t, ch) = w.at(t, ch) * stats.stddev[ch] + stats.mean[ch];
    out.preprocessing.stats_id.clear();
    return out;
}

std::vector<Window> preprocess_session(const SensorSession& session,
                                       const PreprocessConfig& config) {
    config.validate();
    if (config.diff_lag == 0) return slice_windows(session, config);
    return slice_windows(temporal_difference(session, config.diff_lag), config);
}

}  // namespace olfact
