#include "olfact/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "olfact/metrics.hpp"
#include "olfact/util.hpp"

namespace olfact {

namespace {

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
// (eigenvalues, eigenvectors as rows).
std::pair<std::vector<double>, std::vector<std::vector<double>>> jacobi_eigen(
    std::vector<std::vector<double>> a) {
    const std::size_t n = a.size();
    std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
        if (off < 1e-30) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::fabs(a[p][q]) < 1e-300) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = a[i][p], aiq = a[i][q];
                    a[i][p] = c * aip - s * aiq;
                    a[i][q] = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double api = a[p][i], aqi = a[q][i];
                    a[p][i] = c * api - s * aqi;
                    a[q][i] = s * api + c * aqi;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = v[i][p], viq = v[i][q];
                    v[i][p] = c * vip - s * viq;
                    v[i][q] = s * vip + c * viq;
                }
            }
    }
    std::vector<double> eig(n);
    std::vector<std::vector<double>> vectors(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        eig[i] = a[i][i];
        for (std::size_t j = 0; j < n; ++j) vectors[i][j] = v[j][i];  // row i = eigenvector i
    }
    return {eig, vectors};
}

}  // namespace

PcaResult pca(const std::vector<std::vector<double>>& rows, std::size_t k) {
    const std::size_t n = rows.size();
    if (n == 0) throw DataError("pca: empty input");
    const std::size_t d = rows[0].size();
    if (!(n > d)) throw DataError(cat("pca: need more rows than features (", n, " <= ", d, ")"));
    if (k < 1 || k > d) throw ConfigError(cat("pca: k must be in [1,", d, "]"));

    PcaResult r;
    r.mean.assign(d, 0.0);
    for (const auto& row : rows) {
        if (row.size() != d) throw DataError("pca: ragged input rows");
        for (std::size_t j = 0; j < d; ++j) r.mean[j] += row[j];
    }
    for (std::size_t j = 0; j < d; ++j) r.mean[j] /= double(n);

    std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
    for (const auto& row : rows)
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = i; j < d; ++j)
                cov[i][j] += (row[i] - r.mean[i]) * (row[j] - r.mean[j]);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) {
            cov[i][j] /= double(n);
            cov[j][i] = cov[i][j];
        }

    auto [eig, vectors] = jacobi_eigen(cov);
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&eig](std::size_t a, std::size_t b) { return eig[a] > eig[b]; });

    double trace = 0.0;
    for (double e : eig) trace += std::max(e, 0.0);
    if (trace <= 0.0) throw DataError("pca: zero-variance input");
    const double rank_floor = 1e-12 * eig[order[0]];
    if (eig[order[k - 1]] <= rank_floor)
        throw DataError(cat("pca: input rank is below the requested ", k, " components"));

    for (std::size_t c = 0; c < k; ++c) {
        auto axis = vectors[order[c]];
        // sign convention: the largest-magnitude loading is positive
        std::size_t arg = 0;
        for (std::size_t j = 1; j < d; ++j)
            if (std::fabs(axis[j]) > std::fabs(axis[arg])) arg = j;
        if (axis[arg] < 0.0)
            for (double& x : axis) x = -x;
        r.components.push_back(std::move(axis));
        r.explained_variance_ratio.push_back(eig[order[c]] / trace);
    }

    r.projected.assign(n, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < k; ++c) {
            double acc = 0.0;
            for (std::size_t j = 0; j < d; ++j)
                acc += (rows[i][j] - r.mean[j]) * r.components[c][j];
            r.projected[i][c] = acc;
        }
    return r;
}

std::string pca_loading_table(const PcaResult& result,
                              const std::vector<std::string>& feature_names) {
    if (result.components.size() < 2)
        throw DataError("loading table needs at least two components");
    const std::size_t d = feature_names.size();
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> magnitude(d);
    for (std::size_t j = 0; j < d; ++j)
        magnitude[j] = std::sqrt(result.components[0][j] * result.components[0][j] +
                                 result.components[1][j] * result.components[1][j]);
    std::stable_sort(order.begin(), order.end(),
                     [&magnitude](std::size_t a, std::size_t b) {
                         return magnitude[a] > magnitude[b];
                     });
    std::ostringstream os;
    os << "feature\tPC1\tPC2\tmagnitude\n";
    for (std::size_t j : order)
        os << feature_names[j] << "\t" << format_double(result.components[0][j]) << "\t"
           << format_double(result.components[1][j]) << "\t" << format_double(magnitude[j])
           << "\n";
    return os.str();
}

std::vector<std::vector<double>> pearson_correlation(
    const std::vector<std::vector<double>>& rows) {
    const std::size_t n = rows.size();
    if (n < 2) throw DataError("correlation: need at least 2 rows");
    const std::size_t d = rows[0].size();
    std::vector<double> mean(d, 0.0);
    for (const auto& row : rows)
        for (std::size_t j = 0; j < d; ++j) mean[j] += row[j];
    for (double& m : mean) m /= double(n);

    std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
    for (const auto& row : rows)
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = i; j < d; ++j)
                cov[i][j] += (row[i] - mean[i]) * (row[j] - mean[j]);
    for (std::size_t i = 0; i < d; ++i)
        if (cov[i][i] <= 0.0)
            throw DataError(cat("correlation: channel ", i, " is constant"));

    std::vector<std::vector<double>> corr(d, std::vector<double>(d, 1.0));
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j) {
            corr[i][j] = cov[i][j] / std::sqrt(cov[i][i] * cov[j][j]);
            corr[j][i] = corr[i][j];
        }
    return corr;
}

std::string correlation_table(const std::vector<std::vector<double>>& corr,
                              const std::vector<std::string>& feature_names) {
    std::ostringstream os;
    os << "channel";
    for (const auto& name : feature_names) os << "\t" << name;
    os << "\n";
    for (std::size_t i = 0; i < corr.size(); ++i) {
        os << feature_names[i];
        for (double v : corr[i]) os << "\t" << format_double(v);
        os << "\n";
    }
    return os.str();
}

std::vector<std::vector<double>> session_rows(const std::vector<SensorSession>& sessions) {
    std::vector<std::vector<double>> rows;
    for (const auto& s : sessions) {
        const std::size_t d = s.schema.num_channels();
        for (std::size_t t = 0; t < s.num_steps; ++t) {
            std::vector<double> row(d);
            for (std::size_t ch = 0; ch < d; ++ch) row[ch] = s.at(t, ch);
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

WindowDataset mask_channels(const WindowDataset& data, const std::vector<std::size_t>& channels) {
    WindowDataset out = data;
    for (std::size_t ch : channels)
        if (ch >= data.channels)
            throw ConfigError(cat("mask: channel ", ch, " out of range [0,", data.channels, ")"));
    const std::size_t n = data.size();
    for (std::size_t w = 0; w < n; ++w)
        for (std::size_t t = 0; t < data.steps; ++t)
            for (std::size_t ch : channels)
                out.values[(w * data.steps + t) * data.channels + ch] = 0.0;
    return out;
}

std::vector<ChannelAblation> channel_mask_ablation(nn::Model& model, const WindowDataset& eval,
                                                   const std::vector<std::string>& channel_names) {
    if (channel_names.size() != eval.channels)
        throw ConfigError("ablation: channel name count mismatch");
    const auto baseline_scores = predict_class_probs(model, eval);
    const double baseline = topk_accuracy(baseline_scores, eval.class_labels, 1);

    // evaluation-only and independent per channel; the model is shared
    // read-only across workers
    std::vector<ChannelAblation> rows(eval.channels);
    run_parallel(eval.channels, [&](std::size_t ch) {
        auto masked = mask_channels(eval, {ch});
        const auto scores = predict_class_probs(model, masked);
        ChannelAblation row;
        row.channel = channel_names[ch];
        row.baseline_acc1 = baseline;
        row.masked_acc1 = topk_accuracy(scores, masked.class_labels, 1);
        row.delta_acc1 = row.masked_acc1 - baseline;
        rows[ch] = std::move(row);
    });
    std::stable_sort(rows.begin(), rows.end(), [](const ChannelAblation& a,
                                                  const ChannelAblation& b) {
        return std::fabs(a.delta_acc1) > std::fabs(b.delta_acc1);
    });
    return rows;
}

std::string ablation_table(const std::vector<ChannelAblation>& rows) {
    std::ostringstream os;
    os << "channel\tbaseline_acc1\tmasked_acc1\tdelta_acc1\n";
    for (const auto& r : rows)
        os << r.channel << "\t" << format_double(r.baseline_acc1) << "\t"
           << format_double(r.masked_acc1) << "\t" << format_double(r.delta_acc1) << "\n";
    return os.str();
}

}  // namespace olfact
