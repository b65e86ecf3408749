#include "olfact/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "olfact/objectives.hpp"
#include "olfact/util.hpp"

namespace olfact {

namespace {

void check_batch(std::size_t n_scores, std::size_t n_labels) {
    if (n_scores == 0) throw DataError("metrics: empty prediction set");
    if (n_scores != n_labels) throw DataError("metrics: prediction/target length mismatch");
}

}  // namespace

std::vector<std::size_t> topk_indices(const std::vector<double>& scores, std::size_t k) {
    if (k < 1 || k > scores.size()) throw ConfigError("topk: k out of range");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&scores](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;  // ties toward the lower class index
    });
    order.resize(k);
    return order;
}

double topk_accuracy(const ScoreMatrix& scores, const std::vector<int>& labels, std::size_t k) {
    check_batch(scores.size(), labels.size());
    std::size_t hits = 0;
    for (std::size_t n = 0; n < scores.size(); ++n) {
        auto top = topk_indices(scores[n], k);
        for (std::size_t c : top)
            if (static_cast<int>(c) == labels[n]) {
                ++hits;
                break;
            }
    }
    return double(hits) / double(scores.size());
}

Confusion confusion_matrix(const ScoreMatrix& scores, const std::vector<int>& labels,
                           std::size_t num_classes) {
    check_batch(scores.size(), labels.size());
    Confusion m(num_classes, std::vector<std::size_t>(num_classes, 0));
    for (std::size_t n = 0; n < scores.size(); ++n) {
        if (scores[n].size() != num_classes) throw DataError("metrics: score width mismatch");
        if (labels[n] < 0 || labels[n] >= static_cast<int>(num_classes))
            throw DataError(cat("metrics: label ", labels[n], " out of range"));
        const std::size_t pred = topk_indices(scores[n], 1)[0];
        ++m[static_cast<std::size_t>(labels[n])][pred];
    }
    return m;
}

std::vector<double> per_class_f1(const Confusion& confusion) {
    const std::size_t C = confusion.size();
    if (C == 0) throw DataError("metrics: empty confusion matrix");
    std::vector<double> f1(C, 0.0);
    for (std::size_t c = 0; c < C; ++c) {
        std::size_t tp = confusion[c][c], fn = 0, fp = 0;
        for (std::size_t j = 0; j < C; ++j) {
            if (j != c) {
                fn += confusion[c][j];
                fp += confusion[j][c];
            }
        }
        const double denom = double(2 * tp + fp + fn);
        f1[c] = denom > 0.0 ? 2.0 * double(tp) / denom : 0.0;
    }
    return f1;
}

double macro_f1(const Confusion& confusion) {
    auto f1 = per_class_f1(confusion);
    double total = 0.0;
    for (double v : f1) total += v;
    return total / double(f1.size());
}

double mixture_mae(const ScoreMatrix& pred, const std::vector<MixtureTarget>& targets) {
    check_batch(pred.size(), targets.size());
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t n = 0; n < pred.size(); ++n) {
        if (pred[n].size() != targets[n].proportions.size())
            throw DataError("metrics: mixture width mismatch");
        for (std::size_t i = 0; i < pred[n].size(); ++i) {
            total += std::fabs(pred[n][i] - targets[n].proportions[i]);
            ++count;
        }
    }
    return total / double(count);
}

double top1_at_threshold(const ScoreMatrix& pred, const std::vector<MixtureTarget>& targets,
                         double thr) {
    check_batch(pred.size(), targets.size());
    std::size_t hits = 0;
    for (std::size_t n = 0; n < pred.size(); ++n) {
        bool ok = true;
        for (std::size_t i = 0; i < pred[n].size(); ++i) {
            if (targets[n].proportions[i] > 0.0 &&
                std::fabs(pred[n][i] - targets[n].proportions[i]) > thr) {
                ok = false;
                break;
            }
        }
        if (ok) ++hits;
    }
    return double(hits) / double(pred.size());
}

double dynamic_topk(const ScoreMatrix& pred, const std::vector<MixtureTarget>& targets) {
    check_batch(pred.size(), targets.size());
    std::size_t hit = 0, present = 0;
    for (std::size_t n = 0; n < pred.size(); ++n) {
        const std::size_t P = static_cast<std::size_t>(targets[n].num_present);
        if (P < 1) throw DataError("metrics: target with no present components");
        auto top = topk_indices(pred[n], P);
        for (std::size_t c : top)
            if (targets[n].presence[c]) ++hit;
        present += P;
    }
    return double(hit) / double(present);
}

ClassificationReport classification_report(const ScoreMatrix& scores,
                                           const std::vector<int>& labels,
                                           std::size_t num_classes,
                                           const std::vector<int>* categories,
                                           const std::vector<std::string>* category_names) {
    ClassificationReport r;
    r.total = scores.size();
    r.confusion = confusion_matrix(scores, labels, num_classes);
    r.per_class_f1 = per_class_f1(r.confusion);
    r.macro_f1 = 0.0;
    for (double v : r.per_class_f1) r.macro_f1 += v;
    r.macro_f1 /= double(num_classes);
    r.acc1 = topk_accuracy(scores, labels, 1);
    r.acc5 = topk_accuracy(scores, labels, std::min<std::size_t>(5, num_classes));
    if (categories) {
        if (categories->size() != num_classes)
            throw DataError("metrics: category map size mismatch");
        const std::size_t num_cats =
            static_cast<std::size_t>(*std::max_element(categories->begin(), categories->end())) +
            1;
        std::vector<std::size_t> hits(num_cats, 0), totals(num_cats, 0);
        for (std::size_t n = 0; n < scores.size(); ++n) {
            const auto cat_idx =
                static_cast<std::size_t>((*categories)[static_cast<std::size_t>(labels[n])]);
            ++totals[cat_idx];
            if (static_cast<int>(topk_indices(scores[n], 1)[0]) == labels[n]) ++hits[cat_idx];
        }
        r.per_category_acc.resize(num_cats, 0.0);
        for (std::size_t c = 0; c < num_cats; ++c)
            r.per_category_acc[c] = totals[c] > 0 ? double(hits[c]) / double(totals[c]) : 0.0;
        if (category_names) r.category_names = *category_names;
    }
    return r;
}

MixtureReport mixture_report(const ScoreMatrix& pred, const std::vector<MixtureTarget>& targets) {
    MixtureReport r;
    r.total = pred.size();
    r.mae = mixture_mae(pred, targets);
    r.top1_at_01 = top1_at_threshold(pred, targets, 0.1);
    r.dyn_topk = dynamic_topk(pred, targets);
    double kl = 0.0, cos = 0.0;
    for (std::size_t n = 0; n < pred.size(); ++n) {
        kl += kl_divergence(targets[n].proportions, pred[n]);
        cos += cosine_similarity(pred[n], targets[n].proportions);
    }
    r.kl = kl / double(pred.size());
    r.cosine = cos / double(pred.size());
    return r;
}

// --- serialization -----------------------------------------------------------

std::string to_json(const ClassificationReport& report) {
    nlohmann::json j;
    j["task"] = "classification";
    j["total_windows"] = report.total;
    j["acc1"] = report.acc1;
    j["acc5"] = report.acc5;
    j["macro_f1"] = report.macro_f1;
    j["per_class_f1"] = report.per_class_f1;
    if (!report.per_category_acc.empty()) {
        j["per_category_acc"] = report.per_category_acc;
        if (!report.category_names.empty()) j["category_names"] = report.category_names;
    }
    return j.dump(2) + "\n";
}

std::string to_json(const MixtureReport& report) {
    nlohmann::json j;
    j["task"] = "mixture";
    j["total_windows"] = report.total;
    j["mae"] = report.mae;
    j["top1_at_0.1"] = report.top1_at_01;
    j["dynamic_topk"] = report.dyn_topk;
    j["kl_target_to_pred"] = report.kl;
    j["cosine"] = report.cosine;
    return j.dump(2) + "\n";
}

std::string to_tsv(const ClassificationReport& report) {
    std::ostringstream os;
    os << "metric\tvalue\n";
    os << "acc1\t" << format_double(report.acc1) << "\n";
    os << "acc5\t" << format_double(report.acc5) << "\n";
    os << "macro_f1\t" << format_double(report.macro_f1) << "\n";
    for (std::size_t c = 0; c < report.per_category_acc.size(); ++c) {
        const std::string name = c < report.category_names.size() ? report.category_names[c]
                                                                  : cat("category", c);
        os << "acc1[" << name << "]\t" << format_double(report.per_category_acc[c]) << "\n";
    }
    return os.str();
}

std::string to_tsv(const MixtureReport& report) {
    std::ostringstream os;
    os << "metric\tvalue\n";
    os << "mae\t" << format_double(report.mae) << "\n";
    os << "top1_at_0.1\t" << format_double(report.top1_at_01) << "\n";
    os << "dynamic_topk\t" << format_double(report.dyn_topk) << "\n";
    os << "kl_target_to_pred\t" << format_double(report.kl) << "\n";
    os << "cosine\t" << format_double(report.cosine) << "\n";
    return os.str();
}

std::string confusion_csv(const Confusion& confusion) {
    std::ostringstream os;
    for (const auto& row : confusion) {
        for (std::size_t j = 0; j < row.size(); ++j) os << (j ? "," : "") << row[j];
        os << "\n";
    }
    return os.str();
}

}  // namespace olfact
