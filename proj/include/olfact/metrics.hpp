// ============================================================================
// metrics.hpp - Evaluation metrics: Top-1/Top-5 accuracy, macro-F1,
// per-category accuracy, mixture MAE, Top-1@0.1, dynamic Top-K, KL and
// cosine. Score ties always break toward the lower class index.
// ============================================================================
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "olfact/types.hpp"

namespace olfact {

using ScoreMatrix = std::vector<std::vector<double>>;
using Confusion = std::vector<std::vector<std::size_t>>;

// Fraction of examples whose true label is among the k highest scores.
double topk_accuracy(const ScoreMatrix& scores, const std::vector<int>& labels, std::size_t k);

// Top-k class indices of one score row, ties broken by ascending index.
std::vector<std::size_t> topk_indices(const std::vector<double>& scores, std::size_t k);

Confusion confusion_matrix(const ScoreMatrix& scores, const std::vector<int>& labels,
                           std::size_t num_classes);

// Per-class F1 with the 0/0 convention: a class with zero precision+recall
// denominator scores 0 and stays in the macro average.
std::vector<double> per_class_f1(const Confusion& confusion);
double macro_f1(const Confusion& confusion);

// Mean |pred - target| over all entries.
double mixture_mae(const ScoreMatrix& pred, const std::vector<MixtureTarget>& targets);

// An example is correct iff every non-zero target component is predicted
// within +/- thr.
double top1_at_threshold(const ScoreMatrix& pred, const std::vector<MixtureTarget>& targets,
                         double thr = 0.1);

// sum_n |R_n ∩ Π_n(P_n)| / sum_n |R_n| with per-example cutoff P_n.
double dynamic_topk(const ScoreMatrix& pred, const std::vector<MixtureTarget>& targets);

struct ClassificationReport {
    std::size_t total = 0;
    double acc1 = 0, acc5 = 0, macro_f1 = 0;
    std::vector<double> per_class_f1;
    std::vector<double> per_category_acc;  // empty when no category map given
    std::vector<std::string> category_names;
    Confusion confusion;
};

// categories, when given, maps class index -> category index.
ClassificationReport classification_report(const ScoreMatrix& scores,
                                           const std::vector<int>& labels,
                                           std::size_t num_classes,
                                           const std::vector<int>* categories = nullptr,
                                           const std::vector<std::string>* category_names =
                                               nullptr);

struct MixtureReport {
    std::size_t total = 0;
    double mae = 0, top1_at_01 = 0, dyn_topk = 0;
    double kl = 0;      // KL(target || prediction), batch mean
    double cosine = 0;  // batch mean
};

MixtureReport mixture_report(const ScoreMatrix& pred, const std::vector<MixtureTarget>& targets);

std::string to_json(const ClassificationReport& report);
std::string to_json(const MixtureReport& report);
std::string to_tsv(const ClassificationReport& report);
std::string to_tsv(const MixtureReport& report);
std::string confusion_csv(const Confusion& confusion);

}  // namespace olfact
