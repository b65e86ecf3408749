// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Thresholds are pinned in code; synthetic configurations
// and seeds are frozen so results are reproducible run to run.
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>

#include "helpers.hpp"
#include "olfact/analysis.hpp"
#include "olfact/experiment.hpp"
#include "olfact/gcms.hpp"
#include "olfact/metrics.hpp"
#include "olfact/nn.hpp"
#include "olfact/objectives.hpp"
#include "olfact/preprocess.hpp"
#include "olfact/synth.hpp"
#include "olfact/util.hpp"

using namespace olfact;
using testutil::max_grad_rel_error;
using testutil::random_tensor;

namespace {

int g_failures = 0;

void report(const std::string& name, bool pass, const std::string& detail, double seconds) {
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << name << " — " << detail << "  ("
              << std::fixed << std::setprecision(1) << seconds << "s)\n";
    std::cout.unsetf(std::ios::fixed);
    if (!pass) ++g_failures;
}

// budget_seconds <= 0 means untimed
void run_criterion(const std::string& name,
                   const std::function<std::pair<bool, std::string>()>& body,
                   double budget_seconds = 0.0) {
    const auto start = std::chrono::steady_clock::now();
    bool pass = false;
    std::string detail;
    try {
        std::tie(pass, detail) = body();
    } catch (const std::exception& e) {
        pass = false;
        detail = cat("exception: ", e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (pass && budget_seconds > 0.0 && secs > budget_seconds) {
        pass = false;
        detail += cat("; exceeded the ", budget_seconds, "s runtime budget");
    }
    report(name, pass, detail, secs);
}

// --- criterion 1: window-count oracle -------------------------------------------

std::pair<bool, std::string> window_count_oracle() {
    bool ok = count_windows(600, 50, 25) == 23 && count_windows(600, 100, 50) == 11;
    Rng rng(2024);
    std::size_t trials = 0;
    for (int i = 0; i < 1000; ++i) {
        const std::size_t T = 1 + rng.index(900);
        const std::size_t w = 1 + rng.index(150);
        const std::size_t s = 1 + rng.index(80);
        std::size_t enumerated = 0;
        for (std::size_t start = 0; start + w <= T; start += s) ++enumerated;
        ok = ok && count_windows(T, w, s) == enumerated;
        std::size_t padded = enumerated;
        if (T >= w && enumerated > 0 && (enumerated - 1) * s + w < T) ++padded;
        ok = ok && count_windows(T, w, s, true) == padded;
        ++trials;
    }
    return {ok, cat("N(600,50,25)=", count_windows(600, 50, 25), ", N(600,100,50)=",
                    count_windows(600, 100, 50), ", ", trials, " randomized triples agree")};
}

// --- criterion 2: gradient suite -------------------------------------------------

std::pair<bool, std::string> gradient_suite() {
    double worst = 0.0;
    auto track = [&worst](double err) { worst = std::max(worst, err); };

    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Rng rng(seed);
        // linear layer and the (B,T,d)->(B,T,D) embedding stem
        {
            Tensor x = random_tensor({3, 5}, rng);
            Tensor w = random_tensor({4, 5}, rng);
            Tensor b = random_tensor({4}, rng);
            track(max_grad_rel_error([&] { return mean_all(gelu(linear(x, w, b))); },
                                     {x, w, b}));
            Tensor xs = random_tensor({2, 6, 3}, rng);
            Tensor ws = random_tensor({8, 3}, rng);
            Tensor bs = random_tensor({8}, rng);
            track(max_grad_rel_error([&] { return mean_all(tanh_op(linear(xs, ws, bs))); },
                                     {xs, ws, bs}));
        }
        // conv1d
        {
            Tensor x = random_tensor({2, 3, 9}, rng);
            Tensor w = random_tensor({4, 3, 5}, rng, 0.5);
            Tensor b = random_tensor({4}, rng, 0.1);
            track(max_grad_rel_error([&] { return mean_all(tanh_op(conv1d_same(x, w, b))); },
                                     {x, w, b}));
        }
        // LSTM cell
        {
            nn::LstmCell cell(3, 5, rng);
            Tensor x = random_tensor({2, 3}, rng);
            Tensor h = random_tensor({2, 5}, rng, 0.5);
            Tensor c = random_tensor({2, 5}, rng, 0.5);
            auto loss = [&] {
                auto [h2, c2] = cell.step(x, h, c);
                return add(mean_all(mul(h2, h2)), mean_all(mul(c2, c2)));
            };
            track(max_grad_rel_error(loss, {x, h, c, cell.w_ih, cell.w_hh, cell.bias}));
        }
        // attention with a key-padding mask
        {
            nn::MultiheadAttention attn(8, 2, rng);
            Tensor x = random_tensor({2, 4, 8}, rng);
            auto mask = nn::BatchMask::from_lengths({4, 2}, 4);
            std::vector<Tensor> params{x};
            std::vector<nn::Param> named;
            attn.params(named, "attn");
            for (auto& p : named) params.push_back(p.tensor);
            auto loss = [&] {
                Tensor out = attn.forward(x, mask, 0.0, false, nullptr);
                return mean_all(mul(out, out));
            };
            track(max_grad_rel_error(loss, params));
        }
        // layer norm
        {
            Tensor x = random_tensor({3, 7}, rng, 2.0);
            Tensor g = random_tensor({7}, rng, 0.5);
            Tensor b = random_tensor({7}, rng, 0.5);
            track(max_grad_rel_error(
                [&] { return mean_all(mul(layer_norm(x, g, b), layer_norm(x, g, b))); },
                {x, g, b}));
        }
        // gelu and softmax
        {
            Tensor x = random_tensor({4, 6}, rng, 2.0);
            track(max_grad_rel_error([&] { return mean_all(gelu(x)); }, {x}));
            Tensor w = random_tensor({4, 6}, rng, 1.0, false);
            track(max_grad_rel_error(
                [&] { return weighted_sum(softmax_lastdim(x), w.values()); }, {x}));
        }
        // objectives: cross-entropy, symmetric contrastive, mixture composite,
        // focal BCE
        {
            Tensor logits = random_tensor({4, 7}, rng, 2.0);
            std::vector<int> labels;
            for (int i = 0; i < 4; ++i) labels.push_back(static_cast<int>(rng.index(7)));
            track(max_grad_rel_error([&] { return cross_entropy(logits, labels); }, {logits}));

            Tensor zs = random_tensor({4, 6}, rng);
            Tensor zg = random_tensor({4, 6}, rng);
            track(max_grad_rel_error([&] { return symmetric_contrastive(zs, zg, 0.07); },
                                     {zs, zg}));

            Tensor z = random_tensor({3, 12}, rng);
            Tensor s = random_tensor({3, 12}, rng);
            std::vector<MixtureTarget> targets;
            for (int b = 0; b < 3; ++b) {
                std::vector<double> raw(12, 0.0);
                const int present = 1 + static_cast<int>(rng.index(3));
                for (int i = 0; i < present; ++i) raw[rng.index(12)] = rng.uniform(0.1, 1.0);
                targets.push_back(make_mixture_target(raw));
            }
            MixtureLossConfig cfg;
            track(max_grad_rel_error([&] { return mixture_loss(z, s, targets, cfg).total; },
                                     {z, s}));

            std::vector<double> r(36);
            for (double& v : r) v = rng.uniform() < 0.3 ? 1.0 : 0.0;
            track(max_grad_rel_error([&] { return focal_bce(s, r, 0.75, 2.0); }, {s}));
        }
    }
    return {worst < 1e-3, cat("max relative error ", worst, " over 10 seeds (tolerance 1e-3)")};
}

// --- criterion 3: loss identities --------------------------------------------------

std::pair<bool, std::string> loss_identities() {
    bool ok = true;
    std::string detail;

    Rng rng(5);
    Tensor zs = random_tensor({1, 8}, rng);
    Tensor zg = random_tensor({1, 8}, rng);
    ok = ok && symmetric_contrastive(zs, zg, 0.07).item() == 0.0;

    std::vector<double> p(12, 1.0 / 12.0);
    ok = ok && std::fabs(kl_divergence(p, p)) < 1e-15;
    std::vector<double> one_hot(12, 0.0);
    one_hot[3] = 1.0;
    ok = ok && std::fabs(kl_divergence(one_hot, p) - std::log(12.0)) < 1e-9;

    Tensor logits = Tensor::zeros({4, 50});
    ok = ok && std::fabs(cross_entropy(logits, {1, 2, 3, 4}).item() - std::log(50.0)) < 1e-9;

    Tensor s = random_tensor({5, 12}, rng, 2.0);
    std::vector<double> r(60);
    for (double& v : r) v = rng.uniform() < 0.4 ? 1.0 : 0.0;
    double bce = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double q = 1.0 / (1.0 + std::exp(-s.data()[i]));
        bce += r[i] > 0.5 ? -std::log(q) : -std::log(1.0 - q);
    }
    bce /= double(r.size());
    ok = ok && std::fabs(focal_bce(s, r, 0.5, 0.0).item() - 0.5 * bce) < 1e-10;

    return {ok, "contrastive N=1, KL(p||p), KL(one-hot||uniform), uniform CE, focal->BCE"};
}

// --- criterion 4: metric oracles ----------------------------------------------------

std::pair<bool, std::string> metric_oracles() {
    Rng rng(6);
    bool ok = true;
    for (int trial = 0; trial < 1000 && ok; ++trial) {
        const std::size_t C = 3 + rng.index(12);
        const std::size_t B = 1 + rng.index(12);
        ScoreMatrix scores(B, std::vector<double>(C));
        std::vector<int> labels(B);
        for (std::size_t b = 0; b < B; ++b) {
            for (double& v : scores[b]) v = rng.uniform() < 0.2 ? 0.5 : rng.uniform();
            labels[b] = static_cast<int>(rng.index(C));
        }
        const std::size_t k = 1 + rng.index(C);

        // top-k via full sort
        std::size_t hits = 0;
        for (std::size_t b = 0; b < B; ++b) {
            std::vector<std::size_t> order(C);
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
                if (scores[b][x] != scores[b][y]) return scores[b][x] > scores[b][y];
                return x < y;
            });
            for (std::size_t i = 0; i < k; ++i)
                if (static_cast<int>(order[i]) == labels[b]) ++hits;
        }
        ok = ok && topk_accuracy(scores, labels, k) == double(hits) / double(B);

        // macro F1 via direct per-class counting
        auto confusion = confusion_matrix(scores, labels, C);
        double f1_sum = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            std::size_t tp = confusion[c][c], fp = 0, fn = 0;
            for (std::size_t j = 0; j < C; ++j)
                if (j != c) {
                    fn += confusion[c][j];
                    fp += confusion[j][c];
                }
            f1_sum += (2 * tp + fp + fn) > 0 ? 2.0 * double(tp) / double(2 * tp + fp + fn) : 0.0;
        }
        ok = ok && std::fabs(macro_f1(confusion) - f1_sum / double(C)) < 1e-12;
    }

    // mixture metrics vs brute force
    for (int trial = 0; trial < 1000 && ok; ++trial) {
        const std::size_t B = 1 + rng.index(10);
        ScoreMatrix pred(B, std::vector<double>(12));
        std::vector<MixtureTarget> targets;
        for (std::size_t b = 0; b < B; ++b) {
            for (double& v : pred[b]) v = rng.uniform();
            std::vector<double> raw(12, 0.0);
            const int present = 1 + static_cast<int>(rng.index(3));
            for (int i = 0; i < present; ++i) raw[rng.index(12)] = rng.uniform(0.1, 1.0);
            targets.push_back(make_mixture_target(raw));
        }
        double mae = 0.0;
        std::size_t t1 = 0, hit = 0, present_total = 0;
        for (std::size_t b = 0; b < B; ++b) {
            bool close = true;
            for (int i = 0; i < 12; ++i) {
                mae += std::fabs(pred[b][i] - targets[b].proportions[i]);
                if (targets[b].proportions[i] > 0.0 &&
                    std::fabs(pred[b][i] - targets[b].proportions[i]) > 0.1)
                    close = false;
            }
            if (close) ++t1;
            std::vector<std::size_t> order(12);
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
                if (pred[b][x] != pred[b][y]) return pred[b][x] > pred[b][y];
                return x < y;
            });
            for (int i = 0; i < targets[b].num_present; ++i)
                if (targets[b].presence[order[static_cast<std::size_t>(i)]]) ++hit;
            present_total += static_cast<std::size_t>(targets[b].num_present);
        }
        ok = ok && std::fabs(mixture_mae(pred, targets) - mae / double(B * 12)) < 1e-12;
        ok = ok && top1_at_threshold(pred, targets) == double(t1) / double(B);
        ok = ok && dynamic_topk(pred, targets) == double(hit) / double(present_total);
    }

    // dynamic top-k reduces to top-1 exactly on single-component targets
    for (int trial = 0; trial < 200 && ok; ++trial) {
        const std::size_t B = 1 + rng.index(20);
        ScoreMatrix pred(B, std::vector<double>(12));
        std::vector<MixtureTarget> targets;
        std::vector<int> labels(B);
        for (std::size_t b = 0; b < B; ++b) {
            for (double& v : pred[b]) v = rng.uniform() < 0.2 ? 0.5 : rng.uniform();
            labels[b] = static_cast<int>(rng.index(12));
            std::vector<double> raw(12, 0.0);
            raw[static_cast<std::size_t>(labels[b])] = 1.0;
            targets.push_back(make_mixture_target(raw));
        }
        ok = ok && dynamic_topk(pred, targets) == topk_accuracy(pred, labels, 1);
    }
    return {ok, "top-k / macro-F1 / MAE / Top-1@0.1 / dynamic Top-K match brute force; "
                "DynTopK == Top-1 on single labels"};
}

// --- criterion 5: mask correctness ----------------------------------------------------

std::pair<bool, std::string> mask_correctness() {
    double worst = 0.0;
    bool rejected = true;
    for (nn::Family family :
         {nn::Family::mlp, nn::Family::cnn, nn::Family::lstm, nn::Family::transformer}) {
        nn::ModelConfig cfg = nn::ModelConfig::defaults(family, 4);
        cfg.latent_dim = 16;
        cfg.heads = 2;
        cfg.layers = family == nn::Family::transformer ? 2 : 1;
        cfg.dropout = 0.0;
        cfg.num_classes = 5;
        cfg.mlp_hidden = {12};
        cfg.cnn_channels = {8, 8};
        cfg.cnn_kernel = 3;
        nn::Model model(cfg, 13);
        Rng rng(14);
        Tensor x1 = random_tensor({3, 12, 4}, rng, 1.0, false);
        auto mask = nn::BatchMask::from_lengths({12, 7, 3}, 12);
        Tensor x2 = Tensor::from_data(x1.shape(), x1.values());
        for (std::size_t b = 0; b < 3; ++b)
            for (std::size_t t = mask.lengths[b]; t < 12; ++t)
                for (std::size_t j = 0; j < 4; ++j)
                    x2.data()[(b * 12 + t) * 4 + j] += rng.gaussian(0, 100.0);
        Tensor h1 = model.embed(x1, mask);
        Tensor h2 = model.embed(x2, mask);
        for (std::size_t i = 0; i < h1.size(); ++i)
            worst = std::max(worst, std::fabs(h1.data()[i] - h2.data()[i]));

        nn::BatchMask empty = mask;
        empty.lengths[2] = 0;
        empty.padding[2].assign(12, true);
        try {
            model.embed(x1, empty);
            rejected = false;
        } catch (const NumericError&) {
        }
    }
    return {worst < 1e-9 && rejected,
            cat("max padded-perturbation drift ", worst, "; all-padding rejected: ",
                rejected ? "yes" : "no")};
}

// --- criterion 6: synthetic end-to-end classification ---------------------------------

std::pair<bool, std::string> synthetic_classification() {
    testutil::TempDir tmp("acc_cls");
    SyntheticConfig synth;
    synth.num_classes = 5;
    synth.sessions_per_class = 6;
    synth.duration_steps = 600;
    synth.channels = 6;
    synth.noise_std = 2.0;
    synth.drift_coeff = 0.995;
    synth.drift_std = 1.5;
    synth.day_shift_std = 200.0;
    synth.seed = 42;
    generate_synthetic(synth, tmp.sub("data"));

    ExperimentConfig cfg = ExperimentConfig::defaults(Task::base_classify);
    cfg.dataset_root = tmp.sub("data");
    cfg.output_dir = tmp.sub("p25");
    cfg.seed = 42;
    cfg.epochs = 12;
    cfg.batch_size = 32;
    cfg.learning_rate = 1e-3;
    cfg.preprocess.window = 50;
    cfg.preprocess.diff_lag = 25;
    cfg.model = nn::ModelConfig::defaults(nn::Family::transformer, 6);
    cfg.model.latent_dim = 64;
    cfg.model.heads = 4;
    cfg.model.layers = 2;

    auto with_diff = run_experiment(cfg);
    cfg.preprocess.diff_lag = 0;
    cfg.output_dir = tmp.sub("p0");
    auto raw = run_experiment(cfg);

    const double acc_diff = with_diff.classification->acc1;
    const double acc_raw = raw.classification->acc1;
    const bool ok = acc_diff > 0.90 && acc_diff - acc_raw >= 0.10;
    return {ok, cat("Acc@1 p=25: ", acc_diff, ", p=0: ", acc_raw, " (need > 0.9 and gap >= 0.10)")};
}

// --- criterion 7: synthetic end-to-end mixture ------------------------------------------

std::pair<bool, std::string> synthetic_mixture() {
    testutil::TempDir tmp("acc_mix");
    SyntheticMixtureConfig synth;
    synth.odorants_used = 4;
    synth.duration_steps = 200;
    synth.train_sessions_per_recipe = 3;
    synth.seen_sessions_per_recipe = 1;
    synth.osc_amp_lo = 2.0;
    synth.osc_amp_hi = 6.0;
    synth.noise_std = 0.5;
    synth.seed = 42;
    generate_synthetic_mixture(synth, tmp.sub("data"));

    ExperimentConfig cfg = ExperimentConfig::defaults(Task::mixture);
    cfg.dataset_root = tmp.sub("data");
    cfg.output_dir = tmp.sub("out");
    cfg.seed = 42;
    cfg.epochs = 60;
    cfg.batch_size = 64;
    cfg.learning_rate = 1e-3;
    cfg.preprocess.window = 50;
    cfg.model = nn::ModelConfig::defaults(nn::Family::transformer, 4);
    cfg.model.latent_dim = 32;
    cfg.model.heads = 4;
    cfg.model.layers = 1;

    auto result = run_experiment(cfg);
    const double mae = result.mixture_seen->mae;
    const double top1 = result.mixture_seen->top1_at_01;
    const bool ok = mae < 0.05 && top1 > 0.80;
    return {ok, cat("seen split MAE ", mae, " (need < 0.05), Top-1@0.1 ", top1,
                    " (need > 0.80)")};
}

// --- criterion 8: LODO harness ------------------------------------------------------------

std::pair<bool, std::string> lodo_harness() {
    testutil::TempDir tmp("acc_lodo");
    SyntheticConfig synth;
    synth.num_classes = 3;
    synth.sessions_per_class = 6;
    synth.duration_steps = 200;
    synth.channels = 4;
    synth.noise_std = 1.0;
    synth.day_shift_std = 0.0;
    synth.shift_day = 1;  // make day 1 the hard fold
    synth.shift_day_std = 300.0;
    synth.seed = 42;
    generate_synthetic(synth, tmp.sub("data"));

    ExperimentConfig cfg = ExperimentConfig::defaults(Task::base_classify);
    cfg.dataset_root = tmp.sub("data");
    cfg.output_dir = tmp.sub("out");
    cfg.seed = 42;
    cfg.epochs = 6;
    cfg.batch_size = 32;
    cfg.learning_rate = 3e-3;
    cfg.preprocess.window = 40;
    cfg.preprocess.diff_lag = 0;  // raw inputs so the day-1 shift stays visible
    cfg.model = nn::ModelConfig::defaults(nn::Family::mlp, 4);
    cfg.model.mlp_hidden = {32};
    cfg.model.dropout = 0.0;

    auto result = leave_one_day_out(cfg);
    bool six = result.folds.size() == 6;
    int argmin = 0;
    for (int i = 1; i < static_cast<int>(result.folds.size()); ++i)
        if (result.folds[static_cast<std::size_t>(i)].acc1 <
            result.folds[static_cast<std::size_t>(argmin)].acc1)
            argmin = i;
    const bool day1_worst = six && result.folds[static_cast<std::size_t>(argmin)].day == 1;
    std::string folds;
    for (const auto& f : result.folds) folds += cat(" d", f.day, "=", f.acc1);
    return {six && day1_worst, cat("folds:", folds, "; mean ", result.mean_acc1, " +/- ",
                                   result.std_acc1, " over ", result.folds.size(), " folds")};
}

// --- criterion 9: GC-MS embedding ------------------------------------------------------------

std::pair<bool, std::string> gcms_embedding() {
    bool ok = true;
    Rng rng(17);
    // 460 bins, max exactly 1
    for (int trial = 0; trial < 200; ++trial) {
        EiSpectrum s;
        s.compound_id = "c";
        const int n = 1 + static_cast<int>(rng.index(30));
        for (int i = 0; i < n; ++i)
            s.peaks.emplace_back(rng.uniform(40.0, 499.99), rng.uniform(0.01, 100.0));
        auto binned = bin_spectrum(s);
        ok = ok && binned.size() == 460;
        double mx = 0.0;
        for (double v : binned) mx = std::max(mx, v);
        ok = ok && mx == 1.0;
    }

    // two-level vs flat averaging on the constructed 2-compound example
    EiSpectrum a, b;
    a.compound_id = "A";
    a.peaks = {{50.5, 10.0}};
    b.compound_id = "B";
    b.peaks = {{60.5, 10.0}};
    auto e = ingredient_spec_embedding("ing", {a, a, b});
    auto va = bin_spectrum(a), vb = bin_spectrum(b);
    std::vector<double> flat(460, 0.0);
    for (int i = 0; i < 460; ++i) flat[i] = (2.0 * va[i] + vb[i]) / 3.0;
    double max_gap = 0.0;
    for (int i = 0; i < 460; ++i)
        max_gap = std::max(max_gap, std::fabs(e.vector[static_cast<std::size_t>(i)] -
                                              flat[static_cast<std::size_t>(i)]));
    ok = ok && max_gap > 0.1;  // the averaging orders genuinely differ
    ok = ok && e.vector[10] == 0.5 && e.vector[20] == 0.5;

    // coverage cdf reaches one at the upper bound
    std::vector<EiSpectrum> spectra;
    for (int i = 0; i < 4; ++i) {
        EiSpectrum s;
        s.compound_id = cat("c", i);
        for (int k = 0; k < 15; ++k)
            s.peaks.emplace_back(rng.uniform(41.0, 499.0), rng.uniform(0.1, 10.0));
        spectra.push_back(std::move(s));
    }
    auto cdf = mz_coverage_cdf(spectra);
    ok = ok && std::fabs(cdf(500.0) - 1.0) < 1e-12;
    double prev = -1.0;
    for (double upper = 40.0; upper <= 500.0; upper += 5.0) {
        ok = ok && cdf(upper) >= prev - 1e-12;
        prev = cdf(upper);
    }
    return {ok, "460 bins, exact max normalization, two-level averaging, cdf totality"};
}

// --- criterion 10: determinism ------------------------------------------------------------

std::pair<bool, std::string> determinism() {
    testutil::TempDir tmp("acc_det");
    SyntheticConfig synth;
    synth.num_classes = 3;
    synth.sessions_per_class = 6;
    synth.duration_steps = 100;
    synth.channels = 4;
    synth.seed = 42;
    generate_synthetic(synth, tmp.sub("data"));

    ExperimentConfig cfg = ExperimentConfig::defaults(Task::base_classify);
    cfg.dataset_root = tmp.sub("data");
    cfg.seed = 42;
    cfg.epochs = 3;
    cfg.batch_size = 16;
    cfg.preprocess.window = 20;
    cfg.preprocess.diff_lag = 5;
    cfg.model = nn::ModelConfig::defaults(nn::Family::transformer, 4);
    cfg.model.latent_dim = 16;
    cfg.model.heads = 2;
    cfg.model.layers = 1;

    cfg.output_dir = tmp.sub("a");
    run_experiment(cfg);
    cfg.output_dir = tmp.sub("b");
    run_experiment(cfg);
    const bool metrics_equal = read_text_file(tmp.sub("a") + "/metrics.json") ==
                               read_text_file(tmp.sub("b") + "/metrics.json");
    const bool trace_equal = read_text_file(tmp.sub("a") + "/loss_trace.csv") ==
                             read_text_file(tmp.sub("b") + "/loss_trace.csv");
    const bool ckpt_equal = read_text_file(tmp.sub("a") + "/checkpoint.json") ==
                            read_text_file(tmp.sub("b") + "/checkpoint.json");
    return {metrics_equal && trace_equal && ckpt_equal,
            cat("metrics ", metrics_equal ? "identical" : "differ", ", trace ",
                trace_equal ? "identical" : "differ", ", checkpoint ",
                ckpt_equal ? "identical" : "differ")};
}

// --- optional: real-data directional check ----------------------------------------------------

void real_data_check() {
    const char* root = std::getenv("SMELLNET_ROOT");
    if (!root) {
        std::cout << "[SKIP] real-data directional check — set SMELLNET_ROOT to the "
                     "SmellNet base directory to enable\n";
        return;
    }
    run_criterion("real-data directional check (transformer vs MLP, w=100, p=25)", [&] {
        ExperimentConfig cfg = ExperimentConfig::defaults(Task::base_classify);
        cfg.dataset_root = root;
        cfg.assume_day_order = true;  // tolerate session files without day tokens
        cfg.preprocess.window = 100;
        cfg.preprocess.diff_lag = 25;
        if (const char* epochs = std::getenv("SMELLNET_EPOCHS"))
            cfg.epochs = static_cast<std::size_t>(std::atoi(epochs));
        testutil::TempDir tmp("acc_real");
        cfg.output_dir = tmp.sub("transformer");
        auto tf = run_experiment(cfg);
        cfg.model = nn::ModelConfig::defaults(nn::Family::mlp, 6);
        cfg.output_dir = tmp.sub("mlp");
        auto mlp = run_experiment(cfg);
        const double t = tf.classification->acc1, m = mlp.classification->acc1;
        return std::pair<bool, std::string>{t > m, cat("transformer Acc@1 ", t, " vs MLP ", m)};
    });
}

}  // namespace

int main() {
    std::cout << "acceptance suite\n================\n";
    run_criterion("window-count oracle", window_count_oracle, 1.0);
    run_criterion("gradient suite (layers + objectives, 10 seeds)", gradient_suite, 120.0);
    run_criterion("loss identities", loss_identities);
    run_criterion("metric oracles (1000 random batches)", metric_oracles);
    run_criterion("mask correctness", mask_correctness);
    run_criterion("synthetic end-to-end classification (transformer, w=50)",
                  synthetic_classification, 600.0);
    run_criterion("synthetic end-to-end mixture (4 odorants, 0.1 grid)", synthetic_mixture,
                  600.0);
    run_criterion("leave-one-day-out harness (injected day-1 shift)", lodo_harness);
    run_criterion("GC-MS embedding construction", gcms_embedding);
    run_criterion("determinism (byte-identical reports)", determinism);
    real_data_check();
    std::cout << (g_failures == 0 ? "all criteria passed\n"
                                  : cat(g_failures, " criterion(s) failed\n"));
    return g_failures == 0 ? 0 : 1;
}
