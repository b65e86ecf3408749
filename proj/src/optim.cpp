#include "olfact/optim.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "olfact/util.hpp"

namespace olfact {

Adam::Adam(std::vector<nn::Param> params, AdamConfig config) : config_(config) {
    for (auto& p : params) {
        Slot slot;
        slot.param = p.tensor;
        slot.m.assign(p.tensor.size(), 0.0);
        slot.v.assign(p.tensor.size(), 0.0);
        slots_.push_back(std::move(slot));
    }
}

void Adam::zero_grad() {
    for (auto& slot : slots_) slot.param.zero_grad();
}

void Adam::step() {
    ++step_count_;
    const double bc1 = 1.0 - std::pow(config_.beta1, double(step_count_));
    const double bc2 = 1.0 - std::pow(config_.beta2, double(step_count_));
    for (auto& slot : slots_) {
        double* w = slot.param.data();
        const double* g = slot.param.grad();
        for (std::size_t i = 0; i < slot.param.size(); ++i) {
            slot.m[i] = config_.beta1 * slot.m[i] + (1.0 - config_.beta1) * g[i];
            slot.v[i] = config_.beta2 * slot.v[i] + (1.0 - config_.beta2) * g[i] * g[i];
            const double mhat = slot.m[i] / bc1;
            const double vhat = slot.v[i] / bc2;
            w[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
        }
    }
}

WindowDataset pack_windows(const std::vector<Window>& windows) {
    WindowDataset ds;
    if (windows.empty()) return ds;
    ds.steps = windows.front().length;
    ds.channels = windows.front().channels;
    ds.values.reserve(windows.size() * ds.steps * ds.channels);
    for (const auto& w : windows) {
        if (w.length != ds.steps || w.channels != ds.channels)
            throw DataError("pack_windows: inconsistent window shapes");
        ds.values.insert(ds.values.end(), w.values.begin(), w.values.end());
        ds.window_ids.push_back(w.source_session + "@" + std::to_string(w.offset));
        if (const auto* label = std::get_if<SubstanceLabel>(&w.label)) {
            ds.class_labels.push_back(label->class_index);
            ds.ingredients.push_back(label->name);
        } else if (const auto* target = std::get_if<MixtureTarget>(&w.label)) {
            ds.targets.push_back(*target);
            ds.ingredients.emplace_back();
        } else {
            throw DataError(cat("window ", ds.window_ids.back(), " has no label"));
        }
    }
    return ds;
}

Tensor WindowDataset::batch(const std::vector<std::size_t>& indices) const {
    const std::size_t block = steps * channels;
    std::vector<double> data(indices.size() * block);
    for (std::size_t i = 0; i < indices.size(); ++i)
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(indices[i] * block), block,
                    data.begin() + static_cast<std::ptrdiff_t>(i * block));
    return Tensor::from_data({indices.size(), steps, channels}, std::move(data));
}

void LossTrace::push(std::size_t epoch, std::size_t step, std::vector<double> values) {
    epochs.push_back(epoch);
    steps.push_back(step);
    rows.push_back(std::move(values));
}

std::string LossTrace::to_csv() const {
    std::ostringstream os;
    os << "epoch,step";
    for (const auto& name : term_names) os << "," << name;
    os << "\n";
    for (std::size_t r = 0; r < rows.size(); ++r) {
        os << epochs[r] << "," << steps[r];
        for (double v : rows[r]) os << "," << format_double(v);
        os << "\n";
    }
    return os.str();
}

double LossTrace::first_total() const {
    if (rows.empty()) throw NumericError("empty loss trace");
    return rows.front()[0];
}

double LossTrace::last_total() const {
    if (rows.empty()) throw NumericError("empty loss trace");
    return rows.back()[0];
}

namespace {

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   Rng& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

void check_finite_loss(double loss, std::size_t epoch, std::size_t step) {
    if (!std::isfinite(loss))
        throw NumericError(cat("non-finite loss at epoch ", epoch, ", step ", step));
}

}  // namespace

LossTrace train_classifier(nn::Model& model, const WindowDataset& data,
                           const TrainConfig& config, ContrastiveSupervision* contrastive) {
    if (data.empty()) throw DataError("training set is empty");
    if (data.class_labels.size() != data.size())
        throw DataError("classification training needs class labels on every window");
    if (config.batch_size < 1 || config.epochs < 1)
        throw ConfigError("train: epochs and batch size must be >= 1");
    if (contrastive && contrastive->encoder == nullptr)
        throw ConfigError("contrastive supervision needs an encoder");

    auto params = model.named_params();
    if (contrastive)
        for (auto& p : contrastive->encoder->named_params()) params.push_back(p);
    Adam optim(params, AdamConfig{config.lr});

    Rng rng(config.seed);
    Rng drop_rng = rng.fork(1);
    Rng shuffle_rng = rng.fork(2);

    LossTrace trace;
    trace.term_names = contrastive ? std::vector<std::string>{"total", "ce", "contrastive"}
                                   : std::vector<std::string>{"total", "ce"};

    const std::size_t gcms_dim =
        contrastive ? contrastive->encoder->config().input_dim : 0;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        auto batches = make_batches(data.size(), config.batch_size, shuffle_rng);
        for (std::size_t step = 0; step < batches.size(); ++step) {
            const auto& idx = batches[step];
            Tensor x = data.batch(idx);
            auto mask = nn::BatchMask::full(idx.size(), data.steps);
            std::vector<int> labels(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i)
                labels[i] = data.class_labels[idx[i]];

            optim.zero_grad();
            Tensor loss;
            std::vector<double> row;
            if (contrastive) {
                Tensor h = model.embed(x, mask, true, &drop_rng);
                Tensor logits = model.classify_from_embedding(h, true, &drop_rng);
                Tensor ce = cross_entropy(logits, labels);

                std::vector<double> g(idx.size() * gcms_dim);
                for (std::size_t i = 0; i < idx.size(); ++i) {
                    auto it = contrastive->embedding_table.find(data.ingredients[idx[i]]);
                    if (it == contrastive->embedding_table.end())
                        throw DataError(cat("no GC-MS embedding for ingredient '",
                                            data.ingredients[idx[i]], "'"));
                    if (it->second.size() != gcms_dim)
                        throw DataError("GC-MS embedding width does not match encoder");
                    std::copy(it->second.begin(), it->second.end(),
                              g.begin() + static_cast<std::ptrdiff_t>(i * gcms_dim));
                }
                Tensor g_in = Tensor::from_data({idx.size(), gcms_dim}, std::move(g));
                Tensor z_g = contrastive->encoder->forward(g_in, true, &drop_rng);
                Tensor align = symmetric_contrastive(h, z_g, contrastive->temperature);
                loss = add(ce, scale(align, contrastive->weight));
                row = {loss.item(), ce.item(), align.item()};
            } else {
                Tensor logits = model.classify(x, mask, true, &drop_rng);
                loss = cross_entropy(logits, labels);
                row = {loss.item(), loss.item()};
            }
            check_finite_loss(loss.item(), epoch, step);
            loss.backward();
            optim.step();
            trace.push(epoch, step, std::move(row));
        }
    }
    return trace;
}

LossTrace train_mixture(nn::Model& model, const WindowDataset& data, const TrainConfig& config,
                        const MixtureLossConfig& loss_config) {
    if (data.empty()) throw DataError("training set is empty");
    if (data.targets.size() != data.size())
        throw DataError("mixture training needs a mixture target on every window");
    if (config.batch_size < 1 || config.epochs < 1)
        throw ConfigError("train: epochs and batch size must be >= 1");

    Adam optim(model.named_params(), AdamConfig{config.lr});
    Rng rng(config.seed);
    Rng drop_rng = rng.fork(1);
    Rng shuffle_rng = rng.fork(2);

    LossTrace trace;
    trace.term_names = {"total", "kl", "hinge", "focal"};

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        auto batches = make_batches(data.size(), config.batch_size, shuffle_rng);
        for (std::size_t step = 0; step < batches.size(); ++step) {
            const auto& idx = batches[step];
            Tensor x = data.batch(idx);
            auto mask = nn::BatchMask::full(idx.size(), data.steps);
            std::vector<MixtureTarget> targets(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) targets[i] = data.targets[idx[i]];

            optim.zero_grad();
            auto out = model.mixture_forward(x, mask, true, &drop_rng);
            auto parts =
                mixture_loss(out.proportion_logits, out.presence_logits, targets, loss_config);
            check_finite_loss(parts.total.item(), epoch, step);
            parts.total.backward();
            optim.step();
            trace.push(epoch, step,
                       {parts.total.item(), parts.kl.item(), parts.hinge.item(),
                        parts.focal.item()});
        }
    }
    return trace;
}

namespace {

std::vector<std::vector<std::size_t>> eval_batches(std::size_t n, std::size_t batch_size) {
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += batch_size) {
        std::vector<std::size_t> idx;
        for (std::size_t i = start; i < std::min(n, start + batch_size); ++i) idx.push_back(i);
        batches.push_back(std::move(idx));
    }
    return batches;
}

}  // namespace

std::vector<std::vector<double>> predict_class_probs(nn::Model& model, const WindowDataset& data,
                                                     std::size_t batch_size) {
    std::vector<std::vector<double>> out;
    out.reserve(data.size());
    for (const auto& idx : eval_batches(data.size(), batch_size)) {
        Tensor x = data.batch(idx);
        auto mask = nn::BatchMask::full(idx.size(), data.steps);
        Tensor probs = softmax_lastdim(model.classify(x, mask));
        const std::size_t C = probs.shape().back();
        for (std::size_t i = 0; i < idx.size(); ++i)
            out.emplace_back(probs.data() + i * C, probs.data() + (i + 1) * C);
    }
    return out;
}

std::vector<std::vector<double>> predict_mixture_proportions(nn::Model& model,
                                                             const WindowDataset& data,
                                                             std::size_t batch_size) {
    std::vector<std::vector<double>> out;
    out.reserve(data.size());
    for (const auto& idx : eval_batches(data.size(), batch_size)) {
        Tensor x = data.batch(idx);
        auto mask = nn::BatchMask::full(idx.size(), data.steps);
        auto mix = model.mixture_forward(x, mask);
        const std::size_t K = mix.proportions.shape().back();
        for (std::size_t i = 0; i < idx.size(); ++i)
            out.emplace_back(mix.proportions.data() + i * K,
                             mix.proportions.data() + (i + 1) * K);
    }
    return out;
}

}  // namespace olfact
