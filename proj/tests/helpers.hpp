// Shared test utilities: finite-difference gradient checking, random tensor
// construction and scratch directories.
#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "olfact/tensor.hpp"
#include "olfact/util.hpp"

namespace testutil {

inline olfact::Tensor random_tensor(olfact::Shape shape, olfact::Rng& rng, double scale = 1.0,
                                    bool requires_grad = true) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    std::vector<double> data(n);
    for (double& v : data) v = rng.gaussian(0.0, scale);
    return olfact::Tensor::from_data(std::move(shape), std::move(data), requires_grad);
}

// Central finite differences against the analytic gradient. The loss builder
// must be deterministic and re-read the parameter tensors on every call.
// Relative error uses |a-n| / max(1, |a|, |n|). Large tensors are sampled.
inline double max_grad_rel_error(const std::function<olfact::Tensor()>& loss_fn,
                                 std::vector<olfact::Tensor> params, double h = 1e-5,
                                 std::size_t max_checks_per_tensor = 64,
                                 std::uint64_t sample_seed = 1234) {
    for (auto& p : params) p.zero_grad();
    olfact::Tensor loss = loss_fn();
    loss.backward();

    double worst = 0.0;
    olfact::Rng pick(sample_seed);
    for (auto& p : params) {
        std::vector<double> analytic(p.grad(), p.grad() + p.size());
        std::vector<std::size_t> indices;
        if (p.size() <= max_checks_per_tensor) {
            for (std::size_t i = 0; i < p.size(); ++i) indices.push_back(i);
        } else {
            for (std::size_t k = 0; k < max_checks_per_tensor; ++k)
                indices.push_back(pick.index(p.size()));
        }
        for (std::size_t i : indices) {
            const double saved = p.data()[i];
            p.data()[i] = saved + h;
            const double up = loss_fn().item();
            p.data()[i] = saved - h;
            const double down = loss_fn().item();
            p.data()[i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double err = std::fabs(analytic[i] - numeric) /
                               std::max({1.0, std::fabs(analytic[i]), std::fabs(numeric)});
            worst = std::max(worst, err);
        }
    }
    return worst;
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("olfact_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    std::string str() const { return path_.string(); }
    std::string sub(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

}  // namespace testutil
