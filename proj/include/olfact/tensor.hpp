// ============================================================================
// tensor.hpp - Minimal reverse-mode automatic differentiation.
//
// Dense 64-bit tensors with an optional backward closure per node. backward()
// runs once over the graph in reverse topological order and accumulates into
// .grad buffers; calling it again without zeroing grads doubles them (the
// accumulation contract). Ops are free functions; each hand-writes its own
// backward and is checked against central finite differences in the tests.
// ============================================================================
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace olfact {

using Shape = std::vector<std::size_t>;

struct TensorNode {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // allocated lazily, same size as data
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward_fn;

    std::size_t size() const { return data.size(); }
    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t size() const { return node_->data.size(); }
    std::size_t dim(std::size_t i) const { return node_->shape[i]; }
    std::size_t rank() const { return node_->shape.size(); }

    double* data() { return node_->data.data(); }
    const double* data() const { return node_->data.data(); }
    std::vector<double>& values() { return node_->data; }
    const std::vector<double>& values() const { return node_->data; }

    double* grad() {
        node_->ensure_grad();
        return node_->grad.data();
    }
    const std::vector<double>& grad_values() {
        node_->ensure_grad();
        return node_->grad;
    }
    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool v) { node_->requires_grad = v; }
    void zero_grad() { node_->grad.assign(node_->data.size(), 0.0); }

    double item() const;

    // Reverse pass from a scalar. Accumulates into grads of every reachable
    // node with requires_grad set.
    void backward() const;

    std::shared_ptr<TensorNode> node() const { return node_; }

private:
    std::shared_ptr<TensorNode> node_;
};

// --- graph construction helpers ---------------------------------------------

Tensor make_op(Shape shape, std::vector<double> data,
               std::vector<std::shared_ptr<TensorNode>> parents,
               std::function<void(TensorNode&)> backward_fn);

// --- elementwise -------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);  // exact erf form
Tensor sigmoid(const Tensor& a);
Tensor tanh_op(const Tensor& a);
Tensor abs_op(const Tensor& a);
Tensor clamp_min(const Tensor& a, double lo);  // zero gradient where clamped

// Adds a constant (non-differentiable) tensor broadcast over leading axes:
// bias.size() must divide a.size() and equal the trailing block.
Tensor add_const_broadcast(const Tensor& a, const std::vector<double>& block);
// Elementwise product with a constant tensor of the same size.
Tensor mul_const(const Tensor& a, const std::vector<double>& factors);

// --- linear algebra ----------------------------------------------------------

// (m x k) @ (k x n) -> (m x n)
Tensor matmul(const Tensor& a, const Tensor& b);
// y[..., j] = sum_i x[..., i] * w[j, i] + b[j]; weight is (out, in).
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
Tensor linear_no_bias(const Tensor& x, const Tensor& weight);
// Adds a length-D bias over the last axis.
Tensor add_bias(const Tensor& x, const Tensor& bias);
// Batched matmul over the last two axes: (..., m, k) @ (..., k, n).
Tensor batched_matmul(const Tensor& a, const Tensor& b);
// Batched a @ b^T: (..., m, k) @ (..., n, k) -> (..., m, n).
Tensor batched_matmul_nt(const Tensor& a, const Tensor& b);

// --- shape ops ---------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape shape);
// (B,T,D) with H heads -> (B,H,T,D/H)
Tensor split_heads(const Tensor& x, std::size_t heads);
// (B,H,T,dh) -> (B,T,H*dh)
Tensor merge_heads(const Tensor& x);
// (B,T,C) -> (B,C,T)
Tensor time_to_channel_major(const Tensor& x);
// (B,C,T) -> (B,T,C)
Tensor channel_to_time_major(const Tensor& x);
// x[:, t, :] of a (B,T,D) tensor -> (B,D)
Tensor select_time(const Tensor& x, std::size_t t);
// stack (B,D) slices into (B,T,D)
Tensor stack_time(const std::vector<Tensor>& steps);
// concat along the last axis: (B,D1) + (B,D2) -> (B,D1+D2)
Tensor concat_cols(const Tensor& a, const Tensor& b);
// columns [start, start+len) of a (B,D) tensor
Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t len);
// prepend a (B,1,D) token to a (B,T,D) sequence
Tensor concat_time(const Tensor& front, const Tensor& rest);
// tile a (1,D) row into (B,D); backward sums over the batch
Tensor tile_rows(const Tensor& row, std::size_t batch);
// rowwise blend: out[b,:] = cond[b] ? a[b,:] : b[b,:]
Tensor where_rows(const std::vector<bool>& cond, const Tensor& a, const Tensor& b);

// --- reductions and normalizations --------------------------------------------

Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
// dot(x, w) with a constant weight tensor of the same size
Tensor weighted_sum(const Tensor& x, const std::vector<double>& weights);
Tensor softmax_lastdim(const Tensor& x);
Tensor log_softmax_lastdim(const Tensor& x);
// LayerNorm over the last axis with affine parameters (length D)
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);
// Rows scaled to unit L2 norm; throws on a zero row.
Tensor l2_normalize_rows(const Tensor& x);
// Masked mean over the time axis of (B,T,D): sum_t valid[b,t]*h / max(count, floor).
Tensor masked_mean_pool(const Tensor& x, const std::vector<std::vector<bool>>& valid,
                        double denom_floor = 1e-6);
// Masked max over the time axis of (B,T,D); gradient routes to the argmax.
Tensor masked_max_pool(const Tensor& x, const std::vector<std::vector<bool>>& valid);

// --- structured layers ---------------------------------------------------------

// 1-D convolution, stride 1, zero same-padding of k/2 on both sides.
// x (B,Cin,T), w (Cout,Cin,K), b (Cout) -> (B,Cout,T)
Tensor conv1d_same(const Tensor& x, const Tensor& weight, const Tensor& bias);

// Batch normalization over (B,C) or (B,C,T) with per-channel statistics.
// Training mode uses batch statistics and updates the running buffers;
// eval mode uses the running buffers.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  std::vector<double>& running_mean, std::vector<double>& running_var,
                  bool training, double momentum = 0.1, double eps = 1e-5);

// Inverted dropout; identity when not training.
Tensor dropout(const Tensor& x, double p, bool training, std::uint64_t seed);

// Mean over batch of -logp[i, label[i]] for log-probability rows.
Tensor nll_from_log_probs(const Tensor& log_probs, const std::vector<int>& labels);

// Focal binary cross-entropy on logits with 0/1 targets, mean over all
// entries; numerically stable in the saturated regime.
Tensor focal_bce_with_logits(const Tensor& logits, const std::vector<double>& targets,
                             double alpha_f, double gamma);

}  // namespace olfact
