#include "olfact/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "olfact/util.hpp"

namespace olfact {

namespace {

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

void check(bool cond, const char* msg) {
    if (!cond) throw NumericError(msg);
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->data.assign(shape_size(node->shape), 0.0);
    node->requires_grad = requires_grad;
    return Tensor(node);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    check(shape_size(node->shape) == data.size(), "from_data: shape does not match data size");
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(node);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from_data({1}, {v}, requires_grad);
}

double Tensor::item() const {
    check(node_ && node_->data.size() == 1, "item() requires a scalar tensor");
    return node_->data[0];
}

void Tensor::backward() const {
    check(node_ != nullptr, "backward on an undefined tensor");
    check(node_->data.size() == 1, "backward requires a scalar loss");

    // topological order by DFS over parents
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> visited;
    std::vector<std::pair<TensorNode*, std::size_t>> stack{{node_.get(), 0}};
    visited.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            TensorNode* p = n->parents[next++].get();
            if (visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    // a node participates if it or any ancestor input requires grad
    std::unordered_map<TensorNode*, bool> active;
    for (TensorNode* n : order) {  // parents come first in `order`
        bool a = n->requires_grad;
        for (const auto& p : n->parents) a = a || active[p.get()];
        active[n] = a;
    }

    // intermediate grads are scratch space per invocation; only leaf grads
    // accumulate across calls (a repeated backward doubles them)
    for (TensorNode* n : order)
        if (n->backward_fn) n->grad.assign(n->data.size(), 0.0);

    node_->ensure_grad();
    node_->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* n = *it;
        if (n->backward_fn && active[n]) {
            n->ensure_grad();
            n->backward_fn(*n);
        }
    }
}

Tensor make_op(Shape shape, std::vector<double> data,
               std::vector<std::shared_ptr<TensorNode>> parents,
               std::function<void(TensorNode&)> backward_fn) {
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->parents = std::move(parents);
    node->backward_fn = std::move(backward_fn);
    return Tensor(node);
}

// --- elementwise -------------------------------------------------------------

namespace {

Tensor elementwise_binary(const Tensor& a, const Tensor& b, const char* name,
                          double (*fwd)(double, double),
                          void (*bwd)(double, double, double, double&, double&)) {
    check(a.shape() == b.shape(), name);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.data()[i], b.data()[i]);
    auto pa = a.node();
    auto pb = b.node();
    return make_op(a.shape(), std::move(out), {pa, pb}, [pa, pb, bwd](TensorNode& self) {
        pa->ensure_grad();
        pb->ensure_grad();
        for (std::size_t i = 0; i < self.data.size(); ++i) {
            double da = 0, db = 0;
            bwd(pa->data[i], pb->data[i], self.grad[i], da, db);
            pa->grad[i] += da;
            pb->grad[i] += db;
        }
    });
}

template <typename Fwd, typename Dfn>
Tensor elementwise_unary(const Tensor& a, Fwd fwd, Dfn dfn) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.data()[i]);
    auto pa = a.node();
    return make_op(a.shape(), std::move(out), {pa}, [pa, dfn](TensorNode& self) {
        pa->ensure_grad();
        for (std::size_t i = 0; i < self.data.size(); ++i)
            pa->grad[i] += self.grad[i] * dfn(pa->data[i], self.data[i]);
    });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return elementwise_binary(
        a, b, "add: shape mismatch", [](double x, double y) { return x + y; },
        [](double, double, double g, double& da, double& db) {
            da = g;
            db = g;
        });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return elementwise_binary(
        a, b, "sub: shape mismatch", [](double x, double y) { return x - y; },
        [](double, double, double g, double& da, double& db) {
            da = g;
            db = -g;
        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return elementwise_binary(
        a, b, "mul: shape mismatch", [](double x, double y) { return x * y; },
        [](double x, double y, double g, double& da, double& db) {
            da = g * y;
            db = g * x;
        });
}

Tensor neg(const Tensor& a) {
    return elementwise_unary(
        a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor scale(const Tensor& a, double c) {
    return elementwise_unary(
        a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Tensor add_scalar(const Tensor& a, double c) {
    return elementwise_unary(
        a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& a) {
    return elementwise_unary(
        a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& a) {
    constexpr double inv_sqrt2 = 0.7071067811865476;
    constexpr double inv_sqrt2pi = 0.3989422804014327;
    return elementwise_unary(
        a, [=](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); },
        [=](double x, double) {
            const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
            const double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
            return cdf + x * pdf;
        });
}

Tensor sigmoid(const Tensor& a) {
    return elementwise_unary(
        a,
        [](double x) {
            return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                            : std::exp(x) / (1.0 + std::exp(x));
        },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh_op(const Tensor& a) {
    return elementwise_unary(
        a, [](double x) { return std::tanh(x); },
        [](double, double y) { return 1.0 - y * y; });
}

Tensor abs_op(const Tensor& a) {
    return elementwise_unary(
        a, [](double x) { return std::fabs(x); },
        [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor clamp_min(const Tensor& a, double lo) {
    return elementwise_unary(
        a, [lo](double x) { return x < lo ? lo : x; },
        [lo](double x, double) { return x < lo ? 0.0 : 1.0; });
}

Tensor add_const_broadcast(const Tensor& a, const std::vector<double>& block) {
    check(!block.empty() && a.size() % block.size() == 0,
          "add_const_broadcast: block must tile the tensor");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + block[i % block.size()];
    auto pa = a.node();
    return make_op(a.shape(), std::move(out), {pa}, [pa](TensorNode& self) {
        pa->ensure_grad();
        for (std::size_t i = 0; i < self.data.size(); ++i) pa->grad[i] += self.grad[i];
    });
}

Tensor mul_const(const Tensor& a, const std::vector<double>& factors) {
    check(a.size() == factors.size(), "mul_const: size mismatch");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * factors[i];
    auto pa = a.node();
    auto f = std::make_shared<std::vector<double>>(factors);
    return make_op(a.shape(), std::move(out), {pa}, [pa, f](TensorNode& self) {
        pa->ensure_grad();
        for (std::size_t i = 0; i < self.data.size(); ++i)
            pa->grad[i] += self.grad[i] * (*f)[i];
    });
}

// --- linear algebra ----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    check(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0), "matmul: bad shapes");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> out(m * n, 0.0);
    const double* A = a.data();
    const double* B = b.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = A[i * k + kk];
            const double* brow = B + kk * n;
            double* orow = out.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
        }
    auto pa = a.node();
    auto pb = b.node();
    return make_op({m, n}, std::move(out), {pa, pb}, [pa, pb, m, k, n](TensorNode& self) {
        pa->ensure_grad();
        pb->ensure_grad();
        const double* G = self.grad.data();
        // dA = G @ B^T
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double g = G[i * n + j];
                const double* brow = pb->data.data() + 0;
                for (std::size_t kk = 0; kk < k; ++kk)
                    pa->grad[i * k + kk] += g * brow[kk * n + j];
            }
        // dB = A^T @ G
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t kk = 0; kk < k; ++kk) {
                const double aik = pa->data[i * k + kk];
                const double* grow = G + i * n;
                double* brow = pb->grad.data() + kk * n;
                for (std::size_t j = 0; j < n; ++j) brow[j] += aik * grow[j];
            }
    });
}

namespace {

// y[r,:] = x[r,:] @ W^T (+ bias); outputs processed four at a time so each
// x row load feeds four accumulators
void linear_forward_kernel(const double* __restrict__ X, const double* __restrict__ W,
                           const double* Bv, double* __restrict__ Y, std::size_t rows,
                           std::size_t in, std::size_t out_dim) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = X + r * in;
        double* yr = Y + r * out_dim;
        std::size_t o = 0;
        for (; o + 4 <= out_dim; o += 4) {
            const double* w0 = W + o * in;
            const double* w1 = w0 + in;
            const double* w2 = w1 + in;
            const double* w3 = w2 + in;
            double a0 = 0, a1 = 0, a2 = 0, a3 = 0;
            for (std::size_t i = 0; i < in; ++i) {
                const double v = xr[i];
                a0 += v * w0[i];
                a1 += v * w1[i];
                a2 += v * w2[i];
                a3 += v * w3[i];
            }
            yr[o] = a0 + (Bv ? Bv[o] : 0.0);
            yr[o + 1] = a1 + (Bv ? Bv[o + 1] : 0.0);
            yr[o + 2] = a2 + (Bv ? Bv[o + 2] : 0.0);
            yr[o + 3] = a3 + (Bv ? Bv[o + 3] : 0.0);
        }
        for (; o < out_dim; ++o) {
            const double* wr = W + o * in;
            double acc = Bv ? Bv[o] : 0.0;
            for (std::size_t i = 0; i < in; ++i) acc += xr[i] * wr[i];
            yr[o] = acc;
        }
    }
}

// dX = G @ W, dW = G^T @ X, db = column sums of G
void linear_backward_kernel(const double* __restrict__ X, const double* __restrict__ W,
                            const double* __restrict__ G, double* __restrict__ dX,
                            double* __restrict__ dW, double* db, std::size_t rows,
                            std::size_t in, std::size_t out_dim) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* gr = G + r * out_dim;
        double* dxr = dX + r * in;
        std::size_t o = 0;
        for (; o + 4 <= out_dim; o += 4) {
            const double g0 = gr[o], g1 = gr[o + 1], g2 = gr[o + 2], g3 = gr[o + 3];
            if (g0 == 0.0 && g1 == 0.0 && g2 == 0.0 && g3 == 0.0) continue;
            const double* w0 = W + o * in;
            const double* w1 = w0 + in;
            const double* w2 = w1 + in;
            const double* w3 = w2 + in;
            for (std::size_t i = 0; i < in; ++i)
                dxr[i] += g0 * w0[i] + g1 * w1[i] + g2 * w2[i] + g3 * w3[i];
        }
        for (; o < out_dim; ++o) {
            const double g = gr[o];
            if (g == 0.0) continue;
            const double* wr = W + o * in;
            for (std::size_t i = 0; i < in; ++i) dxr[i] += g * wr[i];
        }
    }
    // dW pass row-outer: X and G stream once while dW rows stay cache-hot
    for (std::size_t r = 0; r < rows; ++r) {
        const double* gr = G + r * out_dim;
        const double* xr = X + r * in;
        for (std::size_t o = 0; o < out_dim; ++o) {
            const double g = gr[o];
            if (g == 0.0) continue;
            if (db) db[o] += g;
            double* dwr = dW + o * in;
            for (std::size_t i = 0; i < in; ++i) dwr[i] += g * xr[i];
        }
    }
}

}  // namespace

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    check(weight.rank() == 2, "linear: weight must be (out,in)");
    const std::size_t in = weight.dim(1), out_dim = weight.dim(0);
    check(x.rank() >= 1 && x.shape().back() == in, "linear: feature dim mismatch");
    check(bias.size() == out_dim, "linear: bias dim mismatch");
    const std::size_t rows = x.size() / in;

    Shape out_shape = x.shape();
    out_shape.back() = out_dim;
    std::vector<double> out(rows * out_dim);
    linear_forward_kernel(x.data(), weight.data(), bias.data(), out.data(), rows, in, out_dim);
    auto px = x.node();
    auto pw = weight.node();
    auto pb = bias.node();
    return make_op(std::move(out_shape), std::move(out), {px, pw, pb},
                   [px, pw, pb, rows, in, out_dim](TensorNode& self) {
                       px->ensure_grad();
                       pw->ensure_grad();
                       pb->ensure_grad();
                       linear_backward_kernel(px->data.data(), pw->data.data(),
                                              self.grad.data(), px->grad.data(),
                                              pw->grad.data(), pb->grad.data(), rows, in,
                                              out_dim);
                   });
}

Tensor linear_no_bias(const Tensor& x, const Tensor& weight) {
    check(weight.rank() == 2, "linear: weight must be (out,in)");
    const std::size_t in = weight.dim(1), out_dim = weight.dim(0);
    check(x.rank() >= 1 && x.shape().back() == in, "linear: feature dim mismatch");
    const std::size_t rows = x.size() / in;

    Shape out_shape = x.shape();
    out_shape.back() = out_dim;
    std::vector<double> out(rows * out_dim);
    linear_forward_kernel(x.data(), weight.data(), nullptr, out.data(), rows, in, out_dim);
    auto px = x.node();
    auto pw = weight.node();
    return make_op(std::move(out_shape), std::move(out), {px, pw},
                   [px, pw, rows, in, out_dim](TensorNode& self) {
                       px->ensure_grad();
                       pw->ensure_grad();
                       linear_backward_kernel(px->data.data(), pw->data.data(),
                                              self.grad.data(), px->grad.data(),
                                              pw->grad.data(), nullptr, rows, in, out_dim);
                   });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
    const std::size_t d = bias.size();
    check(x.size() % d == 0 && x.shape().back() == d, "add_bias: dim mismatch");
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] + bias.data()[i % d];
    auto px = x.node();
    auto pb = bias.node();
    return make_op(x.shape(), std::move(out), {px, pb}, [px, pb, d](TensorNode& self) {
        px->ensure_grad();
        pb->ensure_grad();
        for (std::size_t i = 0; i < self.data.size(); ++i) {
            px->grad[i] += self.grad[i];
            pb->grad[i % d] += self.grad[i];
        }
    });
}

namespace {

// shared batched matmul core; transpose_b switches between (k,n) and (n,k) B-layout
Tensor batched_matmul_impl(const Tensor& a, const Tensor& b, bool transpose_b) {
    check(a.rank() >= 2 && b.rank() >= 2 && a.rank() == b.rank(), "batched_matmul: rank mismatch");
    for (std::size_t i = 0; i + 2 < a.rank(); ++i)
        check(a.dim(i) == b.dim(i), "batched_matmul: batch dims differ");
    const std::size_t m = a.dim(a.rank() - 2), k = a.shape().back();
    const std::size_t bn = transpose_b ? b.dim(b.rank() - 2) : b.shape().back();
    const std::size_t bk = transpose_b ? b.shape().back() : b.dim(b.rank() - 2);
    check(bk == k, "batched_matmul: inner dim mismatch");
    std::size_t batch = 1;
    for (std::size_t i = 0; i + 2 < a.rank(); ++i) batch *= a.dim(i);

    Shape out_shape = a.shape();
    out_shape[out_shape.size() - 1] = bn;
    std::vector<double> out(batch * m * bn, 0.0);
    const double* A = a.data();
    const double* B = b.data();
    for (std::size_t bb = 0; bb < batch; ++bb) {
        const double* Ab = A + bb * m * k;
        const double* Bb = B + bb * k * bn;
        double* Ob = out.data() + bb * m * bn;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < bn; ++j) {
                double acc = 0.0;
                if (transpose_b) {
                    const double* br = Bb + j * k;
                    const double* ar = Ab + i * k;
                    for (std::size_t kk = 0; kk < k; ++kk) acc += ar[kk] * br[kk];
                } else {
                    for (std::size_t kk = 0; kk < k; ++kk) acc += Ab[i * k + kk] * Bb[kk * bn + j];
                }
                Ob[i * bn + j] = acc;
            }
    }
    auto pa = a.node();
    auto pb = b.node();
    return make_op(std::move(out_shape), std::move(out), {pa, pb},
                   [pa, pb, batch, m, k, bn, transpose_b](TensorNode& self) {
                       pa->ensure_grad();
                       pb->ensure_grad();
                       for (std::size_t bb = 0; bb < batch; ++bb) {
                           const double* G = self.grad.data() + bb * m * bn;
                           const double* A = pa->data.data() + bb * m * k;
                           const double* B = pb->data.data() + bb * k * bn;
                           double* dA = pa->grad.data() + bb * m * k;
                           double* dB = pb->grad.data() + bb * k * bn;
                           for (std::size_t i = 0; i < m; ++i)
                               for (std::size_t j = 0; j < bn; ++j) {
                                   const double g = G[i * bn + j];
                                   if (g == 0.0) continue;
                                   if (transpose_b) {
                                       // B is (bn, k); y = A @ B^T
                                       const double* br = B + j * k;
                                       double* dbr = dB + j * k;
                                       const double* ar = A + i * k;
                                       double* dar = dA + i * k;
                                       for (std::size_t kk = 0; kk < k; ++kk) {
                                           dar[kk] += g * br[kk];
                                           dbr[kk] += g * ar[kk];
                                       }
                                   } else {
                                       for (std::size_t kk = 0; kk < k; ++kk) {
                                           dA[i * k + kk] += g * B[kk * bn + j];
                                           dB[kk * bn + j] += g * A[i * k + kk];
                                       }
                                   }
                               }
                       }
                   });
}

}  // namespace

Tensor batched_matmul(const Tensor& a, const Tensor& b) {
    return batched_matmul_impl(a, b, false);
}

Tensor batched_matmul_nt(const Tensor& a, const Tensor& b) {
    return batched_matmul_impl(a, b, true);
}

// --- shape ops ---------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape shape) {
    check(shape_size(shape) == a.size(), "reshape: size mismatch");
    auto pa = a.node();
    return make_op(std::move(shape), a.values(), {pa}, [pa](TensorNode& self) {
        pa->ensure_grad();
        for (std::size_t i = 0; i < self.data.size(); ++i) pa->grad[i] += self.grad[i];
    });
}

namespace {

// generic gather permutation: out[i] = in[index[i]]
Tensor gather_op(const Tensor& a, Shape out_shape, std::vector<std::size_t> index) {
    std::vector<double> out(index.size());
    for (std::size_t i = 0; i < index.size(); ++i) out[i] = a.data()[index[i]];
    auto pa = a.node();
    auto idx = std::make_shared<std::vector<std::size_t>>(std::move(index));
    return make_op(std::move(out_shape), std::move(out), {pa}, [pa, idx](TensorNode& self) {
        pa->ensure_grad();
        for (std::size_t i = 0; i < self.data.size(); ++i) pa->grad[(*idx)[i]] += self.grad[i];
    });
}

}  // namespace

Tensor split_heads(const Tensor& x, std::size_t heads) {
    check(x.rank() == 3 && x.dim(2) % heads == 0, "split_heads: bad shape");
    const std::size_t B = x.dim(0), T = x.dim(1), D = x.dim(2), dh = D / heads;
    std::vector<std::size_t> index(B * heads * T * dh);
    std::size_t o = 0;
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t h = 0; h < heads; ++h)
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t j = 0; j < dh; ++j)
                    index[o++] = (b * T + t) * D + h * dh + j;
    return gather_op(x, {B, heads, T, dh}, std::move(index));
}

Tensor merge_heads(const Tensor& x) {
    check(x.rank() == 4, "merge_heads: expected (B,H,T,dh)");
    const std::size_t B = x.dim(0), H = x.dim(1), T = x.dim(2), dh = x.dim(3);
    std::vector<std::size_t> index(B * T * H * dh);
    std::size_t o = 0;
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t h = 0; h < H; ++h)
                for (std::size_t j = 0; j < dh; ++j)
                    index[o++] = ((b * H + h) * T + t) * dh + j;
    return gather_op(x, {B, T, H * dh}, std::move(index));
}

Tensor time_to_channel_major(const Tensor& x) {
    check(x.rank() == 3, "time_to_channel_major: expected (B,T,C)");
    const std::size_t B = x.dim(0), T = x.dim(1), C = x.dim(2);
    std::vector<std::size_t> index(B * C * T);
    std::size_t o = 0;
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t t = 0; t < T; ++t) index[o++] = (b * T + t) * C + c;
    return gather_op(x, {B, C, T}, std::move(index));
}

Tensor channel_to_time_major(const Tensor& x) {
    check(x.rank() == 3, "channel_to_time_major: expected (B,C,T)");
    const std::size_t B = x.dim(0), C = x.dim(1), T = x.dim(2);
    std::vector<std::size_t> index(B * T * C);
    std::size_t o = 0;
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t c = 0; c < C; ++c) index[o++] = (b * C + c) * T + t;
    return gather_op(x, {B, T, C}, std::move(index));
}

Tensor select_time(const Tensor& x, std::size_t t) {
    check(x.rank() == 3 && t < x.dim(1), "select_time: bad index");
    const std::size_t B = x.dim(0), T = x.dim(1), D = x.dim(2);
    std::vector<std::size_t> index(B * D);
    std::size_t o = 0;
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t j = 0; j < D; ++j) index[o++] = (b * T + t) * D + j;
    return gather_op(x, {B, D}, std::move(index));
}

Tensor stack_time(const std::vector<Tensor>& steps) {
    check(!steps.empty(), "stack_time: empty input");
    const std::size_t B = steps[0].dim(0), D = steps[0].dim(1), T = steps.size();
    std::vector<double> out(B * T * D);
    std::vector<std::shared_ptr<TensorNode>> parents;
    for (std::size_t t = 0; t < T; ++t) {
        check(steps[t].rank() == 2 && steps[t].dim(0) == B && steps[t].dim(1) == D,
              "stack_time: inconsistent step shapes");
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t j = 0; j < D; ++j)
                out[(b * T + t) * D + j] = steps[t].data()[b * D + j];
        parents.push_back(steps[t].node());
    }
    return make_op({B, T, D}, std::move(out), parents, [B, T, D](TensorNode& self) {
        for (std::size_t t = 0; t < T; ++t) {
            auto& p = self.parents[t];
            p->ensure_grad();
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t j = 0; j < D; ++j)
                    p->grad[b * D + j] += self.grad[(b * T + t) * D + j];
        }
    });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    check(a.rank() == 2 && b.rank() == 2 && a.dim(0) == b.dim(0), "concat_cols: bad shapes");
    const std::size_t B = a.dim(0), Da = a.dim(1), Db = b.dim(1);
    std::vector<double> out(B * (Da + Db));
    for (std::size_t r = 0; r < B; ++r) {
        for (std::size_t j = 0; j < Da; ++j) out[r * (Da + Db) + j] = a.data()[r * Da + j];
        for (std::size_t j = 0; j < Db; ++j) out[r * (Da + Db) + Da + j] = b.data()[r * Db + j];
    }
    auto pa = a.node();
    auto pb = b.node();
    return make_op({B, Da + Db}, std::move(out), {pa, pb}, [pa, pb, B, Da, Db](TensorNode& self) {
        pa->ensure_grad();
        pb->ensure_grad();
        for (std::size_t r = 0; r < B; ++r) {
            for (std::size_t j = 0; j < Da; ++j)
                pa->grad[r * Da + j] += self.grad[r * (Da + Db) + j];
            for (std::size_t j = 0; j < Db; ++j)
                pb->grad[r * Db + j] += self.grad[r * (Da + Db) + Da + j];
        }
    });
}

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t len) {
    check(x.rank() == 2 && start + len <= x.dim(1), "slice_cols: bad range");
    const std::size_t B = x.dim(0), D = x.dim(1);
    std::vector<std::size_t> index(B * len);
    std::size_t o = 0;
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t j = 0; j < len; ++j) index[o++] = b * D + start + j;
    return gather_op(x, {B, len}, std::move(index));
}

Tensor concat_time(const Tensor& front, const Tensor& rest) {
    check(front.rank() == 2 && rest.rank() == 3 && front.dim(0) == rest.dim(0) &&
              front.dim(1) == rest.dim(2),
          "concat_time: bad shapes");
    const std::size_t B = rest.dim(0), T = rest.dim(1), D = rest.dim(2);
    std::vector<double> out(B * (T + 1) * D);
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t j = 0; j < D; ++j) out[(b * (T + 1)) * D + j] = front.data()[b * D + j];
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t j = 0; j < D; ++j)
                out[(b * (T + 1) + t + 1) * D + j] = rest.data()[(b * T + t) * D + j];
    }
    auto pf = front.node();
    auto pr = rest.node();
    return make_op({B, T + 1, D}, std::move(out), {pf, pr}, [pf, pr, B, T, D](TensorNode& self) {
        pf->ensure_grad();
        pr->ensure_grad();
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t j = 0; j < D; ++j)
                pf->grad[b * D + j] += self.grad[(b * (T + 1)) * D + j];
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t j = 0; j < D; ++j)
                    pr->grad[(b * T + t) * D + j] += self.grad[(b * (T + 1) + t + 1) * D + j];
        }
    });
}

Tensor tile_rows(const Tensor& row, std::size_t batch) {
    const std::size_t D = row.size();
    std::vector<double> out(batch * D);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t j = 0; j < D; ++j) out[b * D + j] = row.data()[j];
    auto pr = row.node();
    return make_op({batch, D}, std::move(out), {pr}, [pr, batch, D](TensorNode& self) {
        pr->ensure_grad();
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t j = 0; j < D; ++j) pr->grad[j] += self.grad[b * D + j];
    });
}

Tensor where_rows(const std::vector<bool>& cond, const Tensor& a, const Tensor& b) {
    check(a.shape() == b.shape() && a.rank() == 2 && cond.size() == a.dim(0),
          "where_rows: bad shapes");
    const std::size_t B = a.dim(0), D = a.dim(1);
    std::vector<double> out(B * D);
    for (std::size_t r = 0; r < B; ++r)
        for (std::size_t j = 0; j < D; ++j)
            out[r * D + j] = cond[r] ? a.data()[r * D + j] : b.data()[r * D + j];
    auto pa = a.node();
    auto pb = b.node();
    auto c = std::make_shared<std::vector<bool>>(cond);
    return make_op({B, D}, std::move(out), {pa, pb}, [pa, pb, c, B, D](TensorNode& self) {
        pa->ensure_grad();
        pb->ensure_grad();
        for (std::size_t r = 0; r < B; ++r) {
            auto& dst = (*c)[r] ? pa->grad : pb->grad;
            for (std::size_t j = 0; j < D; ++j) dst[r * D + j] += self.grad[r * D + j];
        }
    });
}

// --- reductions and normalizations --------------------------------------------

Tensor sum_all(const Tensor& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i];
    auto pa = a.node();
    return make_op({1}, {s}, {pa}, [pa](TensorNode& self) {
        pa->ensure_grad();
        for (double& g : pa->grad) g += self.grad[0];
    });
}

Tensor mean_all(const Tensor& a) {
    check(a.size() > 0, "mean_all: empty tensor");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i];
    const double inv = 1.0 / double(a.size());
    auto pa = a.node();
    return make_op({1}, {s * inv}, {pa}, [pa, inv](TensorNode& self) {
        pa->ensure_grad();
        for (double& g : pa->grad) g += self.grad[0] * inv;
    });
}

Tensor weighted_sum(const Tensor& x, const std::vector<double>& weights) {
    check(x.size() == weights.size(), "weighted_sum: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) s += x.data()[i] * weights[i];
    auto px = x.node();
    auto w = std::make_shared<std::vector<double>>(weights);
    return make_op({1}, {s}, {px}, [px, w](TensorNode& self) {
        px->ensure_grad();
        for (std::size_t i = 0; i < w->size(); ++i) px->grad[i] += self.grad[0] * (*w)[i];
    });
}

Tensor softmax_lastdim(const Tensor& x) {
    check(x.rank() >= 1, "softmax: empty shape");
    const std::size_t D = x.shape().back();
    const std::size_t rows = x.size() / D;
    std::vector<double> out(x.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.data() + r * D;
        double* yr = out.data() + r * D;
        double mx = xr[0];
        for (std::size_t j = 1; j < D; ++j) mx = std::max(mx, xr[j]);
        double total = 0.0;
        for (std::size_t j = 0; j < D; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            total += yr[j];
        }
        for (std::size_t j = 0; j < D; ++j) yr[j] /= total;
    }
    auto px = x.node();
    return make_op(x.shape(), std::move(out), {px}, [px, rows, D](TensorNode& self) {
        px->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
            const double* p = self.data.data() + r * D;
            const double* g = self.grad.data() + r * D;
            double dot = 0.0;
            for (std::size_t j = 0; j < D; ++j) dot += p[j] * g[j];
            double* dx = px->grad.data() + r * D;
            for (std::size_t j = 0; j < D; ++j) dx[j] += p[j] * (g[j] - dot);
        }
    });
}

Tensor log_softmax_lastdim(const Tensor& x) {
    check(x.rank() >= 1, "log_softmax: empty shape");
    const std::size_t D = x.shape().back();
    const std::size_t rows = x.size() / D;
    std::vector<double> out(x.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.data() + r * D;
        double* yr = out.data() + r * D;
        double mx = xr[0];
        for (std::size_t j = 1; j < D; ++j) mx = std::max(mx, xr[j]);
        double total = 0.0;
        for (std::size_t j = 0; j < D; ++j) total += std::exp(xr[j] - mx);
        const double lse = mx + std::log(total);
        for (std::size_t j = 0; j < D; ++j) yr[j] = xr[j] - lse;
    }
    auto px = x.node();
    return make_op(x.shape(), std::move(out), {px}, [px, rows, D](TensorNode& self) {
        px->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
            const double* lp = self.data.data() + r * D;
            const double* g = self.grad.data() + r * D;
            double gsum = 0.0;
            for (std::size_t j = 0; j < D; ++j) gsum += g[j];
            double* dx = px->grad.data() + r * D;
            for (std::size_t j = 0; j < D; ++j) dx[j] += g[j] - std::exp(lp[j]) * gsum;
        }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    const std::size_t D = x.shape().back();
    check(gamma.size() == D && beta.size() == D, "layer_norm: affine dim mismatch");
    const std::size_t rows = x.size() / D;
    std::vector<double> out(x.size());
    auto inv_std = std::make_shared<std::vector<double>>(rows);
    auto xhat = std::make_shared<std::vector<double>>(x.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.data() + r * D;
        double mean = 0.0;
        for (std::size_t j = 0; j < D; ++j) mean += xr[j];
        mean /= double(D);
        double var = 0.0;
        for (std::size_t j = 0; j < D; ++j) var += (xr[j] - mean) * (xr[j] - mean);
        var /= double(D);
        const double istd = 1.0 / std::sqrt(var + eps);
        (*inv_std)[r] = istd;
        for (std::size_t j = 0; j < D; ++j) {
            const double xh = (xr[j] - mean) * istd;
            (*xhat)[r * D + j] = xh;
            out[r * D + j] = gamma.data()[j] * xh + beta.data()[j];
        }
    }
    auto px = x.node();
    auto pg = gamma.node();
    auto pb = beta.node();
    return make_op(x.shape(), std::move(out), {px, pg, pb},
                   [px, pg, pb, rows, D, inv_std, xhat](TensorNode& self) {
                       px->ensure_grad();
                       pg->ensure_grad();
                       pb->ensure_grad();
                       for (std::size_t r = 0; r < rows; ++r) {
                           const double* g = self.grad.data() + r * D;
                           const double* xh = xhat->data() + r * D;
                           double mean_gh = 0.0, mean_ghx = 0.0;
                           for (std::size_t j = 0; j < D; ++j) {
                               const double gh = g[j] * pg->data[j];
                               mean_gh += gh;
                               mean_ghx += gh * xh[j];
                               pg->grad[j] += g[j] * xh[j];
                               pb->grad[j] += g[j];
                           }
                           mean_gh /= double(D);
                           mean_ghx /= double(D);
                           double* dx = px->grad.data() + r * D;
                           const double istd = (*inv_std)[r];
                           for (std::size_t j = 0; j < D; ++j) {
                               const double gh = g[j] * pg->data[j];
                               dx[j] += (gh - mean_gh - xh[j] * mean_ghx) * istd;
                           }
                       }
                   });
}

Tensor l2_normalize_rows(const Tensor& x) {
    check(x.rank() == 2, "l2_normalize_rows: expected (N,D)");
    const std::size_t N = x.dim(0), D = x.dim(1);
    std::vector<double> out(x.size());
    auto norms = std::make_shared<std::vector<double>>(N);
    for (std::size_t r = 0; r < N; ++r) {
        const double* xr = x.data() + r * D;
        double sq = 0.0;
        for (std::size_t j = 0; j < D; ++j) sq += xr[j] * xr[j];
        const double norm = std::sqrt(sq);
        if (norm <= 0.0)
            throw NumericError("l2_normalize_rows: zero-norm embedding (cosine undefined)");
        (*norms)[r] = norm;
        for (std::size_t j = 0; j < D; ++j) out[r * D + j] = xr[j] / norm;
    }
    auto px = x.node();
    return make_op(x.shape(), std::move(out), {px}, [px, N, D, norms](TensorNode& self) {
        px->ensure_grad();
        for (std::size_t r = 0; r < N; ++r) {
            const double* y = self.data.data() + r * D;
            const double* g = self.grad.data() + r * D;
            double dot = 0.0;
            for (std::size_t j = 0; j < D; ++j) dot += y[j] * g[j];
            double* dx = px->grad.data() + r * D;
            const double inv = 1.0 / (*norms)[r];
            for (std::size_t j = 0; j < D; ++j) dx[j] += (g[j] - y[j] * dot) * inv;
        }
    });
}

Tensor masked_mean_pool(const Tensor& x, const std::vector<std::vector<bool>>& valid,
                        double denom_floor) {
    check(x.rank() == 3, "masked_mean_pool: expected (B,T,D)");
    const std::size_t B = x.dim(0), T = x.dim(1), D = x.dim(2);
    check(valid.size() == B, "masked_mean_pool: mask batch mismatch");
    std::vector<double> out(B * D, 0.0);
    auto denom = std::make_shared<std::vector<double>>(B);
    for (std::size_t b = 0; b < B; ++b) {
        check(valid[b].size() == T, "masked_mean_pool: mask length mismatch");
        double count = 0.0;
        for (std::size_t t = 0; t < T; ++t)
            if (valid[b][t]) {
                count += 1.0;
                for (std::size_t j = 0; j < D; ++j) out[b * D + j] += x.data()[(b * T + t) * D + j];
            }
        (*denom)[b] = std::max(count, denom_floor);
        for (std::size_t j = 0; j < D; ++j) out[b * D + j] /= (*denom)[b];
    }
    auto px = x.node();
    auto v = std::make_shared<std::vector<std::vector<bool>>>(valid);
    return make_op({B, D}, std::move(out), {px}, [px, v, denom, B, T, D](TensorNode& self) {
        px->ensure_grad();
        for (std::size_t b = 0; b < B; ++b) {
            const double inv = 1.0 / (*denom)[b];
            for (std::size_t t = 0; t < T; ++t)
                if ((*v)[b][t])
                    for (std::size_t j = 0; j < D; ++j)
                        px->grad[(b * T + t) * D + j] += self.grad[b * D + j] * inv;
        }
    });
}

Tensor masked_max_pool(const Tensor& x, const std::vector<std::vector<bool>>& valid) {
    check(x.rank() == 3, "masked_max_pool: expected (B,T,D)");
    const std::size_t B = x.dim(0), T = x.dim(1), D = x.dim(2);
    check(valid.size() == B, "masked_max_pool: mask batch mismatch");
    std::vector<double> out(B * D);
    auto argmax = std::make_shared<std::vector<std::size_t>>(B * D);
    for (std::size_t b = 0; b < B; ++b) {
        bool any = false;
        for (std::size_t t = 0; t < T; ++t)
            if (valid[b][t]) {
                for (std::size_t j = 0; j < D; ++j) {
                    const double v = x.data()[(b * T + t) * D + j];
                    if (!any || v > out[b * D + j]) {
                        out[b * D + j] = v;
                        (*argmax)[b * D + j] = (b * T + t) * D + j;
                    }
                }
                any = true;
            }
        if (!any) throw NumericError("masked_max_pool: example has no valid steps");
    }
    auto px = x.node();
    return make_op({B, D}, std::move(out), {px}, [px, argmax](TensorNode& self) {
        px->ensure_grad();
        for (std::size_t i = 0; i < self.data.size(); ++i)
            px->grad[(*argmax)[i]] += self.grad[i];
    });
}

// --- structured layers ---------------------------------------------------------

Tensor conv1d_same(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    check(x.rank() == 3 && weight.rank() == 3, "conv1d: expected (B,Cin,T) and (Cout,Cin,K)");
    const std::size_t B = x.dim(0), Cin = x.dim(1), T = x.dim(2);
    const std::size_t Cout = weight.dim(0), K = weight.dim(2);
    check(weight.dim(1) == Cin && bias.size() == Cout, "conv1d: channel mismatch");
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(K / 2);

    std::vector<double> out(B * Cout * T, 0.0);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t o = 0; o < Cout; ++o)
            for (std::size_t t = 0; t < T; ++t) {
                double acc = bias.data()[o];
                for (std::size_t ci = 0; ci < Cin; ++ci) {
                    const double* xr = x.data() + (b * Cin + ci) * T;
                    const double* wr = weight.data() + (o * Cin + ci) * K;
                    for (std::size_t k = 0; k < K; ++k) {
                        const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(t + k) - pad;
                        if (s < 0 || s >= static_cast<std::ptrdiff_t>(T)) continue;
                        acc += xr[s] * wr[k];
                    }
                }
                out[(b * Cout + o) * T + t] = acc;
            }
    auto px = x.node();
    auto pw = weight.node();
    auto pb = bias.node();
    return make_op({B, Cout, T}, std::move(out), {px, pw, pb},
                   [px, pw, pb, B, Cin, Cout, T, K, pad](TensorNode& self) {
                       px->ensure_grad();
                       pw->ensure_grad();
                       pb->ensure_grad();
                       for (std::size_t b = 0; b < B; ++b)
                           for (std::size_t o = 0; o < Cout; ++o)
                               for (std::size_t t = 0; t < T; ++t) {
                                   const double g = self.grad[(b * Cout + o) * T + t];
                                   if (g == 0.0) continue;
                                   pb->grad[o] += g;
                                   for (std::size_t ci = 0; ci < Cin; ++ci) {
                                       const double* xr = px->data.data() + (b * Cin + ci) * T;
                                       double* dxr = px->grad.data() + (b * Cin + ci) * T;
                                       const double* wr = pw->data.data() + (o * Cin + ci) * K;
                                       double* dwr = pw->grad.data() + (o * Cin + ci) * K;
                                       for (std::size_t k = 0; k < K; ++k) {
                                           const std::ptrdiff_t s =
                                               static_cast<std::ptrdiff_t>(t + k) - pad;
                                           if (s < 0 || s >= static_cast<std::ptrdiff_t>(T))
                                               continue;
                                           dxr[s] += g * wr[k];
                                           dwr[k] += g * xr[s];
                                       }
                                   }
                               }
                   });
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  std::vector<double>& running_mean, std::vector<double>& running_var,
                  bool training, double momentum, double eps) {
    check(x.rank() == 2 || x.rank() == 3, "batch_norm: expected (B,C) or (B,C,T)");
    const std::size_t B = x.dim(0), C = x.dim(1);
    const std::size_t T = x.rank() == 3 ? x.dim(2) : 1;
    check(gamma.size() == C && beta.size() == C, "batch_norm: affine dim mismatch");
    check(running_mean.size() == C && running_var.size() == C, "batch_norm: running buffers");
    const std::size_t n = B * T;
    auto at = [C, T](std::size_t b, std::size_t c, std::size_t t) {
        return (b * C + c) * T + t;
    };

    std::vector<double> mean(C, 0.0), var(C, 0.0);
    if (training) {
        check(n >= 2, "batch_norm: batch too small for training-mode statistics");
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t t = 0; t < T; ++t) mean[c] += x.data()[at(b, c, t)];
        for (std::size_t c = 0; c < C; ++c) mean[c] /= double(n);
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t t = 0; t < T; ++t) {
                    const double d = x.data()[at(b, c, t)] - mean[c];
                    var[c] += d * d;
                }
        for (std::size_t c = 0; c < C; ++c) var[c] /= double(n);
        for (std::size_t c = 0; c < C; ++c) {
            running_mean[c] = (1.0 - momentum) * running_mean[c] + momentum * mean[c];
            running_var[c] = (1.0 - momentum) * running_var[c] + momentum * var[c];
        }
    } else {
        mean = running_mean;
        var = running_var;
    }

    std::vector<double> out(x.size());
    auto inv_std = std::make_shared<std::vector<double>>(C);
    auto xhat = std::make_shared<std::vector<double>>(x.size());
    for (std::size_t c = 0; c < C; ++c) (*inv_std)[c] = 1.0 / std::sqrt(var[c] + eps);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t t = 0; t < T; ++t) {
                const std::size_t i = at(b, c, t);
                const double xh = (x.data()[i] - mean[c]) * (*inv_std)[c];
                (*xhat)[i] = xh;
                out[i] = gamma.data()[c] * xh + beta.data()[c];
            }

    auto px = x.node();
    auto pg = gamma.node();
    auto pb = beta.node();
    return make_op(x.shape(), std::move(out), {px, pg, pb},
                   [px, pg, pb, B, C, T, n, training, inv_std, xhat, at](TensorNode& self) {
                       px->ensure_grad();
                       pg->ensure_grad();
                       pb->ensure_grad();
                       for (std::size_t c = 0; c < C; ++c) {
                           double sum_g = 0.0, sum_gx = 0.0;
                           for (std::size_t b = 0; b < B; ++b)
                               for (std::size_t t = 0; t < T; ++t) {
                                   const std::size_t i = at(b, c, t);
                                   sum_g += self.grad[i];
                                   sum_gx += self.grad[i] * (*xhat)[i];
                               }
                           pg->grad[c] += sum_gx;
                           pb->grad[c] += sum_g;
                           const double gscale = pg->data[c] * (*inv_std)[c];
                           for (std::size_t b = 0; b < B; ++b)
                               for (std::size_t t = 0; t < T; ++t) {
                                   const std::size_t i = at(b, c, t);
                                   if (training) {
                                       px->grad[i] += gscale * (self.grad[i] - sum_g / double(n) -
                                                                (*xhat)[i] * sum_gx / double(n));
                                   } else {
                                       px->grad[i] += gscale * self.grad[i];
                                   }
                               }
                       }
                   });
}

Tensor dropout(const Tensor& x, double p, bool training, std::uint64_t seed) {
    if (!training || p <= 0.0) return x;
    check(p < 1.0, "dropout: rate must be < 1");
    Rng rng(seed);
    const double keep = 1.0 - p;
    auto mask = std::make_shared<std::vector<double>>(x.size());
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        (*mask)[i] = rng.uniform() < p ? 0.0 : 1.0 / keep;
        out[i] = x.data()[i] * (*mask)[i];
    }
    auto px = x.node();
    return make_op(x.shape(), std::move(out), {px}, [px, mask](TensorNode& self) {
        px->ensure_grad();
        for (std::size_t i = 0; i < self.data.size(); ++i)
            px->grad[i] += self.grad[i] * (*mask)[i];
    });
}

Tensor nll_from_log_probs(const Tensor& log_probs, const std::vector<int>& labels) {
    check(log_probs.rank() == 2, "nll: expected (N,C) log-probabilities");
    const std::size_t N = log_probs.dim(0), C = log_probs.dim(1);
    check(labels.size() == N, "nll: label count mismatch");
    double loss = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        check(labels[i] >= 0 && labels[i] < static_cast<int>(C), "nll: label out of range");
        loss -= log_probs.data()[i * C + static_cast<std::size_t>(labels[i])];
    }
    loss /= double(N);
    auto pl = log_probs.node();
    auto lab = std::make_shared<std::vector<int>>(labels);
    return make_op({1}, {loss}, {pl}, [pl, lab, N, C](TensorNode& self) {
        pl->ensure_grad();
        const double g = self.grad[0] / double(N);
        for (std::size_t i = 0; i < N; ++i)
            pl->grad[i * C + static_cast<std::size_t>((*lab)[i])] -= g;
    });
}

Tensor focal_bce_with_logits(const Tensor& logits, const std::vector<double>& targets,
                             double alpha_f, double gamma) {
    check(logits.size() == targets.size(), "focal_bce: size mismatch");
    check(alpha_f > 0.0 && alpha_f < 1.0 && gamma >= 0.0, "focal_bce: bad constants");
    const std::size_t n = logits.size();
    auto softplus = [](double z) {
        return std::log1p(std::exp(-std::fabs(z))) + std::max(z, 0.0);
    };
    double loss = 0.0;
    auto grads = std::make_shared<std::vector<double>>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double s = logits.data()[i];
        const double q = s >= 0.0 ? 1.0 / (1.0 + std::exp(-s)) : std::exp(s) / (1.0 + std::exp(s));
        const double log_q = -softplus(-s);
        const double log_1mq = -softplus(s);
        if (targets[i] > 0.5) {
            loss += -alpha_f * std::pow(1.0 - q, gamma) * log_q;
            (*grads)[i] = alpha_f * (gamma * q * std::pow(1.0 - q, gamma) * log_q -
                                     std::pow(1.0 - q, gamma + 1.0));
        } else {
            loss += -(1.0 - alpha_f) * std::pow(q, gamma) * log_1mq;
            (*grads)[i] = (1.0 - alpha_f) * (std::pow(q, gamma + 1.0) -
                                             gamma * (1.0 - q) * std::pow(q, gamma) * log_1mq);
        }
    }
    loss /= double(n);
    auto pl = logits.node();
    return make_op({1}, {loss}, {pl}, [pl, grads, n](TensorNode& self) {
        pl->ensure_grad();
        const double g = self.grad[0] / double(n);
        for (std::size_t i = 0; i < n; ++i) pl->grad[i] += g * (*grads)[i];
    });
}

}  // namespace olfact
