#include "mud/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "mud/error.hpp"

namespace mud {
namespace {

// ---------------------------------------------------------------------------
// Small GEMM kernels. All convolutions below are lowered onto these three
// loop orders; each keeps the innermost loop contiguous so the compiler can
// vectorize it. N is blocked so the C-row tile stays cache resident.
// ---------------------------------------------------------------------------

constexpr int kNBlock = 512;

// C[M,N] += A[M,K] * B[K,N]
template <typename T>
void gemm_nn(int M, int N, int K, const T* A, const T* B, T* C) {
    for (int n0 = 0; n0 < N; n0 += kNBlock) {
        const int nb = std::min(kNBlock, N - n0);
        for (int m = 0; m < M; ++m) {
            T* __restrict__ c = C + static_cast<std::size_t>(m) * N + n0;
            for (int k = 0; k < K; ++k) {
                const T a = A[static_cast<std::size_t>(m) * K + k];
                const T* __restrict__ b = B + static_cast<std::size_t>(k) * N + n0;
                for (int n = 0; n < nb; ++n) c[n] += a * b[n];
            }
        }
    }
}

// C[M,K] += A[M,N] * B[K,N]^T   (rows of A dotted with rows of B)
template <typename T>
void gemm_nt(int M, int N, int K, const T* A, const T* B, T* C) {
    for (int m = 0; m < M; ++m) {
        const T* __restrict__ a = A + static_cast<std::size_t>(m) * N;
        for (int k = 0; k < K; ++k) {
            const T* __restrict__ b = B + static_cast<std::size_t>(k) * N;
            T acc{0};
            for (int n = 0; n < N; ++n) acc += a[n] * b[n];
            C[static_cast<std::size_t>(m) * K + k] += acc;
        }
    }
}

// C[K,N] += A[M,K]^T * B[M,N]
template <typename T>
void gemm_tn(int M, int N, int K, const T* A, const T* B, T* C) {
    for (int n0 = 0; n0 < N; n0 += kNBlock) {
        const int nb = std::min(kNBlock, N - n0);
        for (int k = 0; k < K; ++k) {
            T* __restrict__ c = C + static_cast<std::size_t>(k) * N + n0;
            for (int m = 0; m < M; ++m) {
                const T a = A[static_cast<std::size_t>(m) * K + k];
                const T* __restrict__ b = B + static_cast<std::size_t>(m) * N + n0;
                for (int n = 0; n < nb; ++n) c[n] += a * b[n];
            }
        }
    }
}

// ---------------------------------------------------------------------------
// im2col / col2im for valid convolution. col has K = C*kh*kw rows and
// N = H'*W' columns, so conv becomes gemm_nn(w_matrix, col).
// ---------------------------------------------------------------------------

template <typename T>
void im2col(const T* x, int C, int H, int W, int kh, int kw, int stride,
            int Ho, int Wo, T* col) {
    std::size_t row = 0;
    for (int c = 0; c < C; ++c) {
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx, ++row) {
                T* __restrict__ dst = col + row * static_cast<std::size_t>(Ho) * Wo;
                for (int oy = 0; oy < Ho; ++oy) {
                    const T* __restrict__ src =
                        x + (static_cast<std::size_t>(c) * H + oy * stride + ky) * W + kx;
                    if (stride == 1) {
                        std::memcpy(dst, src, sizeof(T) * static_cast<std::size_t>(Wo));
                        dst += Wo;
                    } else {
                        for (int ox = 0; ox < Wo; ++ox) dst[ox] = src[ox * stride];
                        dst += Wo;
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const T* col, int C, int H, int W, int kh, int kw, int stride,
                int Ho, int Wo, T* x) {
    std::size_t row = 0;
    for (int c = 0; c < C; ++c) {
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx, ++row) {
                const T* __restrict__ src = col + row * static_cast<std::size_t>(Ho) * Wo;
                for (int oy = 0; oy < Ho; ++oy) {
                    T* __restrict__ dst =
                        x + (static_cast<std::size_t>(c) * H + oy * stride + ky) * W + kx;
                    for (int ox = 0; ox < Wo; ++ox) dst[ox * stride] += src[ox];
                    src += Wo;
                }
            }
        }
    }
}

template <typename T>
Var<T> make_node(const char* op, TensorT<T> value, std::vector<Var<T>> inputs) {
    auto node = std::make_shared<NodeT<T>>();
    node->op = op;
    node->value = std::move(value);
    node->inputs = std::move(inputs);
    for (const auto& in : node->inputs) {
        if (in->requires_grad) node->requires_grad = true;
    }
    return node;
}

template <typename T>
void check_rank(const Var<T>& v, int rank, const char* op, const char* role) {
    if (static_cast<int>(v->value.shape().size()) != rank) {
        throw DataError(std::string(op) + ": " + role + " must have rank " +
                        std::to_string(rank) + ", got shape " + v->value.shape_string());
    }
}

}  // namespace

template <typename T>
Var<T> constant(TensorT<T> value) {
    auto node = std::make_shared<NodeT<T>>();
    node->value = std::move(value);
    return node;
}

template <typename T>
Var<T> parameter(TensorT<T> value) {
    auto node = std::make_shared<NodeT<T>>();
    node->value = std::move(value);
    node->requires_grad = true;
    node->ensure_grad();
    node->zero_grad();
    return node;
}

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride) {
    check_rank(x, 3, "conv2d", "input");
    check_rank(w, 4, "conv2d", "kernel");
    check_rank(b, 1, "conv2d", "bias");
    const int C = x->value.shape()[0], H = x->value.shape()[1], W = x->value.shape()[2];
    const int O = w->value.shape()[0], kh = w->value.shape()[2], kw = w->value.shape()[3];
    if (w->value.shape()[1] != C) {
        throw DataError("conv2d: kernel expects " + std::to_string(w->value.shape()[1]) +
                        " input channels, input has " + std::to_string(C));
    }
    if (b->value.shape()[0] != O) {
        throw DataError("conv2d: bias size " + std::to_string(b->value.shape()[0]) +
                        " does not match " + std::to_string(O) + " output channels");
    }
    if (stride < 1) throw DataError("conv2d: stride must be positive");
    if (H < kh || W < kw) {
        throw DataError("conv2d: input " + x->value.shape_string() +
                        " smaller than kernel " + std::to_string(kh) + "x" + std::to_string(kw));
    }
    // Valid convolution: trailing rows/columns that do not fit a full
    // kernel placement are dropped.
    const int Ho = (H - kh) / stride + 1;
    const int Wo = (W - kw) / stride + 1;
    const int K = C * kh * kw;
    const int N = Ho * Wo;

    auto col = std::make_shared<TensorT<T>>(std::vector<int>{K, N});
    im2col(x->value.data(), C, H, W, kh, kw, stride, Ho, Wo, col->data());

    TensorT<T> out({O, Ho, Wo});
    for (int o = 0; o < O; ++o) {
        std::fill_n(out.data() + static_cast<std::size_t>(o) * N, N, b->value.data()[o]);
    }
    gemm_nn(O, N, K, w->value.data(), col->data(), out.data());

    auto node = make_node("conv2d", std::move(out), {x, w, b});
    if (node->requires_grad) {
        auto nw = std::weak_ptr<NodeT<T>>(node);
        node->backward_fn = [nw, col, C, H, W, O, kh, kw, stride, Ho, Wo, K, N]() {
            auto n = nw.lock();
            const T* g = n->grad.data();
            const Var<T>&x = n->inputs[0], &w = n->inputs[1], &b = n->inputs[2];
            if (b->requires_grad) {
                b->ensure_grad();
                for (int o = 0; o < O; ++o) {
                    T acc{0};
                    const T* __restrict__ go = g + static_cast<std::size_t>(o) * N;
                    for (int i = 0; i < N; ++i) acc += go[i];
                    b->grad.data()[o] += acc;
                }
            }
            if (w->requires_grad) {
                w->ensure_grad();
                gemm_nt(O, N, K, g, col->data(), w->grad.data());
            }
            if (x->requires_grad) {
                x->ensure_grad();
                TensorT<T> dcol({K, N});
                gemm_tn(O, N, K, w->value.data(), g, dcol.data());
                col2im_add(dcol.data(), C, H, W, kh, kw, stride, Ho, Wo, x->grad.data());
            }
        };
    }
    return node;
}

template <typename T>
Var<T> transposed_conv2d(const Var<T>& x, const Var<T>& w, int stride) {
    check_rank(x, 3, "transposed_conv2d", "input");
    check_rank(w, 4, "transposed_conv2d", "kernel");
    const int C = x->value.shape()[0], H = x->value.shape()[1], W = x->value.shape()[2];
    const int O = w->value.shape()[1], kh = w->value.shape()[2], kw = w->value.shape()[3];
    if (w->value.shape()[0] != C) {
        throw DataError("transposed_conv2d: kernel expects " +
                        std::to_string(w->value.shape()[0]) + " input channels, input has " +
                        std::to_string(C));
    }
    if (kh != stride || kw != stride) {
        throw DataError("transposed_conv2d: kernel " + std::to_string(kh) + "x" +
                        std::to_string(kw) + " must equal stride " + std::to_string(stride));
    }
    const int s = stride;
    const int Ho = H * s, Wo = W * s;
    const int M = O * s * s;  // rows of the scattered output
    const int N = H * W;

    // out_col[(o*s+ky)*s+kx][i*W+j] = sum_c x[c][i][j] * w[c][o][ky][kx]
    TensorT<T> out_col({M, N});
    gemm_tn(C, N, M, w->value.data(), x->value.data(), out_col.data());

    TensorT<T> out({O, Ho, Wo});
    for (int o = 0; o < O; ++o) {
        for (int ky = 0; ky < s; ++ky) {
            for (int kx = 0; kx < s; ++kx) {
                const T* __restrict__ src =
                    out_col.data() + (static_cast<std::size_t>(o) * s * s + ky * s + kx) * N;
                for (int i = 0; i < H; ++i) {
                    T* __restrict__ dst =
                        out.data() + (static_cast<std::size_t>(o) * Ho + i * s + ky) * Wo + kx;
                    for (int j = 0; j < W; ++j) dst[j * s] = src[i * W + j];
                }
            }
        }
    }

    auto node = make_node("transposed_conv2d", std::move(out), {x, w});
    if (node->requires_grad) {
        auto nw = std::weak_ptr<NodeT<T>>(node);
        node->backward_fn = [nw, C, H, W, O, s, Ho, Wo, M, N]() {
            auto n = nw.lock();
            const Var<T>&x = n->inputs[0], &w = n->inputs[1];
            // Gather the output gradient back into column layout.
            TensorT<T> gcol({M, N});
            for (int o = 0; o < O; ++o) {
                for (int ky = 0; ky < s; ++ky) {
                    for (int kx = 0; kx < s; ++kx) {
                        T* __restrict__ dst =
                            gcol.data() + (static_cast<std::size_t>(o) * s * s + ky * s + kx) * N;
                        for (int i = 0; i < H; ++i) {
                            const T* __restrict__ src = n->grad.data() +
                                (static_cast<std::size_t>(o) * Ho + i * s + ky) * Wo + kx;
                            for (int j = 0; j < W; ++j) dst[i * W + j] = src[j * s];
                        }
                    }
                }
            }
            if (w->requires_grad) {
                w->ensure_grad();
                gemm_nt(C, N, M, x->value.data(), gcol.data(), w->grad.data());
            }
            if (x->requires_grad) {
                x->ensure_grad();
                gemm_nn(C, N, M, w->value.data(), gcol.data(), x->grad.data());
            }
        };
    }
    return node;
}

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope) {
    TensorT<T> out(x->value.shape());
    const T* in = x->value.data();
    T* o = out.data();
    const std::size_t n = out.size();
    for (std::size_t i = 0; i < n; ++i) o[i] = in[i] > T{0} ? in[i] : slope * in[i];

    auto node = make_node("leaky_relu", std::move(out), {x});
    if (node->requires_grad) {
        auto nw = std::weak_ptr<NodeT<T>>(node);
        node->backward_fn = [nw, slope, n]() {
            auto nd = nw.lock();
            const Var<T>& x = nd->inputs[0];
            x->ensure_grad();
            const T* in = x->value.data();
            const T* g = nd->grad.data();
            T* gx = x->grad.data();
            for (std::size_t i = 0; i < n; ++i) gx[i] += in[i] > T{0} ? g[i] : slope * g[i];
        };
    }
    return node;
}

template <typename T>
Var<T> global_avg_pool(const Var<T>& x) {
    check_rank(x, 3, "global_avg_pool", "input");
    const int C = x->value.shape()[0];
    const std::size_t hw =
        static_cast<std::size_t>(x->value.shape()[1]) * x->value.shape()[2];
    TensorT<T> out({C});
    for (int c = 0; c < C; ++c) {
        const T* in = x->value.data() + c * hw;
        double acc = 0.0;
        for (std::size_t i = 0; i < hw; ++i) acc += static_cast<double>(in[i]);
        out.data()[c] = static_cast<T>(acc / static_cast<double>(hw));
    }
    auto node = make_node("global_avg_pool", std::move(out), {x});
    if (node->requires_grad) {
        auto nw = std::weak_ptr<NodeT<T>>(node);
        node->backward_fn = [nw, C, hw]() {
            auto nd = nw.lock();
            const Var<T>& x = nd->inputs[0];
            x->ensure_grad();
            for (int c = 0; c < C; ++c) {
                const T g = nd->grad.data()[c] / static_cast<T>(hw);
                T* gx = x->grad.data() + c * hw;
                for (std::size_t i = 0; i < hw; ++i) gx[i] += g;
            }
        };
    }
    return node;
}

template <typename T>
Var<T> affine(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
    check_rank(x, 1, "affine", "input");
    check_rank(w, 2, "affine", "weight");
    check_rank(b, 1, "affine", "bias");
    const int m = w->value.shape()[0], n = w->value.shape()[1];
    if (x->value.shape()[0] != n) {
        throw DataError("affine: weight expects input size " + std::to_string(n) +
                        ", got " + std::to_string(x->value.shape()[0]));
    }
    if (b->value.shape()[0] != m) {
        throw DataError("affine: bias size mismatch");
    }
    TensorT<T> out({m});
    for (int i = 0; i < m; ++i) {
        const T* wr = w->value.data() + static_cast<std::size_t>(i) * n;
        double acc = static_cast<double>(b->value.data()[i]);
        for (int j = 0; j < n; ++j) acc += static_cast<double>(wr[j]) * x->value.data()[j];
        out.data()[i] = static_cast<T>(acc);
    }
    auto node = make_node("affine", std::move(out), {x, w, b});
    if (node->requires_grad) {
        auto nw = std::weak_ptr<NodeT<T>>(node);
        node->backward_fn = [nw, m, n]() {
            auto nd = nw.lock();
            const Var<T>&x = nd->inputs[0], &w = nd->inputs[1], &b = nd->inputs[2];
            const T* g = nd->grad.data();
            if (b->requires_grad) {
                b->ensure_grad();
                for (int i = 0; i < m; ++i) b->grad.data()[i] += g[i];
            }
            if (w->requires_grad) {
                w->ensure_grad();
                for (int i = 0; i < m; ++i) {
                    T* gw = w->grad.data() + static_cast<std::size_t>(i) * n;
                    for (int j = 0; j < n; ++j) gw[j] += g[i] * x->value.data()[j];
                }
            }
            if (x->requires_grad) {
                x->ensure_grad();
                for (int i = 0; i < m; ++i) {
                    const T* wr = w->value.data() + static_cast<std::size_t>(i) * n;
                    for (int j = 0; j < n; ++j) x->grad.data()[j] += g[i] * wr[j];
                }
            }
        };
    }
    return node;
}

template <typename T>
Var<T> mse(const Var<T>& a, const Var<T>& b) {
    if (a->value.shape() != b->value.shape()) {
        throw DataError("mse: shape mismatch " + a->value.shape_string() + " vs " +
                        b->value.shape_string());
    }
    const std::size_t n = a->value.size();
    if (n == 0) throw DataError("mse: empty input");
    const T* pa = a->value.data();
    const T* pb = b->value.data();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(pa[i]) - static_cast<double>(pb[i]);
        acc += d * d;
    }
    TensorT<T> out({1});
    out.data()[0] = static_cast<T>(acc / static_cast<double>(n));

    auto node = make_node("mse", std::move(out), {a, b});
    if (node->requires_grad) {
        auto nw = std::weak_ptr<NodeT<T>>(node);
        node->backward_fn = [nw, n]() {
            auto nd = nw.lock();
            const Var<T>&a = nd->inputs[0], &b = nd->inputs[1];
            const T g = nd->grad.data()[0] * T{2} / static_cast<T>(n);
            const T* pa = a->value.data();
            const T* pb = b->value.data();
            if (a->requires_grad) {
                a->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) a->grad.data()[i] += g * (pa[i] - pb[i]);
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) b->grad.data()[i] -= g * (pa[i] - pb[i]);
            }
        };
    }
    return node;
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    if (a->value.shape() != b->value.shape()) {
        throw DataError("add: shape mismatch " + a->value.shape_string() + " vs " +
                        b->value.shape_string());
    }
    TensorT<T> out(a->value.shape());
    const std::size_t n = out.size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = a->value.data()[i] + b->value.data()[i];
    auto node = make_node("add", std::move(out), {a, b});
    if (node->requires_grad) {
        auto nw = std::weak_ptr<NodeT<T>>(node);
        node->backward_fn = [nw, n]() {
            auto nd = nw.lock();
            for (const auto& in : nd->inputs) {
                if (!in->requires_grad) continue;
                in->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) in->grad.data()[i] += nd->grad.data()[i];
            }
        };
    }
    return node;
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor) {
    TensorT<T> out(a->value.shape());
    const std::size_t n = out.size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = a->value.data()[i] * factor;
    auto node = make_node("scale", std::move(out), {a});
    if (node->requires_grad) {
        auto nw = std::weak_ptr<NodeT<T>>(node);
        node->backward_fn = [nw, factor, n]() {
            auto nd = nw.lock();
            const Var<T>& a = nd->inputs[0];
            a->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) a->grad.data()[i] += nd->grad.data()[i] * factor;
        };
    }
    return node;
}

template <typename T>
Var<T> reshape(const Var<T>& a, std::vector<int> shape) {
    TensorT<T> out(shape);
    if (out.size() != a->value.size()) {
        throw DataError("reshape: size mismatch, " + a->value.shape_string() + " has " +
                        std::to_string(a->value.size()) + " elements");
    }
    std::copy_n(a->value.data(), out.size(), out.data());
    auto node = make_node("reshape", std::move(out), {a});
    if (node->requires_grad) {
        auto nw = std::weak_ptr<NodeT<T>>(node);
        node->backward_fn = [nw]() {
            auto nd = nw.lock();
            const Var<T>& a = nd->inputs[0];
            a->ensure_grad();
            const std::size_t n = nd->grad.size();
            for (std::size_t i = 0; i < n; ++i) a->grad.data()[i] += nd->grad.data()[i];
        };
    }
    return node;
}

template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& xs) {
    if (xs.empty()) throw DataError("concat_channels: no inputs");
    for (const auto& x : xs) check_rank(x, 3, "concat_channels", "input");
    const int H = xs[0]->value.shape()[1], W = xs[0]->value.shape()[2];
    int C = 0;
    for (const auto& x : xs) {
        if (x->value.shape()[1] != H || x->value.shape()[2] != W) {
            throw DataError("concat_channels: spatial mismatch " +
                            xs[0]->value.shape_string() + " vs " + x->value.shape_string());
        }
        C += x->value.shape()[0];
    }
    TensorT<T> out({C, H, W});
    std::size_t off = 0;
    for (const auto& x : xs) {
        std::copy_n(x->value.data(), x->value.size(), out.data() + off);
        off += x->value.size();
    }
    auto node = make_node("concat_channels", std::move(out), xs);
    if (node->requires_grad) {
        auto nw = std::weak_ptr<NodeT<T>>(node);
        node->backward_fn = [nw]() {
            auto nd = nw.lock();
            std::size_t off = 0;
            for (const auto& in : nd->inputs) {
                const std::size_t n = in->value.size();
                if (in->requires_grad) {
                    in->ensure_grad();
                    for (std::size_t i = 0; i < n; ++i) {
                        in->grad.data()[i] += nd->grad.data()[off + i];
                    }
                }
                off += n;
            }
        };
    }
    return node;
}

namespace {

template <typename T>
Var<T> block_pool(const Var<T>& x, int block, bool mean) {
    check_rank(x, 3, mean ? "mean_pool2d" : "sum_pool2d", "input");
    if (block < 1) throw DataError("pool: block must be positive");
    const int C = x->value.shape()[0], H = x->value.shape()[1], W = x->value.shape()[2];
    if (H % block != 0 || W % block != 0) {
        throw DataError("pool: block " + std::to_string(block) + " does not divide " +
                        x->value.shape_string());
    }
    const int Ho = H / block, Wo = W / block;
    const T norm = mean ? T{1} / static_cast<T>(block * block) : T{1};
    TensorT<T> out({C, Ho, Wo});
    for (int c = 0; c < C; ++c) {
        for (int oy = 0; oy < Ho; ++oy) {
            for (int ox = 0; ox < Wo; ++ox) {
                double acc = 0.0;
                for (int dy = 0; dy < block; ++dy) {
                    const T* row = x->value.data() +
                        (static_cast<std::size_t>(c) * H + oy * block + dy) * W + ox * block;
                    for (int dx = 0; dx < block; ++dx) acc += static_cast<double>(row[dx]);
                }
                out.at(c, oy, ox) = static_cast<T>(acc) * norm;
            }
        }
    }
    auto node = make_node(mean ? "mean_pool2d" : "sum_pool2d", std::move(out), {x});
    if (node->requires_grad) {
        auto nw = std::weak_ptr<NodeT<T>>(node);
        node->backward_fn = [nw, block, norm, C, H, W, Ho, Wo]() {
            auto nd = nw.lock();
            const Var<T>& x = nd->inputs[0];
            x->ensure_grad();
            for (int c = 0; c < C; ++c) {
                for (int oy = 0; oy < Ho; ++oy) {
                    for (int ox = 0; ox < Wo; ++ox) {
                        const T g = nd->grad.at(c, oy, ox) * norm;
                        for (int dy = 0; dy < block; ++dy) {
                            T* row = x->grad.data() +
                                (static_cast<std::size_t>(c) * H + oy * block + dy) * W +
                                ox * block;
                            for (int dx = 0; dx < block; ++dx) row[dx] += g;
                        }
                    }
                }
            }
        };
    }
    return node;
}

}  // namespace

template <typename T>
Var<T> sum_pool2d(const Var<T>& x, int block) {
    return block_pool(x, block, false);
}

template <typename T>
Var<T> mean_pool2d(const Var<T>& x, int block) {
    return block_pool(x, block, true);
}

template <typename T>
void backward(const Var<T>& root) {
    if (root->value.size() != 1) {
        throw DataError("backward: root must be scalar, got shape " +
                        root->value.shape_string());
    }
    // Topological order by depth-first post-order over the input DAG.
    std::vector<NodeT<T>*> order;
    std::vector<std::pair<NodeT<T>*, std::size_t>> stack;
    std::vector<const NodeT<T>*> seen;
    auto visited = [&seen](const NodeT<T>* n) {
        return std::find(seen.begin(), seen.end(), n) != seen.end();
    };
    stack.push_back({root.get(), 0});
    seen.push_back(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            NodeT<T>* child = node->inputs[next++].get();
            if (child->requires_grad && !visited(child)) {
                seen.push_back(child);
                stack.push_back({child, 0});
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    // Fresh gradient buffers for interior nodes; roots of accumulation
    // (parameters) keep whatever is already there.
    for (NodeT<T>* n : order) {
        if (!n->inputs.empty()) {
            n->ensure_grad();
            n->zero_grad();
        } else {
            n->ensure_grad();
        }
    }
    root->grad.data()[0] += T{1};
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backward_fn) (*it)->backward_fn();
    }
}

template <typename T>
void zero_grads(const std::vector<Var<T>>& params) {
    for (const auto& p : params) {
        p->ensure_grad();
        p->zero_grad();
    }
}

#define MUD_INSTANTIATE_AUTODIFF(T)                                              \
    template Var<T> constant<T>(TensorT<T>);                                     \
    template Var<T> parameter<T>(TensorT<T>);                                    \
    template Var<T> conv2d<T>(const Var<T>&, const Var<T>&, const Var<T>&, int); \
    template Var<T> transposed_conv2d<T>(const Var<T>&, const Var<T>&, int);     \
    template Var<T> leaky_relu<T>(const Var<T>&, T);                             \
    template Var<T> global_avg_pool<T>(const Var<T>&);                           \
    template Var<T> affine<T>(const Var<T>&, const Var<T>&, const Var<T>&);      \
    template Var<T> mse<T>(const Var<T>&, const Var<T>&);                        \
    template Var<T> add<T>(const Var<T>&, const Var<T>&);                        \
    template Var<T> scale<T>(const Var<T>&, T);                                  \
    template Var<T> reshape<T>(const Var<T>&, std::vector<int>);                 \
    template Var<T> concat_channels<T>(const std::vector<Var<T>>&);              \
    template Var<T> sum_pool2d<T>(const Var<T>&, int);                           \
    template Var<T> mean_pool2d<T>(const Var<T>&, int);                          \
    template void backward<T>(const Var<T>&);                                    \
    template void zero_grads<T>(const std::vector<Var<T>>&);

MUD_INSTANTIATE_AUTODIFF(float)
MUD_INSTANTIATE_AUTODIFF(double)

#undef MUD_INSTANTIATE_AUTODIFF

}  // namespace mud
