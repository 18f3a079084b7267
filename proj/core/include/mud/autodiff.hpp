#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "mud/tensor.hpp"

namespace mud {

/// One node of a per-call operator graph. Holds the cached forward value
/// and, after backward() from a scalar root, the cached gradient.
template <typename T>
class NodeT {
public:
    TensorT<T> value;
    TensorT<T> grad;
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<NodeT>> inputs;
    std::function<void()> backward_fn;

    void ensure_grad() {
        if (grad.size() != value.size()) grad = TensorT<T>(value.shape());
    }
    void zero_grad() {
        if (grad.size() == value.size()) {
            std::fill(grad.values().begin(), grad.values().end(), T{0});
        }
    }
};

template <typename T>
using Var = std::shared_ptr<NodeT<T>>;

template <typename T>
Var<T> constant(TensorT<T> value);

/// Leaf with requires_grad set; gradients accumulate across backward calls
/// until zeroed (batch accumulation relies on this).
template <typename T>
Var<T> parameter(TensorT<T> value);

/// Valid (unpadded) cross-correlation plus per-channel bias.
/// x: (C,H,W), w: (O,C,kh,kw), b: (O); output (O,H',W') with
/// H' = (H-kh)/stride + 1.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride);

/// Non-overlapping transposed convolution: requires kernel == stride.
/// x: (C,H,W), w: (C,O,k,k); output (O,H*k,W*k). Each input position
/// contributes value*kernel to one k x k output block, summed over C.
template <typename T>
Var<T> transposed_conv2d(const Var<T>& x, const Var<T>& w, int stride);

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope = T(0.01));

/// (C,H,W) -> (C), spatial mean per channel.
template <typename T>
Var<T> global_avg_pool(const Var<T>& x);

/// x: (n), w: (m,n), b: (m) -> (m).
template <typename T>
Var<T> affine(const Var<T>& x, const Var<T>& w, const Var<T>& b);

/// Mean squared element difference; scalar output of shape (1).
template <typename T>
Var<T> mse(const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> scale(const Var<T>& a, T factor);

template <typename T>
Var<T> reshape(const Var<T>& a, std::vector<int> shape);

/// Concatenates (C_i,H,W) tensors along the channel axis.
template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& xs);

/// Non-overlapping block pooling on (C,H,W); block must divide H and W.
template <typename T>
Var<T> sum_pool2d(const Var<T>& x, int block);
template <typename T>
Var<T> mean_pool2d(const Var<T>& x, int block);

/// Reverse-mode sweep from a scalar root (shape (1)). Gradients of
/// parameters accumulate; intermediate node gradients start at zero for
/// each freshly built graph.
template <typename T>
void backward(const Var<T>& root);

template <typename T>
void zero_grads(const std::vector<Var<T>>& params);

}  // namespace mud
