// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "depthdiff/nn/tensor.hpp"

namespace depthdiff::nn {

/// One node in the reverse-mode tape. Leaves are parameters or inputs;
/// interior nodes carry a closure that scatters this node's gradient into
/// its parents. Gradients propagate only along paths that reach a leaf with
/// requires_grad (the `needs` flag), so frozen parameter trees cost nothing.
struct Var {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool needs = false;  // some leaf below requires grad
    std::string name;
    std::vector<std::shared_ptr<Var>> parents;
    std::function<void(Var&)> backward_fn;

    void ensure_grad() {
        if (grad.shape != value.shape) grad = Tensor(value.shape);
    }
};

using VarPtr = std::shared_ptr<Var>;

/// Leaf without gradient tracking (inputs, frozen constants).
VarPtr constant(Tensor t);

/// Leaf with gradient accumulation (parameters).
VarPtr leaf(Tensor t, std::string name);

/// Runs reverse-mode accumulation from a scalar node. Gradients add into
/// leaf .grad buffers; callers zero them between optimizer steps.
void backward(const VarPtr& loss, double seed = 1.0);

// ---- ops ----------------------------------------------------------------

// y = conv2d(x:(Ci,H,W), w:(Co,Ci,kh,kw), b:(Co) or nullptr)
VarPtr conv2d(const VarPtr& x, const VarPtr& w, const VarPtr& b, int stride, int pad);

// Transposed convolution; output spatial size = stride*(in-1)+k-2*pad+out_pad.
// w:(Ci,Co,kh,kw).
VarPtr conv_transpose2d(const VarPtr& x, const VarPtr& w, const VarPtr& b, int stride, int pad,
                        int out_pad);

VarPtr linear(const VarPtr& x, const VarPtr& w, const VarPtr& b);  // x:(N), w:(M,N), b:(M)
VarPtr matmul(const VarPtr& a, const VarPtr& b);                   // (R,K)x(K,C)
VarPtr transpose2(const VarPtr& a);                                // (R,C)->(C,R)
VarPtr softmax_rows(const VarPtr& a);                              // rows sum to 1

VarPtr silu(const VarPtr& x);
VarPtr sigmoid(const VarPtr& x);
VarPtr relu(const VarPtr& x);

VarPtr add(const VarPtr& a, const VarPtr& b);
VarPtr sub(const VarPtr& a, const VarPtr& b);
VarPtr mul(const VarPtr& a, const VarPtr& b);
VarPtr scale_const(const VarPtr& x, double c);
VarPtr scale_var(const VarPtr& x, const VarPtr& s);  // s: scalar (1)

VarPtr add_channel(const VarPtr& x, const VarPtr& v);  // x:(C,H,W) + v:(C) broadcast
VarPtr mul_channel(const VarPtr& x, const VarPtr& v);  // x:(C,H,W) * v:(C) broadcast

VarPtr concat_ch(const VarPtr& a, const VarPtr& b);    // channel concat
VarPtr avg_pool2d(const VarPtr& x, int k);             // non-overlapping k x k mean
VarPtr global_avg_pool(const VarPtr& x);               // (C,H,W)->(C)
VarPtr mean_channels(const VarPtr& x);                 // (C,H,W)->(1,H,W)
VarPtr chw_to_tokens(const VarPtr& x);                 // (C,H,W)->(H*W,C)
VarPtr tokens_to_chw(const VarPtr& x, int h, int w);   // (P,C)->(C,h,w)
VarPtr reshape(const VarPtr& x, std::vector<int> shape);

VarPtr sum_all(const VarPtr& x);                       // scalar
VarPtr mse(const VarPtr& a, const VarPtr& b);          // mean squared error, scalar

// sqrt(mean(d^2) + lambda * mean(d)^2) with d = pred - gt, over all entries.
VarPtr pixel_loss_op(const VarPtr& pred, const VarPtr& gt, double lambda);

}  // namespace depthdiff::nn
