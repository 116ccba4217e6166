// SPDX-License-Identifier: Apache-2.0
#include "depthdiff/nn/autodiff.hpp"

#include <cmath>
#include <unordered_set>

namespace depthdiff::nn {
namespace {

VarPtr make_node(Tensor value, std::vector<VarPtr> parents, std::function<void(Var&)> bwd) {
    auto node = std::make_shared<Var>();
    node->value = std::move(value);
    node->parents = std::move(parents);
    for (const auto& p : node->parents) node->needs = node->needs || p->needs;
    if (node->needs) node->backward_fn = std::move(bwd);
    return node;
}

void check_same(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                               b.shape_str());
}

void check_chw(const Tensor& t, const char* op) {
    if (t.ndim() != 3)
        throw invalid_argument(std::string(op) + ": expected (C,H,W), got " + t.shape_str());
}

}  // namespace

VarPtr constant(Tensor t) {
    auto node = std::make_shared<Var>();
    node->value = std::move(t);
    return node;
}

VarPtr leaf(Tensor t, std::string name) {
    auto node = std::make_shared<Var>();
    node->value = std::move(t);
    node->requires_grad = true;
    node->needs = true;
    node->name = std::move(name);
    return node;
}

void backward(const VarPtr& loss, double seed) {
    if (loss->value.numel() != 1)
        throw invalid_argument("backward: loss must be scalar");

    // Iterative postorder DFS over parents.
    std::vector<Var*> order;
    std::unordered_set<Var*> visited;
    std::vector<std::pair<Var*, size_t>> stack;
    stack.push_back({loss.get(), 0});
    visited.insert(loss.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Var* next = node->parents[idx++].get();
            if (next->needs && !visited.count(next)) {
                visited.insert(next);
                stack.push_back({next, 0});
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss->ensure_grad();
    loss->grad.data[0] += seed;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Var* node = *it;
        if (node->backward_fn && node->needs) node->backward_fn(*node);
    }
}

// ---- convolution ----------------------------------------------------------

VarPtr conv2d(const VarPtr& x, const VarPtr& w, const VarPtr& b, int stride, int pad) {
    check_chw(x->value, "conv2d");
    if (w->value.ndim() != 4) throw invalid_argument("conv2d: weight must be (Co,Ci,kh,kw)");
    const int ci = x->value.dim(0), h = x->value.dim(1), wd = x->value.dim(2);
    const int co = w->value.dim(0), kh = w->value.dim(2), kw = w->value.dim(3);
    if (w->value.dim(1) != ci) throw invalid_argument("conv2d: channel mismatch");
    if (b && b->value.shape != std::vector<int>{co})
        throw invalid_argument("conv2d: bias shape mismatch");
    const int ho = (h + 2 * pad - kh) / stride + 1;
    const int wo = (wd + 2 * pad - kw) / stride + 1;
    if (ho < 1 || wo < 1) throw invalid_argument("conv2d: output would be empty");

    Tensor out({co, ho, wo});
    const double* xd = x->value.data.data();
    const double* wdp = w->value.data.data();
    for (int oc = 0; oc < co; ++oc) {
        const double bias = b ? b->value.data[oc] : 0.0;
        for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox) {
                double acc = bias;
                for (int ic = 0; ic < ci; ++ic)
                    for (int ky = 0; ky < kh; ++ky) {
                        const int iy = oy * stride - pad + ky;
                        if (iy < 0 || iy >= h) continue;
                        const double* xrow = xd + (static_cast<size_t>(ic) * h + iy) * wd;
                        const double* wrow =
                            wdp + ((static_cast<size_t>(oc) * ci + ic) * kh + ky) * kw;
                        for (int kx = 0; kx < kw; ++kx) {
                            const int ix = ox * stride - pad + kx;
                            if (ix < 0 || ix >= wd) continue;
                            acc += xrow[ix] * wrow[kx];
                        }
                    }
                out.at3(oc, oy, ox) = acc;
            }
    }

    std::vector<VarPtr> parents = b ? std::vector<VarPtr>{x, w, b} : std::vector<VarPtr>{x, w};
    return make_node(std::move(out), std::move(parents),
                     [x, w, b, stride, pad, ci, h, wd, co, kh, kw, ho, wo](Var& self) {
        const Tensor& gy = self.grad;
        if (x->needs) {
            x->ensure_grad();
            for (int oc = 0; oc < co; ++oc)
                for (int oy = 0; oy < ho; ++oy)
                    for (int ox = 0; ox < wo; ++ox) {
                        const double g = gy.at3(oc, oy, ox);
                        if (g == 0.0) continue;
                        for (int ic = 0; ic < ci; ++ic)
                            for (int ky = 0; ky < kh; ++ky) {
                                const int iy = oy * stride - pad + ky;
                                if (iy < 0 || iy >= h) continue;
                                for (int kx = 0; kx < kw; ++kx) {
                                    const int ix = ox * stride - pad + kx;
                                    if (ix < 0 || ix >= wd) continue;
                                    x->grad.at3(ic, iy, ix) +=
                                        g * w->value.data[((static_cast<size_t>(oc) * ci + ic) *
                                                               kh + ky) * kw + kx];
                                }
                            }
                    }
        }
        if (w->needs) {
            w->ensure_grad();
            for (int oc = 0; oc < co; ++oc)
                for (int ic = 0; ic < ci; ++ic)
                    for (int ky = 0; ky < kh; ++ky)
                        for (int kx = 0; kx < kw; ++kx) {
                            double acc = 0.0;
                            for (int oy = 0; oy < ho; ++oy) {
                                const int iy = oy * stride - pad + ky;
                                if (iy < 0 || iy >= h) continue;
                                for (int ox = 0; ox < wo; ++ox) {
                                    const int ix = ox * stride - pad + kx;
                                    if (ix < 0 || ix >= wd) continue;
                                    acc += gy.at3(oc, oy, ox) * x->value.at3(ic, iy, ix);
                                }
                            }
                            w->grad.data[((static_cast<size_t>(oc) * ci + ic) * kh + ky) * kw +
                                         kx] += acc;
                        }
        }
        if (b && b->needs) {
            b->ensure_grad();
            for (int oc = 0; oc < co; ++oc) {
                double acc = 0.0;
                for (int oy = 0; oy < ho; ++oy)
                    for (int ox = 0; ox < wo; ++ox) acc += gy.at3(oc, oy, ox);
                b->grad.data[oc] += acc;
            }
        }
    });
}

VarPtr conv_transpose2d(const VarPtr& x, const VarPtr& w, const VarPtr& b, int stride, int pad,
                        int out_pad) {
    check_chw(x->value, "conv_transpose2d");
    if (w->value.ndim() != 4)
        throw invalid_argument("conv_transpose2d: weight must be (Ci,Co,kh,kw)");
    const int ci = x->value.dim(0), h = x->value.dim(1), wd = x->value.dim(2);
    const int co = w->value.dim(1), kh = w->value.dim(2), kw = w->value.dim(3);
    if (w->value.dim(0) != ci) throw invalid_argument("conv_transpose2d: channel mismatch");
    const int ho = stride * (h - 1) + kh - 2 * pad + out_pad;
    const int wo = stride * (wd - 1) + kw - 2 * pad + out_pad;
    if (ho < 1 || wo < 1) throw invalid_argument("conv_transpose2d: output would be empty");

    Tensor out({co, ho, wo});
    if (b) {
        if (b->value.shape != std::vector<int>{co})
            throw invalid_argument("conv_transpose2d: bias shape mismatch");
        for (int oc = 0; oc < co; ++oc)
            for (int oy = 0; oy < ho; ++oy)
                for (int ox = 0; ox < wo; ++ox) out.at3(oc, oy, ox) = b->value.data[oc];
    }
    for (int ic = 0; ic < ci; ++ic)
        for (int iy = 0; iy < h; ++iy)
            for (int ix = 0; ix < wd; ++ix) {
                const double xv = x->value.at3(ic, iy, ix);
                if (xv == 0.0) continue;
                for (int oc = 0; oc < co; ++oc)
                    for (int ky = 0; ky < kh; ++ky) {
                        const int oy = iy * stride - pad + ky;
                        if (oy < 0 || oy >= ho) continue;
                        for (int kx = 0; kx < kw; ++kx) {
                            const int ox = ix * stride - pad + kx;
                            if (ox < 0 || ox >= wo) continue;
                            out.at3(oc, oy, ox) +=
                                xv * w->value.data[((static_cast<size_t>(ic) * co + oc) * kh +
                                                    ky) * kw + kx];
                        }
                    }
            }

    std::vector<VarPtr> parents = b ? std::vector<VarPtr>{x, w, b} : std::vector<VarPtr>{x, w};
    return make_node(std::move(out), std::move(parents),
                     [x, w, b, stride, pad, ci, h, wd, co, kh, kw, ho, wo](Var& self) {
        const Tensor& gy = self.grad;
        if (x->needs) {
            x->ensure_grad();
            for (int ic = 0; ic < ci; ++ic)
                for (int iy = 0; iy < h; ++iy)
                    for (int ix = 0; ix < wd; ++ix) {
                        double acc = 0.0;
                        for (int oc = 0; oc < co; ++oc)
                            for (int ky = 0; ky < kh; ++ky) {
                                const int oy = iy * stride - pad + ky;
                                if (oy < 0 || oy >= ho) continue;
                                for (int kx = 0; kx < kw; ++kx) {
                                    const int ox = ix * stride - pad + kx;
                                    if (ox < 0 || ox >= wo) continue;
                                    acc += gy.at3(oc, oy, ox) *
                                           w->value.data[((static_cast<size_t>(ic) * co + oc) *
                                                              kh + ky) * kw + kx];
                                }
                            }
                        x->grad.at3(ic, iy, ix) += acc;
                    }
        }
        if (w->needs) {
            w->ensure_grad();
            for (int ic = 0; ic < ci; ++ic)
                for (int oc = 0; oc < co; ++oc)
                    for (int ky = 0; ky < kh; ++ky)
                        for (int kx = 0; kx < kw; ++kx) {
                            double acc = 0.0;
                            for (int iy = 0; iy < h; ++iy) {
                                const int oy = iy * stride - pad + ky;
                                if (oy < 0 || oy >= ho) continue;
                                for (int ix = 0; ix < wd; ++ix) {
                                    const int ox = ix * stride - pad + kx;
                                    if (ox < 0 || ox >= wo) continue;
                                    acc += x->value.at3(ic, iy, ix) * gy.at3(oc, oy, ox);
                                }
                            }
                            w->grad.data[((static_cast<size_t>(ic) * co + oc) * kh + ky) * kw +
                                         kx] += acc;
                        }
        }
        if (b && b->needs) {
            b->ensure_grad();
            for (int oc = 0; oc < co; ++oc) {
                double acc = 0.0;
                for (int oy = 0; oy < ho; ++oy)
                    for (int ox = 0; ox < wo; ++ox) acc += gy.at3(oc, oy, ox);
                b->grad.data[oc] += acc;
            }
        }
    });
}

// ---- dense / token ops ------------------------------------------------------

VarPtr linear(const VarPtr& x, const VarPtr& w, const VarPtr& b) {
    if (x->value.ndim() != 1 || w->value.ndim() != 2 || w->value.dim(1) != x->value.dim(0))
        throw invalid_argument("linear: shape mismatch");
    const int m = w->value.dim(0), n = w->value.dim(1);
    if (b && b->value.shape != std::vector<int>{m})
        throw invalid_argument("linear: bias shape mismatch");
    Tensor out({m});
    for (int i = 0; i < m; ++i) {
        double acc = b ? b->value.data[i] : 0.0;
        for (int j = 0; j < n; ++j) acc += w->value.at2(i, j) * x->value.data[j];
        out.data[i] = acc;
    }
    std::vector<VarPtr> parents = b ? std::vector<VarPtr>{x, w, b} : std::vector<VarPtr>{x, w};
    return make_node(std::move(out), std::move(parents), [x, w, b, m, n](Var& self) {
        if (x->needs) {
            x->ensure_grad();
            for (int j = 0; j < n; ++j) {
                double acc = 0.0;
                for (int i = 0; i < m; ++i) acc += w->value.at2(i, j) * self.grad.data[i];
                x->grad.data[j] += acc;
            }
        }
        if (w->needs) {
            w->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    w->grad.at2(i, j) += self.grad.data[i] * x->value.data[j];
        }
        if (b && b->needs) {
            b->ensure_grad();
            for (int i = 0; i < m; ++i) b->grad.data[i] += self.grad.data[i];
        }
    });
}

VarPtr matmul(const VarPtr& a, const VarPtr& b) {
    if (a->value.ndim() != 2 || b->value.ndim() != 2 || a->value.dim(1) != b->value.dim(0))
        throw invalid_argument("matmul: shape mismatch " + a->value.shape_str() + " x " +
                               b->value.shape_str());
    const int r = a->value.dim(0), k = a->value.dim(1), c = b->value.dim(1);
    Tensor out({r, c});
    for (int i = 0; i < r; ++i)
        for (int kk = 0; kk < k; ++kk) {
            const double av = a->value.at2(i, kk);
            if (av == 0.0) continue;
            for (int j = 0; j < c; ++j) out.at2(i, j) += av * b->value.at2(kk, j);
        }
    return make_node(std::move(out), {a, b}, [a, b, r, k, c](Var& self) {
        if (a->needs) {
            a->ensure_grad();
            for (int i = 0; i < r; ++i)
                for (int kk = 0; kk < k; ++kk) {
                    double acc = 0.0;
                    for (int j = 0; j < c; ++j) acc += self.grad.at2(i, j) * b->value.at2(kk, j);
                    a->grad.at2(i, kk) += acc;
                }
        }
        if (b->needs) {
            b->ensure_grad();
            for (int kk = 0; kk < k; ++kk)
                for (int j = 0; j < c; ++j) {
                    double acc = 0.0;
                    for (int i = 0; i < r; ++i) acc += a->value.at2(i, kk) * self.grad.at2(i, j);
                    b->grad.at2(kk, j) += acc;
                }
        }
    });
}

VarPtr transpose2(const VarPtr& a) {
    if (a->value.ndim() != 2) throw invalid_argument("transpose2: expected 2-D");
    const int r = a->value.dim(0), c = a->value.dim(1);
    Tensor out({c, r});
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out.at2(j, i) = a->value.at2(i, j);
    return make_node(std::move(out), {a}, [a, r, c](Var& self) {
        if (!a->needs) return;
        a->ensure_grad();
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) a->grad.at2(i, j) += self.grad.at2(j, i);
    });
}

VarPtr softmax_rows(const VarPtr& a) {
    if (a->value.ndim() != 2) throw invalid_argument("softmax_rows: expected 2-D");
    const int r = a->value.dim(0), c = a->value.dim(1);
    Tensor out({r, c});
    for (int i = 0; i < r; ++i) {
        double mx = a->value.at2(i, 0);
        for (int j = 1; j < c; ++j) mx = std::max(mx, a->value.at2(i, j));
        double denom = 0.0;
        for (int j = 0; j < c; ++j) {
            const double e = std::exp(a->value.at2(i, j) - mx);
            out.at2(i, j) = e;
            denom += e;
        }
        for (int j = 0; j < c; ++j) out.at2(i, j) /= denom;
    }
    return make_node(std::move(out), {a}, [a, r, c](Var& self) {
        if (!a->needs) return;
        a->ensure_grad();
        for (int i = 0; i < r; ++i) {
            double dot = 0.0;
            for (int j = 0; j < c; ++j) dot += self.grad.at2(i, j) * self.value.at2(i, j);
            for (int j = 0; j < c; ++j)
                a->grad.at2(i, j) += self.value.at2(i, j) * (self.grad.at2(i, j) - dot);
        }
    });
}

// ---- pointwise --------------------------------------------------------------

namespace {
VarPtr unary_op(const VarPtr& x, double (*f)(double), double (*df)(double)) {
    Tensor out(x->value.shape);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = f(x->value.data[i]);
    return make_node(std::move(out), {x}, [x, df](Var& self) {
        if (!x->needs) return;
        x->ensure_grad();
        for (size_t i = 0; i < x->grad.data.size(); ++i)
            x->grad.data[i] += self.grad.data[i] * df(x->value.data[i]);
    });
}
double sigmoid_f(double v) { return 1.0 / (1.0 + std::exp(-v)); }
double sigmoid_df(double v) {
    const double s = sigmoid_f(v);
    return s * (1.0 - s);
}
double silu_f(double v) { return v * sigmoid_f(v); }
double silu_df(double v) {
    const double s = sigmoid_f(v);
    return s * (1.0 + v * (1.0 - s));
}
double relu_f(double v) { return v > 0.0 ? v : 0.0; }
double relu_df(double v) { return v > 0.0 ? 1.0 : 0.0; }
}  // namespace

VarPtr silu(const VarPtr& x) { return unary_op(x, silu_f, silu_df); }
VarPtr sigmoid(const VarPtr& x) { return unary_op(x, sigmoid_f, sigmoid_df); }
VarPtr relu(const VarPtr& x) { return unary_op(x, relu_f, relu_df); }

VarPtr add(const VarPtr& a, const VarPtr& b) {
    check_same(a->value, b->value, "add");
    Tensor out(a->value.shape);
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = a->value.data[i] + b->value.data[i];
    return make_node(std::move(out), {a, b}, [a, b](Var& self) {
        if (a->needs) {
            a->ensure_grad();
            for (size_t i = 0; i < a->grad.data.size(); ++i)
                a->grad.data[i] += self.grad.data[i];
        }
        if (b->needs) {
            b->ensure_grad();
            for (size_t i = 0; i < b->grad.data.size(); ++i)
                b->grad.data[i] += self.grad.data[i];
        }
    });
}

VarPtr sub(const VarPtr& a, const VarPtr& b) {
    check_same(a->value, b->value, "sub");
    Tensor out(a->value.shape);
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = a->value.data[i] - b->value.data[i];
    return make_node(std::move(out), {a, b}, [a, b](Var& self) {
        if (a->needs) {
            a->ensure_grad();
            for (size_t i = 0; i < a->grad.data.size(); ++i)
                a->grad.data[i] += self.grad.data[i];
        }
        if (b->needs) {
            b->ensure_grad();
            for (size_t i = 0; i < b->grad.data.size(); ++i)
                b->grad.data[i] -= self.grad.data[i];
        }
    });
}

VarPtr mul(const VarPtr& a, const VarPtr& b) {
    check_same(a->value, b->value, "mul");
    Tensor out(a->value.shape);
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = a->value.data[i] * b->value.data[i];
    return make_node(std::move(out), {a, b}, [a, b](Var& self) {
        if (a->needs) {
            a->ensure_grad();
            for (size_t i = 0; i < a->grad.data.size(); ++i)
                a->grad.data[i] += self.grad.data[i] * b->value.data[i];
        }
        if (b->needs) {
            b->ensure_grad();
            for (size_t i = 0; i < b->grad.data.size(); ++i)
                b->grad.data[i] += self.grad.data[i] * a->value.data[i];
        }
    });
}

VarPtr scale_const(const VarPtr& x, double c) {
    Tensor out(x->value.shape);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = x->value.data[i] * c;
    return make_node(std::move(out), {x}, [x, c](Var& self) {
        if (!x->needs) return;
        x->ensure_grad();
        for (size_t i = 0; i < x->grad.data.size(); ++i)
            x->grad.data[i] += self.grad.data[i] * c;
    });
}

VarPtr scale_var(const VarPtr& x, const VarPtr& s) {
    if (s->value.numel() != 1) throw invalid_argument("scale_var: scale must be scalar");
    const double sv = s->value.data[0];
    Tensor out(x->value.shape);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = x->value.data[i] * sv;
    return make_node(std::move(out), {x, s}, [x, s, sv](Var& self) {
        if (x->needs) {
            x->ensure_grad();
            for (size_t i = 0; i < x->grad.data.size(); ++i)
                x->grad.data[i] += self.grad.data[i] * sv;
        }
        if (s->needs) {
            s->ensure_grad();
            double acc = 0.0;
            for (size_t i = 0; i < x->value.data.size(); ++i)
                acc += self.grad.data[i] * x->value.data[i];
            s->grad.data[0] += acc;
        }
    });
}

VarPtr add_channel(const VarPtr& x, const VarPtr& v) {
    check_chw(x->value, "add_channel");
    const int c = x->value.dim(0), hw = x->value.dim(1) * x->value.dim(2);
    if (v->value.shape != std::vector<int>{c})
        throw invalid_argument("add_channel: vector shape mismatch");
    Tensor out(x->value.shape);
    for (int ch = 0; ch < c; ++ch) {
        const double b = v->value.data[ch];
        for (int i = 0; i < hw; ++i)
            out.data[static_cast<size_t>(ch) * hw + i] =
                x->value.data[static_cast<size_t>(ch) * hw + i] + b;
    }
    return make_node(std::move(out), {x, v}, [x, v, c, hw](Var& self) {
        if (x->needs) {
            x->ensure_grad();
            for (size_t i = 0; i < x->grad.data.size(); ++i)
                x->grad.data[i] += self.grad.data[i];
        }
        if (v->needs) {
            v->ensure_grad();
            for (int ch = 0; ch < c; ++ch) {
                double acc = 0.0;
                for (int i = 0; i < hw; ++i)
                    acc += self.grad.data[static_cast<size_t>(ch) * hw + i];
                v->grad.data[ch] += acc;
            }
        }
    });
}

VarPtr mul_channel(const VarPtr& x, const VarPtr& v) {
    check_chw(x->value, "mul_channel");
    const int c = x->value.dim(0), hw = x->value.dim(1) * x->value.dim(2);
    if (v->value.shape != std::vector<int>{c})
        throw invalid_argument("mul_channel: vector shape mismatch");
    Tensor out(x->value.shape);
    for (int ch = 0; ch < c; ++ch) {
        const double m = v->value.data[ch];
        for (int i = 0; i < hw; ++i)
            out.data[static_cast<size_t>(ch) * hw + i] =
                x->value.data[static_cast<size_t>(ch) * hw + i] * m;
    }
    return make_node(std::move(out), {x, v}, [x, v, c, hw](Var& self) {
        if (x->needs) {
            x->ensure_grad();
            for (int ch = 0; ch < c; ++ch) {
                const double m = v->value.data[ch];
                for (int i = 0; i < hw; ++i)
                    x->grad.data[static_cast<size_t>(ch) * hw + i] +=
                        self.grad.data[static_cast<size_t>(ch) * hw + i] * m;
            }
        }
        if (v->needs) {
            v->ensure_grad();
            for (int ch = 0; ch < c; ++ch) {
                double acc = 0.0;
                for (int i = 0; i < hw; ++i)
                    acc += self.grad.data[static_cast<size_t>(ch) * hw + i] *
                           x->value.data[static_cast<size_t>(ch) * hw + i];
                v->grad.data[ch] += acc;
            }
        }
    });
}

VarPtr concat_ch(const VarPtr& a, const VarPtr& b) {
    check_chw(a->value, "concat_ch");
    check_chw(b->value, "concat_ch");
    if (a->value.dim(1) != b->value.dim(1) || a->value.dim(2) != b->value.dim(2))
        throw invalid_argument("concat_ch: spatial dims mismatch");
    const int ca = a->value.dim(0), cb = b->value.dim(0);
    Tensor out({ca + cb, a->value.dim(1), a->value.dim(2)});
    std::copy(a->value.data.begin(), a->value.data.end(), out.data.begin());
    std::copy(b->value.data.begin(), b->value.data.end(),
              out.data.begin() + a->value.numel());
    const size_t na = a->value.data.size();
    return make_node(std::move(out), {a, b}, [a, b, na](Var& self) {
        if (a->needs) {
            a->ensure_grad();
            for (size_t i = 0; i < na; ++i) a->grad.data[i] += self.grad.data[i];
        }
        if (b->needs) {
            b->ensure_grad();
            for (size_t i = 0; i < b->grad.data.size(); ++i)
                b->grad.data[i] += self.grad.data[na + i];
        }
    });
}

VarPtr avg_pool2d(const VarPtr& x, int k) {
    check_chw(x->value, "avg_pool2d");
    const int c = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
    if (h % k != 0 || w % k != 0)
        throw invalid_argument("avg_pool2d: dims not divisible by " + std::to_string(k));
    const int ho = h / k, wo = w / k;
    const double inv = 1.0 / (k * k);
    Tensor out({c, ho, wo});
    for (int ch = 0; ch < c; ++ch)
        for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox) {
                double acc = 0.0;
                for (int ky = 0; ky < k; ++ky)
                    for (int kx = 0; kx < k; ++kx)
                        acc += x->value.at3(ch, oy * k + ky, ox * k + kx);
                out.at3(ch, oy, ox) = acc * inv;
            }
    return make_node(std::move(out), {x}, [x, c, ho, wo, k, inv](Var& self) {
        if (!x->needs) return;
        x->ensure_grad();
        for (int ch = 0; ch < c; ++ch)
            for (int oy = 0; oy < ho; ++oy)
                for (int ox = 0; ox < wo; ++ox) {
                    const double g = self.grad.at3(ch, oy, ox) * inv;
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx)
                            x->grad.at3(ch, oy * k + ky, ox * k + kx) += g;
                }
    });
}

VarPtr global_avg_pool(const VarPtr& x) {
    check_chw(x->value, "global_avg_pool");
    const int c = x->value.dim(0), hw = x->value.dim(1) * x->value.dim(2);
    const double inv = 1.0 / hw;
    Tensor out({c});
    for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (int i = 0; i < hw; ++i) acc += x->value.data[static_cast<size_t>(ch) * hw + i];
        out.data[ch] = acc * inv;
    }
    return make_node(std::move(out), {x}, [x, c, hw, inv](Var& self) {
        if (!x->needs) return;
        x->ensure_grad();
        for (int ch = 0; ch < c; ++ch) {
            const double g = self.grad.data[ch] * inv;
            for (int i = 0; i < hw; ++i) x->grad.data[static_cast<size_t>(ch) * hw + i] += g;
        }
    });
}

VarPtr mean_channels(const VarPtr& x) {
    check_chw(x->value, "mean_channels");
    const int c = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
    const double inv = 1.0 / c;
    Tensor out({1, h, w});
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < h * w; ++i)
            out.data[i] += x->value.data[static_cast<size_t>(ch) * h * w + i];
    for (int i = 0; i < h * w; ++i) out.data[i] *= inv;
    return make_node(std::move(out), {x}, [x, c, h, w, inv](Var& self) {
        if (!x->needs) return;
        x->ensure_grad();
        for (int ch = 0; ch < c; ++ch)
            for (int i = 0; i < h * w; ++i)
                x->grad.data[static_cast<size_t>(ch) * h * w + i] += self.grad.data[i] * inv;
    });
}

VarPtr chw_to_tokens(const VarPtr& x) {
    check_chw(x->value, "chw_to_tokens");
    const int c = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
    const int p = h * w;
    Tensor out({p, c});
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < p; ++i)
            out.at2(i, ch) = x->value.data[static_cast<size_t>(ch) * p + i];
    return make_node(std::move(out), {x}, [x, c, p](Var& self) {
        if (!x->needs) return;
        x->ensure_grad();
        for (int ch = 0; ch < c; ++ch)
            for (int i = 0; i < p; ++i)
                x->grad.data[static_cast<size_t>(ch) * p + i] += self.grad.at2(i, ch);
    });
}

VarPtr tokens_to_chw(const VarPtr& x, int h, int w) {
    if (x->value.ndim() != 2 || x->value.dim(0) != h * w)
        throw invalid_argument("tokens_to_chw: shape mismatch");
    const int c = x->value.dim(1), p = h * w;
    Tensor out({c, h, w});
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < p; ++i)
            out.data[static_cast<size_t>(ch) * p + i] = x->value.at2(i, ch);
    return make_node(std::move(out), {x}, [x, c, p](Var& self) {
        if (!x->needs) return;
        x->ensure_grad();
        for (int ch = 0; ch < c; ++ch)
            for (int i = 0; i < p; ++i)
                x->grad.at2(i, ch) += self.grad.data[static_cast<size_t>(ch) * p + i];
    });
}

VarPtr reshape(const VarPtr& x, std::vector<int> shape) {
    if (Tensor::numel_of(shape) != x->value.numel())
        throw invalid_argument("reshape: element count mismatch");
    Tensor out(shape);
    out.data = x->value.data;
    return make_node(std::move(out), {x}, [x](Var& self) {
        if (!x->needs) return;
        x->ensure_grad();
        for (size_t i = 0; i < x->grad.data.size(); ++i)
            x->grad.data[i] += self.grad.data[i];
    });
}

VarPtr sum_all(const VarPtr& x) {
    double acc = 0.0;
    for (double v : x->value.data) acc += v;
    return make_node(Tensor::scalar(acc), {x}, [x](Var& self) {
        if (!x->needs) return;
        x->ensure_grad();
        const double g = self.grad.data[0];
        for (size_t i = 0; i < x->grad.data.size(); ++i) x->grad.data[i] += g;
    });
}

VarPtr mse(const VarPtr& a, const VarPtr& b) {
    check_same(a->value, b->value, "mse");
    const size_t n = a->value.data.size();
    if (n == 0) throw invalid_argument("mse: empty input");
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double d = a->value.data[i] - b->value.data[i];
        acc += d * d;
    }
    acc /= static_cast<double>(n);
    return make_node(Tensor::scalar(acc), {a, b}, [a, b, n](Var& self) {
        const double g = self.grad.data[0] * 2.0 / static_cast<double>(n);
        if (a->needs) {
            a->ensure_grad();
            for (size_t i = 0; i < n; ++i)
                a->grad.data[i] += g * (a->value.data[i] - b->value.data[i]);
        }
        if (b->needs) {
            b->ensure_grad();
            for (size_t i = 0; i < n; ++i)
                b->grad.data[i] -= g * (a->value.data[i] - b->value.data[i]);
        }
    });
}

VarPtr pixel_loss_op(const VarPtr& pred, const VarPtr& gt, double lambda) {
    check_same(pred->value, gt->value, "pixel_loss");
    const size_t n = pred->value.data.size();
    if (n == 0) throw invalid_argument("pixel_loss: empty input");
    const double t = static_cast<double>(n);
    double s1 = 0.0, s2 = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double d = pred->value.data[i] - gt->value.data[i];
        s1 += d;
        s2 += d * d;
    }
    const double loss = std::sqrt(s2 / t + lambda * s1 * s1 / (t * t));
    return make_node(Tensor::scalar(loss), {pred, gt},
                     [pred, gt, lambda, n, t, s1, loss](Var& self) {
        if (loss == 0.0) return;  // non-differentiable point, gradient left at zero
        const double g = self.grad.data[0] / loss;
        if (pred->needs) pred->ensure_grad();
        if (gt->needs) gt->ensure_grad();
        for (size_t i = 0; i < n; ++i) {
            const double d = pred->value.data[i] - gt->value.data[i];
            const double gd = g * (d / t + lambda * s1 / (t * t));
            if (pred->needs) pred->grad.data[i] += gd;
            if (gt->needs) gt->grad.data[i] -= gd;
        }
    });
}

}  // namespace depthdiff::nn
