#include "spv/grad/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

namespace spv::grad {

namespace {

template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_same(const char* op, const Var& a, const Var& b) {
    if (a.shape() != b.shape()) throw ShapeError(op, "operands " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

void require_rank(const char* op, const Var& a, std::size_t rank) {
    if (a.value().rank() != rank) {
        throw ShapeError(op, "expected rank " + std::to_string(rank) + ", got " + shape_str(a.shape()));
    }
}

bool wants(const Node& n, std::size_t i) { return n.parents.size() > i && n.parents[i]->requires_grad; }

Tensor& pgrad(Node& n, std::size_t i) { return n.parents[i]->grad_buffer(); }

template <typename Fwd, typename Dfdx>
Var unary(const Var& a, const char* op, Fwd f, Dfdx dfdx) {
    Tensor out(a.shape());
    const auto& x = a.value();
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = f(x[i]);
    return make_result(std::move(out), {a}, op, [dfdx](Node& self) {
        Tensor& gx = pgrad(self, 0);
        const Tensor& x = self.parents[0]->value;
        for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += self.grad[i] * dfdx(x[i], self.value[i]);
    });
}

// C[M,N] (+)= op(A) * op(B), all row-major double storage.
template <typename T>
void gemm_impl(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, MatR<T>& c) {
    Eigen::Map<const MatR<T>> A(a, ta ? k : m, ta ? m : k);
    Eigen::Map<const MatR<T>> B(b, tb ? n : k, tb ? k : n);
    if (!ta && !tb) c.noalias() = A * B;
    else if (ta && !tb) c.noalias() = A.transpose() * B;
    else if (!ta && tb) c.noalias() = A * B.transpose();
    else c.noalias() = A.transpose() * B.transpose();
    (void)m;
    (void)n;
}

// --- convolution kernels, templated on the GEMM scalar ---

struct ConvGeom {
    std::size_t n, c, h, w, o, k, stride, pad, ho, wo;
    std::size_t rows() const { return c * k * k; }
    std::size_t cols() const { return n * ho * wo; }
};

template <typename T>
void im2col(const ConvGeom& g, const double* x, T* cols) {
    const std::size_t plane = g.ho * g.wo;
    const std::size_t total = g.cols();
    for (std::size_t ch = 0; ch < g.c; ++ch) {
        for (std::size_t ki = 0; ki < g.k; ++ki) {
            for (std::size_t kj = 0; kj < g.k; ++kj) {
                T* row = cols + ((ch * g.k + ki) * g.k + kj) * total;
                for (std::size_t s = 0; s < g.n; ++s) {
                    const double* src = x + (s * g.c + ch) * g.h * g.w;
                    T* dst = row + s * plane;
                    for (std::size_t oh = 0; oh < g.ho; ++oh) {
                        const long ih = static_cast<long>(oh * g.stride + ki) - static_cast<long>(g.pad);
                        T* d = dst + oh * g.wo;
                        if (ih < 0 || ih >= static_cast<long>(g.h)) {
                            std::fill(d, d + g.wo, T(0));
                            continue;
                        }
                        const double* srow = src + ih * g.w;
                        for (std::size_t ow = 0; ow < g.wo; ++ow) {
                            const long iw = static_cast<long>(ow * g.stride + kj) - static_cast<long>(g.pad);
                            d[ow] = (iw < 0 || iw >= static_cast<long>(g.w)) ? T(0) : static_cast<T>(srow[iw]);
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const ConvGeom& g, const T* cols, double* dx) {
    const std::size_t plane = g.ho * g.wo;
    const std::size_t total = g.cols();
    for (std::size_t ch = 0; ch < g.c; ++ch) {
        for (std::size_t ki = 0; ki < g.k; ++ki) {
            for (std::size_t kj = 0; kj < g.k; ++kj) {
                const T* row = cols + ((ch * g.k + ki) * g.k + kj) * total;
                for (std::size_t s = 0; s < g.n; ++s) {
                    double* dst = dx + (s * g.c + ch) * g.h * g.w;
                    const T* src = row + s * plane;
                    for (std::size_t oh = 0; oh < g.ho; ++oh) {
                        const long ih = static_cast<long>(oh * g.stride + ki) - static_cast<long>(g.pad);
                        if (ih < 0 || ih >= static_cast<long>(g.h)) continue;
                        double* drow = dst + ih * g.w;
                        const T* srow = src + oh * g.wo;
                        for (std::size_t ow = 0; ow < g.wo; ++ow) {
                            const long iw = static_cast<long>(ow * g.stride + kj) - static_cast<long>(g.pad);
                            if (iw >= 0 && iw < static_cast<long>(g.w)) drow[iw] += static_cast<double>(srow[ow]);
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
std::vector<T> to_scalar(std::span<const double> v) {
    return std::vector<T>(v.begin(), v.end());
}

template <typename T>
void conv_forward(const ConvGeom& g, const Tensor& x, const Tensor& w, const Tensor* b, Tensor& y) {
    std::vector<T> cols(g.rows() * g.cols());
    im2col<T>(g, x.ptr(), cols.data());
    const auto wt = to_scalar<T>(w.data());
    MatR<T> out(g.o, g.cols());
    gemm_impl<T>(false, false, g.o, g.cols(), g.rows(), wt.data(), cols.data(), out);
    const std::size_t plane = g.ho * g.wo;
    for (std::size_t s = 0; s < g.n; ++s)
        for (std::size_t oc = 0; oc < g.o; ++oc) {
            double* dst = y.ptr() + (s * g.o + oc) * plane;
            const T* src = out.data() + oc * g.cols() + s * plane;
            const double bias = b ? (*b)[oc] : 0.0;
            for (std::size_t p = 0; p < plane; ++p) dst[p] = static_cast<double>(src[p]) + bias;
        }
}

template <typename T>
void conv_backward(const ConvGeom& g, Node& self) {
    const Tensor& x = self.parents[0]->value;
    const Tensor& w = self.parents[1]->value;
    const std::size_t plane = g.ho * g.wo;
    // dY laid out as [O, N*P] to match the forward GEMM.
    std::vector<T> dy(g.o * g.cols());
    for (std::size_t s = 0; s < g.n; ++s)
        for (std::size_t oc = 0; oc < g.o; ++oc) {
            const double* src = self.grad.ptr() + (s * g.o + oc) * plane;
            T* dst = dy.data() + oc * g.cols() + s * plane;
            for (std::size_t p = 0; p < plane; ++p) dst[p] = static_cast<T>(src[p]);
        }
    if (self.parents.size() > 2 && wants(self, 2)) {
        Tensor& gb = pgrad(self, 2);
        for (std::size_t oc = 0; oc < g.o; ++oc) {
            double acc = 0.0;
            for (std::size_t s = 0; s < g.n; ++s) {
                const double* src = self.grad.ptr() + (s * g.o + oc) * plane;
                for (std::size_t p = 0; p < plane; ++p) acc += src[p];
            }
            gb[oc] += acc;
        }
    }
    if (wants(self, 1)) {
        std::vector<T> cols(g.rows() * g.cols());
        im2col<T>(g, x.ptr(), cols.data());
        MatR<T> dw(g.o, g.rows());
        gemm_impl<T>(false, true, g.o, g.rows(), g.cols(), dy.data(), cols.data(), dw);
        Tensor& gw = pgrad(self, 1);
        for (std::size_t i = 0; i < gw.numel(); ++i) gw[i] += static_cast<double>(dw.data()[i]);
    }
    if (wants(self, 0)) {
        const auto wt = to_scalar<T>(w.data());
        MatR<T> dcols(g.rows(), g.cols());
        gemm_impl<T>(true, false, g.rows(), g.cols(), g.o, wt.data(), dy.data(), dcols);
        col2im_add<T>(g, dcols.data(), pgrad(self, 0).ptr());
    }
}

}  // namespace

Var add(const Var& a, const Var& b) {
    require_same("add", a, b);
    Tensor out(a.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] + b.value()[i];
    return make_result(std::move(out), {a, b}, "add", [](Node& self) {
        for (std::size_t p = 0; p < 2; ++p)
            if (wants(self, p)) {
                Tensor& g = pgrad(self, p);
                for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
            }
    });
}

Var sub(const Var& a, const Var& b) {
    require_same("sub", a, b);
    Tensor out(a.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] - b.value()[i];
    return make_result(std::move(out), {a, b}, "sub", [](Node& self) {
        for (std::size_t p = 0; p < 2; ++p)
            if (wants(self, p)) {
                const double sign = p == 0 ? 1.0 : -1.0;
                Tensor& g = pgrad(self, p);
                for (std::size_t i = 0; i < g.numel(); ++i) g[i] += sign * self.grad[i];
            }
    });
}

Var mul(const Var& a, const Var& b) {
    require_same("mul", a, b);
    Tensor out(a.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] * b.value()[i];
    return make_result(std::move(out), {a, b}, "mul", [](Node& self) {
        for (std::size_t p = 0; p < 2; ++p)
            if (wants(self, p)) {
                const Tensor& other = self.parents[1 - p]->value;
                Tensor& g = pgrad(self, p);
                for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * other[i];
            }
    });
}

Var scale(const Var& a, double s) {
    return unary(a, "scale", [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(const Var& a, double s) {
    return unary(a, "add_scalar", [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var square(const Var& a) {
    return unary(a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var exp(const Var& a) {
    return unary(a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(const Var& a) {
    return unary(a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var relu(const Var& a) {
    return unary(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(const Var& a) {
    return unary(
        a, "sigmoid",
        [](double x) {
            if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
            const double e = std::exp(x);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Var sum(const Var& a) {
    double acc = 0.0;
    for (double v : a.value().data()) acc += v;
    return make_result(Tensor::scalar(acc), {a}, "sum", [](Node& self) {
        Tensor& g = pgrad(self, 0);
        const double up = self.grad[0];
        for (std::size_t i = 0; i < g.numel(); ++i) g[i] += up;
    });
}

Var mean(const Var& a) {
    if (a.value().numel() == 0) throw ShapeError("mean", "empty operand");
    return scale(sum(a), 1.0 / static_cast<double>(a.value().numel()));
}

Var sum_per_sample(const Var& a) {
    if (a.value().rank() < 1) throw ShapeError("sum_per_sample", "needs a leading batch axis");
    const std::size_t n = a.shape()[0];
    const std::size_t inner = n ? a.value().numel() / n : 0;
    Tensor out({n});
    for (std::size_t s = 0; s < n; ++s) {
        double acc = 0.0;
        for (std::size_t i = 0; i < inner; ++i) acc += a.value()[s * inner + i];
        out[s] = acc;
    }
    return make_result(std::move(out), {a}, "sum_per_sample", [n, inner](Node& self) {
        Tensor& g = pgrad(self, 0);
        for (std::size_t s = 0; s < n; ++s)
            for (std::size_t i = 0; i < inner; ++i) g[s * inner + i] += self.grad[s];
    });
}

Var mean_per_sample(const Var& a) {
    const std::size_t n = a.shape().empty() ? 0 : a.shape()[0];
    if (n == 0 || a.value().numel() == 0) throw ShapeError("mean_per_sample", "empty operand");
    return scale(sum_per_sample(a), static_cast<double>(n) / static_cast<double>(a.value().numel()));
}

Var reshape(const Var& a, Shape shape) {
    Tensor out = a.value().reshaped(std::move(shape));
    return make_result(std::move(out), {a}, "reshape", [](Node& self) {
        Tensor& g = pgrad(self, 0);
        for (std::size_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
    });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
    require_rank("linear", x, 2);
    require_rank("linear", weight, 2);
    const std::size_t n = x.shape()[0], in = x.shape()[1], outd = weight.shape()[0];
    if (weight.shape()[1] != in) {
        throw ShapeError("linear", "input " + shape_str(x.shape()) + " vs weight " + shape_str(weight.shape()));
    }
    if (bias.defined() && bias.shape() != Shape{outd}) {
        throw ShapeError("linear", "bias " + shape_str(bias.shape()) + " vs " + std::to_string(outd) + " outputs");
    }
    Tensor out({n, outd});
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t o = 0; o < outd; ++o) {
            double acc = bias.defined() ? bias.value()[o] : 0.0;
            const double* xr = x.value().ptr() + s * in;
            const double* wr = weight.value().ptr() + o * in;
            for (std::size_t i = 0; i < in; ++i) acc += xr[i] * wr[i];
            out[s * outd + o] = acc;
        }
    std::vector<Var> parents{x, weight};
    if (bias.defined()) parents.push_back(bias);
    return make_result(std::move(out), std::move(parents), "linear", [n, in, outd](Node& self) {
        const Tensor& xv = self.parents[0]->value;
        const Tensor& wv = self.parents[1]->value;
        const Tensor& gy = self.grad;
        if (wants(self, 0)) {
            Tensor& gx = pgrad(self, 0);
            for (std::size_t s = 0; s < n; ++s)
                for (std::size_t o = 0; o < outd; ++o) {
                    const double up = gy[s * outd + o];
                    const double* wr = wv.ptr() + o * in;
                    double* gr = gx.ptr() + s * in;
                    for (std::size_t i = 0; i < in; ++i) gr[i] += up * wr[i];
                }
        }
        if (wants(self, 1)) {
            Tensor& gw = pgrad(self, 1);
            for (std::size_t s = 0; s < n; ++s)
                for (std::size_t o = 0; o < outd; ++o) {
                    const double up = gy[s * outd + o];
                    const double* xr = xv.ptr() + s * in;
                    double* gr = gw.ptr() + o * in;
                    for (std::size_t i = 0; i < in; ++i) gr[i] += up * xr[i];
                }
        }
        if (self.parents.size() > 2 && wants(self, 2)) {
            Tensor& gb = pgrad(self, 2);
            for (std::size_t s = 0; s < n; ++s)
                for (std::size_t o = 0; o < outd; ++o) gb[o] += gy[s * outd + o];
        }
    });
}

Var conv2d(const Var& x, const Var& weight, const Var& bias, std::size_t stride, std::size_t padding) {
    require_rank("conv2d", x, 4);
    require_rank("conv2d", weight, 4);
    if (stride < 1) throw ShapeError("conv2d", "stride must be >= 1");
    const auto& xs = x.shape();
    const auto& ws = weight.shape();
    if (ws[1] != xs[1] || ws[2] != ws[3]) {
        throw ShapeError("conv2d", "input " + shape_str(xs) + " incompatible with kernel " + shape_str(ws));
    }
    if (xs[2] + 2 * padding < ws[2] || xs[3] + 2 * padding < ws[3]) {
        throw ShapeError("conv2d", "kernel " + shape_str(ws) + " larger than padded input " + shape_str(xs));
    }
    if (bias.defined() && bias.shape() != Shape{ws[0]}) {
        throw ShapeError("conv2d", "bias " + shape_str(bias.shape()) + " vs " + std::to_string(ws[0]) + " channels");
    }
    ConvGeom g{xs[0], xs[1], xs[2], xs[3], ws[0], ws[2], stride, padding, 0, 0};
    g.ho = (g.h + 2 * padding - g.k) / stride + 1;
    g.wo = (g.w + 2 * padding - g.k) / stride + 1;

    Tensor y({g.n, g.o, g.ho, g.wo});
    const Tensor* b = bias.defined() ? &bias.value() : nullptr;
    if (compute_precision() == Precision::F32) conv_forward<float>(g, x.value(), weight.value(), b, y);
    else conv_forward<double>(g, x.value(), weight.value(), b, y);

    std::vector<Var> parents{x, weight};
    if (bias.defined()) parents.push_back(bias);
    const Precision prec = compute_precision();
    return make_result(std::move(y), std::move(parents), "conv2d", [g, prec](Node& self) {
        if (prec == Precision::F32) conv_backward<float>(g, self);
        else conv_backward<double>(g, self);
    });
}

Var upsample2x(const Var& x) {
    require_rank("upsample2x", x, 4);
    const auto& s = x.shape();
    const std::size_t n = s[0], c = s[1], h = s[2], w = s[3];
    Tensor out({n, c, 2 * h, 2 * w});
    for (std::size_t p = 0; p < n * c; ++p)
        for (std::size_t i = 0; i < 2 * h; ++i)
            for (std::size_t j = 0; j < 2 * w; ++j)
                out[(p * 2 * h + i) * 2 * w + j] = x.value()[(p * h + i / 2) * w + j / 2];
    return make_result(std::move(out), {x}, "upsample2x", [n, c, h, w](Node& self) {
        Tensor& g = pgrad(self, 0);
        for (std::size_t p = 0; p < n * c; ++p)
            for (std::size_t i = 0; i < 2 * h; ++i)
                for (std::size_t j = 0; j < 2 * w; ++j)
                    g[(p * h + i / 2) * w + j / 2] += self.grad[(p * 2 * h + i) * 2 * w + j];
    });
}

Var max_pool2x2(const Var& x) {
    require_rank("max_pool2x2", x, 4);
    const auto& s = x.shape();
    if (s[2] % 2 || s[3] % 2) throw ShapeError("max_pool2x2", "spatial extents must be even, got " + shape_str(s));
    const std::size_t planes = s[0] * s[1], h = s[2], w = s[3], ho = h / 2, wo = w / 2;
    Tensor out({s[0], s[1], ho, wo});
    auto argmax = std::make_shared<std::vector<std::size_t>>(out.numel());
    for (std::size_t p = 0; p < planes; ++p)
        for (std::size_t i = 0; i < ho; ++i)
            for (std::size_t j = 0; j < wo; ++j) {
                std::size_t best = (p * h + 2 * i) * w + 2 * j;
                for (std::size_t di = 0; di < 2; ++di)
                    for (std::size_t dj = 0; dj < 2; ++dj) {
                        const std::size_t idx = (p * h + 2 * i + di) * w + 2 * j + dj;
                        if (x.value()[idx] > x.value()[best]) best = idx;
                    }
                const std::size_t o = (p * ho + i) * wo + j;
                out[o] = x.value()[best];
                (*argmax)[o] = best;
            }
    return make_result(std::move(out), {x}, "max_pool2x2", [argmax](Node& self) {
        Tensor& g = pgrad(self, 0);
        for (std::size_t o = 0; o < argmax->size(); ++o) g[(*argmax)[o]] += self.grad[o];
    });
}

Var concat_channels(const Var& a, const Var& b) {
    require_rank("concat_channels", a, 4);
    require_rank("concat_channels", b, 4);
    const auto& sa = a.shape();
    const auto& sb = b.shape();
    if (sa[0] != sb[0] || sa[2] != sb[2] || sa[3] != sb[3]) {
        throw ShapeError("concat_channels", shape_str(sa) + " vs " + shape_str(sb));
    }
    const std::size_t n = sa[0], ca = sa[1], cb = sb[1], plane = sa[2] * sa[3];
    Tensor out({n, ca + cb, sa[2], sa[3]});
    for (std::size_t s = 0; s < n; ++s) {
        std::copy_n(a.value().ptr() + s * ca * plane, ca * plane, out.ptr() + s * (ca + cb) * plane);
        std::copy_n(b.value().ptr() + s * cb * plane, cb * plane, out.ptr() + (s * (ca + cb) + ca) * plane);
    }
    return make_result(std::move(out), {a, b}, "concat_channels", [n, ca, cb, plane](Node& self) {
        for (std::size_t s = 0; s < n; ++s) {
            if (wants(self, 0)) {
                double* g = pgrad(self, 0).ptr() + s * ca * plane;
                const double* up = self.grad.ptr() + s * (ca + cb) * plane;
                for (std::size_t i = 0; i < ca * plane; ++i) g[i] += up[i];
            }
            if (wants(self, 1)) {
                double* g = pgrad(self, 1).ptr() + s * cb * plane;
                const double* up = self.grad.ptr() + (s * (ca + cb) + ca) * plane;
                for (std::size_t i = 0; i < cb * plane; ++i) g[i] += up[i];
            }
        }
    });
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BatchNormState& state, bool training) {
    const auto& s = x.shape();
    if (s.size() != 2 && s.size() != 4) throw ShapeError("batch_norm", "expected [N,C] or [N,C,H,W], got " + shape_str(s));
    const std::size_t n = s[0], c = s[1], inner = s.size() == 4 ? s[2] * s[3] : 1;
    if (gamma.shape() != Shape{c} || beta.shape() != Shape{c}) {
        throw ShapeError("batch_norm", "affine parameters must be [" + std::to_string(c) + "], got " +
                                           shape_str(gamma.shape()) + " and " + shape_str(beta.shape()));
    }
    if (state.running_mean.numel() != c) {
        state.running_mean = Tensor({c}, 0.0);
        state.running_var = Tensor({c}, 1.0);
    }
    const std::size_t count = n * inner;
    if (count == 0) throw ShapeError("batch_norm", "empty batch");

    Tensor out(s);
    auto xhat = std::make_shared<Tensor>(s);
    auto invstd = std::make_shared<std::vector<double>>(c);
    const Tensor& xv = x.value();
    for (std::size_t ch = 0; ch < c; ++ch) {
        double mu, var;
        if (training) {
            double acc = 0.0;
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t i = 0; i < inner; ++i) acc += xv[(b * c + ch) * inner + i];
            mu = acc / static_cast<double>(count);
            double sq = 0.0;
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t i = 0; i < inner; ++i) {
                    const double d = xv[(b * c + ch) * inner + i] - mu;
                    sq += d * d;
                }
            var = sq / static_cast<double>(count);
            const double unbiased = count > 1 ? sq / static_cast<double>(count - 1) : var;
            state.running_mean[ch] = state.momentum * state.running_mean[ch] + (1.0 - state.momentum) * mu;
            state.running_var[ch] = state.momentum * state.running_var[ch] + (1.0 - state.momentum) * unbiased;
        } else {
            mu = state.running_mean[ch];
            var = state.running_var[ch];
        }
        const double is = 1.0 / std::sqrt(var + state.eps);
        (*invstd)[ch] = is;
        const double gm = gamma.value()[ch], bt = beta.value()[ch];
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t i = 0; i < inner; ++i) {
                const std::size_t idx = (b * c + ch) * inner + i;
                const double h = (xv[idx] - mu) * is;
                (*xhat)[idx] = h;
                out[idx] = gm * h + bt;
            }
    }
    return make_result(std::move(out), {x, gamma, beta}, "batch_norm",
                       [n, c, inner, count, training, xhat, invstd](Node& self) {
                           const Tensor& gy = self.grad;
                           const Tensor& gm = self.parents[1]->value;
                           for (std::size_t ch = 0; ch < c; ++ch) {
                               double sum_dy = 0.0, sum_dy_xhat = 0.0;
                               for (std::size_t b = 0; b < n; ++b)
                                   for (std::size_t i = 0; i < inner; ++i) {
                                       const std::size_t idx = (b * c + ch) * inner + i;
                                       sum_dy += gy[idx];
                                       sum_dy_xhat += gy[idx] * (*xhat)[idx];
                                   }
                               if (wants(self, 1)) pgrad(self, 1)[ch] += sum_dy_xhat;
                               if (wants(self, 2)) pgrad(self, 2)[ch] += sum_dy;
                               if (!wants(self, 0)) continue;
                               Tensor& gx = pgrad(self, 0);
                               const double k = gm[ch] * (*invstd)[ch];
                               const double m = static_cast<double>(count);
                               for (std::size_t b = 0; b < n; ++b)
                                   for (std::size_t i = 0; i < inner; ++i) {
                                       const std::size_t idx = (b * c + ch) * inner + i;
                                       if (training) {
                                           gx[idx] += k / m * (m * gy[idx] - sum_dy - (*xhat)[idx] * sum_dy_xhat);
                                       } else {
                                           gx[idx] += k * gy[idx];
                                       }
                                   }
                           }
                       });
}

Var binary_cross_entropy(const Var& pred, const Tensor& target, double eps) {
    if (pred.shape() != target.shape()) {
        throw ShapeError("binary_cross_entropy", "prediction " + shape_str(pred.shape()) + " vs target " + shape_str(target.shape()));
    }
    if (pred.value().rank() < 1 || pred.shape()[0] == 0) throw ShapeError("binary_cross_entropy", "needs a batch axis");
    const std::size_t n = pred.shape()[0];
    const std::size_t inner = pred.value().numel() / n;
    Tensor out({n});
    const Tensor& p = pred.value();
    for (std::size_t s = 0; s < n; ++s) {
        double acc = 0.0;
        for (std::size_t i = 0; i < inner; ++i) {
            const std::size_t idx = s * inner + i;
            const double pc = std::clamp(p[idx], eps, 1.0 - eps);
            const double t = target[idx];
            acc -= t * std::log(pc) + (1.0 - t) * std::log(1.0 - pc);
        }
        out[s] = acc / static_cast<double>(inner);
    }
    return make_result(std::move(out), {pred}, "binary_cross_entropy", [target, eps, n, inner](Node& self) {
        Tensor& g = pgrad(self, 0);
        const Tensor& p = self.parents[0]->value;
        for (std::size_t s = 0; s < n; ++s) {
            const double up = self.grad[s] / static_cast<double>(inner);
            for (std::size_t i = 0; i < inner; ++i) {
                const std::size_t idx = s * inner + i;
                const double pv = p[idx];
                if (pv < eps || pv > 1.0 - eps) continue;
                g[idx] += up * (pv - target[idx]) / (pv * (1.0 - pv));
            }
        }
    });
}

}  // namespace spv::grad
