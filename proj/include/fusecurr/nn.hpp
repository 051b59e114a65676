#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "fusecurr/errors.hpp"

// Minimal dense float64 autodiff building blocks. There is no tape: every
// layer has an explicit forward and an explicit backward, and callers wire
// the chain by hand. That keeps gradients auditable against finite
// differences, which the test suite does for every layer.

namespace fusecurr::nn {

struct Tensor {
    std::vector<int> shape;  // rank 1..4
    std::vector<double> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> s);

    static Tensor vec(int n) { return Tensor({n}); }
    static Tensor chw(int c, int h, int w) { return Tensor({c, h, w}); }

    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[i]; }
    int size() const { return static_cast<int>(v.size()); }

    double operator[](int i) const { return v[i]; }
    double& operator[](int i) { return v[i]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    void zero();
};

// ---- convolution ----------------------------------------------------------

/// 3x3 cross-correlation with replicate padding 1, stride 1.
/// input (Cin,H,W), kernels (Cout,Cin,3,3), bias (Cout) -> (Cout,H,W).
Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias);

struct ConvGrads {
    Tensor input;    // (Cin,H,W)
    Tensor kernels;  // (Cout,Cin,3,3)
    Tensor bias;     // (Cout)
};

/// Gradients of the same cross-correlation. Padded positions route their
/// gradient back into the edge pixels they replicated.
ConvGrads conv2d_backward(const Tensor& input, const Tensor& kernels,
                          const Tensor& grad_out);

// ---- elementwise and shape ops --------------------------------------------

Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& grad_out);

Tensor sigmoid(const Tensor& x);
/// Takes the forward *output* y, since dsigma = y(1-y).
Tensor sigmoid_backward(const Tensor& y, const Tensor& grad_out);

/// 2x2 average pooling, stride 2; spatial dims must be even.
Tensor avgpool2_forward(const Tensor& x);
Tensor avgpool2_backward(const std::vector<int>& input_shape, const Tensor& grad_out);

/// Channel concatenation of two (C,H,W) tensors with equal spatial dims.
Tensor concat_channels(const Tensor& a, const Tensor& b);
std::pair<Tensor, Tensor> split_channels_grad(const Tensor& grad_out, int c_a, int c_b);

/// Dense layer: weight (out,in) as rank-2, bias (out), x (in) -> y (out).
Tensor linear_forward(const Tensor& weight, const Tensor& bias, const Tensor& x);

struct LinearGrads {
    Tensor weight;
    Tensor bias;
    Tensor input;
};
LinearGrads linear_backward(const Tensor& weight, const Tensor& x, const Tensor& grad_out);

/// Mean squared error and its gradient with respect to `a`
/// (the gradient with respect to `b` is the negation).
double mse(const Tensor& a, const Tensor& b);
Tensor mse_backward_a(const Tensor& a, const Tensor& b);

// ---- optimizer ------------------------------------------------------------

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

/// Per-tensor first/second moment accumulators plus the shared step count.
struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    long long step = 0;

    static AdamState like(const std::vector<const Tensor*>& params);
};

/// One bias-corrected Adam update applied in place. Shapes of params, grads
/// and state must agree (ShapeError otherwise).
void adam_step(const std::vector<Tensor*>& params,
               const std::vector<const Tensor*>& grads,
               AdamState& state, double lr);

// ---- gradient checking ----------------------------------------------------

struct GradCheckReport {
    double max_rel_error = 0;
    int worst_index = -1;
};

/// fn maps a flat parameter vector to (value, analytic gradient). Central
/// differences with step h are compared against the analytic gradient and
/// the worst relative error is reported.
GradCheckReport grad_check(
    const std::function<std::pair<double, std::vector<double>>(const std::vector<double>&)>& fn,
    const std::vector<double>& params, double h = 1e-4);

// ---- checkpoints ----------------------------------------------------------

/// Container: magic "FCKPT1", then per-tensor records until EOF
/// (u32 name length, name, u32 rank, u32 dims, float64 values, all
/// little-endian). Reload is bit-exact.
void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const Tensor*>>& tensors);
std::vector<std::pair<std::string, Tensor>> load_checkpoint(const std::string& path);

} // namespace fusecurr::nn
