#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "fusecurr/imgio.hpp"
#include "fusecurr/nn.hpp"

namespace fusecurr::fusion {

struct ConvLayer {
    nn::Tensor k;  // (Cout,Cin,3,3)
    nn::Tensor b;  // (Cout)
};

/// Two-branch fusion network: one 1->8->8 conv encoder per modality (ReLU),
/// channel concat, then a 16->8 (ReLU) and 8->1 (sigmoid) decoder. All convs
/// are 3x3 with replicate padding, so output size equals input size.
class StudentNet {
public:
    static StudentNet init(std::uint64_t seed);

    /// Inference on an image pair; sigmoid keeps the result in (0,1).
    img::Image fuse(const img::Image& ir, const img::Image& vi) const;

    /// Forward with cached activations for a later backward pass.
    struct Cache {
        nn::Tensor ir_in, vi_in;
        nn::Tensor vi_pre1, vi_act1, vi_pre2, vi_act2;
        nn::Tensor ir_pre1, ir_act1, ir_pre2, ir_act2;
        nn::Tensor cat, dec_pre1, dec_act1, dec_pre2, out;
    };
    nn::Tensor forward(const nn::Tensor& ir, const nn::Tensor& vi, Cache& cache) const;

    /// Accumulate parameter gradients for one sample into `grads`
    /// (same order as params()). Gradient w.r.t. inputs is not needed.
    void backward(const Cache& cache, const nn::Tensor& grad_out,
                  std::vector<nn::Tensor>& grads) const;

    std::vector<nn::Tensor*> params();
    std::vector<const nn::Tensor*> params() const;
    std::vector<std::pair<std::string, const nn::Tensor*>> named_params() const;
    std::vector<nn::Tensor> zero_grads() const;
    int param_count() const;

    void save(const std::string& path) const;
    static StudentNet load(const std::string& path);

    ConvLayer enc_vi1, enc_vi2;  // visible branch
    ConvLayer enc_ir1, enc_ir2;  // infrared branch
    ConvLayer dec1, dec2;        // shared decoder
};

/// Saliency-weighted fusion rule with an unsharp finish: per-pixel weights
/// from 5x5 box-smoothed Sobel magnitudes, then fused + 0.5*(fused - blur5).
img::Image rule_teacher_fuse(const img::Image& ir, const img::Image& vi);

/// Teacher abstraction: either the built-in rule or a directory of
/// precomputed fusions (<stem>.pgm per sample stem).
class Teacher {
public:
    static Teacher rule();
    static Teacher directory(const std::string& dir);

    bool is_rule() const { return dir_.empty(); }
    /// `stem` is only consulted by directory teachers.
    img::Image fuse(const img::Image& ir, const img::Image& vi,
                    const std::string& stem = "") const;

private:
    std::string dir_;
};

/// Frozen random 5-stage feature extractor standing in for a pretrained
/// backbone: per stage a 3x3 conv (widths 8,16,32,32,32) + ReLU, with 2x2
/// average pooling between stages. Weights ~ N(0, 0.2^2) from a fixed seed;
/// biases zero.
class FeaturePyramid {
public:
    static constexpr std::uint64_t kDefaultSeed = 0x0f2a6d5c3b19e874ull;
    static constexpr int kStages = 5;

    explicit FeaturePyramid(std::uint64_t seed = kDefaultSeed);

    struct Acts {
        std::vector<nn::Tensor> input;  // per-stage input (post pooling)
        std::vector<nn::Tensor> pre;    // conv output before ReLU
        std::vector<nn::Tensor> post;   // stage features
    };

    /// Image dims must be divisible by 16. Returns the 5 feature tensors.
    std::vector<nn::Tensor> features(const img::Image& im) const;
    void forward(const nn::Tensor& x, Acts& acts) const;

    /// Backprop an upstream gradient per stage down to the input plane.
    nn::Tensor backward_to_input(const Acts& acts,
                                 const std::vector<nn::Tensor>& grad_stages) const;

    const std::vector<ConvLayer>& stages() const { return stages_; }

private:
    std::vector<ConvLayer> stages_;
};

// ---- losses ---------------------------------------------------------------

struct ValueGrad {
    double value = 0;
    nn::Tensor grad;  // w.r.t. the student fused image, (1,H,W)
};

/// Sum over stages of the Euclidean norms || f_student - f_teacher ||_2,
/// with the gradient taken w.r.t. the student image only.
ValueGrad loss_teacher_guidance(const FeaturePyramid& pyr,
                                const img::Image& student_fused,
                                const img::Image& teacher_fused);

struct PairValueGrad {
    double value = 0;
    nn::Tensor grad_a;
    nn::Tensor grad_b;
};

/// Mean squared error between the fusion of clean inputs and the fusion of
/// degraded inputs, with gradients for both.
PairValueGrad loss_self_learning(const nn::Tensor& fused_original,
                                 const nn::Tensor& fused_degraded);

/// alpha_t * lt + alpha_s * ls; weights must sum to 1 within 1e-9
/// (WeightError otherwise).
double loss_total(double lt, double ls, double alpha_t, double alpha_s);

} // namespace fusecurr::fusion
