#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "fusecurr/degrade.hpp"
#include "fusecurr/nn.hpp"

namespace fusecurr::agent {

inline constexpr int kStateDim = 10;   // 5 normalized metrics + 5 gaps
inline constexpr int kActionDim = 7;   // 2 loss-weight logits + 5 knob logits
inline constexpr double kLogStdMin = -3.0;
inline constexpr double kLogStdMax = 1.0;

using State = std::array<double, kStateDim>;
using Vec7 = std::array<double, kActionDim>;

/// Squashed action: loss weights on the simplex, knobs in (0,1).
struct Action {
    double alpha_t = 0.5;
    double alpha_s = 0.5;
    degrade::DegradationParams d;
};

/// Gaussian policy head: MLP 10 -> 32 -> 32 -> 14 (ReLU), the 14 outputs
/// split into 7 means and 7 log-stds (log-std clamped to [-3, 1]).
struct PolicyParams {
    nn::Tensor w1, b1, w2, b2, w3, b3;

    /// He-normal hidden layers, zero final layer: the initial policy is the
    /// neutral one (mean 0, log-std 0 for every state).
    static PolicyParams init(std::uint64_t seed);

    std::vector<nn::Tensor*> params();
    std::vector<const nn::Tensor*> params() const;
    std::vector<std::pair<std::string, const nn::Tensor*>> named_params() const;

    void save(const std::string& path) const;
    static PolicyParams load(const std::string& path);
};

struct PolicyOut {
    Vec7 mean;
    Vec7 log_std;  // already clamped
};

PolicyOut policy_forward(const PolicyParams& p, const State& s);

/// Map a raw pre-squash sample to the action space: two-way softmax over
/// raw[0..1], sigmoid over raw[2..6] in knob order (blur, compress,
/// brightness, contrast, noise).
Action squash(const Vec7& raw);

/// Diagonal Gaussian log density of `raw` under (mean, log_std). Squash
/// corrections are deliberately not applied; densities live in raw space.
double log_prob(const Vec7& mean, const Vec7& log_std, const Vec7& raw);

struct Sampled {
    Vec7 raw;
    Action action;
    double log_prob;
};

/// raw = mean + exp(log_std) * eps with counter-based standard normal eps
/// drawn from `noise_seed`.
Sampled sample_action(const PolicyOut& out, std::uint64_t noise_seed);

/// Recompute the log density of a stored raw action under given parameters.
double log_prob_under(const PolicyParams& p, const State& s, const Vec7& raw);

/// d log pi(raw | s) / d params, in params() order. This is the exact
/// per-step gradient agent_update accumulates (scaled by returns there).
std::vector<nn::Tensor> log_prob_grad(const PolicyParams& p, const State& s,
                                      const Vec7& raw);

struct TrajectoryStep {
    State state;
    Vec7 raw;
    Action action;
    double log_prob;
    double reward;
};
using Trajectory = std::vector<TrajectoryStep>;

/// Windowed forward returns: R[k] = sum of rewards[k .. min(k+p, end)].
std::vector<double> returns_window(const std::vector<double>& rewards, int p);

/// One policy-gradient ascent step over the whole trajectory: accumulate
/// grad log pi(a_k | s_k) * Rhat_k and apply a single Adam update with `lr`.
/// Rhat is the windowed return, minus the trajectory mean when `baseline`
/// is set. Throws TrajectoryError on an empty trajectory.
void agent_update(PolicyParams& p, nn::AdamState& opt, const Trajectory& traj,
                  int window, double lr, bool baseline = true);

} // namespace fusecurr::agent
