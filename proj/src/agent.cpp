#include "fusecurr/agent.hpp"

#include <algorithm>
#include <cmath>

#include "fusecurr/rng.hpp"

namespace fusecurr::agent {

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * ln(2*pi)

struct ForwardCache {
    nn::Tensor x, z1, h1, z2, h2, out;
};

void policy_mlp(const PolicyParams& p, const State& s, ForwardCache& c) {
    c.x = nn::Tensor::vec(kStateDim);
    std::copy(s.begin(), s.end(), c.x.v.begin());
    c.z1 = nn::linear_forward(p.w1, p.b1, c.x);
    c.h1 = nn::relu(c.z1);
    c.z2 = nn::linear_forward(p.w2, p.b2, c.h1);
    c.h2 = nn::relu(c.z2);
    c.out = nn::linear_forward(p.w3, p.b3, c.h2);
}

/// Adds coeff * d log pi(raw | s) / d params into `grads` (params() order).
/// Components whose raw log-std output sits outside the clamp contribute no
/// log-std gradient: the clamp saturates there.
void accumulate_log_prob_grad(const PolicyParams& p, const State& s,
                              const Vec7& raw, double coeff,
                              std::vector<nn::Tensor>& grads) {
    ForwardCache c;
    policy_mlp(p, s, c);
    nn::Tensor gout = nn::Tensor::vec(2 * kActionDim);
    for (int i = 0; i < kActionDim; ++i) {
        const double ls_raw = c.out.v[kActionDim + i];
        const double ls = std::clamp(ls_raw, kLogStdMin, kLogStdMax);
        const double diff = raw[i] - c.out.v[i];
        const double inv_var = std::exp(-2.0 * ls);
        gout.v[i] = coeff * (diff * inv_var);
        const bool inside = ls_raw > kLogStdMin && ls_raw < kLogStdMax;
        gout.v[kActionDim + i] =
            inside ? coeff * (-1.0 + diff * diff * inv_var) : 0.0;
    }
    auto lg3 = nn::linear_backward(p.w3, c.h2, gout);
    auto add = [](nn::Tensor& dst, const nn::Tensor& src) {
        for (int i = 0; i < dst.size(); ++i) dst.v[i] += src.v[i];
    };
    add(grads[4], lg3.weight);
    add(grads[5], lg3.bias);
    nn::Tensor g = nn::relu_backward(c.z2, lg3.input);
    auto lg2 = nn::linear_backward(p.w2, c.h1, g);
    add(grads[2], lg2.weight);
    add(grads[3], lg2.bias);
    g = nn::relu_backward(c.z1, lg2.input);
    auto lg1 = nn::linear_backward(p.w1, c.x, g);
    add(grads[0], lg1.weight);
    add(grads[1], lg1.bias);
}

} // namespace

PolicyParams PolicyParams::init(std::uint64_t seed) {
    rng::Stream rs(rng::derive(seed, 0xa6e47ull));
    PolicyParams p;
    p.w1 = nn::Tensor({32, kStateDim});
    p.b1 = nn::Tensor::vec(32);
    p.w2 = nn::Tensor({32, 32});
    p.b2 = nn::Tensor::vec(32);
    p.w3 = nn::Tensor({2 * kActionDim, 32});
    p.b3 = nn::Tensor::vec(2 * kActionDim);
    const double s1 = std::sqrt(2.0 / kStateDim), s2 = std::sqrt(2.0 / 32);
    for (double& w : p.w1.v) w = s1 * rs.normal();
    for (double& w : p.w2.v) w = s2 * rs.normal();
    // Final layer starts at zero: the initial policy is mean 0, log-std 0.
    return p;
}

std::vector<nn::Tensor*> PolicyParams::params() {
    return {&w1, &b1, &w2, &b2, &w3, &b3};
}

std::vector<const nn::Tensor*> PolicyParams::params() const {
    auto mut = const_cast<PolicyParams*>(this)->params();
    return {mut.begin(), mut.end()};
}

std::vector<std::pair<std::string, const nn::Tensor*>> PolicyParams::named_params() const {
    static const char* names[] = {"agent.w1", "agent.b1", "agent.w2",
                                  "agent.b2", "agent.w3", "agent.b3"};
    auto ps = params();
    std::vector<std::pair<std::string, const nn::Tensor*>> out;
    for (size_t i = 0; i < ps.size(); ++i) out.emplace_back(names[i], ps[i]);
    return out;
}

void PolicyParams::save(const std::string& path) const {
    nn::save_checkpoint(path, named_params());
}

PolicyParams PolicyParams::load(const std::string& path) {
    PolicyParams p = PolicyParams::init(0);
    const auto stored = nn::load_checkpoint(path);
    auto expected = p.named_params();
    if (stored.size() != expected.size())
        throw ParseError("checkpoint tensor count mismatch in " + path);
    auto mut = p.params();
    for (size_t i = 0; i < stored.size(); ++i) {
        if (stored[i].first != expected[i].first)
            throw ParseError("unexpected tensor '" + stored[i].first + "' in " + path);
        if (stored[i].second.shape != mut[i]->shape)
            throw ShapeError("tensor shape mismatch for " + stored[i].first);
        mut[i]->v = stored[i].second.v;
    }
    return p;
}

PolicyOut policy_forward(const PolicyParams& p, const State& s) {
    for (double x : s)
        if (!std::isfinite(x)) throw StateError("non-finite state component");
    ForwardCache c;
    policy_mlp(p, s, c);
    PolicyOut out;
    for (int i = 0; i < kActionDim; ++i) {
        out.mean[i] = c.out.v[i];
        out.log_std[i] = std::clamp(c.out.v[kActionDim + i], kLogStdMin, kLogStdMax);
    }
    return out;
}

Action squash(const Vec7& raw) {
    Action a;
    const double m = std::max(raw[0], raw[1]);
    const double e0 = std::exp(raw[0] - m), e1 = std::exp(raw[1] - m);
    a.alpha_t = e0 / (e0 + e1);
    a.alpha_s = 1.0 - a.alpha_t;  // exact complement, keeps the pair on the simplex
    auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
    a.d.blur = sig(raw[2]);
    a.d.compress = sig(raw[3]);
    a.d.brightness = sig(raw[4]);
    a.d.contrast = sig(raw[5]);
    a.d.noise = sig(raw[6]);
    return a;
}

double log_prob(const Vec7& mean, const Vec7& log_std, const Vec7& raw) {
    double lp = 0;
    for (int i = 0; i < kActionDim; ++i) {
        const double z = (raw[i] - mean[i]) * std::exp(-log_std[i]);
        lp += -kHalfLog2Pi - log_std[i] - 0.5 * z * z;
    }
    return lp;
}

Sampled sample_action(const PolicyOut& out, std::uint64_t noise_seed) {
    Sampled s;
    for (int i = 0; i < kActionDim; ++i) {
        const double eps = rng::normal(noise_seed, static_cast<std::uint64_t>(i));
        s.raw[i] = out.mean[i] + std::exp(out.log_std[i]) * eps;
    }
    s.action = squash(s.raw);
    s.log_prob = log_prob(out.mean, out.log_std, s.raw);
    return s;
}

double log_prob_under(const PolicyParams& p, const State& s, const Vec7& raw) {
    const PolicyOut out = policy_forward(p, s);
    return log_prob(out.mean, out.log_std, raw);
}

std::vector<nn::Tensor> log_prob_grad(const PolicyParams& p, const State& s,
                                      const Vec7& raw) {
    std::vector<nn::Tensor> grads;
    for (const nn::Tensor* t : p.params()) grads.emplace_back(t->shape);
    accumulate_log_prob_grad(p, s, raw, 1.0, grads);
    return grads;
}

std::vector<double> returns_window(const std::vector<double>& rewards, int p) {
    const int n = static_cast<int>(rewards.size());
    std::vector<double> ret(n, 0.0);
    for (int k = 0; k < n; ++k) {
        double acc = 0;
        for (int i = 0; i <= p && k + i < n; ++i) acc += rewards[k + i];
        ret[k] = acc;
    }
    return ret;
}

void agent_update(PolicyParams& p, nn::AdamState& opt, const Trajectory& traj,
                  int window, double lr, bool baseline) {
    if (traj.empty()) throw TrajectoryError("agent update on empty trajectory");

    std::vector<double> rewards;
    rewards.reserve(traj.size());
    for (const auto& st : traj) {
        if (!std::isfinite(st.reward)) throw TrajectoryError("non-finite reward");
        rewards.push_back(st.reward);
    }
    std::vector<double> ret = returns_window(rewards, window);
    if (baseline) {
        double mean = 0;
        for (double r : ret) mean += r;
        mean /= static_cast<double>(ret.size());
        for (double& r : ret) r -= mean;
    }

    // Gradient of -sum_k Rhat_k * log pi(raw_k | s_k); Adam descends, which
    // is one ascent step on the windowed-return objective.
    std::vector<nn::Tensor> grads;
    for (const nn::Tensor* t : std::as_const(p).params()) grads.emplace_back(t->shape);

    for (size_t k = 0; k < traj.size(); ++k)
        accumulate_log_prob_grad(p, traj[k].state, traj[k].raw, -ret[k], grads);

    std::vector<const nn::Tensor*> gptrs;
    for (const auto& g : grads) gptrs.push_back(&g);
    nn::adam_step(p.params(), gptrs, opt, lr);
}

} // namespace fusecurr::agent
