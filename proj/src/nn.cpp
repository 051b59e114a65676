#include "fusecurr/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace fusecurr::nn {

namespace {

int shape_product(const std::vector<int>& s) {
    int n = 1;
    for (int d : s) {
        if (d <= 0) throw ShapeError("non-positive tensor dimension");
        n *= d;
    }
    return n;
}

void require(bool ok, const char* msg) {
    if (!ok) throw ShapeError(msg);
}

} // namespace

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
    if (shape.empty() || shape.size() > 4) throw ShapeError("tensor rank must be 1..4");
    v.assign(shape_product(shape), 0.0);
}

void Tensor::zero() { std::fill(v.begin(), v.end(), 0.0); }

// ---- convolution ----------------------------------------------------------

Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
    require(input.rank() == 3, "conv input must be (C,H,W)");
    require(kernels.rank() == 4 && kernels.dim(2) == 3 && kernels.dim(3) == 3,
            "kernels must be (Cout,Cin,3,3)");
    require(kernels.dim(1) == input.dim(0), "conv channel mismatch");
    require(bias.rank() == 1 && bias.dim(0) == kernels.dim(0), "bias size mismatch");

    const int cin = input.dim(0), h = input.dim(1), w = input.dim(2);
    const int cout = kernels.dim(0);
    Tensor out = Tensor::chw(cout, h, w);

    const auto in_at = [&](int c, int i, int j) {
        i = std::clamp(i, 0, h - 1);
        j = std::clamp(j, 0, w - 1);
        return input.v[(static_cast<size_t>(c) * h + i) * w + j];
    };
    for (int co = 0; co < cout; ++co) {
        const double* kbase = &kernels.v[static_cast<size_t>(co) * cin * 9];
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                double acc = bias.v[co];
                for (int ci = 0; ci < cin; ++ci) {
                    const double* kk = kbase + static_cast<size_t>(ci) * 9;
                    acc += kk[0] * in_at(ci, i - 1, j - 1) + kk[1] * in_at(ci, i - 1, j) +
                           kk[2] * in_at(ci, i - 1, j + 1) + kk[3] * in_at(ci, i, j - 1) +
                           kk[4] * in_at(ci, i, j) + kk[5] * in_at(ci, i, j + 1) +
                           kk[6] * in_at(ci, i + 1, j - 1) + kk[7] * in_at(ci, i + 1, j) +
                           kk[8] * in_at(ci, i + 1, j + 1);
                }
                out.v[(static_cast<size_t>(co) * h + i) * w + j] = acc;
            }
    }
    return out;
}

ConvGrads conv2d_backward(const Tensor& input, const Tensor& kernels,
                          const Tensor& grad_out) {
    require(input.rank() == 3 && kernels.rank() == 4 && grad_out.rank() == 3,
            "conv backward rank mismatch");
    const int cin = input.dim(0), h = input.dim(1), w = input.dim(2);
    const int cout = kernels.dim(0);
    require(grad_out.dim(0) == cout && grad_out.dim(1) == h && grad_out.dim(2) == w,
            "grad_out shape mismatch");

    ConvGrads g{Tensor::chw(cin, h, w), Tensor(kernels.shape), Tensor::vec(cout)};

    const auto clampi = [&](int i, int lim) { return std::clamp(i, 0, lim - 1); };
    for (int co = 0; co < cout; ++co) {
        double bacc = 0;
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                const double go = grad_out.v[(static_cast<size_t>(co) * h + i) * w + j];
                bacc += go;
                for (int ci = 0; ci < cin; ++ci)
                    for (int di = -1; di <= 1; ++di)
                        for (int dj = -1; dj <= 1; ++dj) {
                            // Replicated reads make the clamped source pixel
                            // the true dependency for both gradient targets.
                            const int si = clampi(i + di, h), sj = clampi(j + dj, w);
                            const size_t kidx =
                                ((static_cast<size_t>(co) * cin + ci) * 3 + (di + 1)) * 3 +
                                (dj + 1);
                            g.kernels.v[kidx] +=
                                go * input.v[(static_cast<size_t>(ci) * h + si) * w + sj];
                            g.input.v[(static_cast<size_t>(ci) * h + si) * w + sj] +=
                                go * kernels.v[kidx];
                        }
            }
        g.bias.v[co] = bacc;
    }
    return g;
}

// ---- elementwise and shape ops --------------------------------------------

Tensor relu(const Tensor& x) {
    Tensor y = x;
    for (double& e : y.v) e = e > 0 ? e : 0.0;
    return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& grad_out) {
    require(x.same_shape(grad_out), "relu backward shape mismatch");
    Tensor g = grad_out;
    for (int i = 0; i < x.size(); ++i)
        if (x.v[i] <= 0) g.v[i] = 0.0;
    return g;
}

Tensor sigmoid(const Tensor& x) {
    Tensor y = x;
    for (double& e : y.v) e = 1.0 / (1.0 + std::exp(-e));
    return y;
}

Tensor sigmoid_backward(const Tensor& y, const Tensor& grad_out) {
    require(y.same_shape(grad_out), "sigmoid backward shape mismatch");
    Tensor g = grad_out;
    for (int i = 0; i < y.size(); ++i) g.v[i] *= y.v[i] * (1.0 - y.v[i]);
    return g;
}

Tensor avgpool2_forward(const Tensor& x) {
    require(x.rank() == 3, "pool input must be (C,H,W)");
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    require(h % 2 == 0 && w % 2 == 0, "pool needs even spatial dims");
    Tensor y = Tensor::chw(c, h / 2, w / 2);
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < h / 2; ++i)
            for (int j = 0; j < w / 2; ++j) {
                const auto src = [&](int di, int dj) {
                    return x.v[(static_cast<size_t>(ch) * h + 2 * i + di) * w + 2 * j + dj];
                };
                y.v[(static_cast<size_t>(ch) * (h / 2) + i) * (w / 2) + j] =
                    0.25 * (src(0, 0) + src(0, 1) + src(1, 0) + src(1, 1));
            }
    return y;
}

Tensor avgpool2_backward(const std::vector<int>& input_shape, const Tensor& grad_out) {
    require(input_shape.size() == 3, "pool input shape must be (C,H,W)");
    const int c = input_shape[0], h = input_shape[1], w = input_shape[2];
    require(grad_out.rank() == 3 && grad_out.dim(0) == c && grad_out.dim(1) == h / 2 &&
                grad_out.dim(2) == w / 2,
            "pool grad shape mismatch");
    Tensor g(input_shape);
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < h / 2; ++i)
            for (int j = 0; j < w / 2; ++j) {
                const double go =
                    0.25 * grad_out.v[(static_cast<size_t>(ch) * (h / 2) + i) * (w / 2) + j];
                for (int di = 0; di < 2; ++di)
                    for (int dj = 0; dj < 2; ++dj)
                        g.v[(static_cast<size_t>(ch) * h + 2 * i + di) * w + 2 * j + dj] = go;
            }
    return g;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    require(a.rank() == 3 && b.rank() == 3, "concat inputs must be (C,H,W)");
    require(a.dim(1) == b.dim(1) && a.dim(2) == b.dim(2), "concat spatial mismatch");
    Tensor out = Tensor::chw(a.dim(0) + b.dim(0), a.dim(1), a.dim(2));
    std::copy(a.v.begin(), a.v.end(), out.v.begin());
    std::copy(b.v.begin(), b.v.end(), out.v.begin() + a.size());
    return out;
}

std::pair<Tensor, Tensor> split_channels_grad(const Tensor& grad_out, int c_a, int c_b) {
    require(grad_out.rank() == 3 && grad_out.dim(0) == c_a + c_b, "split channel mismatch");
    Tensor ga = Tensor::chw(c_a, grad_out.dim(1), grad_out.dim(2));
    Tensor gb = Tensor::chw(c_b, grad_out.dim(1), grad_out.dim(2));
    std::copy(grad_out.v.begin(), grad_out.v.begin() + ga.size(), ga.v.begin());
    std::copy(grad_out.v.begin() + ga.size(), grad_out.v.end(), gb.v.begin());
    return {std::move(ga), std::move(gb)};
}

Tensor linear_forward(const Tensor& weight, const Tensor& bias, const Tensor& x) {
    require(weight.rank() == 2 && bias.rank() == 1 && x.rank() == 1, "linear rank mismatch");
    const int out = weight.dim(0), in = weight.dim(1);
    require(x.dim(0) == in && bias.dim(0) == out, "linear size mismatch");
    Tensor y = Tensor::vec(out);
    for (int o = 0; o < out; ++o) {
        double acc = bias.v[o];
        const double* row = &weight.v[static_cast<size_t>(o) * in];
        for (int i = 0; i < in; ++i) acc += row[i] * x.v[i];
        y.v[o] = acc;
    }
    return y;
}

LinearGrads linear_backward(const Tensor& weight, const Tensor& x, const Tensor& grad_out) {
    const int out = weight.dim(0), in = weight.dim(1);
    require(grad_out.rank() == 1 && grad_out.dim(0) == out, "linear grad size mismatch");
    LinearGrads g{Tensor(weight.shape), Tensor::vec(out), Tensor::vec(in)};
    for (int o = 0; o < out; ++o) {
        const double go = grad_out.v[o];
        g.bias.v[o] = go;
        const double* row = &weight.v[static_cast<size_t>(o) * in];
        double* grow = &g.weight.v[static_cast<size_t>(o) * in];
        for (int i = 0; i < in; ++i) {
            grow[i] = go * x.v[i];
            g.input.v[i] += go * row[i];
        }
    }
    return g;
}

double mse(const Tensor& a, const Tensor& b) {
    require(a.same_shape(b), "mse shape mismatch");
    double acc = 0;
    for (int i = 0; i < a.size(); ++i) {
        const double d = a.v[i] - b.v[i];
        acc += d * d;
    }
    return acc / a.size();
}

Tensor mse_backward_a(const Tensor& a, const Tensor& b) {
    require(a.same_shape(b), "mse shape mismatch");
    Tensor g(a.shape);
    const double scale = 2.0 / a.size();
    for (int i = 0; i < a.size(); ++i) g.v[i] = scale * (a.v[i] - b.v[i]);
    return g;
}

// ---- optimizer ------------------------------------------------------------

AdamState AdamState::like(const std::vector<const Tensor*>& params) {
    AdamState s;
    for (const Tensor* p : params) {
        s.m.emplace_back(p->shape);
        s.v.emplace_back(p->shape);
    }
    return s;
}

void adam_step(const std::vector<Tensor*>& params,
               const std::vector<const Tensor*>& grads,
               AdamState& state, double lr) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw ShapeError("adam: parameter/gradient/state count mismatch");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
    for (size_t t = 0; t < params.size(); ++t) {
        Tensor& p = *params[t];
        const Tensor& g = *grads[t];
        if (!p.same_shape(g) || !p.same_shape(state.m[t]))
            throw ShapeError("adam: tensor shape mismatch");
        for (int i = 0; i < p.size(); ++i) {
            double& m = state.m[t].v[i];
            double& v = state.v[t].v[i];
            m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * g.v[i];
            v = kAdamBeta2 * v + (1.0 - kAdamBeta2) * g.v[i] * g.v[i];
            const double mhat = m / bc1;
            const double vhat = v / bc2;
            p.v[i] -= lr * mhat / (std::sqrt(vhat) + kAdamEps);
        }
    }
}

// ---- gradient checking ----------------------------------------------------

GradCheckReport grad_check(
    const std::function<std::pair<double, std::vector<double>>(const std::vector<double>&)>& fn,
    const std::vector<double>& params, double h) {
    const auto analytic = fn(params).second;
    if (analytic.size() != params.size())
        throw ShapeError("grad_check: gradient length mismatch");
    GradCheckReport rep;
    std::vector<double> work = params;
    for (size_t i = 0; i < params.size(); ++i) {
        work[i] = params[i] + h;
        const double fp = fn(work).first;
        work[i] = params[i] - h;
        const double fm = fn(work).first;
        work[i] = params[i];
        const double numeric = (fp - fm) / (2.0 * h);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
        const double rel = std::abs(analytic[i] - numeric) / denom;
        if (rel > rep.max_rel_error) {
            rep.max_rel_error = rel;
            rep.worst_index = static_cast<int>(i);
        }
    }
    return rep;
}

// ---- checkpoints ----------------------------------------------------------

namespace {

constexpr char kMagic[6] = {'F', 'C', 'K', 'P', 'T', '1'};

void put_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

bool get_u32(std::ifstream& in, std::uint32_t& v) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4) return false;
    v = std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
        (std::uint32_t(b[3]) << 24);
    return true;
}

void put_f64(std::ofstream& out, double d) {
    std::uint64_t u;
    std::memcpy(&u, &d, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

bool get_f64(std::ifstream& in, double& d) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (in.gcount() != 8) return false;
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= std::uint64_t(b[i]) << (8 * i);
    std::memcpy(&d, &u, 8);
    return true;
}

} // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(kMagic, sizeof(kMagic));
    for (const auto& [name, t] : tensors) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(out, static_cast<std::uint32_t>(t->rank()));
        for (int d : t->shape) put_u32(out, static_cast<std::uint32_t>(d));
        for (double x : t->v) put_f64(out, x);
    }
    if (!out) throw IoError("write failed for " + path);
}

std::vector<std::pair<std::string, Tensor>> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[6];
    in.read(magic, 6);
    if (in.gcount() != 6 || std::memcmp(magic, kMagic, 6) != 0)
        throw ParseError("bad checkpoint magic in " + path);

    std::vector<std::pair<std::string, Tensor>> out;
    for (;;) {
        std::uint32_t name_len;
        if (!get_u32(in, name_len)) break;  // clean EOF
        if (name_len > 4096) throw ParseError("unreasonable tensor name length");
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (static_cast<std::uint32_t>(in.gcount()) != name_len)
            throw ParseError("truncated checkpoint " + path);
        std::uint32_t rank;
        if (!get_u32(in, rank) || rank < 1 || rank > 4)
            throw ParseError("bad tensor rank in " + path);
        std::vector<int> shape(rank);
        for (auto& d : shape) {
            std::uint32_t dd;
            if (!get_u32(in, dd) || dd == 0 || dd > (1u << 24))
                throw ParseError("bad tensor dimension in " + path);
            d = static_cast<int>(dd);
        }
        Tensor t(shape);
        for (double& x : t.v)
            if (!get_f64(in, x)) throw ParseError("truncated tensor data in " + path);
        out.emplace_back(std::move(name), std::move(t));
    }
    return out;
}

} // namespace fusecurr::nn
