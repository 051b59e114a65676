#include "fusecurr/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "fusecurr/degrade.hpp"
#include "fusecurr/metrics.hpp"
#include "fusecurr/rng.hpp"

namespace fusecurr::fusion {

namespace {

nn::Tensor image_to_tensor(const img::Image& im) {
    nn::Tensor t = nn::Tensor::chw(1, im.height, im.width);
    std::copy(im.data.begin(), im.data.end(), t.v.begin());
    return t;
}

img::Image tensor_to_image(const nn::Tensor& t) {
    std::vector<double> d(t.v.size());
    for (size_t i = 0; i < d.size(); ++i) d[i] = std::clamp(t.v[i], 0.0, 1.0);
    return img::Image(t.dim(1), t.dim(2), std::move(d));
}

ConvLayer make_conv(int cout, int cin, rng::Stream& rs, double std_dev) {
    ConvLayer l{nn::Tensor({cout, cin, 3, 3}), nn::Tensor::vec(cout)};
    for (double& w : l.k.v) w = std_dev * rs.normal();
    return l;
}

ConvLayer he_conv(int cout, int cin, rng::Stream& rs) {
    return make_conv(cout, cin, rs, std::sqrt(2.0 / (cin * 9)));
}

void check_pair_dims(const img::Image& ir, const img::Image& vi) {
    if (ir.height != vi.height || ir.width != vi.width)
        throw DimensionError("fusion inputs must have equal dimensions");
}

} // namespace

// ---- StudentNet -----------------------------------------------------------

StudentNet StudentNet::init(std::uint64_t seed) {
    rng::Stream rs(rng::derive(seed, 0x57d0e27ull));
    StudentNet net;
    net.enc_vi1 = he_conv(8, 1, rs);
    net.enc_vi2 = he_conv(8, 8, rs);
    net.enc_ir1 = he_conv(8, 1, rs);
    net.enc_ir2 = he_conv(8, 8, rs);
    net.dec1 = he_conv(8, 16, rs);
    net.dec2 = he_conv(1, 8, rs);
    return net;
}

nn::Tensor StudentNet::forward(const nn::Tensor& ir, const nn::Tensor& vi,
                               Cache& c) const {
    if (!ir.same_shape(vi)) throw DimensionError("fusion inputs must have equal dimensions");
    if (ir.rank() != 3 || ir.dim(0) != 1) throw ShapeError("expected (1,H,W) input");
    const int h = ir.dim(1), w = ir.dim(2);
    if (h < 16 || w < 16 || h % 2 || w % 2)
        throw DimensionError("fusion needs even dimensions of at least 16");

    c.ir_in = ir;
    c.vi_in = vi;
    c.vi_pre1 = nn::conv2d_forward(vi, enc_vi1.k, enc_vi1.b);
    c.vi_act1 = nn::relu(c.vi_pre1);
    c.vi_pre2 = nn::conv2d_forward(c.vi_act1, enc_vi2.k, enc_vi2.b);
    c.vi_act2 = nn::relu(c.vi_pre2);
    c.ir_pre1 = nn::conv2d_forward(ir, enc_ir1.k, enc_ir1.b);
    c.ir_act1 = nn::relu(c.ir_pre1);
    c.ir_pre2 = nn::conv2d_forward(c.ir_act1, enc_ir2.k, enc_ir2.b);
    c.ir_act2 = nn::relu(c.ir_pre2);
    c.cat = nn::concat_channels(c.vi_act2, c.ir_act2);
    c.dec_pre1 = nn::conv2d_forward(c.cat, dec1.k, dec1.b);
    c.dec_act1 = nn::relu(c.dec_pre1);
    c.dec_pre2 = nn::conv2d_forward(c.dec_act1, dec2.k, dec2.b);
    c.out = nn::sigmoid(c.dec_pre2);
    return c.out;
}

void StudentNet::backward(const Cache& c, const nn::Tensor& grad_out,
                          std::vector<nn::Tensor>& grads) const {
    auto add = [](nn::Tensor& dst, const nn::Tensor& src) {
        for (int i = 0; i < dst.size(); ++i) dst.v[i] += src.v[i];
    };

    nn::Tensor g = nn::sigmoid_backward(c.out, grad_out);
    auto cg = nn::conv2d_backward(c.dec_act1, dec2.k, g);
    add(grads[10], cg.kernels);
    add(grads[11], cg.bias);
    g = nn::relu_backward(c.dec_pre1, cg.input);
    cg = nn::conv2d_backward(c.cat, dec1.k, g);
    add(grads[8], cg.kernels);
    add(grads[9], cg.bias);
    auto [gvi, gir] = nn::split_channels_grad(cg.input, 8, 8);

    g = nn::relu_backward(c.vi_pre2, gvi);
    cg = nn::conv2d_backward(c.vi_act1, enc_vi2.k, g);
    add(grads[2], cg.kernels);
    add(grads[3], cg.bias);
    g = nn::relu_backward(c.vi_pre1, cg.input);
    cg = nn::conv2d_backward(c.vi_in, enc_vi1.k, g);
    add(grads[0], cg.kernels);
    add(grads[1], cg.bias);

    g = nn::relu_backward(c.ir_pre2, gir);
    cg = nn::conv2d_backward(c.ir_act1, enc_ir2.k, g);
    add(grads[6], cg.kernels);
    add(grads[7], cg.bias);
    g = nn::relu_backward(c.ir_pre1, cg.input);
    cg = nn::conv2d_backward(c.ir_in, enc_ir1.k, g);
    add(grads[4], cg.kernels);
    add(grads[5], cg.bias);
}

img::Image StudentNet::fuse(const img::Image& ir, const img::Image& vi) const {
    check_pair_dims(ir, vi);
    Cache c;
    return tensor_to_image(forward(image_to_tensor(ir), image_to_tensor(vi), c));
}

std::vector<nn::Tensor*> StudentNet::params() {
    return {&enc_vi1.k, &enc_vi1.b, &enc_vi2.k, &enc_vi2.b, &enc_ir1.k, &enc_ir1.b,
            &enc_ir2.k, &enc_ir2.b, &dec1.k,    &dec1.b,    &dec2.k,    &dec2.b};
}

std::vector<const nn::Tensor*> StudentNet::params() const {
    auto mut = const_cast<StudentNet*>(this)->params();
    return {mut.begin(), mut.end()};
}

std::vector<std::pair<std::string, const nn::Tensor*>> StudentNet::named_params() const {
    static const char* names[] = {"enc_vi1.k", "enc_vi1.b", "enc_vi2.k", "enc_vi2.b",
                                  "enc_ir1.k", "enc_ir1.b", "enc_ir2.k", "enc_ir2.b",
                                  "dec1.k",    "dec1.b",    "dec2.k",    "dec2.b"};
    auto ps = params();
    std::vector<std::pair<std::string, const nn::Tensor*>> out;
    for (size_t i = 0; i < ps.size(); ++i) out.emplace_back(names[i], ps[i]);
    return out;
}

std::vector<nn::Tensor> StudentNet::zero_grads() const {
    std::vector<nn::Tensor> g;
    for (const nn::Tensor* p : params()) g.emplace_back(p->shape);
    return g;
}

int StudentNet::param_count() const {
    int n = 0;
    for (const nn::Tensor* p : params()) n += p->size();
    return n;
}

void StudentNet::save(const std::string& path) const {
    nn::save_checkpoint(path, named_params());
}

StudentNet StudentNet::load(const std::string& path) {
    StudentNet net = StudentNet::init(0);
    const auto stored = nn::load_checkpoint(path);
    auto expected = net.named_params();
    if (stored.size() != expected.size())
        throw ParseError("checkpoint tensor count mismatch in " + path);
    auto mut = net.params();
    for (size_t i = 0; i < stored.size(); ++i) {
        if (stored[i].first != expected[i].first)
            throw ParseError("unexpected tensor '" + stored[i].first + "' in " + path);
        if (stored[i].second.shape != mut[i]->shape)
            throw ShapeError("tensor shape mismatch for " + stored[i].first);
        mut[i]->v = stored[i].second.v;
    }
    return net;
}

// ---- fusion rule ----------------------------------------------------------

namespace {

// 5x5 box mean with replicate padding, separable.
std::vector<double> box5(const std::vector<double>& src, int h, int w) {
    std::vector<double> tmp(src.size()), out(src.size());
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            double acc = 0;
            for (int t = -2; t <= 2; ++t) acc += src[static_cast<size_t>(i) * w + std::clamp(j + t, 0, w - 1)];
            tmp[static_cast<size_t>(i) * w + j] = acc / 5.0;
        }
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            double acc = 0;
            for (int t = -2; t <= 2; ++t) acc += tmp[static_cast<size_t>(std::clamp(i + t, 0, h - 1)) * w + j];
            out[static_cast<size_t>(i) * w + j] = acc / 5.0;
        }
    return out;
}

} // namespace

img::Image rule_teacher_fuse(const img::Image& ir, const img::Image& vi) {
    check_pair_dims(ir, vi);
    const int h = ir.height, w = ir.width;
    const auto sal_ir = box5(metrics::sobel_magnitude(ir), h, w);
    const auto sal_vi = box5(metrics::sobel_magnitude(vi), h, w);

    std::vector<double> fused(ir.data.size());
    for (size_t i = 0; i < fused.size(); ++i) {
        const double wgt = sal_ir[i] / (sal_ir[i] + sal_vi[i] + 1e-6);
        fused[i] = wgt * ir.data[i] + (1.0 - wgt) * vi.data[i];
    }
    img::Image base(h, w, std::move(fused));
    const img::Image blurred = degrade::gaussian_blur_kernel(base, 5);

    std::vector<double> out(base.data.size());
    for (size_t i = 0; i < out.size(); ++i) {
        const double v = base.data[i] + 0.5 * (base.data[i] - blurred.data[i]);
        out[i] = std::clamp(v, 0.0, 1.0);
    }
    return img::Image(h, w, std::move(out));
}

Teacher Teacher::rule() { return Teacher{}; }

Teacher Teacher::directory(const std::string& dir) {
    Teacher t;
    t.dir_ = dir;
    return t;
}

img::Image Teacher::fuse(const img::Image& ir, const img::Image& vi,
                         const std::string& stem) const {
    if (is_rule()) return rule_teacher_fuse(ir, vi);
    if (stem.empty()) throw DatasetError("file teacher needs a sample stem");
    const auto path = std::filesystem::path(dir_) / (stem + ".pgm");
    if (!std::filesystem::exists(path))
        throw DatasetError("teacher image missing: " + path.string());
    img::Image t = img::load_pgm(path.string());
    if (t.height != ir.height || t.width != ir.width)
        throw DimensionError("teacher image size mismatch for " + stem);
    return t;
}

// ---- FeaturePyramid -------------------------------------------------------

FeaturePyramid::FeaturePyramid(std::uint64_t seed) {
    constexpr int widths[kStages] = {8, 16, 32, 32, 32};
    rng::Stream rs(rng::derive(seed, 0xf3a7ull));
    int cin = 1;
    for (int s = 0; s < kStages; ++s) {
        stages_.push_back(make_conv(widths[s], cin, rs, 0.2));
        cin = widths[s];
    }
}

void FeaturePyramid::forward(const nn::Tensor& x, Acts& acts) const {
    acts.input.clear();
    acts.pre.clear();
    acts.post.clear();
    nn::Tensor cur = x;
    for (int s = 0; s < kStages; ++s) {
        acts.input.push_back(cur);
        acts.pre.push_back(nn::conv2d_forward(acts.input.back(), stages_[s].k, stages_[s].b));
        acts.post.push_back(nn::relu(acts.pre.back()));
        if (s + 1 < kStages) cur = nn::avgpool2_forward(acts.post.back());
    }
}

std::vector<nn::Tensor> FeaturePyramid::features(const img::Image& im) const {
    if (im.height % 16 || im.width % 16)
        throw DimensionError("feature pyramid needs dimensions divisible by 16");
    Acts acts;
    forward(image_to_tensor(im), acts);
    return std::move(acts.post);
}

nn::Tensor FeaturePyramid::backward_to_input(
    const Acts& acts, const std::vector<nn::Tensor>& grad_stages) const {
    nn::Tensor gpost = grad_stages[kStages - 1];
    for (int s = kStages - 1;; --s) {
        const nn::Tensor gpre = nn::relu_backward(acts.pre[s], gpost);
        auto cg = nn::conv2d_backward(acts.input[s], stages_[s].k, gpre);
        if (s == 0) return std::move(cg.input);
        gpost = nn::avgpool2_backward(acts.post[s - 1].shape, cg.input);
        for (int i = 0; i < gpost.size(); ++i) gpost.v[i] += grad_stages[s - 1].v[i];
    }
}

// ---- losses ---------------------------------------------------------------

ValueGrad loss_teacher_guidance(const FeaturePyramid& pyr,
                                const img::Image& student_fused,
                                const img::Image& teacher_fused) {
    check_pair_dims(student_fused, teacher_fused);
    if (student_fused.height % 16 || student_fused.width % 16)
        throw DimensionError("guidance loss needs dimensions divisible by 16");

    FeaturePyramid::Acts acts;
    pyr.forward(image_to_tensor(student_fused), acts);
    const auto ft = pyr.features(teacher_fused);

    ValueGrad out;
    std::vector<nn::Tensor> grad_stages;
    for (int s = 0; s < FeaturePyramid::kStages; ++s) {
        const nn::Tensor& fs = acts.post[s];
        double sq = 0;
        for (int i = 0; i < fs.size(); ++i) {
            const double d = fs.v[i] - ft[s].v[i];
            sq += d * d;
        }
        const double norm = std::sqrt(sq);
        out.value += norm;
        nn::Tensor g(fs.shape);
        if (norm > 0)
            for (int i = 0; i < fs.size(); ++i) g.v[i] = (fs.v[i] - ft[s].v[i]) / norm;
        grad_stages.push_back(std::move(g));
    }
    out.grad = pyr.backward_to_input(acts, grad_stages);
    return out;
}

PairValueGrad loss_self_learning(const nn::Tensor& fused_original,
                                 const nn::Tensor& fused_degraded) {
    PairValueGrad out;
    out.value = nn::mse(fused_original, fused_degraded);
    out.grad_a = nn::mse_backward_a(fused_original, fused_degraded);
    out.grad_b = nn::Tensor(out.grad_a.shape);
    for (int i = 0; i < out.grad_a.size(); ++i) out.grad_b.v[i] = -out.grad_a.v[i];
    return out;
}

double loss_total(double lt, double ls, double alpha_t, double alpha_s) {
    if (std::abs(alpha_t + alpha_s - 1.0) > 1e-9 || alpha_t < 0 || alpha_s < 0)
        throw WeightError("loss weights must be nonnegative and sum to 1");
    return alpha_t * lt + alpha_s * ls;
}

} // namespace fusecurr::fusion
