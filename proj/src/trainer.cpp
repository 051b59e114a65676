#include "fusecurr/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fusecurr/rng.hpp"

namespace fs = std::filesystem;

namespace fusecurr::train {

const char* const kTrainLogHeader =
    "epoch,step,alpha_t,alpha_s,d_blur,d_compress,d_brightness,d_contrast,d_noise,"
    "loss_t,loss_s,loss_a,reward,e_student,e_teacher,"
    "ms_ag,ms_ei,ms_vif,ms_sd,ms_iqa,gap_ag,gap_ei,gap_vif,gap_sd,gap_iqa";

const char* const kMetricsCsvHeader = "path,ag,sf,ei,en,sd,viff,iqa";

namespace {

// Stream tags so every consumer of randomness is independent of the others.
constexpr std::uint64_t kBatchTag = 0xb47c0ull;
constexpr std::uint64_t kActionTag = 0xac710ull;
constexpr std::uint64_t kDegradeTag = 0xde64aull;
constexpr std::uint64_t kSynthTag = 0x5e77ull;

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

int parse_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const int x = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("bad integer for '" + key + "': " + v);
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const unsigned long long x = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("bad integer for '" + key + "': " + v);
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size() || !std::isfinite(x)) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("bad number for '" + key + "': " + v);
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    throw ConfigError("bad boolean for '" + key + "': " + v);
}

img::Image center_crop(const img::Image& im, int h, int w) {
    const int oi = (im.height - h) / 2, oj = (im.width - w) / 2;
    std::vector<double> d(static_cast<size_t>(h) * w);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            d[static_cast<size_t>(i) * w + j] = im.at(oi + i, oj + j);
    return img::Image(h, w, std::move(d));
}

/// Largest centered region with both sides a multiple of 16.
img::Image center_crop16(const img::Image& im) {
    const int h = im.height / 16 * 16, w = im.width / 16 * 16;
    if (h < 16 || w < 16)
        throw DimensionError("image too small to fuse (needs 16x16 after alignment)");
    if (h == im.height && w == im.width) return im;
    return center_crop(im, h, w);
}

img::Image crop_at(const img::Image& im, int oi, int oj, int size) {
    std::vector<double> d(static_cast<size_t>(size) * size);
    for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j)
            d[static_cast<size_t>(i) * size + j] = im.at(oi + i, oj + j);
    return img::Image(size, size, std::move(d));
}

} // namespace

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

// ---- config ---------------------------------------------------------------

std::string TrainConfig::dump() const {
    std::ostringstream out;
    out << "dataset_dir = " << dataset_dir << "\n";
    out << "teacher = " << teacher << "\n";
    out << "student_lr = " << format_double(student_lr) << "\n";
    out << "batch_size = " << batch_size << "\n";
    out << "agent_lr = " << format_double(agent_lr) << "\n";
    out << "pretrain_epochs = " << pretrain_epochs << "\n";
    out << "train_epochs = " << train_epochs << "\n";
    out << "p = " << p << "\n";
    out << "steps_per_episode = " << steps_per_episode << "\n";
    out << "crop = " << crop << "\n";
    out << "seed = " << seed << "\n";
    out << "baseline_enabled = " << (baseline_enabled ? "true" : "false") << "\n";
    out << "log_path = " << log_path << "\n";
    out << "out_dir = " << out_dir << "\n";
    return out.str();
}

void apply_config_entry(TrainConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "dataset_dir") cfg.dataset_dir = value;
    else if (key == "teacher") cfg.teacher = value;
    else if (key == "student_lr") cfg.student_lr = parse_double(key, value);
    else if (key == "batch_size") cfg.batch_size = parse_int(key, value);
    else if (key == "agent_lr") cfg.agent_lr = parse_double(key, value);
    else if (key == "pretrain_epochs") cfg.pretrain_epochs = parse_int(key, value);
    else if (key == "train_epochs") cfg.train_epochs = parse_int(key, value);
    else if (key == "p") cfg.p = parse_int(key, value);
    else if (key == "steps_per_episode") cfg.steps_per_episode = parse_int(key, value);
    else if (key == "crop") cfg.crop = parse_int(key, value);
    else if (key == "seed") cfg.seed = parse_u64(key, value);
    else if (key == "baseline_enabled") cfg.baseline_enabled = parse_bool(key, value);
    else if (key == "log_path") cfg.log_path = value;
    else if (key == "out_dir") cfg.out_dir = value;
    else throw ConfigError("unknown config key '" + key + "'");
}

TrainConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    TrainConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        apply_config_entry(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

// ---- dataset --------------------------------------------------------------

static Dataset scan_pairs(const std::string& dir) {
    std::vector<std::string> stems;
    std::vector<std::string> unmatched_vi;
    try {
        for (const auto& entry : fs::directory_iterator(dir)) {
            const std::string name = entry.path().filename().string();
            if (name.size() > 7 && name.ends_with("_ir.pgm"))
                stems.push_back(name.substr(0, name.size() - 7));
            else if (name.size() > 7 && name.ends_with("_vi.pgm"))
                unmatched_vi.push_back(name.substr(0, name.size() - 7));
        }
    } catch (const fs::filesystem_error&) {
        throw DatasetError("cannot read dataset directory " + dir);
    }
    std::sort(stems.begin(), stems.end());
    std::sort(unmatched_vi.begin(), unmatched_vi.end());
    for (const auto& s : stems)
        if (!std::binary_search(unmatched_vi.begin(), unmatched_vi.end(), s))
            throw DatasetError("missing visible image for sample '" + s + "'");
    for (const auto& s : unmatched_vi)
        if (!std::binary_search(stems.begin(), stems.end(), s))
            throw DatasetError("missing infrared image for sample '" + s + "'");
    if (stems.empty()) throw DatasetError("no image pairs in " + dir);

    Dataset data;
    for (const auto& s : stems) {
        Sample smp;
        smp.stem = s;
        smp.ir = img::load_pgm((fs::path(dir) / (s + "_ir.pgm")).string());
        smp.vi = img::load_pgm((fs::path(dir) / (s + "_vi.pgm")).string());
        if (smp.ir.height != smp.vi.height || smp.ir.width != smp.vi.width)
            throw DatasetError("pair '" + s + "' images differ in size");
        data.samples.push_back(std::move(smp));
    }
    return data;
}

Dataset load_dataset(const std::string& dir, const fusion::Teacher& teacher) {
    Dataset data = scan_pairs(dir);
    for (auto& smp : data.samples)
        smp.teacher_fused = teacher.fuse(smp.ir, smp.vi, smp.stem);
    return data;
}

// ---- state and reward -----------------------------------------------------

agent::State build_state(metrics::RunningNormalizer& norm,
                         const img::Image& student_fused,
                         const img::Image& teacher_fused,
                         const img::Image& ir, const img::Image& vi) {
    const auto mt = metrics::metric_vector(teacher_fused, ir, vi);
    const auto ms = metrics::metric_vector(student_fused, ir, vi);
    const auto mtn = norm.fold(mt);  // teacher folded first, always
    const auto msn = norm.fold(ms);
    agent::State s;
    for (int c = 0; c < metrics::MetricVector::size(); ++c) {
        s[c] = msn[c];
        s[c + 5] = mtn[c] - msn[c];
    }
    return s;
}

RewardParts compute_reward_parts(metrics::RunningNormalizer& norm,
                                 const img::Image& student_fused,
                                 const img::Image& teacher_fused,
                                 const img::Image& ir, const img::Image& vi) {
    using RN = metrics::RunningNormalizer;
    const double viff_t = metrics::viff_fusion(ir, vi, teacher_fused);
    const double iqa_t = metrics::iqa_star(teacher_fused);
    const double viff_s = metrics::viff_fusion(ir, vi, student_fused);
    const double iqa_s = metrics::iqa_star(student_fused);
    RewardParts out;
    const double nvt = norm.fold(RN::kVif, viff_t);
    const double nit = norm.fold(RN::kIqa, iqa_t);
    const double nvs = norm.fold(RN::kVif, viff_s);
    const double nis = norm.fold(RN::kIqa, iqa_s);
    out.e_teacher = 0.5 * (nvt + nit);
    out.e_student = 0.5 * (nvs + nis);
    out.reward = out.e_student - out.e_teacher;
    return out;
}

double compute_reward(metrics::RunningNormalizer& norm,
                      const img::Image& student_fused,
                      const img::Image& teacher_fused,
                      const img::Image& ir, const img::Image& vi) {
    return compute_reward_parts(norm, student_fused, teacher_fused, ir, vi).reward;
}

// ---- session --------------------------------------------------------------

struct Session::BatchResult {
    double loss_t = 0;
    double loss_s = 0;
};

Session::Session(const TrainConfig& cfg)
    : cfg_(cfg),
      pyramid_(),
      student_(fusion::StudentNet::init(cfg.seed)),
      policy_(agent::PolicyParams::init(cfg.seed)) {
    if (cfg_.student_lr <= 0 || cfg_.agent_lr <= 0) throw ConfigError("learning rates must be positive");
    if (cfg_.batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (cfg_.crop < 16 || cfg_.crop % 16) throw ConfigError("crop must be a positive multiple of 16");
    if (cfg_.p < 0) throw ConfigError("p must be nonnegative");
    if (cfg_.steps_per_episode < 0) throw ConfigError("steps_per_episode must be nonnegative");
    if (cfg_.pretrain_epochs < 0 || cfg_.train_epochs < 0)
        throw ConfigError("epoch counts must be nonnegative");

    const fusion::Teacher teacher = cfg_.teacher == "rule"
                                        ? fusion::Teacher::rule()
                                        : fusion::Teacher::directory(cfg_.teacher);
    data_ = load_dataset(cfg_.dataset_dir, teacher);
    for (const auto& smp : data_.samples)
        if (smp.ir.height < cfg_.crop || smp.ir.width < cfg_.crop)
            throw DatasetError("sample '" + smp.stem + "' is smaller than the crop size");

    student_opt_ = nn::AdamState::like(std::as_const(student_).params());
    agent_opt_ = nn::AdamState::like(std::as_const(policy_).params());
}

Session::BatchResult Session::student_step(int epoch, int step, double alpha_t,
                                           double alpha_s,
                                           const degrade::DegradationParams& d,
                                           bool with_self_loss) {
    const int n = static_cast<int>(data_.samples.size());
    const int batch = std::min(cfg_.batch_size, n);
    rng::Stream bs(rng::derive(cfg_.seed, kBatchTag, static_cast<std::uint64_t>(epoch),
                               static_cast<std::uint64_t>(step)));

    // Draw distinct sample indices, then a crop offset per element.
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    for (int i = 0; i + 1 < n; ++i) std::swap(order[i], order[i + bs.below(n - i)]);

    struct Element {
        int sample;
        int oi, oj;
    };
    std::vector<Element> elems;
    for (int b = 0; b < batch; ++b) {
        const auto& smp = data_.samples[order[b]];
        const int oi = bs.below(smp.ir.height - cfg_.crop + 1);
        const int oj = bs.below(smp.ir.width - cfg_.crop + 1);
        elems.push_back({order[b], oi, oj});
    }

    auto grads = student_.zero_grads();
    double lt_sum = 0, ls_sum = 0;
    for (int b = 0; b < batch; ++b) {
        const auto& smp = data_.samples[elems[b].sample];
        const img::Image ir = crop_at(smp.ir, elems[b].oi, elems[b].oj, cfg_.crop);
        const img::Image vi = crop_at(smp.vi, elems[b].oi, elems[b].oj, cfg_.crop);
        const img::Image tch = crop_at(smp.teacher_fused, elems[b].oi, elems[b].oj, cfg_.crop);

        nn::Tensor ir_t = nn::Tensor::chw(1, cfg_.crop, cfg_.crop);
        nn::Tensor vi_t = nn::Tensor::chw(1, cfg_.crop, cfg_.crop);
        std::copy(ir.data.begin(), ir.data.end(), ir_t.v.begin());
        std::copy(vi.data.begin(), vi.data.end(), vi_t.v.begin());

        fusion::StudentNet::Cache cache;
        const nn::Tensor fused = student_.forward(ir_t, vi_t, cache);
        std::vector<double> fused_px(fused.v.size());
        for (size_t i = 0; i < fused_px.size(); ++i)
            fused_px[i] = std::clamp(fused.v[i], 0.0, 1.0);
        const img::Image fused_im(cfg_.crop, cfg_.crop, std::move(fused_px));

        const auto tg = fusion::loss_teacher_guidance(pyramid_, fused_im, tch);
        lt_sum += tg.value;

        nn::Tensor gout(fused.shape);
        for (int i = 0; i < gout.size(); ++i) gout.v[i] = alpha_t * tg.grad.v[i];

        if (with_self_loss) {
            const std::uint64_t dseed = rng::derive(
                rng::derive(cfg_.seed, kDegradeTag, static_cast<std::uint64_t>(epoch),
                            static_cast<std::uint64_t>(step)),
                static_cast<std::uint64_t>(b));
            auto [ir_d, vi_d] = degrade::degrade_pair(ir, vi, d, dseed);
            nn::Tensor ird_t = nn::Tensor::chw(1, cfg_.crop, cfg_.crop);
            nn::Tensor vid_t = nn::Tensor::chw(1, cfg_.crop, cfg_.crop);
            std::copy(ir_d.data.begin(), ir_d.data.end(), ird_t.v.begin());
            std::copy(vi_d.data.begin(), vi_d.data.end(), vid_t.v.begin());

            fusion::StudentNet::Cache cache_d;
            const nn::Tensor fused_d = student_.forward(ird_t, vid_t, cache_d);
            const auto sl = fusion::loss_self_learning(fused, fused_d);
            ls_sum += sl.value;
            for (int i = 0; i < gout.size(); ++i) gout.v[i] += alpha_s * sl.grad_a.v[i];
            nn::Tensor gout_d(fused_d.shape);
            for (int i = 0; i < gout_d.size(); ++i) gout_d.v[i] = alpha_s * sl.grad_b.v[i];
            student_.backward(cache_d, gout_d, grads);
        }
        student_.backward(cache, gout, grads);
    }

    const double inv = 1.0 / batch;
    for (auto& g : grads)
        for (double& x : g.v) x *= inv;

    BatchResult res{lt_sum * inv, ls_sum * inv};
    if (!std::isfinite(res.loss_t) || !std::isfinite(res.loss_s))
        throw NumericsError("non-finite loss at epoch " + std::to_string(epoch) +
                            " step " + std::to_string(step));

    std::vector<const nn::Tensor*> gptrs;
    for (const auto& g : grads) gptrs.push_back(&g);
    nn::adam_step(student_.params(), gptrs, student_opt_, cfg_.student_lr);
    return res;
}

double Session::pretrain_epoch(int epoch) {
    double acc = 0;
    for (int step = 0; step < cfg_.steps_per_episode; ++step)
        acc += student_step(epoch, step, 1.0, 0.0, degrade::DegradationParams::identity(),
                            /*with_self_loss=*/false)
                   .loss_t;
    return cfg_.steps_per_episode > 0 ? acc / cfg_.steps_per_episode : 0.0;
}

agent::Trajectory Session::run_episode(int epoch, std::vector<StepRecord>* log,
                                       const agent::Action* forced) {
    agent::Trajectory traj;
    if (cfg_.steps_per_episode == 0) return traj;

    const auto& probe = data_.samples[epoch % data_.samples.size()];
    const img::Image probe_ir = center_crop16(probe.ir);
    const img::Image probe_vi = center_crop16(probe.vi);
    const img::Image probe_tch =
        center_crop(probe.teacher_fused, probe_ir.height, probe_ir.width);

    for (int step = 0; step < cfg_.steps_per_episode; ++step) {
        const img::Image student_probe = student_.fuse(probe_ir, probe_vi);
        const agent::State state =
            build_state(norm_, student_probe, probe_tch, probe_ir, probe_vi);

        agent::TrajectoryStep ts;
        ts.state = state;
        if (forced) {
            ts.raw = {};
            ts.log_prob = 0.0;
            ts.action = *forced;
        } else {
            const auto out = agent::policy_forward(policy_, state);
            const auto sampled = agent::sample_action(
                out, rng::derive(cfg_.seed, kActionTag, static_cast<std::uint64_t>(epoch),
                                 static_cast<std::uint64_t>(step)));
            ts.raw = sampled.raw;
            ts.action = sampled.action;
            ts.log_prob = sampled.log_prob;
        }

        const BatchResult losses = student_step(epoch, step, ts.action.alpha_t,
                                                ts.action.alpha_s, ts.action.d,
                                                /*with_self_loss=*/true);
        const double la = fusion::loss_total(losses.loss_t, losses.loss_s,
                                             ts.action.alpha_t, ts.action.alpha_s);

        const img::Image student_after = student_.fuse(probe_ir, probe_vi);
        const RewardParts rp =
            compute_reward_parts(norm_, student_after, probe_tch, probe_ir, probe_vi);
        if (!std::isfinite(rp.reward))
            throw NumericsError("non-finite reward at epoch " + std::to_string(epoch) +
                                " step " + std::to_string(step));
        ts.reward = rp.reward;
        traj.push_back(ts);

        if (log) {
            StepRecord rec;
            rec.epoch = epoch;
            rec.step = step;
            rec.alpha_t = ts.action.alpha_t;
            rec.alpha_s = ts.action.alpha_s;
            rec.d = ts.action.d;
            rec.loss_t = losses.loss_t;
            rec.loss_s = losses.loss_s;
            rec.loss_a = la;
            rec.reward = rp.reward;
            rec.e_student = rp.e_student;
            rec.e_teacher = rp.e_teacher;
            for (int c = 0; c < 5; ++c) {
                rec.ms[c] = state[c];
                rec.gap[c] = state[c + 5];
            }
            log->push_back(rec);
        }
    }

    if (!forced)
        agent_update(policy_, agent_opt_, traj, cfg_.p, cfg_.agent_lr, cfg_.baseline_enabled);
    return traj;
}

// ---- top-level runs -------------------------------------------------------

namespace {

void ensure_parent_dir(const std::string& path) {
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void write_step_log(const std::string& path, const std::vector<StepRecord>& recs) {
    ensure_parent_dir(path);
    std::ofstream out(path, std::ios::binary);  // binary keeps LF endings everywhere
    if (!out) throw IoError("cannot write " + path);
    out << kTrainLogHeader << "\n";
    for (const auto& r : recs) {
        out << r.epoch << "," << r.step << "," << format_double(r.alpha_t) << ","
            << format_double(r.alpha_s) << "," << format_double(r.d.blur) << ","
            << format_double(r.d.compress) << "," << format_double(r.d.brightness) << ","
            << format_double(r.d.contrast) << "," << format_double(r.d.noise) << ","
            << format_double(r.loss_t) << "," << format_double(r.loss_s) << ","
            << format_double(r.loss_a) << "," << format_double(r.reward) << ","
            << format_double(r.e_student) << "," << format_double(r.e_teacher);
        for (int c = 0; c < 5; ++c) out << "," << format_double(r.ms[c]);
        for (int c = 0; c < 5; ++c) out << "," << format_double(r.gap[c]);
        out << "\n";
    }
    if (!out) throw IoError("write failed for " + path);
}

struct MetricRow {
    std::string path;
    double ag, sf, ei, en, sd, viff, iqa;
};

MetricRow score_image(const std::string& path, const img::Image& im,
                      const img::Image& ir, const img::Image& vi) {
    MetricRow r;
    r.path = path;
    r.ag = metrics::avg_gradient(im);
    r.sf = metrics::spatial_frequency(im);
    r.ei = metrics::edge_intensity(im);
    r.en = metrics::entropy(im);
    r.sd = metrics::std_dev(im);
    r.viff = metrics::viff_fusion(ir, vi, im);
    r.iqa = metrics::iqa_star(im);
    return r;
}

void write_metric_rows(const std::string& path, const std::vector<MetricRow>& rows,
                       bool with_mean) {
    ensure_parent_dir(path);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << kMetricsCsvHeader << "\n";
    auto put = [&](const MetricRow& r) {
        out << r.path << "," << format_double(r.ag) << "," << format_double(r.sf) << ","
            << format_double(r.ei) << "," << format_double(r.en) << ","
            << format_double(r.sd) << "," << format_double(r.viff) << ","
            << format_double(r.iqa) << "\n";
    };
    for (const auto& r : rows) put(r);
    if (with_mean && !rows.empty()) {
        MetricRow m{"mean", 0, 0, 0, 0, 0, 0, 0};
        for (const auto& r : rows) {
            m.ag += r.ag;
            m.sf += r.sf;
            m.ei += r.ei;
            m.en += r.en;
            m.sd += r.sd;
            m.viff += r.viff;
            m.iqa += r.iqa;
        }
        const double inv = 1.0 / static_cast<double>(rows.size());
        m.ag *= inv;
        m.sf *= inv;
        m.ei *= inv;
        m.en *= inv;
        m.sd *= inv;
        m.viff *= inv;
        m.iqa *= inv;
        put(m);
    }
    if (!out) throw IoError("write failed for " + path);
}

} // namespace

PretrainResult pretrain(const TrainConfig& cfg) {
    Session session(cfg);
    PretrainResult res;
    for (int epoch = 0; epoch < cfg.pretrain_epochs; ++epoch)
        res.epoch_mean_loss.push_back(session.pretrain_epoch(epoch));
    fs::create_directories(cfg.out_dir);
    res.checkpoint_path = (fs::path(cfg.out_dir) / "student_pretrained.fckpt").string();
    session.student().save(res.checkpoint_path);
    return res;
}

TrainResult train(const TrainConfig& cfg) {
    Session session(cfg);
    for (int epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) session.pretrain_epoch(epoch);

    TrainResult res;
    for (int epoch = 0; epoch < cfg.train_epochs; ++epoch)
        session.run_episode(epoch, &res.records);

    fs::create_directories(cfg.out_dir);
    res.log_path = cfg.log_path;
    write_step_log(res.log_path, res.records);
    res.student_checkpoint = (fs::path(cfg.out_dir) / "student.fckpt").string();
    res.agent_checkpoint = (fs::path(cfg.out_dir) / "agent.fckpt").string();
    session.student().save(res.student_checkpoint);
    session.policy().save(res.agent_checkpoint);
    return res;
}

void evaluate(const std::string& ckpt, const std::string& data_dir,
              const std::string& out_dir) {
    std::optional<fusion::StudentNet> student;
    if (ckpt != "rule") student = fusion::StudentNet::load(ckpt);

    Dataset data = scan_pairs(data_dir);
    fs::create_directories(out_dir);
    std::vector<MetricRow> rows;
    for (const auto& smp : data.samples) {
        const img::Image ir = center_crop16(smp.ir);
        const img::Image vi = center_crop16(smp.vi);
        const img::Image fused = student ? student->fuse(ir, vi)
                                         : fusion::rule_teacher_fuse(ir, vi);
        const std::string out_path =
            (fs::path(out_dir) / (smp.stem + "_fused.pgm")).string();
        img::save_pgm(out_path, fused);
        rows.push_back(score_image(out_path, fused, ir, vi));
    }
    write_metric_rows((fs::path(out_dir) / "metrics.csv").string(), rows,
                      /*with_mean=*/true);
}

void write_metrics_csv(const std::string& data_dir, const std::string& out_csv) {
    Dataset data = scan_pairs(data_dir);
    std::vector<MetricRow> rows;
    for (const auto& smp : data.samples) {
        const std::string ir_path = (fs::path(data_dir) / (smp.stem + "_ir.pgm")).string();
        const std::string vi_path = (fs::path(data_dir) / (smp.stem + "_vi.pgm")).string();
        rows.push_back(score_image(ir_path, smp.ir, smp.ir, smp.vi));
        rows.push_back(score_image(vi_path, smp.vi, smp.ir, smp.vi));
    }
    write_metric_rows(out_csv, rows, /*with_mean=*/false);
}

// ---- synthetic data -------------------------------------------------------

void make_synthetic_dataset(const std::string& out_dir, int n_pairs, int size,
                            std::uint64_t seed) {
    if (n_pairs < 1) throw DatasetError("need at least one pair");
    if (size < 32 || size % 16) throw DatasetError("size must be a multiple of 16, at least 32");
    fs::create_directories(out_dir);

    for (int pi = 0; pi < n_pairs; ++pi) {
        rng::Stream rs(rng::derive(seed, kSynthTag, static_cast<std::uint64_t>(pi)));
        const size_t npx = static_cast<size_t>(size) * size;

        // Visible: band-limited texture, stretched, with dark low-light regions.
        std::vector<double> noise(npx);
        for (double& x : noise) x = rs.uniform();
        img::Image vi_base =
            degrade::gaussian_blur_kernel(img::Image(size, size, std::move(noise)), 5);
        double lo = 1, hi = 0;
        for (double x : vi_base.data) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
        std::vector<double> vi_px(npx);
        for (size_t i = 0; i < npx; ++i)
            vi_px[i] = 0.15 + 0.75 * (vi_base.data[i] - lo) / (hi - lo + 1e-12);

        struct Region {
            double ci, cj, ri, rj;
        };
        std::vector<Region> regions;
        const int n_regions = 1 + rs.below(2);
        for (int k = 0; k < n_regions; ++k) {
            Region r;
            r.ci = size * (0.25 + 0.5 * rs.uniform());
            r.cj = size * (0.25 + 0.5 * rs.uniform());
            r.ri = size * (0.12 + 0.13 * rs.uniform());
            r.rj = size * (0.12 + 0.13 * rs.uniform());
            regions.push_back(r);
        }
        for (int i = 0; i < size; ++i)
            for (int j = 0; j < size; ++j) {
                double factor = 1.0;
                for (const auto& r : regions) {
                    const double di = (i - r.ci) / r.ri, dj = (j - r.cj) / r.rj;
                    const double rho = std::sqrt(di * di + dj * dj);
                    // 0.12 in the core, easing back to 1 at the rim.
                    const double t = std::clamp((rho - 0.7) / 0.6, 0.0, 1.0);
                    factor = std::min(factor, 0.12 + 0.88 * t * t * (3 - 2 * t));
                }
                vi_px[static_cast<size_t>(i) * size + j] *= factor;
            }
        for (double& x : vi_px) x = std::clamp(x, 0.0, 1.0);

        // Infrared: smooth background plus bright blobs inside the VI dark spots.
        std::vector<double> bgn(npx);
        for (double& x : bgn) x = rs.uniform();
        img::Image ir_base =
            degrade::gaussian_blur_kernel(img::Image(size, size, std::move(bgn)), 7);
        ir_base = degrade::gaussian_blur_kernel(ir_base, 7);
        lo = 1;
        hi = 0;
        for (double x : ir_base.data) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
        std::vector<double> ir_px(npx);
        for (size_t i = 0; i < npx; ++i)
            ir_px[i] = 0.1 + 0.3 * (ir_base.data[i] - lo) / (hi - lo + 1e-12);

        for (const auto& r : regions) {
            const double amp = 0.75 + 0.2 * rs.uniform();
            const double sg = 0.5 * std::min(r.ri, r.rj);
            for (int i = 0; i < size; ++i)
                for (int j = 0; j < size; ++j) {
                    const double di = i - r.ci, dj = j - r.cj;
                    const double blob = amp * std::exp(-(di * di + dj * dj) / (2 * sg * sg));
                    auto& px = ir_px[static_cast<size_t>(i) * size + j];
                    px = std::max(px, blob);
                }
        }
        for (double& x : ir_px) x = std::clamp(x, 0.0, 1.0);

        char stem[32];
        std::snprintf(stem, sizeof(stem), "pair%02d", pi);
        img::save_pgm((fs::path(out_dir) / (std::string(stem) + "_ir.pgm")).string(),
                      img::Image(size, size, std::move(ir_px)));
        img::save_pgm((fs::path(out_dir) / (std::string(stem) + "_vi.pgm")).string(),
                      img::Image(size, size, std::move(vi_px)));
    }
}

} // namespace fusecurr::train
