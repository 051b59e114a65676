#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fusecurr/degrade.hpp"
#include "fusecurr/fusion.hpp"
#include "fusecurr/imgio.hpp"
#include "fusecurr/metrics.hpp"
#include "fusecurr/trainer.hpp"

using namespace fusecurr;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag)
        : path(fs::temp_directory_path() / ("fusecurr_trainer_" + tag)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
    std::string sub(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(slurp(path));
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

train::TrainConfig smoke_config(const std::string& data_dir, const std::string& out_dir) {
    train::TrainConfig cfg;
    cfg.dataset_dir = data_dir;
    cfg.out_dir = out_dir;
    cfg.log_path = out_dir + "/train_log.csv";
    cfg.crop = 32;
    cfg.steps_per_episode = 4;
    cfg.pretrain_epochs = 2;
    cfg.train_epochs = 3;
    cfg.seed = 5;
    return cfg;
}

std::vector<double> student_flat(const fusion::StudentNet& net) {
    std::vector<double> flat;
    for (const nn::Tensor* t : net.params()) flat.insert(flat.end(), t->v.begin(), t->v.end());
    return flat;
}

std::vector<double> policy_flat(const agent::PolicyParams& p) {
    std::vector<double> flat;
    for (const nn::Tensor* t : p.params()) flat.insert(flat.end(), t->v.begin(), t->v.end());
    return flat;
}

} // namespace

TEST_CASE("default configuration dump is frozen") {
    const std::string golden =
        "dataset_dir = \n"
        "teacher = rule\n"
        "student_lr = 0.002\n"
        "batch_size = 24\n"
        "agent_lr = 0.01\n"
        "pretrain_epochs = 20\n"
        "train_epochs = 100\n"
        "p = 4\n"
        "steps_per_episode = 8\n"
        "crop = 64\n"
        "seed = 0\n"
        "baseline_enabled = true\n"
        "log_path = out/train_log.csv\n"
        "out_dir = out\n";
    CHECK(train::TrainConfig{}.dump() == golden);
}

TEST_CASE("config files parse, override defaults, and report bad lines") {
    TempDir tmp("cfg");
    {
        std::ofstream out(tmp.sub("run.cfg"));
        out << "# a comment line\n"
            << "\n"
            << "dataset_dir = /data/pairs   # trailing comment\n"
            << "student_lr = 0.01\n"
            << "baseline_enabled = false\n"
            << "seed = 1234\n";
    }
    const auto cfg = train::parse_config_file(tmp.sub("run.cfg"));
    CHECK(cfg.dataset_dir == "/data/pairs");
    CHECK(cfg.student_lr == 0.01);
    CHECK(cfg.baseline_enabled == false);
    CHECK(cfg.seed == 1234);
    CHECK(cfg.batch_size == 24);  // untouched default

    // Round trip through the dump format.
    {
        std::ofstream out(tmp.sub("dumped.cfg"));
        out << cfg.dump();
    }
    CHECK(train::parse_config_file(tmp.sub("dumped.cfg")).dump() == cfg.dump());

    {
        std::ofstream out(tmp.sub("bad1.cfg"));
        out << "student_lr = 0.01\nnope = 1\n";
    }
    CHECK_THROWS_WITH_AS(train::parse_config_file(tmp.sub("bad1.cfg")),
                         doctest::Contains("nope"), ConfigError);
    {
        std::ofstream out(tmp.sub("bad2.cfg"));
        out << "\n\njust words\n";
    }
    CHECK_THROWS_WITH_AS(train::parse_config_file(tmp.sub("bad2.cfg")),
                         doctest::Contains("line 3"), ConfigError);
    {
        std::ofstream out(tmp.sub("bad3.cfg"));
        out << "batch_size = many\n";
    }
    CHECK_THROWS_AS(train::parse_config_file(tmp.sub("bad3.cfg")), ConfigError);
    CHECK_THROWS_AS(train::parse_config_file(tmp.sub("missing.cfg")), ConfigError);

    train::TrainConfig direct;
    CHECK_THROWS_AS(train::apply_config_entry(direct, "baseline_enabled", "maybe"),
                    ConfigError);
    train::apply_config_entry(direct, "crop", "48");
    CHECK(direct.crop == 48);
}

TEST_CASE("synthetic datasets are deterministic and validated") {
    TempDir a("synth_a"), b("synth_b");
    train::make_synthetic_dataset(a.str(), 3, 48, 9);
    train::make_synthetic_dataset(b.str(), 3, 48, 9);
    for (int i = 0; i < 3; ++i) {
        const std::string ir = "pair0" + std::to_string(i) + "_ir.pgm";
        const std::string vi = "pair0" + std::to_string(i) + "_vi.pgm";
        REQUIRE(fs::exists(a.path / ir));
        REQUIRE(fs::exists(a.path / vi));
        CHECK(slurp(a.sub(ir)) == slurp(b.sub(ir)));
        CHECK(slurp(a.sub(vi)) == slurp(b.sub(vi)));
    }
    const auto im = img::load_pgm(a.sub("pair00_ir.pgm"));
    CHECK(im.height == 48);
    CHECK(im.width == 48);

    TempDir c("synth_c");
    train::make_synthetic_dataset(c.str(), 2, 48, 10);
    CHECK(slurp(a.sub("pair00_ir.pgm")) != slurp(c.sub("pair00_ir.pgm")));

    CHECK_THROWS_AS(train::make_synthetic_dataset(c.str(), 0, 48, 1), DatasetError);
    CHECK_THROWS_AS(train::make_synthetic_dataset(c.str(), 1, 40, 1), DatasetError);
    CHECK_THROWS_AS(train::make_synthetic_dataset(c.str(), 1, 16, 1), DatasetError);
}

TEST_CASE("synthetic pairs carry complementary information") {
    TempDir tmp("synth_info");
    train::make_synthetic_dataset(tmp.str(), 2, 64, 3);
    for (int i = 0; i < 2; ++i) {
        const auto ir = img::load_pgm(tmp.sub("pair0" + std::to_string(i) + "_ir.pgm"));
        const auto vi = img::load_pgm(tmp.sub("pair0" + std::to_string(i) + "_vi.pgm"));
        CHECK(metrics::viff_fusion(ir, vi, ir) < 1.0);
        CHECK(metrics::viff_fusion(ir, vi, vi) < 1.0);
    }
}

TEST_CASE("dataset scanning pairs files and rejects broken layouts") {
    TempDir tmp("scan");
    train::make_synthetic_dataset(tmp.str(), 2, 48, 4);
    const auto data = train::load_dataset(tmp.str(), fusion::Teacher::rule());
    REQUIRE(data.samples.size() == 2);
    CHECK(data.samples[0].stem == "pair00");
    CHECK(data.samples[1].stem == "pair01");
    CHECK(data.samples[0].teacher_fused.data ==
          fusion::rule_teacher_fuse(data.samples[0].ir, data.samples[0].vi).data);

    img::save_pgm(tmp.sub("stray_ir.pgm"), data.samples[0].ir);
    CHECK_THROWS_AS(train::load_dataset(tmp.str(), fusion::Teacher::rule()), DatasetError);
    fs::remove(tmp.path / "stray_ir.pgm");

    img::Image small(32, 32, std::vector<double>(1024, 0.5));
    img::save_pgm(tmp.sub("odd_ir.pgm"), small);
    img::save_pgm(tmp.sub("odd_vi.pgm"), data.samples[0].vi);
    CHECK_THROWS_AS(train::load_dataset(tmp.str(), fusion::Teacher::rule()), DatasetError);

    TempDir empty("scan_empty");
    CHECK_THROWS_AS(train::load_dataset(empty.str(), fusion::Teacher::rule()), DatasetError);
}

TEST_CASE("state embedding and reward share one normalizer") {
    TempDir tmp("state");
    train::make_synthetic_dataset(tmp.str(), 1, 64, 6);
    const auto ir = img::load_pgm(tmp.sub("pair00_ir.pgm"));
    const auto vi = img::load_pgm(tmp.sub("pair00_vi.pgm"));
    const auto teacher = fusion::rule_teacher_fuse(ir, vi);

    SUBCASE("agreeing fusions give the zero state and zero reward") {
        metrics::RunningNormalizer norm;
        const auto s = train::build_state(norm, teacher, teacher, ir, vi);
        for (double v : s) CHECK(v == 0.0);

        metrics::RunningNormalizer norm2;
        const auto parts = train::compute_reward_parts(norm2, teacher, teacher, ir, vi);
        CHECK(parts.reward == 0.0);
        CHECK(parts.e_student == parts.e_teacher);
    }

    SUBCASE("distinct fusions keep components in their documented ranges") {
        const auto student = degrade::gaussian_blur(teacher, 1.0);
        metrics::RunningNormalizer norm;
        const auto s0 = train::build_state(norm, student, teacher, ir, vi);
        const auto s1 = train::build_state(norm, student, teacher, ir, vi);
        for (const auto& s : {s0, s1}) {
            for (int c = 0; c < 5; ++c) {
                CHECK(s[c] >= 0.0);
                CHECK(s[c] <= 1.0);
                CHECK(s[c + 5] >= -1.0);
                CHECK(s[c + 5] <= 1.0);
            }
        }
    }

    SUBCASE("reward decomposition matches a standalone recomputation") {
        const auto student = degrade::gaussian_blur(teacher, 1.0);
        metrics::RunningNormalizer norm, replica;
        const auto parts = train::compute_reward_parts(norm, student, teacher, ir, vi);

        using RN = metrics::RunningNormalizer;
        const double nvt = replica.fold(RN::kVif, metrics::viff_fusion(ir, vi, teacher));
        const double nit = replica.fold(RN::kIqa, metrics::iqa_star(teacher));
        const double nvs = replica.fold(RN::kVif, metrics::viff_fusion(ir, vi, student));
        const double nis = replica.fold(RN::kIqa, metrics::iqa_star(student));
        CHECK(parts.e_teacher == 0.5 * (nvt + nit));
        CHECK(parts.e_student == 0.5 * (nvs + nis));
        CHECK(parts.reward == parts.e_student - parts.e_teacher);
        CHECK(parts.reward >= -1.0);
        CHECK(parts.reward <= 1.0);

        metrics::RunningNormalizer fresh;
        CHECK(train::compute_reward(fresh, student, teacher, ir, vi) == parts.reward);
    }
}

TEST_CASE("session construction validates its configuration") {
    TempDir tmp("cfgcheck");
    train::make_synthetic_dataset(tmp.str(), 1, 48, 2);
    auto base = smoke_config(tmp.str(), tmp.sub("out"));

    auto expect_config_error = [&](auto mutate) {
        auto cfg = base;
        mutate(cfg);
        CHECK_THROWS_AS(train::Session{cfg}, ConfigError);
    };
    expect_config_error([](auto& c) { c.student_lr = 0.0; });
    expect_config_error([](auto& c) { c.agent_lr = -1.0; });
    expect_config_error([](auto& c) { c.batch_size = 0; });
    expect_config_error([](auto& c) { c.crop = 20; });
    expect_config_error([](auto& c) { c.crop = 0; });
    expect_config_error([](auto& c) { c.p = -1; });
    expect_config_error([](auto& c) { c.steps_per_episode = -1; });
    expect_config_error([](auto& c) { c.pretrain_epochs = -1; });

    auto big_crop = base;
    big_crop.crop = 64;  // samples are 48x48
    CHECK_THROWS_AS(train::Session{big_crop}, DatasetError);
}

TEST_CASE("pretraining descends, reloads, and is reproducible") {
    TempDir tmp("pretrain");
    train::make_synthetic_dataset(tmp.str(), 4, 64, 7);
    auto cfg = smoke_config(tmp.str(), tmp.sub("out_a"));
    cfg.pretrain_epochs = 3;

    const auto res_a = train::pretrain(cfg);
    REQUIRE(res_a.epoch_mean_loss.size() == 3);
    CHECK(res_a.epoch_mean_loss.back() < res_a.epoch_mean_loss.front());
    REQUIRE(fs::exists(res_a.checkpoint_path));

    auto cfg_b = cfg;
    cfg_b.out_dir = tmp.sub("out_b");
    const auto res_b = train::pretrain(cfg_b);
    CHECK(res_a.epoch_mean_loss == res_b.epoch_mean_loss);
    CHECK(slurp(res_a.checkpoint_path) == slurp(res_b.checkpoint_path));

    const auto loaded = fusion::StudentNet::load(res_a.checkpoint_path);
    const auto again = fusion::StudentNet::load(res_b.checkpoint_path);
    const auto data = train::load_dataset(tmp.str(), fusion::Teacher::rule());
    const auto& smp = data.samples[0];
    CHECK(loaded.fuse(smp.ir, smp.vi).data == again.fuse(smp.ir, smp.vi).data);

    auto cfg_zero = cfg;
    cfg_zero.out_dir = tmp.sub("out_zero");
    cfg_zero.pretrain_epochs = 0;
    const auto res_zero = train::pretrain(cfg_zero);
    const auto at_init = train::Session(cfg_zero).student();
    CHECK(student_flat(fusion::StudentNet::load(res_zero.checkpoint_path)) ==
          student_flat(at_init));
}

TEST_CASE("an episode forced to the identity action reduces to pretraining") {
    TempDir tmp("forced");
    train::make_synthetic_dataset(tmp.str(), 3, 64, 13);
    const auto cfg = smoke_config(tmp.str(), tmp.sub("out"));

    train::Session plain(cfg), forced_sess(cfg);
    agent::Action forced;
    forced.alpha_t = 1.0;
    forced.alpha_s = 0.0;
    forced.d = degrade::DegradationParams::identity();

    plain.pretrain_epoch(0);
    plain.pretrain_epoch(1);
    const auto t0 = forced_sess.run_episode(0, nullptr, &forced);
    const auto t1 = forced_sess.run_episode(1, nullptr, &forced);
    CHECK(t0.size() == 4);
    CHECK(t1.size() == 4);

    CHECK(student_flat(plain.student()) == student_flat(forced_sess.student()));
    // The forced episode must not touch the policy.
    CHECK(policy_flat(forced_sess.policy()) ==
          policy_flat(agent::PolicyParams::init(cfg.seed)));
}

TEST_CASE("zero steps per episode is a no-op") {
    TempDir tmp("zerosteps");
    train::make_synthetic_dataset(tmp.str(), 2, 48, 21);
    auto cfg = smoke_config(tmp.str(), tmp.sub("out"));
    cfg.steps_per_episode = 0;

    train::Session sess(cfg);
    const auto student_before = student_flat(sess.student());
    const auto policy_before = policy_flat(sess.policy());
    const auto traj = sess.run_episode(0);
    CHECK(traj.empty());
    CHECK(student_flat(sess.student()) == student_before);
    CHECK(policy_flat(sess.policy()) == policy_before);
    CHECK(sess.pretrain_epoch(0) == 0.0);
}

TEST_CASE("strongly negative knob logits let the agent opt out of degradation") {
    TempDir tmp("optout");
    // The end-to-end bound below sits in the statistical tail of the DCT
    // round-off (per-pixel quantization error ~ q/sqrt(12), so the max over a
    // 64x64 image lands near 1/255 itself); the dataset seed is pinned to an
    // instance that stays inside the envelope with a few percent to spare.
    train::make_synthetic_dataset(tmp.str(), 1, 64, 73);
    const auto ir = img::load_pgm(tmp.sub("pair00_ir.pgm"));
    const auto vi = img::load_pgm(tmp.sub("pair00_vi.pgm"));

    // Strong negatives on the one-sided knobs (blur, compress, noise); zero
    // logits on the two-sided jitter knobs, whose neutral point is 0.5.
    const agent::Vec7 raw{0.0, 0.0, -30.0, -30.0, 0.0, 0.0, -30.0};
    const auto action = agent::squash(raw);

    // Every stage except compression collapses outright at this action: the
    // blur kernel degenerates to a single tap, the jitter gains are exactly
    // one, and the noise sigma is ~1e-15. Only the compression floor remains.
    CHECK(degrade::gaussian_blur(ir, action.d.blur).data == ir.data);
    CHECK(degrade::color_jitter(ir, action.d.brightness, action.d.contrast).data ==
          ir.data);
    const auto noised = degrade::add_noise(ir, action.d.noise, 99);
    for (size_t i = 0; i < ir.data.size(); ++i)
        CHECK(std::abs(noised.data[i] - ir.data[i]) <= 1e-12);

    const auto [ird, vid] = degrade::degrade_pair(ir, vi, action.d, 99);
    for (size_t i = 0; i < ir.data.size(); ++i) {
        CHECK(std::abs(ird.data[i] - ir.data[i]) <= 1.0 / 255.0);
        CHECK(std::abs(vid.data[i] - vi.data[i]) <= 1.0 / 255.0);
    }
}

TEST_CASE("full training runs are byte-reproducible and log the contract") {
    TempDir tmp("train");
    train::make_synthetic_dataset(tmp.str(), 4, 64, 23);
    auto cfg_a = smoke_config(tmp.str(), tmp.sub("out_a"));
    cfg_a.pretrain_epochs = 1;
    cfg_a.seed = 11;
    auto cfg_b = cfg_a;
    cfg_b.out_dir = tmp.sub("out_b");
    cfg_b.log_path = tmp.sub("out_b") + "/train_log.csv";

    const auto res_a = train::train(cfg_a);
    const auto res_b = train::train(cfg_b);
    CHECK(slurp(res_a.log_path) == slurp(res_b.log_path));
    CHECK(slurp(res_a.student_checkpoint) == slurp(res_b.student_checkpoint));
    CHECK(slurp(res_a.agent_checkpoint) == slurp(res_b.agent_checkpoint));

    const auto rows = read_csv(res_a.log_path);
    REQUIRE(rows.size() == 1 + 3 * 4);  // header + train_epochs * steps
    std::ostringstream joined;
    for (size_t i = 0; i < rows[0].size(); ++i)
        joined << (i ? "," : "") << rows[0][i];
    CHECK(joined.str() == train::kTrainLogHeader);

    REQUIRE(res_a.records.size() == 3 * 4);
    for (size_t r = 1; r < rows.size(); ++r) {
        REQUIRE(rows[r].size() == 25);
        const double at = std::stod(rows[r][2]);
        const double as = std::stod(rows[r][3]);
        CHECK(std::abs(at + as - 1.0) <= 1e-9);
        for (int c = 4; c < 9; ++c) {
            const double d = std::stod(rows[r][c]);
            CHECK(d > 0.0);
            CHECK(d < 1.0);
        }
        const double reward = std::stod(rows[r][12]);
        const double es = std::stod(rows[r][13]);
        const double et = std::stod(rows[r][14]);
        CHECK(reward == es - et);  // exact: shortest round-trip formatting
        for (int c = 15; c < 20; ++c) {
            const double m = std::stod(rows[r][c]);
            CHECK(m >= 0.0);
            CHECK(m <= 1.0);
        }
        for (int c = 20; c < 25; ++c) {
            const double g = std::stod(rows[r][c]);
            CHECK(g >= -1.0);
            CHECK(g <= 1.0);
        }
    }
    // Epoch/step indices follow the episode structure.
    CHECK(rows[1][0] == "0");
    CHECK(rows[1][1] == "0");
    CHECK(rows[4][1] == "3");
    CHECK(rows[5][0] == "1");
}

TEST_CASE("the reference smoke run keeps its training signal") {
    TempDir tmp("smoke");
    train::make_synthetic_dataset(tmp.str(), 4, 64, 0);
    train::TrainConfig cfg;
    cfg.dataset_dir = tmp.str();
    cfg.out_dir = tmp.sub("out");
    cfg.log_path = tmp.sub("out") + "/train_log.csv";
    cfg.pretrain_epochs = 3;
    cfg.train_epochs = 5;
    cfg.seed = 0;

    train::Session sess(cfg);
    std::vector<double> pre;
    for (int e = 0; e < cfg.pretrain_epochs; ++e) pre.push_back(sess.pretrain_epoch(e));
    for (size_t i = 1; i < pre.size(); ++i) CHECK(pre[i] < pre[i - 1]);

    std::vector<train::StepRecord> recs;
    for (int e = 0; e < cfg.train_epochs; ++e) sess.run_episode(e, &recs);
    REQUIRE(recs.size() == 40);

    // The reward moving average must not collapse over training.
    double ma_start = 0, ma_end = 0;
    for (int i = 0; i < 20; ++i) {
        ma_start += recs[i].reward;
        ma_end += recs[recs.size() - 20 + i].reward;
    }
    ma_start /= 20;
    ma_end /= 20;
    CHECK(ma_end >= ma_start - 0.02);

    // Curriculum signal: the agent either raises the degradation difficulty
    // across quartiles or improves its reward; neither direction is promised
    // on its own, so the test accepts the disjunction.
    auto magnitude = [](const train::StepRecord& r) {
        return r.d.blur + r.d.compress + std::abs(r.d.brightness - 0.5) +
               std::abs(r.d.contrast - 0.5) + r.d.noise;
    };
    const size_t q = recs.size() / 4;
    double first = 0, last = 0;
    for (size_t i = 0; i < q; ++i) {
        first += magnitude(recs[i]);
        last += magnitude(recs[recs.size() - q + i]);
    }
    CHECK((last / q > first / q || ma_end > ma_start));
}

TEST_CASE("evaluating the built-in rule reproduces its metrics exactly") {
    TempDir tmp("eval");
    train::make_synthetic_dataset(tmp.str(), 3, 64, 29);
    const auto out1 = tmp.sub("eval_a");
    const auto out2 = tmp.sub("eval_b");
    train::evaluate("rule", tmp.str(), out1);
    train::evaluate("rule", tmp.str(), out2);
    // The CSVs embed the fused-image paths, so normalize the output directory
    // before comparing the reruns.
    std::string csv_b = slurp(out2 + "/metrics.csv");
    for (size_t pos; (pos = csv_b.find("eval_b")) != std::string::npos;)
        csv_b.replace(pos, 6, "eval_a");
    CHECK(slurp(out1 + "/metrics.csv") == csv_b);

    const auto rows = read_csv(out1 + "/metrics.csv");
    REQUIRE(rows.size() == 1 + 3 + 1);  // header, three pairs, mean
    std::ostringstream joined;
    for (size_t i = 0; i < rows[0].size(); ++i)
        joined << (i ? "," : "") << rows[0][i];
    CHECK(joined.str() == train::kMetricsCsvHeader);

    const auto data = train::load_dataset(tmp.str(), fusion::Teacher::rule());
    for (int i = 0; i < 3; ++i) {
        const auto& row = rows[1 + i];
        REQUIRE(row.size() == 8);
        const std::string fused_path = out1 + "/" + data.samples[i].stem + "_fused.pgm";
        CHECK(row[0] == fused_path);
        REQUIRE(fs::exists(fused_path));

        const img::Image fused =
            fusion::rule_teacher_fuse(data.samples[i].ir, data.samples[i].vi);
        CHECK(std::stod(row[1]) == metrics::avg_gradient(fused));
        CHECK(std::stod(row[2]) == metrics::spatial_frequency(fused));
        CHECK(std::stod(row[3]) == metrics::edge_intensity(fused));
        CHECK(std::stod(row[4]) == metrics::entropy(fused));
        CHECK(std::stod(row[5]) == metrics::std_dev(fused));
        CHECK(std::stod(row[6]) ==
              metrics::viff_fusion(data.samples[i].ir, data.samples[i].vi, fused));
        CHECK(std::stod(row[7]) == metrics::iqa_star(fused));
    }

    const auto& mean = rows.back();
    CHECK(mean[0] == "mean");
    for (int c = 1; c < 8; ++c) {
        double acc = 0;
        for (int i = 0; i < 3; ++i) acc += std::stod(rows[1 + i][c]);
        CHECK(std::stod(mean[c]) == doctest::Approx(acc / 3).epsilon(1e-12));
    }
}

TEST_CASE("evaluating a trained checkpoint writes fused images") {
    TempDir tmp("evalckpt");
    train::make_synthetic_dataset(tmp.str(), 2, 64, 31);
    auto cfg = smoke_config(tmp.str(), tmp.sub("out"));
    cfg.pretrain_epochs = 1;
    const auto pre = train::pretrain(cfg);

    const auto out = tmp.sub("eval");
    train::evaluate(pre.checkpoint_path, tmp.str(), out);
    const auto fused = img::load_pgm(out + "/pair00_fused.pgm");
    CHECK(fused.height == 64);
    CHECK(fused.width == 64);
    CHECK(fs::exists(out + "/metrics.csv"));

    CHECK_THROWS_AS(train::evaluate(tmp.sub("nothere.fckpt"), tmp.str(), out), IoError);
}

TEST_CASE("source-image metric sweep emits one row per image") {
    TempDir tmp("msweep");
    train::make_synthetic_dataset(tmp.str(), 2, 64, 37);
    const auto csv = tmp.sub("metrics.csv");
    train::write_metrics_csv(tmp.str(), csv);

    const auto rows = read_csv(csv);
    REQUIRE(rows.size() == 1 + 4);  // header + 2 images per pair, no mean row
    const auto ir = img::load_pgm(tmp.sub("pair00_ir.pgm"));
    CHECK(rows[1][0] == tmp.sub("pair00_ir.pgm"));
    CHECK(std::stod(rows[1][1]) == metrics::avg_gradient(ir));

    const auto vi = img::load_pgm(tmp.sub("pair00_vi.pgm"));
    CHECK(rows[2][0] == tmp.sub("pair00_vi.pgm"));
    CHECK(std::stod(rows[2][6]) == metrics::viff_fusion(ir, vi, vi));
}

TEST_CASE("doubles survive the CSV round trip bit-exactly") {
    for (double x : {0.1, 1.0 / 3.0, 0.002, 1e-17, 123456.789, -0.75}) {
        CHECK(std::stod(train::format_double(x)) == x);
    }
    CHECK(train::format_double(0.002) == "0.002");
    CHECK(train::format_double(0.0) == "0");
    CHECK(train::format_double(0.5) == "0.5");
}
