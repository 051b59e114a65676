#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fusecurr/agent.hpp"
#include "fusecurr/fusion.hpp"
#include "fusecurr/metrics.hpp"

namespace fusecurr::train {

/// Run configuration. File format is `key = value` lines with `#` comments;
/// every key has a CLI flag of the same name and CLI values win.
struct TrainConfig {
    std::string dataset_dir;
    std::string teacher = "rule";  // "rule" or a directory of <stem>.pgm
    double student_lr = 0.002;
    int batch_size = 24;           // reduced automatically if fewer samples
    double agent_lr = 0.01;
    int pretrain_epochs = 20;
    int train_epochs = 100;
    int p = 4;                     // reward accumulation window
    int steps_per_episode = 8;
    int crop = 64;                 // multiple of 16
    std::uint64_t seed = 0;
    bool baseline_enabled = true;          // subtract the trajectory-mean return
    std::string log_path = "out/train_log.csv";
    std::string out_dir = "out";

    /// Serialize in config-file syntax, keys in declaration order.
    std::string dump() const;
};

/// Defaults overlaid with the file's entries. Unknown keys or unparsable
/// values raise ConfigError.
TrainConfig parse_config_file(const std::string& path);
/// Apply one key/value pair (shared by the file parser and CLI overrides).
void apply_config_entry(TrainConfig& cfg, const std::string& key, const std::string& value);

/// One sample: source pair plus the precomputed full-size teacher fusion.
struct Sample {
    std::string stem;
    img::Image ir, vi;
    img::Image teacher_fused;
};

struct Dataset {
    std::vector<Sample> samples;
};

/// Scan `dir` for <stem>_ir.pgm / <stem>_vi.pgm pairs (sorted by stem),
/// check pairwise dimensions, and precompute teacher fusions.
Dataset load_dataset(const std::string& dir, const fusion::Teacher& teacher);

/// Agent observation from the current probe fusions: the five normalized
/// student metrics followed by the teacher-student gaps. The teacher vector
/// is folded into the shared normalizer first.
agent::State build_state(metrics::RunningNormalizer& norm,
                         const img::Image& student_fused,
                         const img::Image& teacher_fused,
                         const img::Image& ir, const img::Image& vi);

struct RewardParts {
    double e_student = 0;
    double e_teacher = 0;
    double reward = 0;  // e_student - e_teacher, in [-1, 1]
};

/// Performance score E = 0.5 * (normalized viff + normalized iqa), teacher
/// folded first through the same shared normalizer channels the state uses.
RewardParts compute_reward_parts(metrics::RunningNormalizer& norm,
                                 const img::Image& student_fused,
                                 const img::Image& teacher_fused,
                                 const img::Image& ir, const img::Image& vi);
double compute_reward(metrics::RunningNormalizer& norm,
                      const img::Image& student_fused,
                      const img::Image& teacher_fused,
                      const img::Image& ir, const img::Image& vi);

/// One training-step log row; column order matches kTrainLogHeader.
struct StepRecord {
    int epoch = 0;
    int step = 0;
    double alpha_t = 0, alpha_s = 0;
    degrade::DegradationParams d;
    double loss_t = 0, loss_s = 0, loss_a = 0;
    double reward = 0, e_student = 0, e_teacher = 0;
    metrics::MetricVector ms;   // normalized student metrics
    metrics::MetricVector gap;  // teacher - student, normalized
};

extern const char* const kTrainLogHeader;
extern const char* const kMetricsCsvHeader;

/// Shortest round-trip decimal rendering (std::to_chars); used for all CSV
/// payload so parsed values are bit-exact.
std::string format_double(double x);

/// Holds the mutable training state; the free functions below are thin
/// wrappers. Exposed so tests can drive epochs and episodes directly.
class Session {
public:
    explicit Session(const TrainConfig& cfg);

    /// One pretrain epoch: steps_per_episode teacher-only batch updates.
    /// Returns the mean guidance loss over the epoch's steps.
    double pretrain_epoch(int epoch);

    /// One episode: steps_per_episode full steps plus one agent update.
    /// `forced` substitutes a fixed action and skips the agent update
    /// (used for ablations and equivalence tests). Appends one StepRecord
    /// per step to `log` when given.
    agent::Trajectory run_episode(int epoch, std::vector<StepRecord>* log = nullptr,
                                  const agent::Action* forced = nullptr);

    const TrainConfig& config() const { return cfg_; }
    const Dataset& dataset() const { return data_; }
    fusion::StudentNet& student() { return student_; }
    agent::PolicyParams& policy() { return policy_; }
    metrics::RunningNormalizer& normalizer() { return norm_; }
    const fusion::FeaturePyramid& pyramid() const { return pyramid_; }

private:
    struct BatchResult;
    BatchResult student_step(int epoch, int step, double alpha_t, double alpha_s,
                             const degrade::DegradationParams& d, bool with_self_loss);

    TrainConfig cfg_;
    Dataset data_;
    fusion::FeaturePyramid pyramid_;
    fusion::StudentNet student_;
    nn::AdamState student_opt_;
    agent::PolicyParams policy_;
    nn::AdamState agent_opt_;
    metrics::RunningNormalizer norm_;
};

struct PretrainResult {
    std::vector<double> epoch_mean_loss;
    std::string checkpoint_path;
};

/// Teacher-only warm start (guidance weight 1, no degradation, no agent);
/// writes <out_dir>/student_pretrained.fckpt.
PretrainResult pretrain(const TrainConfig& cfg);

struct TrainResult {
    std::string student_checkpoint;
    std::string agent_checkpoint;
    std::string log_path;
    std::vector<StepRecord> records;
};

/// Full run: pretrain epochs, then train_epochs episodes with the agent in
/// the loop. Writes both checkpoints and the step log CSV.
TrainResult train(const TrainConfig& cfg);

/// Fuse every pair in data_dir with the checkpointed student (or the rule
/// teacher when `ckpt` is the literal "rule"), write <stem>_fused.pgm plus
/// metrics.csv (per-image rows and a final "mean" row) into out_dir.
/// Images are center-cropped to multiples of 16 before fusing.
void evaluate(const std::string& ckpt, const std::string& data_dir,
              const std::string& out_dir);

/// Score the source images of every pair in data_dir; one row per image,
/// viff taken against the image's own pair.
void write_metrics_csv(const std::string& data_dir, const std::string& out_csv);

/// Deterministic synthetic IR/VI pairs: VI is a band-limited texture with
/// dark low-light regions, IR a smooth background with bright blobs inside
/// those regions. `size` must be a positive multiple of 16.
void make_synthetic_dataset(const std::string& out_dir, int n_pairs, int size,
                            std::uint64_t seed);

} // namespace fusecurr::train
