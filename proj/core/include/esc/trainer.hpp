#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "esc/membank.hpp"
#include "esc/model.hpp"

namespace esc::train {

struct TrainingConfig {
    int batch_size = 16;
    double learning_rate = 2e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.0;
    int warmup_steps = 100;
    int max_epochs = 15;
    int max_steps = 0;  // 0: max_epochs * batches per epoch
    double lambda1 = 0.3;
    double lambda2 = 0.1;
    int max_len = 512;          // L
    int memory_capacity = 64;   // N_m
    int top_k = 20;             // K
    int strategies = 8;         // G
    int dim = 768;              // d
    double clip_norm = 1.0;
    bool shuffle = true;
    std::uint64_t seed = 42;

    // ablations; they compose
    bool no_mem = false;
    bool no_emo = false;
    bool no_kg = false;
    bool no_strategy_loss = false;  // lambda1 = 0
    bool no_pattern_loss = false;   // lambda2 = 0

    void validate() const;
    net::LossWeights loss_weights() const;
    nlohmann::json to_json() const;
    /// Unknown keys throw InvalidArgument.
    static TrainingConfig from_json(const nlohmann::json& j);
};

/// The five ablation switches, in table order.
const std::vector<std::string>& ablation_flags();
/// Copy of `base` with one more flag set. Unknown flag throws.
TrainingConfig with_ablation(TrainingConfig base, const std::string& flag);
/// One config per ablation flag, applied to `base`.
std::vector<std::pair<std::string, TrainingConfig>> ablation_grid(const TrainingConfig& base);

/// Linear warmup from 0 at step 0 to `base` at `warmup`, then linear decay
/// to 0 at `total`.
double learning_rate(int step, double base, int warmup, int total);

/// Scales `g` so its global L2 norm is at most `max_norm`. Returns the norm
/// before clipping.
double clip_global_norm(ag::Gradients& g, double max_norm);

class AdamW {
public:
    AdamW(const ag::ParameterStore& store, double beta1, double beta2, double eps, double weight_decay);
    void step(ag::ParameterStore& store, const ag::Gradients& g, double lr);
    long long steps() const { return t_; }

    void save(std::ostream& out) const;
    void load(std::istream& in);

private:
    double beta1_, beta2_, eps_, wd_;
    long long t_ = 0;
    std::vector<Matrix> m_, v_;
};

struct StepRecord {
    int step = 0;  // 1-based index of the optimizer step just taken
    int epoch = 0;
    double lr = 0.0;
    net::LossBreakdown loss;  // batch means
    double grad_norm = 0.0;
};

struct TrainState {
    int step = 0;
    int epoch = 0;
    double best_val_ppl = std::numeric_limits<double>::infinity();
    std::string rng_state;
};

struct CheckpointRecord {
    std::filesystem::path path;
    int epoch = 0;
    int step = 0;
    double val_ppl = 0.0;
};

struct TrainResult {
    std::vector<StepRecord> steps;
    std::vector<CheckpointRecord> checkpoints;
    std::optional<CheckpointRecord> best;
    TrainState state;
};

class Trainer {
public:
    /// `bank` must be empty and match the model dim.
    Trainer(TrainingConfig cfg, net::Model& model, membank::MemoryBank& bank);

    const TrainingConfig& config() const { return cfg_; }
    const TrainState& state() const { return state_; }
    AdamW& optimizer() { return opt_; }

    /// One optimizer step on `batch`: forward with the bank as it was before
    /// the batch, backward, clip, AdamW; then the batch's pattern vectors go
    /// into the bank. `total_steps` drives the LR schedule.
    StepRecord train_batch(const std::vector<const pipeline::EncodedSample*>& batch, int total_steps);

    /// Steps one epoch would take on `n` samples.
    int batches_per_epoch(std::size_t n) const;

    /// Full loop. With a non-empty `valid`, computes validation PPL after
    /// every epoch, writes `last.ckpt` and keeps `best.ckpt` in `run_dir`
    /// (when given) and appends to metrics.jsonl there.
    TrainResult fit(const std::vector<pipeline::EncodedSample>& train,
                    const std::vector<pipeline::EncodedSample>& valid,
                    const std::optional<std::filesystem::path>& run_dir = std::nullopt,
                    const std::function<void(const StepRecord&)>& on_step = {});

    void save_checkpoint(const std::filesystem::path& path) const;
    void load_checkpoint(const std::filesystem::path& path);

private:
    TrainingConfig cfg_;
    net::Model* model_;
    membank::MemoryBank* bank_;
    AdamW opt_;
    TrainState state_;
    std::mt19937_64 rng_;
};

/// Reads model parameters and bank out of a checkpoint file without an
/// optimizer, for evaluation and serving. Returns the stored header.
nlohmann::json load_for_inference(const std::filesystem::path& path, net::Model& model,
                                  membank::MemoryBank& bank);

} // namespace esc::train
