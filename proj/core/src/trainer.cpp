#include "esc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "esc/binio.hpp"
#include "esc/error.hpp"
#include "esc/metrics.hpp"

namespace esc::train {

using nlohmann::json;

void TrainingConfig::validate() const {
    auto need = [](bool ok, const char* what) {
        if (!ok) throw InvalidArgument(std::string("training config: ") + what);
    };
    need(batch_size > 0, "batch_size must be positive");
    need(learning_rate > 0.0, "learning_rate must be positive");
    need(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "betas must be in [0, 1)");
    need(adam_eps > 0.0, "adam_eps must be positive");
    need(weight_decay >= 0.0, "weight_decay must be non-negative");
    need(warmup_steps >= 0, "warmup_steps must be non-negative");
    need(max_epochs > 0, "max_epochs must be positive");
    need(max_steps >= 0, "max_steps must be non-negative");
    need(lambda1 >= 0.0 && lambda2 >= 0.0, "loss weights must be non-negative");
    need(max_len >= 8, "max_len must be at least 8");
    need(memory_capacity > 0 && top_k >= 0 && strategies > 0 && dim > 0, "sizes must be positive");
    need(clip_norm > 0.0, "clip_norm must be positive");
}

net::LossWeights TrainingConfig::loss_weights() const {
    return {no_strategy_loss ? 0.0 : lambda1, no_pattern_loss ? 0.0 : lambda2};
}

json TrainingConfig::to_json() const {
    return {{"batch_size", batch_size},
            {"learning_rate", learning_rate},
            {"beta1", beta1},
            {"beta2", beta2},
            {"adam_eps", adam_eps},
            {"weight_decay", weight_decay},
            {"warmup_steps", warmup_steps},
            {"max_epochs", max_epochs},
            {"max_steps", max_steps},
            {"lambda1", lambda1},
            {"lambda2", lambda2},
            {"max_len", max_len},
            {"memory_capacity", memory_capacity},
            {"top_k", top_k},
            {"strategies", strategies},
            {"dim", dim},
            {"clip_norm", clip_norm},
            {"shuffle", shuffle},
            {"seed", seed},
            {"no_mem", no_mem},
            {"no_emo", no_emo},
            {"no_kg", no_kg},
            {"no_strategy_loss", no_strategy_loss},
            {"no_pattern_loss", no_pattern_loss}};
}

TrainingConfig TrainingConfig::from_json(const json& j) {
    if (!j.is_object()) throw InvalidArgument("training config must be an object");
    TrainingConfig c;
    const json defaults = c.to_json();
    for (const auto& [k, v] : j.items())
        if (!defaults.contains(k)) throw InvalidArgument("unknown training config key '" + k + "'");
    json merged = defaults;
    merged.update(j);
    try {
        c.batch_size = merged.at("batch_size").get<int>();
        c.learning_rate = merged.at("learning_rate").get<double>();
        c.beta1 = merged.at("beta1").get<double>();
        c.beta2 = merged.at("beta2").get<double>();
        c.adam_eps = merged.at("adam_eps").get<double>();
        c.weight_decay = merged.at("weight_decay").get<double>();
        c.warmup_steps = merged.at("warmup_steps").get<int>();
        c.max_epochs = merged.at("max_epochs").get<int>();
        c.max_steps = merged.at("max_steps").get<int>();
        c.lambda1 = merged.at("lambda1").get<double>();
        c.lambda2 = merged.at("lambda2").get<double>();
        c.max_len = merged.at("max_len").get<int>();
        c.memory_capacity = merged.at("memory_capacity").get<int>();
        c.top_k = merged.at("top_k").get<int>();
        c.strategies = merged.at("strategies").get<int>();
        c.dim = merged.at("dim").get<int>();
        c.clip_norm = merged.at("clip_norm").get<double>();
        c.shuffle = merged.at("shuffle").get<bool>();
        c.seed = merged.at("seed").get<std::uint64_t>();
        c.no_mem = merged.at("no_mem").get<bool>();
        c.no_emo = merged.at("no_emo").get<bool>();
        c.no_kg = merged.at("no_kg").get<bool>();
        c.no_strategy_loss = merged.at("no_strategy_loss").get<bool>();
        c.no_pattern_loss = merged.at("no_pattern_loss").get<bool>();
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("training config: ") + e.what());
    }
    c.validate();
    return c;
}

const std::vector<std::string>& ablation_flags() {
    static const std::vector<std::string> flags{"no_mem", "no_emo", "no_kg", "no_strategy_loss",
                                                "no_pattern_loss"};
    return flags;
}

TrainingConfig with_ablation(TrainingConfig base, const std::string& flag) {
    if (flag == "no_mem") base.no_mem = true;
    else if (flag == "no_emo") base.no_emo = true;
    else if (flag == "no_kg") base.no_kg = true;
    else if (flag == "no_strategy_loss") base.no_strategy_loss = true;
    else if (flag == "no_pattern_loss") base.no_pattern_loss = true;
    else throw InvalidArgument("unknown ablation flag '" + flag + "'");
    return base;
}

std::vector<std::pair<std::string, TrainingConfig>> ablation_grid(const TrainingConfig& base) {
    std::vector<std::pair<std::string, TrainingConfig>> out;
    for (const auto& f : ablation_flags()) out.emplace_back(f, with_ablation(base, f));
    return out;
}

double learning_rate(int step, double base, int warmup, int total) {
    if (step <= 0) return warmup > 0 ? 0.0 : base;
    if (step < warmup) return base * static_cast<double>(step) / static_cast<double>(warmup);
    if (step >= total) return 0.0;
    if (total <= warmup) return base;
    return base * static_cast<double>(total - step) / static_cast<double>(total - warmup);
}

double clip_global_norm(ag::Gradients& g, double max_norm) {
    const double norm = std::sqrt(g.squared_norm());
    if (std::isfinite(norm) && norm > max_norm) g.scale(max_norm / norm);
    return norm;
}

// ---- AdamW -----------------------------------------------------------------

AdamW::AdamW(const ag::ParameterStore& store, double beta1, double beta2, double eps, double weight_decay)
    : beta1_(beta1), beta2_(beta2), eps_(eps), wd_(weight_decay) {
    for (ag::ParamId i = 0; i < store.size(); ++i) {
        const auto& v = store.value(i);
        m_.push_back(Matrix::Zero(v.rows(), v.cols()));
        v_.push_back(Matrix::Zero(v.rows(), v.cols()));
    }
}

void AdamW::step(ag::ParameterStore& store, const ag::Gradients& g, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (ag::ParamId i = 0; i < store.size(); ++i) {
        const Matrix* grad = g.get(i);
        if (!grad) continue;
        auto& w = store.value(i);
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * *grad;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad->cwiseProduct(*grad);
        if (wd_ > 0.0) w *= 1.0 - lr * wd_;
        w.array() -= lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + eps_);
    }
}

void AdamW::save(std::ostream& out) const {
    out.write("ADAM", 4);
    binio::write<std::int64_t>(out, t_);
    binio::write<std::uint64_t>(out, m_.size());
    for (std::size_t i = 0; i < m_.size(); ++i) {
        binio::write_matrix(out, m_[i]);
        binio::write_matrix(out, v_[i]);
    }
}

void AdamW::load(std::istream& in) {
    binio::expect_magic(in, "ADAM");
    const auto t = binio::read<std::int64_t>(in);
    const auto n = binio::read<std::uint64_t>(in);
    if (n != m_.size()) throw FormatError("optimizer state has a different parameter count");
    std::vector<Matrix> m, v;
    for (std::size_t i = 0; i < n; ++i) {
        m.push_back(binio::read_matrix(in));
        v.push_back(binio::read_matrix(in));
        if (m.back().rows() != m_[i].rows() || m.back().cols() != m_[i].cols())
            throw FormatError("optimizer state shape mismatch");
    }
    t_ = t;
    m_ = std::move(m);
    v_ = std::move(v);
}

// ---- trainer ---------------------------------------------------------------

namespace {

std::string rng_to_string(const std::mt19937_64& rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

constexpr std::uint32_t kCheckpointVersion = 1;

} // namespace

Trainer::Trainer(TrainingConfig cfg, net::Model& model, membank::MemoryBank& bank)
    : cfg_(std::move(cfg)),
      model_(&model),
      bank_(&bank),
      opt_(model.params(), cfg_.beta1, cfg_.beta2, cfg_.adam_eps, cfg_.weight_decay),
      rng_(cfg_.seed) {
    cfg_.validate();
    const auto& mc = model.config();
    if (mc.dim != cfg_.dim)
        throw InvalidArgument("training dim " + std::to_string(cfg_.dim) + " != model dim " + std::to_string(mc.dim));
    if (mc.strategies != cfg_.strategies || bank.strategies() != cfg_.strategies)
        throw InvalidArgument("strategy count differs between training config, model and bank");
    if (bank.dim() != mc.dim || bank.capacity() != cfg_.memory_capacity)
        throw InvalidArgument("memory bank shape does not match the configuration");
    for (int g = 0; g < bank.strategies(); ++g)
        if (bank.rows(g) != 0) throw InvalidArgument("memory bank must be empty before training");
    state_.rng_state = rng_to_string(rng_);
}

int Trainer::batches_per_epoch(std::size_t n) const {
    return static_cast<int>((n + static_cast<std::size_t>(cfg_.batch_size) - 1) / static_cast<std::size_t>(cfg_.batch_size));
}

StepRecord Trainer::train_batch(const std::vector<const pipeline::EncodedSample*>& batch, int total_steps) {
    if (batch.empty()) throw InvalidArgument("empty batch");
    const auto weights = cfg_.loss_weights();
    const nn::RunContext ctx{true, model_->config().dropout, &rng_};

    ag::Gradients grads(model_->params());
    std::vector<std::pair<int, RowVector>> patterns;
    StepRecord rec;
    for (const auto* s : batch) {
        const Matrix memory = cfg_.no_mem ? Matrix(0, model_->config().dim) : bank_->read(s->strategy);
        ag::Tape tape(model_->params());
        auto fw = model_->forward_train(tape, *s, memory, weights, cfg_.no_mem, ctx);
        if (!std::isfinite(fw.losses.total))
            throw Error("non-finite loss at batch " + std::to_string(state_.step) + " (conv " +
                        std::to_string(s->conv_id) + ", turn " + std::to_string(s->turn) +
                        "): L_g=" + std::to_string(fw.losses.generation) + " L_s=" +
                        std::to_string(fw.losses.strategy) + " L_r=" + std::to_string(fw.losses.pattern));
        tape.backward(fw.total, grads);
        rec.loss.generation += fw.losses.generation;
        rec.loss.strategy += fw.losses.strategy;
        rec.loss.pattern += fw.losses.pattern;
        rec.loss.total += fw.losses.total;
        patterns.emplace_back(s->strategy, fw.pattern);
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    grads.scale(inv);
    rec.loss.generation *= inv;
    rec.loss.strategy *= inv;
    rec.loss.pattern *= inv;
    rec.loss.total *= inv;

    rec.grad_norm = clip_global_norm(grads, cfg_.clip_norm);
    if (!std::isfinite(rec.grad_norm))
        throw Error("non-finite gradient norm at batch " + std::to_string(state_.step));
    rec.lr = learning_rate(state_.step, cfg_.learning_rate, cfg_.warmup_steps, total_steps);
    opt_.step(model_->params(), grads, rec.lr);
    ++state_.step;
    rec.step = state_.step;
    rec.epoch = state_.epoch;

    if (!cfg_.no_mem)
        for (const auto& [g, r] : patterns) bank_->store(g, r);
    return rec;
}

TrainResult Trainer::fit(const std::vector<pipeline::EncodedSample>& train,
                         const std::vector<pipeline::EncodedSample>& valid,
                         const std::optional<std::filesystem::path>& run_dir,
                         const std::function<void(const StepRecord&)>& on_step) {
    if (train.empty()) throw InvalidArgument("empty training set");
    const int per_epoch = batches_per_epoch(train.size());
    const int total = cfg_.max_steps > 0 ? cfg_.max_steps : cfg_.max_epochs * per_epoch;
    std::ofstream log;
    if (run_dir) {
        std::filesystem::create_directories(*run_dir);
        log.open(*run_dir / "metrics.jsonl", std::ios::app);
        if (!log) throw Error("cannot write " + (*run_dir / "metrics.jsonl").string());
    }

    TrainResult result;
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    while (state_.step < total) {
        if (cfg_.shuffle)
            for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng_() % i]);
        double epoch_loss = 0.0, epoch_lg = 0.0;
        int batches = 0;
        for (std::size_t b = 0; b < order.size() && state_.step < total;
             b += static_cast<std::size_t>(cfg_.batch_size)) {
            std::vector<const pipeline::EncodedSample*> batch;
            for (std::size_t k = b; k < std::min(order.size(), b + static_cast<std::size_t>(cfg_.batch_size)); ++k)
                batch.push_back(&train[order[k]]);
            auto rec = train_batch(batch, total);
            epoch_loss += rec.loss.total;
            epoch_lg += rec.loss.generation;
            ++batches;
            if (on_step) on_step(rec);
            result.steps.push_back(rec);
        }
        ++state_.epoch;
        state_.rng_state = rng_to_string(rng_);

        json line = {{"epoch", state_.epoch},
                     {"step", state_.step},
                     {"train_loss", epoch_loss / std::max(1, batches)},
                     {"train_generation_loss", epoch_lg / std::max(1, batches)}};
        if (!valid.empty()) {
            const double ppl = eval::perplexity(*model_, *bank_, valid, cfg_.no_mem);
            line["val_ppl"] = ppl;
            const bool improved = ppl < state_.best_val_ppl;
            if (improved) state_.best_val_ppl = ppl;
            if (run_dir) {
                const auto last = *run_dir / "last.ckpt";
                save_checkpoint(last);
                result.checkpoints.push_back({last, state_.epoch, state_.step, ppl});
                if (improved) {
                    const auto best = *run_dir / "best.ckpt";
                    save_checkpoint(best);
                    result.best = CheckpointRecord{best, state_.epoch, state_.step, ppl};
                    result.checkpoints.push_back(*result.best);
                }
            } else if (improved) {
                result.best = CheckpointRecord{{}, state_.epoch, state_.step, ppl};
            }
        } else if (run_dir) {
            save_checkpoint(*run_dir / "last.ckpt");
        }
        if (log) log << line.dump() << '\n' << std::flush;
    }
    result.state = state_;
    return result;
}

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw Error("cannot write checkpoint " + tmp);
        out.write("ESCK", 4);
        binio::write<std::uint32_t>(out, kCheckpointVersion);
        const json header = {{"fingerprint", model_->config().fingerprint()},
                             {"model", model_->config().to_json()},
                             {"training", cfg_.to_json()},
                             {"step", state_.step},
                             {"epoch", state_.epoch},
                             {"best_val_ppl", std::isfinite(state_.best_val_ppl) ? json(state_.best_val_ppl) : json()},
                             {"rng", rng_to_string(rng_)}};
        binio::write_string(out, header.dump());
        model_->save(out);
        bank_->save(out);
        opt_.save(out);
        if (!out) throw Error("failed writing checkpoint " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

namespace {

json read_header(std::istream& in, const net::Model& model) {
    binio::expect_magic(in, "ESCK");
    const auto version = binio::read<std::uint32_t>(in);
    if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
    json header = json::parse(binio::read_string(in));
    if (header.at("fingerprint").get<std::uint64_t>() != model.config().fingerprint())
        throw FormatError("checkpoint was written for a different model configuration");
    return header;
}

} // namespace

void Trainer::load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFound("checkpoint not found: " + path.string());
    const json header = read_header(in, *model_);
    model_->load(in);
    *bank_ = membank::MemoryBank::load(in);
    opt_.load(in);
    state_.step = header.at("step").get<int>();
    state_.epoch = header.at("epoch").get<int>();
    state_.best_val_ppl = header.at("best_val_ppl").is_null() ? std::numeric_limits<double>::infinity()
                                                              : header.at("best_val_ppl").get<double>();
    state_.rng_state = header.at("rng").get<std::string>();
    std::istringstream is(state_.rng_state);
    is >> rng_;
}

json load_for_inference(const std::filesystem::path& path, net::Model& model, membank::MemoryBank& bank) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFound("checkpoint not found: " + path.string());
    json header = read_header(in, model);
    model.load(in);
    bank = membank::MemoryBank::load(in);
    return header;
}

} // namespace esc::train
