#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dsrfoc/expr.hpp"

namespace dsrfoc::dsr {

/// Supervised rows (x1..x4, target voltage); one dataset per output axis.
struct Dataset {
    std::vector<std::array<double, 5>> rows;
    std::string source_meta;

    /// Throws std::invalid_argument on non-finite rows or constant targets.
    void validate() const;
    double target_mean() const;
    double target_std() const;  // population standard deviation

    static Dataset read_csv(const std::filesystem::path& path);
    void write_csv(const std::filesystem::path& path) const;

    /// FNV-1a over the serialized rows; recorded in training metadata.
    std::uint64_t content_hash() const;
};

struct TrainConfig {
    int batch_size = 500;
    int epochs = 200;
    double risk_quantile = 0.05;  // epsilon: fraction of the batch kept for the gradient
    double learning_rate = 0.02;
    int max_length = 32;
    double entropy_weight = 0.01;
    std::vector<double> constant_pool = default_constant_pool();
    int hidden_width = 32;
    std::uint64_t seed = 0;

    static std::vector<double> default_constant_pool();
    void validate() const;
    static TrainConfig from_json_file(const std::filesystem::path& path);
};

/// Token inventory the policy samples from: binary ops, sin/cos, x1..x4, then
/// the constant pool. Index order is fixed; it defines the policy output layout.
class Vocabulary {
public:
    explicit Vocabulary(const std::vector<double>& constant_pool);

    std::size_t size() const { return tokens_.size(); }
    const expr::Token& token(std::size_t i) const { return tokens_[i]; }
    int arity(std::size_t i) const { return tokens_[i].arity(); }
    bool is_variable(std::size_t i) const { return tokens_[i].op == expr::Op::Var; }
    bool is_unary(std::size_t i) const { return tokens_[i].arity() == 1; }

private:
    std::vector<expr::Token> tokens_;
};

/// Incremental prefix-sequence constraints: arity accounting, the length
/// budget, parent/sibling conditioning context, and the sampling mask.
class SequenceBuilder {
public:
    SequenceBuilder(const Vocabulary& vocab, int max_length);

    bool complete() const { return complete_; }
    std::size_t length() const { return tokens_.size(); }
    const std::vector<int>& tokens() const { return tokens_; }

    /// Conditioning ids for the next position; vocab.size() encodes "none".
    int parent() const;
    int sibling() const;

    /// valid[i] = 1 iff vocabulary token i may be emitted next:
    /// (a) the sequence stays completable within max_length,
    /// (b) no unary operator directly inside a unary operator,
    /// (c) a terminal that would finish a variable-free sequence is rejected
    ///     unless it is itself a variable.
    void valid_mask(std::vector<std::uint8_t>& valid) const;

    void push(int token_index);

private:
    struct Node {
        int token = -1;
        int pending = 0;          // children still to generate
        int first_child_root = -1;
    };

    const Vocabulary* vocab_;
    int max_length_;
    std::vector<int> tokens_;
    std::vector<Node> stack_;
    long open_slots_ = 1;
    bool has_variable_ = false;
    bool complete_ = false;
};

/// Single gated recurrent layer conditioned on (parent, sibling) one-hots,
/// with a linear head over the vocabulary. Owns its Adam state so the whole
/// policy update is reproducible from the seed.
class Policy {
public:
    Policy(const std::vector<double>& constant_pool, int hidden_width, int max_length,
           std::uint64_t seed);

    struct Sampled {
        expr::Expression expression;
        double log_prob = 0.0;
        std::vector<int> tokens;  // vocabulary indices
    };

    /// Autoregressive masked sampling; total by construction.
    Sampled sample();

    /// Log-probability of an existing token sequence under the current
    /// parameters (contexts and masks are replayed deterministically).
    double log_prob_of(const std::vector<int>& tokens) const;

    void zero_gradient();

    /// Accumulates pg_weight * grad(log p(tokens)) + entropy_weight *
    /// grad(sum_t H(policy_t)) into the gradient buffer.
    void accumulate(const std::vector<int>& tokens, double pg_weight, double entropy_weight);

    /// Adam ascent step over the accumulated gradient.
    void adam_step(double learning_rate);

    const Vocabulary& vocabulary() const { return vocab_; }
    std::vector<double>& parameters() { return params_; }
    const std::vector<double>& parameters() const { return params_; }

private:
    struct StepCache;
    void forward_step(int parent, int sibling, const std::vector<double>& h_prev,
                      const std::vector<std::uint8_t>& mask, StepCache& cache) const;

    Vocabulary vocab_;
    int hidden_ = 0;
    int max_length_ = 0;
    std::uint64_t rng_state_ = 0;

    std::vector<double> params_;
    std::vector<double> grad_;
    std::vector<double> adam_m_;
    std::vector<double> adam_v_;
    long adam_t_ = 0;

    double uniform();  // [0, 1)
};

/// Fitness 1/(1 + RMSE/sigma_y); evaluation failures and non-finite
/// predictions map to 0.
double reward(const expr::Expression& e, const Dataset& data);

/// Empirical (1 - epsilon) quantile as an order statistic, no interpolation.
double risk_quantile_threshold(std::vector<double> rewards, double epsilon);

struct EpochLog {
    int epoch = 0;
    std::string axis;
    double best_reward = 0.0;
    double quantile_reward = 0.0;
    double mean_reward = 0.0;
};

struct AxisResult {
    expr::Expression best_expression;
    double best_reward = 0.0;
    int epochs_run = 0;
};

struct TrainResult {
    AxisResult vd;
    AxisResult vq;
    std::vector<EpochLog> log;
};

/// Trains the two axes as independent single-output problems (fresh policy
/// per axis, seeds derived from cfg.seed). Deterministic for a fixed config.
TrainResult train(const Dataset& data_vd, const Dataset& data_vq, const TrainConfig& cfg);

/// Single-axis variant used by calibration tests.
AxisResult train_axis(const Dataset& data, const TrainConfig& cfg, std::uint64_t axis_seed,
                      const std::string& axis_name, std::vector<EpochLog>* log);

/// Writes vd.expr, vq.expr, train_log.csv and metadata.json into out_dir.
void write_training_output(const std::filesystem::path& out_dir, const TrainResult& result,
                           const TrainConfig& cfg, std::uint64_t vd_hash,
                           std::uint64_t vq_hash);

}  // namespace dsrfoc::dsr
