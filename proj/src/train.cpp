#include "dsrfoc/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "dsrfoc/io.hpp"

namespace dsrfoc::dsr {

namespace {

std::uint64_t splitmix64(std::uint64_t& s) {
    s += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = s;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Flat parameter layout of the gated recurrent cell plus output head.
struct Layout {
    int H, D, V;
    std::size_t wz, uz, bz, wr, ur, br, wc, uc, bc, wo, bo, total;

    Layout(int hidden, int vocab) : H(hidden), D(2 * (vocab + 1)), V(vocab) {
        std::size_t off = 0;
        auto take = [&off](std::size_t n) {
            const std::size_t o = off;
            off += n;
            return o;
        };
        wz = take(static_cast<std::size_t>(H) * D);
        uz = take(static_cast<std::size_t>(H) * H);
        bz = take(H);
        wr = take(static_cast<std::size_t>(H) * D);
        ur = take(static_cast<std::size_t>(H) * H);
        br = take(H);
        wc = take(static_cast<std::size_t>(H) * D);
        uc = take(static_cast<std::size_t>(H) * H);
        bc = take(H);
        wo = take(static_cast<std::size_t>(V) * H);
        bo = take(V);
        total = off;
    }
};

constexpr double kEarlyStopReward = 1.0 - 1e-12;

}  // namespace

// ---------------------------------------------------------------------------
// Dataset

void Dataset::validate() const {
    if (rows.empty()) throw std::invalid_argument("dataset: no rows");
    bool distinct = false;
    const double first = rows.front()[4];
    for (const auto& r : rows) {
        for (double v : r)
            if (!std::isfinite(v)) throw std::invalid_argument("dataset: non-finite value");
        if (r[4] != first) distinct = true;
    }
    if (!distinct)
        throw std::invalid_argument("dataset: targets are constant (sigma_y = 0)");
}

double Dataset::target_mean() const {
    double sum = 0.0;
    for (const auto& r : rows) sum += r[4];
    return sum / static_cast<double>(rows.size());
}

double Dataset::target_std() const {
    const double mean = target_mean();
    double acc = 0.0;
    for (const auto& r : rows) acc += (r[4] - mean) * (r[4] - mean);
    return std::sqrt(acc / static_cast<double>(rows.size()));
}

Dataset Dataset::read_csv(const std::filesystem::path& path) {
    const io::CsvTable table = io::read_csv(path);
    const std::vector<std::string> expected{"x1", "x2", "x3", "x4", "target"};
    if (table.header != expected)
        throw std::runtime_error("dataset CSV must have header x1,x2,x3,x4,target: " +
                                 path.string());
    Dataset d;
    d.source_meta = path.string();
    d.rows.reserve(table.rows.size());
    for (const auto& r : table.rows)
        d.rows.push_back({r[0], r[1], r[2], r[3], r[4]});
    return d;
}

void Dataset::write_csv(const std::filesystem::path& path) const {
    std::string out = "x1,x2,x3,x4,target\n";
    for (const auto& r : rows) {
        for (int i = 0; i < 5; ++i) {
            out += io::format_double(r[i]);
            out += (i == 4) ? '\n' : ',';
        }
    }
    io::atomic_write(path, out);
}

std::uint64_t Dataset::content_hash() const {
    std::uint64_t h = 14695981039346656037ULL;
    auto mix = [&h](double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof(bits));
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xFF;
            h *= 1099511628211ULL;
        }
    };
    for (const auto& r : rows)
        for (double v : r) mix(v);
    return h;
}

// ---------------------------------------------------------------------------
// TrainConfig

std::vector<double> TrainConfig::default_constant_pool() {
    std::vector<double> pool;
    for (int i = 1; i <= 13; ++i) pool.push_back(i);
    pool.push_back(0.5);
    return pool;
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (!(risk_quantile > 0.0 && risk_quantile < 1.0))
        throw std::invalid_argument("risk_quantile must be in (0, 1)");
    if (batch_size * risk_quantile < 1.0)
        throw std::invalid_argument("batch_size * risk_quantile must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
    if (max_length < 1 || static_cast<std::size_t>(max_length) > expr::kMaxLength)
        throw std::invalid_argument("max_length out of range");
    if (entropy_weight < 0.0) throw std::invalid_argument("entropy_weight must be >= 0");
    if (hidden_width < 1) throw std::invalid_argument("hidden_width must be >= 1");
    for (double c : constant_pool)
        if (!std::isfinite(c)) throw std::invalid_argument("constant_pool: non-finite entry");
}

TrainConfig TrainConfig::from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path.string());
    const nlohmann::json j = nlohmann::json::parse(in);

    TrainConfig cfg;
    const std::vector<std::string> known{"batch_size",     "epochs",        "risk_quantile",
                                         "learning_rate",  "max_length",    "entropy_weight",
                                         "constant_pool",  "hidden_width",  "seed"};
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw std::runtime_error("unknown config key: " + key);
    }
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.risk_quantile = j.value("risk_quantile", cfg.risk_quantile);
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.max_length = j.value("max_length", cfg.max_length);
    cfg.entropy_weight = j.value("entropy_weight", cfg.entropy_weight);
    if (j.contains("constant_pool"))
        cfg.constant_pool = j.at("constant_pool").get<std::vector<double>>();
    cfg.hidden_width = j.value("hidden_width", cfg.hidden_width);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// Vocabulary and sequence constraints

Vocabulary::Vocabulary(const std::vector<double>& constant_pool) {
    using expr::Op;
    using expr::Token;
    tokens_.push_back(Token::operation(Op::Add));
    tokens_.push_back(Token::operation(Op::Sub));
    tokens_.push_back(Token::operation(Op::Mul));
    tokens_.push_back(Token::operation(Op::Div));
    tokens_.push_back(Token::operation(Op::Sin));
    tokens_.push_back(Token::operation(Op::Cos));
    for (int v = 0; v < 4; ++v) tokens_.push_back(Token::variable(v));
    for (double c : constant_pool) tokens_.push_back(Token::constant(c));
}

SequenceBuilder::SequenceBuilder(const Vocabulary& vocab, int max_length)
    : vocab_(&vocab), max_length_(max_length) {}

int SequenceBuilder::parent() const {
    return stack_.empty() ? static_cast<int>(vocab_->size()) : stack_.back().token;
}

int SequenceBuilder::sibling() const {
    if (stack_.empty() || stack_.back().first_child_root < 0)
        return static_cast<int>(vocab_->size());
    return stack_.back().first_child_root;
}

void SequenceBuilder::valid_mask(std::vector<std::uint8_t>& valid) const {
    valid.assign(vocab_->size(), 0);
    const long budget = max_length_ - static_cast<long>(tokens_.size()) - 1;
    const bool parent_unary = !stack_.empty() && vocab_->is_unary(
                                  static_cast<std::size_t>(stack_.back().token));
    for (std::size_t i = 0; i < vocab_->size(); ++i) {
        const int a = vocab_->arity(i);
        if (open_slots_ - 1 + a > budget) continue;
        if (a == 1 && parent_unary) continue;
        if (open_slots_ == 1 && a == 0 && !has_variable_ && !vocab_->is_variable(i)) continue;
        valid[i] = 1;
    }
}

void SequenceBuilder::push(int token_index) {
    const int a = vocab_->arity(static_cast<std::size_t>(token_index));
    tokens_.push_back(token_index);
    open_slots_ += a - 1;
    if (vocab_->is_variable(static_cast<std::size_t>(token_index))) has_variable_ = true;

    if (a > 0) {
        stack_.push_back({token_index, a, -1});
        return;
    }
    int root = token_index;
    while (true) {
        if (stack_.empty()) {
            complete_ = true;
            return;
        }
        Node& top = stack_.back();
        --top.pending;
        if (top.pending > 0) {
            top.first_child_root = root;
            return;
        }
        root = top.token;
        stack_.pop_back();
    }
}

// ---------------------------------------------------------------------------
// Policy

struct Policy::StepCache {
    int parent = 0;
    int sibling = 0;
    int chosen = -1;
    std::vector<std::uint8_t> mask;
    std::vector<double> h_prev, z, r, c, h, probs;
};

Policy::Policy(const std::vector<double>& constant_pool, int hidden_width, int max_length,
               std::uint64_t seed)
    : vocab_(constant_pool), hidden_(hidden_width), max_length_(max_length),
      rng_state_(seed) {
    const Layout L(hidden_, static_cast<int>(vocab_.size()));
    params_.assign(L.total, 0.0);
    grad_.assign(L.total, 0.0);
    adam_m_.assign(L.total, 0.0);
    adam_v_.assign(L.total, 0.0);
    // Recurrent and input weights start small and symmetric-free; bias and the
    // output head start at zero so the first batch is near-uniform over valid
    // tokens.
    const double a = 0.08;
    auto init_block = [&](std::size_t off, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) params_[off + i] = a * (2.0 * uniform() - 1.0);
    };
    init_block(L.wz, static_cast<std::size_t>(L.H) * L.D);
    init_block(L.uz, static_cast<std::size_t>(L.H) * L.H);
    init_block(L.wr, static_cast<std::size_t>(L.H) * L.D);
    init_block(L.ur, static_cast<std::size_t>(L.H) * L.H);
    init_block(L.wc, static_cast<std::size_t>(L.H) * L.D);
    init_block(L.uc, static_cast<std::size_t>(L.H) * L.H);
}

double Policy::uniform() {
    return static_cast<double>(splitmix64(rng_state_) >> 11) * 0x1.0p-53;
}

void Policy::forward_step(int parent, int sibling, const std::vector<double>& h_prev,
                          const std::vector<std::uint8_t>& mask, StepCache& cache) const {
    const Layout L(hidden_, static_cast<int>(vocab_.size()));
    const int H = L.H;
    const int V = L.V;
    const int col_p = parent;
    const int col_s = (L.V + 1) + sibling;

    cache.parent = parent;
    cache.sibling = sibling;
    cache.mask = mask;
    cache.h_prev = h_prev;
    cache.z.assign(H, 0.0);
    cache.r.assign(H, 0.0);
    cache.c.assign(H, 0.0);
    cache.h.assign(H, 0.0);
    cache.probs.assign(V, 0.0);

    const double* P = params_.data();
    for (int i = 0; i < H; ++i) {
        double pre_z = P[L.bz + i] + P[L.wz + static_cast<std::size_t>(i) * L.D + col_p] +
                       P[L.wz + static_cast<std::size_t>(i) * L.D + col_s];
        double pre_r = P[L.br + i] + P[L.wr + static_cast<std::size_t>(i) * L.D + col_p] +
                       P[L.wr + static_cast<std::size_t>(i) * L.D + col_s];
        const double* uz_row = P + L.uz + static_cast<std::size_t>(i) * H;
        const double* ur_row = P + L.ur + static_cast<std::size_t>(i) * H;
        for (int j = 0; j < H; ++j) {
            pre_z += uz_row[j] * h_prev[j];
            pre_r += ur_row[j] * h_prev[j];
        }
        cache.z[i] = sigmoid(pre_z);
        cache.r[i] = sigmoid(pre_r);
    }
    for (int i = 0; i < H; ++i) {
        double pre_c = P[L.bc + i] + P[L.wc + static_cast<std::size_t>(i) * L.D + col_p] +
                       P[L.wc + static_cast<std::size_t>(i) * L.D + col_s];
        const double* uc_row = P + L.uc + static_cast<std::size_t>(i) * H;
        for (int j = 0; j < H; ++j) pre_c += uc_row[j] * (cache.r[j] * h_prev[j]);
        cache.c[i] = std::tanh(pre_c);
        cache.h[i] = (1.0 - cache.z[i]) * h_prev[i] + cache.z[i] * cache.c[i];
    }

    // masked softmax over the output head
    std::vector<double> logits(V, 0.0);
    double max_logit = -std::numeric_limits<double>::infinity();
    for (int v = 0; v < V; ++v) {
        if (!mask[v]) continue;
        double l = P[L.bo + v];
        const double* wo_row = P + L.wo + static_cast<std::size_t>(v) * H;
        for (int j = 0; j < H; ++j) l += wo_row[j] * cache.h[j];
        logits[v] = l;
        max_logit = std::max(max_logit, l);
    }
    double denom = 0.0;
    for (int v = 0; v < V; ++v)
        if (mask[v]) denom += std::exp(logits[v] - max_logit);
    for (int v = 0; v < V; ++v)
        if (mask[v]) cache.probs[v] = std::exp(logits[v] - max_logit) / denom;
}

Policy::Sampled Policy::sample() {
    SequenceBuilder builder(vocab_, max_length_);
    std::vector<double> h(hidden_, 0.0);
    std::vector<std::uint8_t> mask;
    StepCache cache;

    Sampled out;
    while (!builder.complete()) {
        builder.valid_mask(mask);
        forward_step(builder.parent(), builder.sibling(), h, mask, cache);

        const double u = uniform();
        double acc = 0.0;
        int chosen = -1;
        for (std::size_t v = 0; v < vocab_.size(); ++v) {
            if (!mask[v]) continue;
            acc += cache.probs[v];
            chosen = static_cast<int>(v);
            if (u < acc) break;
        }
        out.tokens.push_back(chosen);
        out.log_prob += std::log(cache.probs[chosen]);
        builder.push(chosen);
        h = cache.h;
    }

    out.expression.tokens.reserve(out.tokens.size());
    for (int idx : out.tokens)
        out.expression.tokens.push_back(vocab_.token(static_cast<std::size_t>(idx)));
    return out;
}

double Policy::log_prob_of(const std::vector<int>& tokens) const {
    SequenceBuilder builder(vocab_, max_length_);
    std::vector<double> h(hidden_, 0.0);
    std::vector<std::uint8_t> mask;
    StepCache cache;
    double logp = 0.0;
    for (int tok : tokens) {
        builder.valid_mask(mask);
        forward_step(builder.parent(), builder.sibling(), h, mask, cache);
        logp += std::log(cache.probs[tok]);
        builder.push(tok);
        h = cache.h;
    }
    return logp;
}

void Policy::zero_gradient() {
    std::fill(grad_.begin(), grad_.end(), 0.0);
}

void Policy::accumulate(const std::vector<int>& tokens, double pg_weight,
                        double entropy_weight) {
    if (pg_weight == 0.0 && entropy_weight == 0.0) return;

    const Layout L(hidden_, static_cast<int>(vocab_.size()));
    const int H = L.H;
    const int V = L.V;

    // forward replay with cached intermediates
    std::vector<StepCache> steps(tokens.size());
    {
        SequenceBuilder builder(vocab_, max_length_);
        std::vector<double> h(hidden_, 0.0);
        std::vector<std::uint8_t> mask;
        for (std::size_t t = 0; t < tokens.size(); ++t) {
            builder.valid_mask(mask);
            forward_step(builder.parent(), builder.sibling(), h, mask, steps[t]);
            steps[t].chosen = tokens[t];
            builder.push(tokens[t]);
            h = steps[t].h;
        }
    }

    const double* P = params_.data();
    double* G = grad_.data();
    std::vector<double> dh_next(H, 0.0);
    std::vector<double> dlogits(V, 0.0);
    std::vector<double> dh(H), dz(H), dc(H), dpre(H), drh(H), dh_prev(H);

    for (std::size_t t = tokens.size(); t-- > 0;) {
        const StepCache& s = steps[t];

        // d objective / d logits: REINFORCE term plus entropy bonus
        double entropy = 0.0;
        if (entropy_weight != 0.0) {
            for (int v = 0; v < V; ++v)
                if (s.mask[v] && s.probs[v] > 0.0) entropy -= s.probs[v] * std::log(s.probs[v]);
        }
        for (int v = 0; v < V; ++v) {
            double g = 0.0;
            if (s.mask[v]) {
                if (pg_weight != 0.0)
                    g += pg_weight * ((v == s.chosen ? 1.0 : 0.0) - s.probs[v]);
                if (entropy_weight != 0.0 && s.probs[v] > 0.0)
                    g += entropy_weight * (-s.probs[v] * (std::log(s.probs[v]) + entropy));
            }
            dlogits[v] = g;
        }

        // output head
        for (int i = 0; i < H; ++i) dh[i] = dh_next[i];
        for (int v = 0; v < V; ++v) {
            const double g = dlogits[v];
            if (g == 0.0) continue;
            double* gw = G + L.wo + static_cast<std::size_t>(v) * H;
            const double* wo_row = P + L.wo + static_cast<std::size_t>(v) * H;
            for (int j = 0; j < H; ++j) {
                gw[j] += g * s.h[j];
                dh[j] += g * wo_row[j];
            }
            G[L.bo + v] += g;
        }

        const int col_p = s.parent;
        const int col_s = (V + 1) + s.sibling;

        // h = (1-z) h_prev + z c
        for (int i = 0; i < H; ++i) {
            dz[i] = dh[i] * (s.c[i] - s.h_prev[i]);
            dc[i] = dh[i] * s.z[i];
            dh_prev[i] = dh[i] * (1.0 - s.z[i]);
        }

        // candidate: c = tanh(Wc x + Uc (r h_prev) + bc)
        for (int i = 0; i < H; ++i) dpre[i] = dc[i] * (1.0 - s.c[i] * s.c[i]);
        std::fill(drh.begin(), drh.end(), 0.0);
        for (int i = 0; i < H; ++i) {
            const double g = dpre[i];
            if (g == 0.0) continue;
            G[L.wc + static_cast<std::size_t>(i) * L.D + col_p] += g;
            G[L.wc + static_cast<std::size_t>(i) * L.D + col_s] += g;
            G[L.bc + i] += g;
            double* guc = G + L.uc + static_cast<std::size_t>(i) * H;
            const double* uc_row = P + L.uc + static_cast<std::size_t>(i) * H;
            for (int j = 0; j < H; ++j) {
                guc[j] += g * (s.r[j] * s.h_prev[j]);
                drh[j] += g * uc_row[j];
            }
        }
        for (int j = 0; j < H; ++j) dh_prev[j] += drh[j] * s.r[j];

        // reset gate: r = sigmoid(Wr x + Ur h_prev + br)
        for (int i = 0; i < H; ++i) dpre[i] = drh[i] * s.h_prev[i] * s.r[i] * (1.0 - s.r[i]);
        for (int i = 0; i < H; ++i) {
            const double g = dpre[i];
            if (g == 0.0) continue;
            G[L.wr + static_cast<std::size_t>(i) * L.D + col_p] += g;
            G[L.wr + static_cast<std::size_t>(i) * L.D + col_s] += g;
            G[L.br + i] += g;
            double* gur = G + L.ur + static_cast<std::size_t>(i) * H;
            const double* ur_row = P + L.ur + static_cast<std::size_t>(i) * H;
            for (int j = 0; j < H; ++j) {
                gur[j] += g * s.h_prev[j];
                dh_prev[j] += g * ur_row[j];
            }
        }

        // update gate: z = sigmoid(Wz x + Uz h_prev + bz)
        for (int i = 0; i < H; ++i) dpre[i] = dz[i] * s.z[i] * (1.0 - s.z[i]);
        for (int i = 0; i < H; ++i) {
            const double g = dpre[i];
            if (g == 0.0) continue;
            G[L.wz + static_cast<std::size_t>(i) * L.D + col_p] += g;
            G[L.wz + static_cast<std::size_t>(i) * L.D + col_s] += g;
            G[L.bz + i] += g;
            double* guz = G + L.uz + static_cast<std::size_t>(i) * H;
            const double* uz_row = P + L.uz + static_cast<std::size_t>(i) * H;
            for (int j = 0; j < H; ++j) {
                guz[j] += g * s.h_prev[j];
                dh_prev[j] += g * uz_row[j];
            }
        }

        dh_next = dh_prev;
    }
}

void Policy::adam_step(double learning_rate) {
    constexpr double beta1 = 0.9;
    constexpr double beta2 = 0.999;
    constexpr double eps = 1e-8;
    ++adam_t_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(adam_t_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(adam_t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const double g = grad_[i];
        adam_m_[i] = beta1 * adam_m_[i] + (1.0 - beta1) * g;
        adam_v_[i] = beta2 * adam_v_[i] + (1.0 - beta2) * g * g;
        const double mhat = adam_m_[i] / bc1;
        const double vhat = adam_v_[i] / bc2;
        params_[i] += learning_rate * mhat / (std::sqrt(vhat) + eps);
    }
}

// ---------------------------------------------------------------------------
// Reward and training loop

double reward(const expr::Expression& e, const Dataset& data) {
    const double sigma = data.target_std();
    double se = 0.0;
    for (const auto& r : data.rows) {
        double pred = 0.0;
        if (!expr::try_eval(e, {r[0], r[1], r[2], r[3]}, pred)) return 0.0;
        const double err = pred - r[4];
        se += err * err;
    }
    const double rmse = std::sqrt(se / static_cast<double>(data.rows.size()));
    if (!std::isfinite(rmse)) return 0.0;
    return 1.0 / (1.0 + rmse / sigma);
}

double risk_quantile_threshold(std::vector<double> rewards, double epsilon) {
    if (rewards.empty()) throw std::invalid_argument("risk_quantile_threshold: empty batch");
    const auto n = rewards.size();
    auto idx = static_cast<std::size_t>(
        std::ceil((1.0 - epsilon) * static_cast<double>(n)));
    idx = std::min(std::max<std::size_t>(idx, 1), n) - 1;
    std::nth_element(rewards.begin(), rewards.begin() + static_cast<std::ptrdiff_t>(idx),
                     rewards.end());
    return rewards[idx];
}

AxisResult train_axis(const Dataset& data, const TrainConfig& cfg, std::uint64_t axis_seed,
                      const std::string& axis_name, std::vector<EpochLog>* log) {
    cfg.validate();
    data.validate();

    Policy policy(cfg.constant_pool, cfg.hidden_width, cfg.max_length, axis_seed);
    const int N = cfg.batch_size;

    AxisResult result;
    result.best_reward = -1.0;

    std::vector<Policy::Sampled> batch(static_cast<std::size_t>(N));
    std::vector<double> rewards(static_cast<std::size_t>(N));

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        double mean = 0.0;
        double epoch_best = 0.0;
        for (int i = 0; i < N; ++i) {
            batch[i] = policy.sample();
            rewards[i] = reward(batch[i].expression, data);
            mean += rewards[i];
            epoch_best = std::max(epoch_best, rewards[i]);
            if (rewards[i] > result.best_reward) {
                result.best_reward = rewards[i];
                result.best_expression = batch[i].expression;
            }
        }
        mean /= static_cast<double>(N);

        const double r_eps = risk_quantile_threshold(rewards, cfg.risk_quantile);
        int k = 0;
        for (int i = 0; i < N; ++i)
            if (rewards[i] > r_eps) ++k;

        policy.zero_gradient();
        const double ent_w = cfg.entropy_weight / static_cast<double>(N);
        for (int i = 0; i < N; ++i) {
            const double pg_w =
                (k > 0 && rewards[i] > r_eps) ? (rewards[i] - r_eps) / static_cast<double>(k)
                                              : 0.0;
            policy.accumulate(batch[i].tokens, pg_w, ent_w);
        }
        policy.adam_step(cfg.learning_rate);

        if (log) log->push_back({epoch, axis_name, epoch_best, r_eps, mean});
        result.epochs_run = epoch;
        if (result.best_reward >= kEarlyStopReward) break;  // exact fit found
    }
    return result;
}

TrainResult train(const Dataset& data_vd, const Dataset& data_vq, const TrainConfig& cfg) {
    std::uint64_t s = cfg.seed;
    const std::uint64_t seed_vd = splitmix64(s);
    const std::uint64_t seed_vq = splitmix64(s);

    TrainResult result;
    result.vd = train_axis(data_vd, cfg, seed_vd, "vd", &result.log);
    result.vq = train_axis(data_vq, cfg, seed_vq, "vq", &result.log);
    return result;
}

void write_training_output(const std::filesystem::path& out_dir, const TrainResult& result,
                           const TrainConfig& cfg, std::uint64_t vd_hash,
                           std::uint64_t vq_hash) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    io::atomic_write(out_dir / "vd.expr", expr::to_text(result.vd.best_expression) + "\n");
    io::atomic_write(out_dir / "vq.expr", expr::to_text(result.vq.best_expression) + "\n");

    std::string log = "epoch,axis,best_reward,quantile_reward,mean_reward\n";
    for (const auto& e : result.log) {
        log += std::to_string(e.epoch) + "," + e.axis + "," + io::format_double(e.best_reward) +
               "," + io::format_double(e.quantile_reward) + "," +
               io::format_double(e.mean_reward) + "\n";
    }
    io::atomic_write(out_dir / "train_log.csv", log);

    char hex[32];
    nlohmann::json meta;
    meta["seed"] = cfg.seed;
    meta["config"] = {
        {"batch_size", cfg.batch_size},
        {"epochs", cfg.epochs},
        {"risk_quantile", cfg.risk_quantile},
        {"learning_rate", cfg.learning_rate},
        {"max_length", cfg.max_length},
        {"entropy_weight", cfg.entropy_weight},
        {"constant_pool", cfg.constant_pool},
        {"hidden_width", cfg.hidden_width},
    };
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(vd_hash));
    meta["dataset_hash"]["vd"] = hex;
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(vq_hash));
    meta["dataset_hash"]["vq"] = hex;
    // raw SI features; identity scaling recorded so consumers need not guess
    meta["feature_scaling"] = {{"offset", {0.0, 0.0, 0.0, 0.0}}, {"scale", {1.0, 1.0, 1.0, 1.0}}};
    meta["best_reward"] = {{"vd", result.vd.best_reward}, {"vq", result.vq.best_reward}};
    meta["epochs_run"] = {{"vd", result.vd.epochs_run}, {"vq", result.vq.epochs_run}};
    io::atomic_write(out_dir / "metadata.json", meta.dump(2) + "\n");
}

}  // namespace dsrfoc::dsr
