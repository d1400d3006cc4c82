#include "hydra/factorized_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hydra/error.hpp"
#include "hydra/random.hpp"
#include "hydra/text.hpp"

namespace hydra {
namespace {

constexpr std::string_view kSentinels[] = {"[CLS]", "[SEP]"};

std::vector<std::string> feature_tokens(std::string_view text) {
    static const Tokenizer tokenizer;
    std::vector<std::string> tokens;
    for (const auto& word : split_whitespace(text)) {
        if (std::find(std::begin(kSentinels), std::end(kSentinels), word) != std::end(kSentinels)) {
            tokens.push_back(word);
            continue;
        }
        for (auto& t : tokenizer.tokenize(word)) {
            tokens.push_back(std::move(t));
        }
    }
    return tokens;
}

void fill_uniform(Matrix& m, Rng& rng, double bound) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = rng.uniform(-bound, bound);
    }
}

void check_label(int y) {
    if (y != 0 && y != 1) {
        throw PreconditionError("binary label must be 0 or 1, got " + std::to_string(y));
    }
}

void check_head_shape(const HeadParams& h, std::size_t d) {
    const auto n = static_cast<Eigen::Index>(d);
    const auto o = static_cast<Eigen::Index>(kHeadOutputs);
    if (h.W1.rows() != n || h.W1.cols() != n || h.b1.size() != n || h.W2.rows() != o ||
        h.W2.cols() != n || h.b2.size() != o) {
        throw ShapeError("head parameters do not match hidden width " + std::to_string(d));
    }
}

// Forward pass with the intermediates backpropagation needs.
struct Trace {
    SparseFeatures x;
    Vector e;  // E^T x
    Vector s;  // base output
    Vector h;  // head hidden layer
    Vector p;
};

Vector softmax(const Vector& z) {
    const double top = z.maxCoeff();
    Vector p = (z.array() - top).exp().matrix();
    return p / p.sum();
}

struct HeadGrad {
    HeadParams d;
    Vector ds;  // gradient with respect to the base output
};

HeadGrad head_backward(const HeadParams& head, const Trace& t, int y) {
    const double p1 = t.p[1];
    Vector dz = Vector::Zero(static_cast<Eigen::Index>(kHeadOutputs));
    if (p1 >= kProbEpsilon && p1 <= 1.0 - kProbEpsilon) {
        dz = t.p;
        dz[y] -= 1.0;
    }
    HeadGrad g;
    g.d.W2 = dz * t.h.transpose();
    g.d.b2 = dz;
    const Vector da = ((head.W2.transpose() * dz).array() * (1.0 - t.h.array().square())).matrix();
    g.d.W1 = da * t.s.transpose();
    g.d.b1 = da;
    g.ds = head.W1.transpose() * da;
    return g;
}

void axpy(HeadParams& acc, const HeadParams& g, double scale) {
    acc.W1 += scale * g.W1;
    acc.b1 += scale * g.b1;
    acc.W2 += scale * g.W2;
    acc.b2 += scale * g.b2;
}

double squared_norm(const HeadParams& g) {
    return g.W1.squaredNorm() + g.b1.squaredNorm() + g.W2.squaredNorm() + g.b2.squaredNorm();
}

void apply(HeadParams& head, const HeadParams& g, double step) {
    head.W1 -= step * g.W1;
    head.b1 -= step * g.b1;
    head.W2 -= step * g.W2;
    head.b2 -= step * g.b2;
}

struct BaseGrad {
    std::map<std::uint32_t, Vector> dE_rows;
    Matrix dB1;
    Vector dc1;
};

double clip_scale(const TrainConfig& cfg, double squared) {
    if (!cfg.clip) {
        return 1.0;
    }
    const double norm = std::sqrt(squared);
    return norm > *cfg.clip ? *cfg.clip / norm : 1.0;
}

}  // namespace

void validate(const TextEncoderConfig& cfg) {
    if (cfg.hidden_dim < 1 || cfg.hash_dim < cfg.hidden_dim) {
        throw ConfigError("encoder config needs hash_dim >= hidden_dim >= 1");
    }
    if (cfg.hash_dim > std::numeric_limits<std::uint32_t>::max()) {
        throw ConfigError("encoder hash_dim must fit in 32 bits");
    }
    if (cfg.ngram_max < 1) {
        throw ConfigError("encoder ngram_max must be at least 1");
    }
}

void validate(const TrainConfig& cfg) {
    if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate)) {
        throw ConfigError("learning rate must be a finite non-negative number");
    }
    if (cfg.epochs < 1 || cfg.batch_size < 1) {
        throw ConfigError("epochs and batch size must be at least 1");
    }
    if (cfg.clip && !(*cfg.clip > 0.0)) {
        throw ConfigError("gradient clip must be positive");
    }
}

SparseFeatures featurize(std::string_view text, const TextEncoderConfig& cfg) {
    const auto tokens = feature_tokens(text);
    std::map<std::uint32_t, double> counts;
    for (std::size_t n = 1; n <= cfg.ngram_max; ++n) {
        for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
            std::string gram = std::to_string(n);
            for (std::size_t k = 0; k < n; ++k) {
                gram.push_back('\x1f');
                gram += tokens[i + k];
            }
            counts[static_cast<std::uint32_t>(fnv1a64(gram) % cfg.hash_dim)] += 1.0;
        }
    }
    SparseFeatures out;
    double norm = 0.0;
    for (const auto& [idx, c] : counts) {
        norm += c * c;
    }
    norm = std::sqrt(norm);
    for (const auto& [idx, c] : counts) {
        out.index.push_back(idx);
        out.value.push_back(c / norm);
    }
    return out;
}

HeadParams make_head(std::size_t d, std::uint64_t seed) {
    HeadParams h = zero_head(d);
    Rng rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(d));
    fill_uniform(h.W1, rng, bound);
    fill_uniform(h.W2, rng, bound);
    return h;
}

HeadParams zero_head(std::size_t d) {
    const auto n = static_cast<Eigen::Index>(d);
    const auto o = static_cast<Eigen::Index>(kHeadOutputs);
    return {Matrix::Zero(n, n), Vector::Zero(n), Matrix::Zero(o, n), Vector::Zero(o)};
}

Vector head_forward(const HeadParams& head, const Vector& s) {
    if (s.size() != head.W1.cols()) {
        throw ShapeError("hidden vector has " + std::to_string(s.size()) + " entries, head expects " +
                         std::to_string(head.W1.cols()));
    }
    const Vector h = (head.W1 * s + head.b1).array().tanh().matrix();
    return softmax(head.W2 * h + head.b2);
}

double ce_loss(const Vector& p, int y) {
    check_label(y);
    const double p1 = std::clamp(p[1], kProbEpsilon, 1.0 - kProbEpsilon);
    return y == 1 ? -std::log(p1) : -std::log(1.0 - p1);
}

FactorizedModel::FactorizedModel(TextEncoderConfig cfg, std::uint64_t seed)
    : cfg_(cfg), seed_(seed) {
    validate(cfg_);
    const auto d = static_cast<Eigen::Index>(cfg_.hidden_dim);
    base_.E = Matrix::Zero(static_cast<Eigen::Index>(cfg_.hash_dim), d);
    base_.B1 = Matrix::Zero(d, d);
    base_.c1 = Vector::Zero(d);
    Rng rng(derive_seed(seed, "base"));
    fill_uniform(base_.E, rng, 1.0);
    fill_uniform(base_.B1, rng, 1.0 / std::sqrt(static_cast<double>(d)));
}

FactorizedModel::FactorizedModel(TextEncoderConfig cfg, std::uint64_t seed, BaseParams base)
    : cfg_(cfg), seed_(seed), base_(std::move(base)) {
    validate(cfg_);
    const auto d = static_cast<Eigen::Index>(cfg_.hidden_dim);
    if (base_.E.rows() != static_cast<Eigen::Index>(cfg_.hash_dim) || base_.E.cols() != d ||
        base_.B1.rows() != d || base_.B1.cols() != d || base_.c1.size() != d) {
        throw ShapeError("base parameters do not match the encoder config");
    }
}

bool FactorizedModel::has_head(std::string_view key) const { return heads_.find(key) != heads_.end(); }

const HeadParams& FactorizedModel::head(std::string_view key) const {
    auto it = heads_.find(key);
    if (it == heads_.end()) {
        throw RoutingError("no head for \"" + std::string(key) + "\"");
    }
    return it->second;
}

HeadParams& FactorizedModel::head(std::string_view key) {
    return const_cast<HeadParams&>(std::as_const(*this).head(key));
}

HeadParams& FactorizedModel::add_head(const std::string& key) {
    auto [it, inserted] = heads_.try_emplace(key, HeadParams{});
    if (!inserted) {
        throw ConflictError("head for \"" + key + "\" already exists");
    }
    it->second = make_head(cfg_.hidden_dim, fnv1a64(key) ^ seed_);
    return it->second;
}

HeadParams& FactorizedModel::ensure_head(const std::string& key) {
    auto it = heads_.find(key);
    return it != heads_.end() ? it->second : add_head(key);
}

void FactorizedModel::set_head(const std::string& key, HeadParams head) {
    check_head_shape(head, cfg_.hidden_dim);
    heads_.insert_or_assign(key, std::move(head));
}

void FactorizedModel::remove_head(std::string_view key) {
    if (auto it = heads_.find(key); it != heads_.end()) {
        heads_.erase(it);
    }
}

Vector FactorizedModel::encode(const SparseFeatures& x) const {
    Vector e = Vector::Zero(static_cast<Eigen::Index>(cfg_.hidden_dim));
    for (std::size_t i = 0; i < x.index.size(); ++i) {
        e += x.value[i] * base_.E.row(x.index[i]).transpose();
    }
    return (base_.B1 * e + base_.c1).array().tanh().matrix();
}

Vector FactorizedModel::encode(std::string_view text) const { return encode(featurize(text, cfg_)); }

Vector FactorizedModel::predict(std::string_view key, std::string_view text) const {
    const HeadParams& h = head(key);
    return head_forward(h, encode(text));
}

double FactorizedModel::score(std::string_view key, std::string_view text) const {
    return predict(key, text)[1];
}

Gradients FactorizedModel::gradients(std::string_view key, std::string_view text, int y) const {
    check_label(y);
    const HeadParams& hp = head(key);
    Trace t;
    t.x = featurize(text, cfg_);
    t.e = Vector::Zero(static_cast<Eigen::Index>(cfg_.hidden_dim));
    for (std::size_t i = 0; i < t.x.index.size(); ++i) {
        t.e += t.x.value[i] * base_.E.row(t.x.index[i]).transpose();
    }
    t.s = (base_.B1 * t.e + base_.c1).array().tanh().matrix();
    t.h = (hp.W1 * t.s + hp.b1).array().tanh().matrix();
    t.p = softmax(hp.W2 * t.h + hp.b2);

    Gradients g;
    g.loss = ce_loss(t.p, y);
    g.p = t.p;
    HeadGrad hg = head_backward(hp, t, y);
    g.dhead = std::move(hg.d);
    const Vector dg = (hg.ds.array() * (1.0 - t.s.array().square())).matrix();
    g.dB1 = dg * t.e.transpose();
    g.dc1 = dg;
    const Vector de = base_.B1.transpose() * dg;
    for (std::size_t i = 0; i < t.x.index.size(); ++i) {
        auto [it, inserted] = g.dE_rows.try_emplace(t.x.index[i], t.x.value[i] * de);
        if (!inserted) {
            it->second += t.x.value[i] * de;
        }
    }
    return g;
}

double FactorizedModel::train_step(std::string_view key, std::string_view x, int y,
                                   const TrainConfig& cfg) {
    const RoutedExample ex{std::string(key), std::string(x), y};
    return train_batch(std::span<const RoutedExample>(&ex, 1), cfg);
}

double FactorizedModel::train_batch(std::span<const RoutedExample> batch, const TrainConfig& cfg) {
    validate(cfg);
    if (batch.empty()) {
        return 0.0;
    }
    for (const auto& ex : batch) {
        static_cast<void>(head(ex.head_key));  // route check before any mutation
    }
    const auto d = static_cast<Eigen::Index>(cfg_.hidden_dim);
    BaseGrad base{{}, Matrix::Zero(d, d), Vector::Zero(d)};
    std::map<std::string, HeadParams, std::less<>> head_grads;
    const double inv = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (const auto& ex : batch) {
        Gradients g = gradients(ex.head_key, ex.x, ex.y);
        loss += g.loss;
        base.dB1 += inv * g.dB1;
        base.dc1 += inv * g.dc1;
        for (auto& [row, grad] : g.dE_rows) {
            auto [it, inserted] = base.dE_rows.try_emplace(row, inv * grad);
            if (!inserted) {
                it->second += inv * grad;
            }
        }
        auto [hit, fresh] = head_grads.try_emplace(ex.head_key, zero_head(cfg_.hidden_dim));
        axpy(hit->second, g.dhead, inv);
    }

    double squared = base.dB1.squaredNorm() + base.dc1.squaredNorm();
    for (const auto& [row, grad] : base.dE_rows) {
        squared += grad.squaredNorm();
    }
    for (const auto& [key, grad] : head_grads) {
        squared += squared_norm(grad);
    }
    const double step = cfg.learning_rate * clip_scale(cfg, squared);

    base_.B1 -= step * base.dB1;
    base_.c1 -= step * base.dc1;
    for (const auto& [row, grad] : base.dE_rows) {
        base_.E.row(row) -= step * grad.transpose();
    }
    for (const auto& [key, grad] : head_grads) {
        apply(head(key), grad, step);
    }
    return loss * inv;
}

double FactorizedModel::fit_batch(std::string_view key, std::span<const TextExample> batch,
                                  const TrainConfig& cfg) {
    validate(cfg);
    if (batch.empty()) {
        return 0.0;
    }
    HeadParams& target = head(key);
    HeadParams grad = zero_head(cfg_.hidden_dim);
    const double inv = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (const auto& ex : batch) {
        check_label(ex.y);
        Trace t;
        t.s = encode(ex.x);
        t.h = (target.W1 * t.s + target.b1).array().tanh().matrix();
        t.p = softmax(target.W2 * t.h + target.b2);
        loss += ce_loss(t.p, ex.y);
        axpy(grad, head_backward(target, t, ex.y).d, inv);
    }
    apply(target, grad, cfg.learning_rate * clip_scale(cfg, squared_norm(grad)));
    return loss * inv;
}

std::vector<double> train_model(FactorizedModel& model, std::span<const RoutedExample> examples,
                                const TrainConfig& cfg, std::uint64_t shuffle_seed) {
    validate(cfg);
    std::vector<double> epoch_losses;
    if (examples.empty()) {
        return epoch_losses;
    }
    for (const auto& ex : examples) {
        model.ensure_head(ex.head_key);
    }
    Rng rng(shuffle_seed);
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<RoutedExample> batch;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            batch.clear();
            for (std::size_t i = start; i < end; ++i) {
                batch.push_back(examples[order[i]]);
            }
            total += model.train_batch(batch, cfg) * static_cast<double>(batch.size());
        }
        epoch_losses.push_back(total / static_cast<double>(order.size()));
    }
    return epoch_losses;
}

HeadParams fit_new_head(FactorizedModel& model, const std::string& key,
                        std::span<const TextExample> examples, const TrainConfig& cfg,
                        std::vector<double>* epoch_losses) {
    validate(cfg);
    model.add_head(key);
    if (epoch_losses != nullptr) {
        epoch_losses->clear();
    }
    if (examples.empty()) {
        return model.head(key);
    }
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        double total = 0.0;
        for (std::size_t start = 0; start < examples.size(); start += cfg.batch_size) {
            const std::size_t len = std::min(cfg.batch_size, examples.size() - start);
            total += model.fit_batch(key, examples.subspan(start, len), cfg) * static_cast<double>(len);
        }
        if (epoch_losses != nullptr) {
            epoch_losses->push_back(total / static_cast<double>(examples.size()));
        }
    }
    return model.head(key);
}

}  // namespace hydra
