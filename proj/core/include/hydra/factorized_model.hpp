#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace hydra {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Width of every head's output; p[1] is the positive-class probability.
inline constexpr std::size_t kHeadOutputs = 2;
/// Probabilities are clamped to [eps, 1 - eps] before taking logs.
inline constexpr double kProbEpsilon = 1e-12;

struct TextEncoderConfig {
    std::size_t hash_dim = 4096;  // hashed n-gram feature width
    std::size_t hidden_dim = 64;  // d
    std::size_t ngram_max = 2;

    bool operator==(const TextEncoderConfig&) const = default;
};

/// Throws ConfigError unless hash_dim >= hidden_dim >= 1, ngram_max >= 1 and
/// hash_dim fits in 32 bits.
void validate(const TextEncoderConfig& cfg);

/// L2-normalized hashed n-gram counts, sorted by index with no duplicates.
struct SparseFeatures {
    std::vector<std::uint32_t> index;
    std::vector<double> value;
};

/// Tokens are whitespace-separated words run through the shared Tokenizer,
/// except "[CLS]" and "[SEP]" which stay as literal tokens. Every n-gram for
/// n in [1, ngram_max] is hashed with FNV-1a into [0, hash_dim).
[[nodiscard]] SparseFeatures featurize(std::string_view text, const TextEncoderConfig& cfg);

/// Shared base: s = tanh(B1 * (E^T x) + c1).
struct BaseParams {
    Matrix E;   // hash_dim x d
    Matrix B1;  // d x d
    Vector c1;  // d
};

/// Per-user head: p = softmax(W2 * tanh(W1 * s + b1) + b2).
struct HeadParams {
    Matrix W1;  // d x d
    Vector b1;  // d
    Matrix W2;  // 2 x d
    Vector b2;  // 2
};

/// Weights uniform in [-1/sqrt(d), 1/sqrt(d)], biases zero.
[[nodiscard]] HeadParams make_head(std::size_t d, std::uint64_t seed);
[[nodiscard]] HeadParams zero_head(std::size_t d);

/// Throws ShapeError if dim(s) differs from the head's input width.
[[nodiscard]] Vector head_forward(const HeadParams& head, const Vector& s);

/// Binary cross-entropy on p[1] with clamping; y must be 0 or 1.
[[nodiscard]] double ce_loss(const Vector& p, int y);

struct TrainConfig {
    double learning_rate = 1e-2;
    std::size_t epochs = 2;
    std::size_t batch_size = 64;
    std::optional<double> clip;  // global gradient-norm cap per batch

    bool operator==(const TrainConfig&) const = default;
};

/// Throws ConfigError unless learning_rate >= 0, epochs >= 1, batch_size >= 1
/// and any clip is positive.
void validate(const TrainConfig& cfg);

struct TextExample {
    std::string x;
    int y = 0;
};

/// A training example routed to the head stored under `head_key`.
struct RoutedExample {
    std::string head_key;
    std::string x;
    int y = 0;
};

/// Analytic gradient of the loss for one example. Only the E rows of active
/// features are materialized; other heads get no entry at all.
struct Gradients {
    double loss = 0.0;
    Vector p;
    std::map<std::uint32_t, Vector> dE_rows;
    Matrix dB1;
    Vector dc1;
    HeadParams dhead;
};

/// Shared base plus a keyed table of per-user heads. Training mutates only the
/// base and the heads it routes to; prediction is const and safe for
/// concurrent readers.
class FactorizedModel {
  public:
    /// Base initialized from `seed`: E uniform in [-1, 1], B1 uniform in
    /// [-1/sqrt(d), 1/sqrt(d)], c1 zero.
    FactorizedModel(TextEncoderConfig cfg, std::uint64_t seed);
    /// Adopts existing base parameters; throws ShapeError on a size mismatch.
    FactorizedModel(TextEncoderConfig cfg, std::uint64_t seed, BaseParams base);

    [[nodiscard]] const TextEncoderConfig& config() const noexcept { return cfg_; }
    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] std::size_t hidden_dim() const noexcept { return cfg_.hidden_dim; }

    [[nodiscard]] const BaseParams& base() const noexcept { return base_; }
    [[nodiscard]] BaseParams& base() noexcept { return base_; }

    [[nodiscard]] bool has_head(std::string_view key) const;
    /// Throws RoutingError when no head is stored under `key`.
    [[nodiscard]] const HeadParams& head(std::string_view key) const;
    [[nodiscard]] HeadParams& head(std::string_view key);
    [[nodiscard]] const std::map<std::string, HeadParams, std::less<>>& heads() const noexcept {
        return heads_;
    }

    /// Creates a freshly initialized head seeded by fnv1a64(key) ^ seed.
    /// Throws ConflictError if the key exists.
    HeadParams& add_head(const std::string& key);
    /// Returns the existing head or adds a new one.
    HeadParams& ensure_head(const std::string& key);
    /// Stores a copy of `head`; throws ShapeError on a size mismatch.
    void set_head(const std::string& key, HeadParams head);
    void remove_head(std::string_view key);

    [[nodiscard]] Vector encode(std::string_view text) const;
    [[nodiscard]] Vector encode(const SparseFeatures& x) const;
    [[nodiscard]] Vector predict(std::string_view key, std::string_view text) const;
    /// Positive-class probability p[1].
    [[nodiscard]] double score(std::string_view key, std::string_view text) const;

    [[nodiscard]] Gradients gradients(std::string_view key, std::string_view text, int y) const;

    /// One SGD step on a single example; returns the pre-step loss.
    double train_step(std::string_view key, std::string_view x, int y, const TrainConfig& cfg);

    /// One SGD step on a batch. Gradients are averaged over the batch: the
    /// base receives every example's contribution, each head only those of
    /// its own examples. Heads must exist. Returns the mean pre-step loss.
    double train_batch(std::span<const RoutedExample> batch, const TrainConfig& cfg);

    /// Same averaging as train_batch but the base stays frozen; every example
    /// goes to the head under `key`.
    double fit_batch(std::string_view key, std::span<const TextExample> batch,
                     const TrainConfig& cfg);

  private:
    TextEncoderConfig cfg_;
    std::uint64_t seed_;
    BaseParams base_;
    std::map<std::string, HeadParams, std::less<>> heads_;
};

/// Joint training for cfg.epochs epochs. Each epoch shuffles all examples with
/// a generator seeded by `shuffle_seed` and walks them in batches; heads are
/// created on first sight. Returns the mean pre-step loss of each epoch. An
/// empty example list leaves the model untouched.
std::vector<double> train_model(FactorizedModel& model, std::span<const RoutedExample> examples,
                                const TrainConfig& cfg, std::uint64_t shuffle_seed);

/// Adds a head for a new user and trains it with the base frozen, walking the
/// examples in the given order. Throws ConflictError if the user already has a
/// head. Per-epoch mean losses go to `epoch_losses` when provided.
HeadParams fit_new_head(FactorizedModel& model, const std::string& key,
                        std::span<const TextExample> examples, const TrainConfig& cfg,
                        std::vector<double>* epoch_losses = nullptr);

}  // namespace hydra
