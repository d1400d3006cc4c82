#include "hydra/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "hydra/error.hpp"
#include "hydra/random.hpp"

namespace hydra {
namespace {

static_assert(std::endian::native == std::endian::little,
              "model files are written in host byte order, which must be little-endian");

constexpr char kMagic[8] = {'H', 'Y', 'D', 'R', 'A', 'F', 'M', '\0'};

template <typename T>
void put(std::string& out, T value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename Derived>
void put_tensor(std::string& out, const Eigen::PlainObjectBase<Derived>& m) {
    out.append(reinterpret_cast<const char*>(m.data()),
               static_cast<std::size_t>(m.size()) * sizeof(double));
}

class Reader {
  public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    template <typename T>
    T get() {
        T value;
        std::memcpy(&value, take(sizeof(T)).data(), sizeof(T));
        return value;
    }

    template <typename Derived>
    void get_tensor(Eigen::PlainObjectBase<Derived>& m) {
        const auto chunk = take(static_cast<std::size_t>(m.size()) * sizeof(double));
        std::memcpy(m.data(), chunk.data(), chunk.size());
    }

    std::string_view take(std::size_t n) {
        if (bytes_.size() - pos_ < n) {
            throw CorruptFileError("model file is truncated");
        }
        auto out = bytes_.substr(pos_, n);
        pos_ += n;
        return out;
    }

    [[nodiscard]] std::size_t remaining() const { return bytes_.size() - pos_; }

  private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

void put_head(std::string& out, const HeadParams& h) {
    put_tensor(out, h.W1);
    put_tensor(out, h.b1);
    put_tensor(out, h.W2);
    put_tensor(out, h.b2);
}

}  // namespace

std::string serialize_base(const BaseParams& base) {
    std::string out;
    put_tensor(out, base.E);
    put_tensor(out, base.B1);
    put_tensor(out, base.c1);
    return out;
}

std::string serialize_head(const HeadParams& head) {
    std::string out;
    put_head(out, head);
    return out;
}

std::string serialize_model(const FactorizedModel& model) {
    const auto& cfg = model.config();
    std::string out(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kModelFormatVersion);
    put<std::uint64_t>(out, cfg.hash_dim);
    put<std::uint64_t>(out, cfg.hidden_dim);
    put<std::uint64_t>(out, cfg.ngram_max);
    put<std::uint64_t>(out, model.seed());
    out += serialize_base(model.base());
    put<std::uint64_t>(out, model.heads().size());
    for (const auto& [key, head] : model.heads()) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(key.size()));
        out += key;
        put_head(out, head);
    }
    put<std::uint64_t>(out, fnv1a64(out));
    return out;
}

FactorizedModel deserialize_model(std::string_view bytes) {
    if (bytes.size() < sizeof kMagic + sizeof(std::uint32_t) ||
        std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
        throw CorruptFileError("not a model file (bad magic)");
    }
    Reader r(bytes);
    r.take(sizeof kMagic);
    const auto version = r.get<std::uint32_t>();
    if (version != kModelFormatVersion) {
        throw VersionMismatchError("model format version " + std::to_string(version) +
                                   ", expected " + std::to_string(kModelFormatVersion));
    }
    if (bytes.size() < sizeof(std::uint64_t)) {
        throw CorruptFileError("model file is truncated");
    }
    const auto body = bytes.substr(0, bytes.size() - sizeof(std::uint64_t));
    std::uint64_t stored = 0;
    std::memcpy(&stored, bytes.data() + body.size(), sizeof stored);

    TextEncoderConfig cfg;
    cfg.hash_dim = r.get<std::uint64_t>();
    cfg.hidden_dim = r.get<std::uint64_t>();
    cfg.ngram_max = r.get<std::uint64_t>();
    const auto seed = r.get<std::uint64_t>();
    // Dimensions come from the file, so check they fit before allocating.
    if (cfg.hidden_dim == 0 || cfg.hash_dim < cfg.hidden_dim ||
        cfg.hash_dim > r.remaining() / sizeof(double) / cfg.hidden_dim) {
        throw CorruptFileError("model file is truncated or has invalid dimensions");
    }
    if (fnv1a64(body) != stored) {
        throw CorruptFileError("model file checksum mismatch");
    }
    try {
        validate(cfg);
    } catch (const ConfigError& e) {
        throw CorruptFileError(std::string("model file has invalid dimensions: ") + e.what());
    }
    const auto d = static_cast<Eigen::Index>(cfg.hidden_dim);
    BaseParams base{Matrix(static_cast<Eigen::Index>(cfg.hash_dim), d), Matrix(d, d), Vector(d)};
    r.get_tensor(base.E);
    r.get_tensor(base.B1);
    r.get_tensor(base.c1);
    FactorizedModel model(cfg, seed, std::move(base));
    const auto n_heads = r.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < n_heads; ++i) {
        const auto len = r.get<std::uint32_t>();
        std::string key(r.take(len));
        HeadParams h = zero_head(cfg.hidden_dim);
        r.get_tensor(h.W1);
        r.get_tensor(h.b1);
        r.get_tensor(h.W2);
        r.get_tensor(h.b2);
        model.set_head(key, std::move(h));
    }
    if (r.remaining() != sizeof(std::uint64_t)) {
        throw CorruptFileError("model file has trailing bytes");
    }
    return model;
}

void save_model(const FactorizedModel& model, const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    const std::string bytes = serialize_model(model);
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw DataError("cannot write model file " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

FactorizedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open model file " + path.string());
    }
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_model(bytes);
}

FactorizedModel load_model(const std::filesystem::path& path, const TextEncoderConfig& expected) {
    FactorizedModel model = load_model(path);
    const auto& got = model.config();
    if (!(got == expected)) {
        throw DimensionError("model file has hash_dim=" + std::to_string(got.hash_dim) +
                             " hidden_dim=" + std::to_string(got.hidden_dim) +
                             " ngram_max=" + std::to_string(got.ngram_max) +
                             ", config expects hash_dim=" + std::to_string(expected.hash_dim) +
                             " hidden_dim=" + std::to_string(expected.hidden_dim) +
                             " ngram_max=" + std::to_string(expected.ngram_max));
    }
    return model;
}

}  // namespace hydra
