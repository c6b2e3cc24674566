#include "c3/persistence.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace c3 {

namespace {

static_assert(std::numeric_limits<double>::is_iec559);

template <typename T>
T to_little(T v) {
    if constexpr (std::endian::native == std::endian::little) {
        return v;
    } else {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
        std::reverse(bytes.begin(), bytes.end());
        return std::bit_cast<T>(bytes);
    }
}

class Writer {
public:
    void raw(const void* p, std::size_t n) {
        const auto* c = static_cast<const unsigned char*>(p);
        buf_.insert(buf_.end(), c, c + n);
    }
    template <typename T>
    void put(T v) {
        v = to_little(v);
        raw(&v, sizeof v);
    }
    void f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }

    void save(const std::filesystem::path& path) {
        const auto crc = std::uint32_t(crc32(0L, buf_.data(), uInt(buf_.size())));
        put(crc);
        // Sibling temp file, then rename.
        auto tmp = path;
        tmp += ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw PersistenceError("cannot open " + tmp.string() + " for writing");
            out.write(reinterpret_cast<const char*>(buf_.data()), std::streamsize(buf_.size()));
            if (!out) throw PersistenceError("write failed: " + tmp.string());
        }
        std::filesystem::rename(tmp, path);
    }

private:
    std::vector<unsigned char> buf_;
};

class Reader {
public:
    Reader(const std::filesystem::path& path, const char* magic) : name_(path.string()) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw PersistenceError("cannot open " + name_);
        buf_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
        if (buf_.size() < 8) throw TruncatedFile(name_ + ": file shorter than its header");
        if (std::memcmp(buf_.data(), magic, 4) != 0) throw VersionMismatch(name_ + ": bad magic bytes");
        pos_ = 4;
        const auto version = get<std::uint32_t>();
        if (version != kFormatVersion)
            throw VersionMismatch(name_ + ": format version " + std::to_string(version) + ", expected " +
                                  std::to_string(kFormatVersion));
    }

    template <typename T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, buf_.data() + pos_, sizeof v);
        pos_ += sizeof v;
        return to_little(v);
    }
    double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }

    /// Checks that exactly `payload` bytes plus the checksum remain and
    /// that the checksum matches, before any payload is decoded.
    void expect_payload(std::uint64_t payload) {
        const auto remaining = std::uint64_t(buf_.size() - pos_);
        if (payload > std::numeric_limits<std::uint64_t>::max() - 4 || remaining < payload + 4)
            throw TruncatedFile(name_ + ": payload shorter than its dimension table");
        if (remaining > payload + 4) throw ChecksumMismatch(name_ + ": trailing bytes after payload");
        const auto body = buf_.size() - 4;
        std::uint32_t stored;
        std::memcpy(&stored, buf_.data() + body, 4);
        stored = to_little(stored);
        const auto actual = std::uint32_t(crc32(0L, buf_.data(), uInt(body)));
        if (stored != actual) throw ChecksumMismatch(name_ + ": checksum mismatch");
    }

    const std::string& name() const { return name_; }

private:
    void need(std::size_t n) const {
        if (buf_.size() - pos_ < n) throw TruncatedFile(name_ + ": unexpected end of file");
    }

    std::string name_;
    std::vector<unsigned char> buf_;
    std::size_t pos_ = 0;
};

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b, const std::string& name) {
    if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a)
        throw TruncatedFile(name + ": dimension table overflows");
    return a * b;
}

}  // namespace

void persist_store(const ReferenceStored& store, const std::filesystem::path& path) {
    Writer w;
    w.raw("C3ST", 4);
    w.put<std::uint32_t>(kFormatVersion);
    const auto n = store.size();
    w.put<std::uint64_t>(std::uint64_t(store.dim()));
    w.put<std::uint64_t>(n);
    w.put<std::uint64_t>(store.has_intervals() ? 1 : 0);
    w.put<std::uint64_t>(store.checkpoint_interval());
    const auto& k = store.kernel_config();
    w.f64(k.sigma);
    w.f64(k.truncation_radius ? *k.truncation_radius : std::numeric_limits<double>::quiet_NaN());
    const auto E = store.embeddings();
    for (std::size_t i = 0; i < n; ++i)
        for (Eigen::Index d = 0; d < store.dim(); ++d) w.f64(E(d, Eigen::Index(i)));
    for (auto r : store.rewards()) w.f64(double(r));
    for (auto g : store.accumulators()) w.f64(g);
    if (store.has_intervals())
        for (int t : store.intervals()) w.put<std::int64_t>(t);
    w.save(path);
}

ReferenceStored load_store(const std::filesystem::path& path) {
    Reader r(path, "C3ST");
    const auto dim = r.get<std::uint64_t>();
    const auto n = r.get<std::uint64_t>();
    const auto has_intervals = r.get<std::uint64_t>();
    const auto checkpoint = r.get<std::uint64_t>();
    const auto& name = r.name();
    if (has_intervals > 1) throw VersionMismatch(name + ": bad interval flag");
    const auto cols = checked_mul(n, dim + 2 + has_intervals, name);
    r.expect_payload(checked_mul(cols + 2, 8, name));

    KernelConfigd config;
    config.sigma = r.f64();
    const double radius = r.f64();
    if (!std::isnan(radius)) config.truncation_radius = radius;
    try {
        config.validate();
    } catch (const std::invalid_argument& e) {
        throw PersistenceError(name + ": " + e.what());
    }
    ReferenceStored store(Eigen::Index(dim), config, checkpoint);
    auto& coords = StoreAccess<double>::coords(store);
    auto& rewards = StoreAccess<double>::rewards(store);
    auto& accum = StoreAccess<double>::accumulators(store);
    auto& intervals = StoreAccess<double>::intervals(store);
    coords.resize(n * dim);
    for (auto& c : coords) c = r.f64();
    rewards.resize(n);
    for (auto& x : rewards) {
        const double v = r.f64();
        if (v != 0.0 && v != 1.0) throw PersistenceError(name + ": reward outside {0, 1}");
        x = std::uint8_t(v);
    }
    accum.resize(n);
    for (auto& g : accum) g = r.f64();
    if (has_intervals) {
        intervals.resize(n);
        for (auto& t : intervals) t = int(r.get<std::int64_t>());
    }
    return store;
}

void persist_model(const MlpParamsd& params, const std::filesystem::path& path) {
    params.validate();
    Writer w;
    w.raw("C3MD", 4);
    w.put<std::uint32_t>(kFormatVersion);
    w.put<std::uint64_t>(params.layers.size());
    for (const auto& l : params.layers) {
        w.put<std::uint64_t>(std::uint64_t(l.weight.rows()));
        w.put<std::uint64_t>(std::uint64_t(l.weight.cols()));
    }
    for (const auto& l : params.layers) {
        for (Eigen::Index i = 0; i < l.weight.rows(); ++i)
            for (Eigen::Index j = 0; j < l.weight.cols(); ++j) w.f64(l.weight(i, j));
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) w.f64(l.bias(i));
    }
    w.save(path);
}

MlpParamsd load_model(const std::filesystem::path& path) {
    Reader r(path, "C3MD");
    const auto& name = r.name();
    const auto count = r.get<std::uint64_t>();
    std::vector<std::pair<std::uint64_t, std::uint64_t>> shapes;
    std::uint64_t total = 0;
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto rows = r.get<std::uint64_t>();
        const auto cols = r.get<std::uint64_t>();
        total += checked_mul(rows, cols + 1, name);
        shapes.emplace_back(rows, cols);
    }
    r.expect_payload(checked_mul(total, 8, name));
    MlpParamsd params;
    for (const auto& [rows, cols] : shapes) {
        DenseLayer<double> l;
        l.weight.resize(Eigen::Index(rows), Eigen::Index(cols));
        l.bias.resize(Eigen::Index(rows));
        for (Eigen::Index i = 0; i < l.weight.rows(); ++i)
            for (Eigen::Index j = 0; j < l.weight.cols(); ++j) l.weight(i, j) = r.f64();
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = r.f64();
        params.layers.push_back(std::move(l));
    }
    try {
        params.validate();
    } catch (const std::invalid_argument& e) {
        throw PersistenceError(name + ": " + e.what());
    }
    return params;
}

}  // namespace c3
