#include "fasticarl/data_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace fasticarl {

namespace {

constexpr char kMagic[4] = {'F', 'D', 'S', 'F'};
constexpr std::uint16_t kVersion = 1;

class Writer {
public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw DatasetError("cannot open for writing: " + path);
    }
    void u16(std::uint16_t v) { raw(&v, 2); }
    void u32(std::uint32_t v) { raw(&v, 4); }
    void f32(float v) { raw(&v, 4); }
    void bytes(const void* p, std::size_t n) { raw(p, n); }
    void close(const std::string& path) {
        out_.flush();
        if (!out_) throw DatasetError("write failed: " + path);
    }

private:
    void raw(const void* p, std::size_t n) {
        static_assert(std::endian::native == std::endian::little,
                      "FDSF writer assumes a little-endian host");
        out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    }
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::string& path) : path_(path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DatasetError("cannot open: " + path);
        buf_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
    std::uint32_t u32() { return le(4); }
    float f32() { return std::bit_cast<float>(le(4)); }
    void need(std::size_t n, const char* what) const {
        if (pos_ + n > buf_.size())
            throw DatasetError(path_ + ": truncated while reading " + what + ", missing " +
                               std::to_string(pos_ + n - buf_.size()) + " bytes at offset " +
                               std::to_string(pos_));
    }
    const std::uint8_t* cursor() const {
        return reinterpret_cast<const std::uint8_t*>(buf_.data()) + pos_;
    }
    void skip(std::size_t n) { pos_ += n; }
    std::size_t remaining() const { return buf_.size() - pos_; }

private:
    std::uint32_t le(int bytes) {
        need(static_cast<std::size_t>(bytes), "field");
        std::uint32_t v = 0;
        for (int i = 0; i < bytes; ++i)
            v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf_[pos_ + i])) << (8 * i);
        pos_ += static_cast<std::size_t>(bytes);
        return v;
    }
    std::string path_;
    std::string buf_;
    std::size_t pos_ = 0;
};

void validate_full_dataset(const LabeledDataset& ds, const std::string& origin) {
    if (ds.class_count == 0) throw DatasetError(origin + ": class count is zero");
    std::vector<std::size_t> counts(ds.class_count, 0);
    for (std::size_t i = 0; i < ds.labels.size(); ++i) {
        if (ds.labels[i] >= ds.class_count)
            throw DatasetError(origin + ": label " + std::to_string(ds.labels[i]) +
                               " at row " + std::to_string(i) + " >= class count " +
                               std::to_string(ds.class_count));
        ++counts[ds.labels[i]];
    }
    for (std::uint16_t c = 0; c < ds.class_count; ++c)
        if (counts[c] < 2)
            throw DatasetError(origin + ": class " + std::to_string(c) +
                               " has fewer than 2 samples");
}

} // namespace

std::vector<std::size_t> LabeledDataset::indices_of_class(std::uint16_t c) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == c) out.push_back(i);
    return out;
}

std::size_t LabeledDataset::class_size(std::uint16_t c) const {
    std::size_t n = 0;
    for (std::uint16_t l : labels)
        if (l == c) ++n;
    return n;
}

void save_dataset(const LabeledDataset& dataset, const std::string& path) {
    check_contract(dataset.labels.size() == dataset.features.rows,
                   "save_dataset: labels/features size mismatch");
    Writer w(path);
    w.bytes(kMagic, 4);
    w.u16(kVersion);
    w.u32(static_cast<std::uint32_t>(dataset.features.rows));
    w.u32(static_cast<std::uint32_t>(dataset.features.cols));
    w.u32(dataset.class_count);
    w.bytes(dataset.features.data.data(), dataset.features.data.size() * sizeof(float));
    for (std::uint16_t l : dataset.labels) w.u16(l);
    w.close(path);
}

LabeledDataset load_dataset(const std::string& path) {
    Reader r(path);
    r.need(4, "magic");
    if (std::memcmp(r.cursor(), kMagic, 4) != 0) throw DatasetError(path + ": bad magic");
    r.skip(4);
    const std::uint16_t version = r.u16();
    if (version != kVersion)
        throw DatasetError(path + ": unsupported version " + std::to_string(version));
    const std::uint32_t n = r.u32();
    const std::uint32_t d = r.u32();
    const std::uint32_t classes = r.u32();
    if (classes > 0xFFFFu) throw DatasetError(path + ": class count overflows u16");
    const std::uint64_t cells = static_cast<std::uint64_t>(n) * d;
    if (d == 0 || n == 0) throw DatasetError(path + ": zero rows or columns");
    if (cells > (1ull << 32))
        throw DatasetError(path + ": dimension overflow (n*d too large)");

    LabeledDataset ds;
    ds.name = path;
    ds.class_count = static_cast<std::uint16_t>(classes);
    ds.features = Tensor2(n, d);
    r.need(static_cast<std::size_t>(cells) * 4, "feature rows");
    std::memcpy(ds.features.data.data(), r.cursor(), static_cast<std::size_t>(cells) * 4);
    r.skip(static_cast<std::size_t>(cells) * 4);
    ds.labels.resize(n);
    r.need(static_cast<std::size_t>(n) * 2, "labels");
    std::memcpy(ds.labels.data(), r.cursor(), static_cast<std::size_t>(n) * 2);
    r.skip(static_cast<std::size_t>(n) * 2);
    if (r.remaining() != 0)
        throw DatasetError(path + ": " + std::to_string(r.remaining()) +
                           " trailing bytes after labels");
    if (!ds.features.all_finite()) throw DatasetError(path + ": non-finite feature value");
    validate_full_dataset(ds, path);
    return ds;
}

LabeledDataset generate_blobs(std::uint16_t classes, std::size_t per_class, std::size_t dims,
                              double separation, std::uint32_t seed) {
    check_contract(classes >= 2, "generate_blobs: need >= 2 classes");
    check_contract(per_class >= 4, "generate_blobs: need >= 4 samples per class");
    check_contract(dims >= 2, "generate_blobs: need >= 2 dims");
    check_contract(separation >= 0.0, "generate_blobs: separation must be >= 0");

    std::mt19937 rng(seed);

    // Means live in a box that scales with the separation; retry with a larger
    // box until every pair clears the requested distance.
    std::vector<std::vector<double>> means;
    double box = 1.5 * separation * std::max(1.0, std::sqrt(static_cast<double>(classes)) / 2.0);
    constexpr int kMaxAttempts = 64;
    bool placed = false;
    for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
        means.assign(classes, std::vector<double>(dims, 0.0));
        std::uniform_real_distribution<double> coord(0.0, box);
        for (auto& mu : means)
            for (double& v : mu) v = coord(rng);
        placed = true;
        for (std::size_t a = 0; a < means.size() && placed; ++a)
            for (std::size_t b = a + 1; b < means.size() && placed; ++b) {
                double acc = 0.0;
                for (std::size_t k = 0; k < dims; ++k) {
                    const double diff = means[a][k] - means[b][k];
                    acc += diff * diff;
                }
                if (std::sqrt(acc) < separation) placed = false;
            }
        if (!placed) box *= 1.25;
    }
    if (!placed)
        throw DatasetError("generate_blobs: could not place " + std::to_string(classes) +
                           " means at separation " + std::to_string(separation));

    LabeledDataset ds;
    ds.name = "blobs";
    ds.class_count = classes;
    ds.features = Tensor2(static_cast<std::size_t>(classes) * per_class, dims);
    ds.labels.resize(ds.features.rows);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::size_t row = 0;
    for (std::uint16_t c = 0; c < classes; ++c) {
        for (std::size_t s = 0; s < per_class; ++s, ++row) {
            float* dst = ds.features.data.data() + row * dims;
            for (std::size_t k = 0; k < dims; ++k)
                dst[k] = static_cast<float>(means[c][k] + noise(rng));
            ds.labels[row] = c;
        }
    }
    return ds;
}

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& dataset,
                                                const SplitSpec& spec) {
    check_contract(spec.test_fraction > 0.0 && spec.test_fraction < 1.0,
                   "split: test_fraction must be in (0,1)");
    std::mt19937 rng(spec.seed);
    std::vector<std::size_t> train_rows, test_rows;

    for (std::uint16_t c = 0; c < dataset.class_count; ++c) {
        std::vector<std::size_t> rows = dataset.indices_of_class(c);
        if (rows.size() < 2)
            throw DatasetError("split: class " + std::to_string(c) +
                               " has fewer than 2 samples");
        std::shuffle(rows.begin(), rows.end(), rng);
        std::size_t t = static_cast<std::size_t>(std::max<long>(
            1, std::lround(spec.test_fraction * static_cast<double>(rows.size()))));
        t = std::min(t, rows.size() - 1); // keep at least one training sample
        test_rows.insert(test_rows.end(), rows.begin(), rows.begin() + t);
        train_rows.insert(train_rows.end(), rows.begin() + t, rows.end());
    }

    auto subset = [&](const std::vector<std::size_t>& rows, const char* tag) {
        LabeledDataset out;
        out.name = dataset.name + tag;
        out.class_count = dataset.class_count;
        out.features = gather_rows(dataset.features, rows);
        out.labels.reserve(rows.size());
        for (std::size_t r : rows) out.labels.push_back(dataset.labels[r]);
        return out;
    };
    return {subset(train_rows, "/train"), subset(test_rows, "/test")};
}

} // namespace fasticarl
