#include "fasticarl/replay_memory.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>

namespace fasticarl {

namespace {

class PhaseTimer {
public:
    explicit PhaseTimer(double* sink)
        : sink_(sink), start_(std::chrono::steady_clock::now()) {}
    ~PhaseTimer() {
        if (sink_ != nullptr)
            *sink_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
                          .count();
    }

private:
    double* sink_;
    std::chrono::steady_clock::time_point start_;
};

constexpr char kMagic[4] = {'F', 'I', 'C', 'L'};
constexpr std::uint16_t kVersion = 1;

struct ByteWriter {
    std::vector<std::uint8_t> out;
    void u8(std::uint8_t v) { out.push_back(v); }
    void u16(std::uint16_t v) { le(v, 2); }
    void u32(std::uint32_t v) { le(v, 4); }
    void u64(std::uint64_t v) { le(v, 8); }
    void f32(float v) { le(std::bit_cast<std::uint32_t>(v), 4); }
    void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
    void bytes(const std::vector<std::uint8_t>& b) { out.insert(out.end(), b.begin(), b.end()); }
    void le(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
    }
};

struct ByteReader {
    std::span<const std::uint8_t> buf;
    std::size_t pos = 0;

    void need(std::size_t n, const char* what) const {
        if (pos + n > buf.size())
            throw SnapshotError(std::string("snapshot truncated while reading ") + what +
                                ", missing " + std::to_string(pos + n - buf.size()) +
                                " bytes at offset " + std::to_string(pos));
    }
    std::uint64_t le(int n, const char* what) {
        need(static_cast<std::size_t>(n), what);
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(buf[pos + i]) << (8 * i);
        pos += static_cast<std::size_t>(n);
        return v;
    }
    std::uint8_t u8(const char* what) { return static_cast<std::uint8_t>(le(1, what)); }
    std::uint16_t u16(const char* what) { return static_cast<std::uint16_t>(le(2, what)); }
    std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(le(4, what)); }
    std::uint64_t u64(const char* what) { return le(8, what); }
    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
    double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
};

} // namespace

BudgetPolicy BudgetPolicy::from_fraction(double fraction, std::uint64_t total_train_samples) {
    check_contract(fraction > 0.0 && fraction <= 1.0,
                   "BudgetPolicy: fraction must be in (0, 1]");
    BudgetPolicy policy;
    policy.fraction = fraction;
    policy.total_budget = static_cast<std::uint64_t>(
        std::llround(fraction * static_cast<double>(total_train_samples)));
    return policy;
}

std::vector<std::size_t> quotas_for(std::size_t class_count, std::uint64_t total_budget) {
    check_contract(class_count >= 1, "quotas_for: no classes");
    check_contract(total_budget >= class_count,
                   "quotas_for: budget leaves some class without an exemplar");
    const std::size_t base = static_cast<std::size_t>(total_budget / class_count);
    const std::size_t remainder = static_cast<std::size_t>(total_budget % class_count);
    std::vector<std::size_t> quotas(class_count, base);
    for (std::size_t i = 0; i < remainder; ++i) quotas[i] += 1;
    return quotas;
}

ExemplarSet build_exemplar_set(const Tensor2& class_data, const MlpModel& model,
                               std::uint16_t class_id, std::size_t m, int bits,
                               SelectionMethod method, BuildTimings* timings) {
    check_contract(class_data.rows >= 1, "build_exemplar_set: empty class data");
    check_contract(m >= 1 && m <= class_data.rows,
                   "build_exemplar_set: need 1 <= m <= class size");

    Tensor2 features;
    {
        PhaseTimer t(timings != nullptr ? &timings->feature_extraction_s : nullptr);
        features = forward_features(model, class_data);
    }
    SelectionResult sel;
    {
        PhaseTimer t(timings != nullptr ? &timings->selection_s : nullptr);
        const ClassMean mean = compute_class_mean(features);
        sel = method == SelectionMethod::fast ? fast_select(features, mean, m)
                                              : herding_select(features, mean, m);
    }

    ExemplarSet set;
    set.class_id = class_id;
    set.method = method;
    set.bits = static_cast<std::uint8_t>(bits);
    set.dims = static_cast<std::uint32_t>(class_data.cols);
    set.distances = sel.distances;
    set.exemplars.reserve(m);
    {
        PhaseTimer t(timings != nullptr ? &timings->quantization_s : nullptr);
        for (std::size_t idx : sel.indices) {
            const auto row = class_data.row(idx);
            const QuantParams params = fit_quant_params(row, bits);
            set.exemplars.push_back(quantize(row, params));
        }
    }
    return set;
}

ExemplarSet trim_exemplar_set(const ExemplarSet& set, std::size_t new_m) {
    check_contract(new_m >= 1, "trim_exemplar_set: a class may not lose all exemplars");
    check_contract(new_m <= set.size(), "trim_exemplar_set: new_m exceeds current count");
    ExemplarSet out = set;
    out.exemplars.resize(new_m);
    out.distances.resize(new_m);
    return out;
}

std::vector<float> exemplar_class_mean(const ExemplarSet& set, const MlpModel& model) {
    check_contract(!set.exemplars.empty(), "exemplar_class_mean: empty exemplar set");
    Tensor2 inputs(set.size(), set.dims);
    for (std::size_t i = 0; i < set.size(); ++i) {
        const std::vector<float> row = dequantize(set.exemplars[i]);
        std::copy(row.begin(), row.end(), inputs.row(i).begin());
    }
    const Tensor2 features = forward_features(model, inputs);
    return compute_class_mean(features).mean;
}

const ExemplarSet& ReplayMemory::set_for(std::uint16_t class_id) const {
    auto it = sets_.find(class_id);
    check_contract(it != sets_.end(), "ReplayMemory: unknown class id");
    return it->second;
}

void ReplayMemory::insert(ExemplarSet set) {
    check_contract(!has_class(set.class_id), "ReplayMemory: class already stored");
    sets_.emplace(set.class_id, std::move(set));
}

void ReplayMemory::rebalance() {
    if (sets_.empty()) return;
    const std::vector<std::size_t> quotas = quotas_for(sets_.size(), policy_.total_budget);
    std::size_t rank = 0;
    for (auto& [class_id, set] : sets_) {
        const std::size_t quota = std::min(quotas[rank++], set.size());
        if (set.size() > quota) set = trim_exemplar_set(set, quota);
    }
}

std::uint64_t ReplayMemory::total_exemplars() const {
    std::uint64_t n = 0;
    for (const auto& [id, set] : sets_) n += set.size();
    return n;
}

StorageBytes ReplayMemory::storage_accounting() const {
    StorageBytes total;
    for (const auto& [id, set] : sets_) {
        const StorageBytes sb = storage_bytes(set.size(), set.dims, set.bits);
        total.payload += sb.payload;
        total.metadata += sb.metadata;
    }
    return total;
}

std::vector<std::uint8_t> ReplayMemory::snapshot_save() const {
    ByteWriter w;
    w.out.reserve(64);
    for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
    w.u16(kVersion);
    w.f64(policy_.fraction);
    w.u64(policy_.total_budget);
    w.u32(static_cast<std::uint32_t>(sets_.size()));
    for (const auto& [class_id, set] : sets_) {
        w.u32(class_id);
        w.u8(static_cast<std::uint8_t>(set.method));
        w.u8(set.bits);
        w.u32(static_cast<std::uint32_t>(set.size()));
        w.u32(set.dims);
        if (set.bits == 8) {
            for (const QuantizedVector& qv : set.exemplars) {
                w.f32(qv.params.scale);
                w.u8(static_cast<std::uint8_t>(qv.params.zero_point));
            }
        }
        for (float d : set.distances) w.f32(d);
        for (const QuantizedVector& qv : set.exemplars) w.bytes(qv.payload);
    }
    return w.out;
}

ReplayMemory ReplayMemory::snapshot_load(std::span<const std::uint8_t> bytes) {
    ByteReader r{bytes};
    r.need(4, "magic");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw SnapshotError("snapshot: bad magic at offset 0");
    r.pos = 4;
    const std::uint16_t version = r.u16("version");
    if (version != kVersion)
        throw SnapshotError("snapshot: unsupported version " + std::to_string(version) +
                            " at offset 4");

    ReplayMemory memory;
    memory.policy_.fraction = r.f64("budget fraction");
    memory.policy_.total_budget = r.u64("total budget");
    const std::uint32_t class_count = r.u32("class count");

    for (std::uint32_t ci = 0; ci < class_count; ++ci) {
        ExemplarSet set;
        const std::uint32_t class_id = r.u32("class id");
        if (class_id > 0xFFFFu)
            throw SnapshotError("snapshot: class id overflows u16 at offset " +
                                std::to_string(r.pos - 4));
        set.class_id = static_cast<std::uint16_t>(class_id);
        const std::uint8_t method = r.u8("method tag");
        if (method > 1)
            throw SnapshotError("snapshot: unknown method tag " + std::to_string(method) +
                                " at offset " + std::to_string(r.pos - 1));
        set.method = static_cast<SelectionMethod>(method);
        set.bits = r.u8("bits");
        if (set.bits != 8 && set.bits != 16 && set.bits != 32)
            throw SnapshotError("snapshot: unsupported bit width " + std::to_string(set.bits) +
                                " at offset " + std::to_string(r.pos - 1));
        const std::uint32_t count = r.u32("exemplar count");
        set.dims = r.u32("dims");

        std::vector<QuantParams> params(count);
        for (std::uint32_t i = 0; i < count; ++i) {
            params[i].bits = set.bits;
            if (set.bits == 8) {
                params[i].scale = r.f32("quant scale");
                params[i].zero_point = r.u8("quant zero point");
            }
        }
        set.distances.resize(count);
        for (std::uint32_t i = 0; i < count; ++i) set.distances[i] = r.f32("distance");

        const std::size_t row_bytes = static_cast<std::size_t>(set.dims) * (set.bits / 8);
        set.exemplars.reserve(count);
        for (std::uint32_t i = 0; i < count; ++i) {
            r.need(row_bytes, "exemplar payload");
            QuantizedVector qv;
            qv.params = params[i];
            qv.length = set.dims;
            qv.payload.assign(r.buf.begin() + static_cast<std::ptrdiff_t>(r.pos),
                              r.buf.begin() + static_cast<std::ptrdiff_t>(r.pos + row_bytes));
            r.pos += row_bytes;
            set.exemplars.push_back(std::move(qv));
        }
        if (memory.has_class(set.class_id))
            throw SnapshotError("snapshot: duplicate class id " + std::to_string(class_id));
        memory.sets_.emplace(set.class_id, std::move(set));
    }
    if (r.pos != bytes.size())
        throw SnapshotError("snapshot: " + std::to_string(bytes.size() - r.pos) +
                            " trailing bytes at offset " + std::to_string(r.pos));
    return memory;
}

} // namespace fasticarl
