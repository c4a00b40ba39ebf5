#ifndef FASTICARL_REPLAY_MEMORY_HPP
#define FASTICARL_REPLAY_MEMORY_HPP

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "fasticarl/nn.hpp"
#include "fasticarl/quantization.hpp"
#include "fasticarl/selection.hpp"
#include "fasticarl/tensor.hpp"

namespace fasticarl {

/// Per-class exemplar storage in raw input space. Exemplars are dequantized
/// and re-featurized on demand because feature space drifts as the model
/// trains. For the fast method the distances are ascending; for herding they
/// follow greedy pick order. Both orders are prefix-consistent, which is what
/// makes trimming a plain truncation.
struct ExemplarSet {
    std::uint16_t class_id = 0;
    SelectionMethod method = SelectionMethod::fast;
    std::uint8_t bits = 32;
    std::uint32_t dims = 0;
    std::vector<QuantizedVector> exemplars;
    std::vector<float> distances;

    std::size_t size() const { return exemplars.size(); }
};

/// Exemplar budget: a fraction of the total training-sample count, split
/// evenly across observed classes with the +1 remainder going to the classes
/// with the lowest ids.
struct BudgetPolicy {
    double fraction = 0.10;
    std::uint64_t total_budget = 0;

    static BudgetPolicy from_fraction(double fraction, std::uint64_t total_train_samples);
};

/// Per-rank quotas (rank = position in ascending class-id order) for
/// class_count observed classes. Every class gets floor(budget/count); the
/// remainder tops up the earliest ranks. Requires budget >= class_count.
std::vector<std::size_t> quotas_for(std::size_t class_count, std::uint64_t total_budget);

/// Wall-clock breakdown of one exemplar-set construction.
struct BuildTimings {
    double feature_extraction_s = 0.0;
    double selection_s = 0.0; // class mean + selection proper
    double quantization_s = 0.0;
};

/// Selects m exemplars from one class's raw data (features are extracted with
/// the current model), quantizes the selected raw rows at the given bit width
/// and records the selection distances.
ExemplarSet build_exemplar_set(const Tensor2& class_data, const MlpModel& model,
                               std::uint16_t class_id, std::size_t m, int bits,
                               SelectionMethod method, BuildTimings* timings = nullptr);

/// Keeps the first new_m entries. new_m must be in [1, current count].
ExemplarSet trim_exemplar_set(const ExemplarSet& set, std::size_t new_m);

/// Mean of forward_features over the dequantized exemplars.
std::vector<float> exemplar_class_mean(const ExemplarSet& set, const MlpModel& model);

class SnapshotError : public std::runtime_error {
public:
    explicit SnapshotError(const std::string& what) : std::runtime_error(what) {}
};

/// The replay memory: all per-class exemplar sets plus the budget state.
class ReplayMemory {
public:
    ReplayMemory() = default;
    explicit ReplayMemory(BudgetPolicy policy) : policy_(policy) {}

    const BudgetPolicy& policy() const { return policy_; }
    void set_policy(BudgetPolicy policy) { policy_ = policy; }

    bool empty() const { return sets_.empty(); }
    std::size_t class_count() const { return sets_.size(); }
    bool has_class(std::uint16_t class_id) const { return sets_.count(class_id) != 0; }
    const ExemplarSet& set_for(std::uint16_t class_id) const;
    const std::map<std::uint16_t, ExemplarSet>& sets() const { return sets_; }

    void insert(ExemplarSet set);
    void clear() { sets_.clear(); }

    /// Trims every stored set down to the quota for the current class count.
    /// Quotas never need to grow here: each rank's share is non-increasing in
    /// the class count, so truncation suffices.
    void rebalance();

    std::uint64_t total_exemplars() const;
    StorageBytes storage_accounting() const;

    /// Snapshot format (all little-endian): magic "FICL", u16 version,
    /// f64 budget fraction, u64 total budget, u32 class count, then per class:
    /// u32 class_id, u8 method, u8 bits, u32 count, u32 dims,
    /// count x (f32 scale, u8 zero_point) when bits == 8,
    /// count x f32 distance, count * dims * bits/8 payload bytes.
    std::vector<std::uint8_t> snapshot_save() const;
    static ReplayMemory snapshot_load(std::span<const std::uint8_t> bytes);

private:
    BudgetPolicy policy_;
    std::map<std::uint16_t, ExemplarSet> sets_;
};

} // namespace fasticarl

#endif
