#ifndef FASTICARL_SELECTION_HPP
#define FASTICARL_SELECTION_HPP

#include <cstdint>
#include <vector>

#include "fasticarl/tensor.hpp"

namespace fasticarl {

enum class SelectionMethod : std::uint8_t { herding = 0, fast = 1 };

/// Arithmetic mean of a class's feature rows.
struct ClassMean {
    std::vector<float> mean;
    std::size_t sample_count = 0;
};

/// Output of either selection routine. For the fast method the entries are
/// sorted by ascending (distance, index); for herding they are in greedy pick
/// order with the achieved objective value at each step.
struct SelectionResult {
    std::vector<std::size_t> indices;
    std::vector<float> distances;
    SelectionMethod method = SelectionMethod::fast;
};

/// Heap instrumentation for fast_select. An operation is one initial insert,
/// one replace (pop+insert of the root), or one extraction pop.
struct SelectionStats {
    std::size_t peak_heap_size = 0;
    std::size_t heap_ops = 0;
};

ClassMean compute_class_mean(const Tensor2& features);

/// Euclidean distance between a feature row and the class mean: the squared
/// differences are accumulated in double, the root is rounded to float. This
/// exact formula is part of the selection contract so independently computed
/// distances order identically.
float distance_to_mean(std::span<const float> row, std::span<const float> mean);

/// ICARL's greedy herding: step k picks the sample minimizing
/// ||mean - (F(x) + sum of chosen features)/k||. Already-chosen samples are
/// excluded; ties break toward the lowest sample index. The inner objective
/// re-sums the chosen features every evaluation, so the routine costs
/// O(n * m^2) feature-dimension passes like the reference procedure it
/// benchmarks against.
SelectionResult herding_select(const Tensor2& features, const ClassMean& mean, std::size_t m);

/// Exact m-nearest-to-mean selection with a size-bounded max-heap: the first m
/// distances are inserted, each later sample replaces the root only when its
/// distance is strictly smaller than the current max, and the final extraction
/// yields ascending order. Equal distances are resolved toward the lower index.
/// O(n log m) comparisons.
SelectionResult fast_select(const Tensor2& features, const ClassMean& mean, std::size_t m,
                            SelectionStats* stats = nullptr);

/// Closed-form operation-count estimates backing the benchmark assertions:
/// n * m^2 for herding, n * (1 + log2(m)) + m * log2(m) for fast.
double selection_cost_model(std::size_t n, std::size_t m, SelectionMethod method);

} // namespace fasticarl

#endif
