#include "fasticarl/selection.hpp"

#include <algorithm>
#include <cmath>

namespace fasticarl {

namespace {

struct HeapEntry {
    float dist;
    std::uint32_t index;
};

// Lexicographic (distance, index) order. The max element is the entry with the
// largest distance, highest index among equal distances, so the heap evicts the
// later-indexed sample first and "lowest index wins" falls out.
inline bool heap_less(const HeapEntry& a, const HeapEntry& b) {
    return a.dist < b.dist || (a.dist == b.dist && a.index < b.index);
}

// Array-backed binary max-heap bounded at the budget m. std::priority_queue
// hides the replace-root operation this algorithm leans on, so it is hand
// rolled.
class BoundedMaxHeap {
public:
    explicit BoundedMaxHeap(std::size_t capacity) { entries_.reserve(capacity); }

    std::size_t size() const { return entries_.size(); }
    const HeapEntry& max() const { return entries_.front(); }

    void insert(HeapEntry e) {
        entries_.push_back(e);
        std::size_t i = entries_.size() - 1;
        while (i > 0) {
            std::size_t parent = (i - 1) / 2;
            if (!heap_less(entries_[parent], entries_[i])) break;
            std::swap(entries_[parent], entries_[i]);
            i = parent;
        }
    }

    // Overwrites the root and restores the heap property.
    void replace_max(HeapEntry e) {
        entries_[0] = e;
        sift_down(0);
    }

    HeapEntry pop_max() {
        HeapEntry top = entries_.front();
        entries_.front() = entries_.back();
        entries_.pop_back();
        if (!entries_.empty()) sift_down(0);
        return top;
    }

private:
    void sift_down(std::size_t i) {
        const std::size_t n = entries_.size();
        while (true) {
            std::size_t largest = i;
            const std::size_t l = 2 * i + 1, r = 2 * i + 2;
            if (l < n && heap_less(entries_[largest], entries_[l])) largest = l;
            if (r < n && heap_less(entries_[largest], entries_[r])) largest = r;
            if (largest == i) break;
            std::swap(entries_[i], entries_[largest]);
            i = largest;
        }
    }

    std::vector<HeapEntry> entries_;
};

} // namespace

ClassMean compute_class_mean(const Tensor2& features) {
    check_contract(features.rows >= 1, "compute_class_mean: empty feature matrix");
    const std::size_t n = features.rows, d = features.cols;
    std::vector<double> acc(d, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        const float* row = features.data.data() + r * d;
        for (std::size_t c = 0; c < d; ++c) acc[c] += row[c];
    }
    ClassMean out;
    out.sample_count = n;
    out.mean.resize(d);
    for (std::size_t c = 0; c < d; ++c)
        out.mean[c] = static_cast<float>(acc[c] / static_cast<double>(n));
    return out;
}

float distance_to_mean(std::span<const float> row, std::span<const float> mean) {
    double acc = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) {
        const double diff = static_cast<double>(row[c]) - static_cast<double>(mean[c]);
        acc += diff * diff;
    }
    return static_cast<float>(std::sqrt(acc));
}

SelectionResult herding_select(const Tensor2& features, const ClassMean& mean, std::size_t m) {
    const std::size_t n = features.rows, d = features.cols;
    check_contract(mean.mean.size() == d, "herding_select: mean dimension mismatch");
    check_contract(m >= 1 && m <= n, "herding_select: need 1 <= m <= n");

    SelectionResult result;
    result.method = SelectionMethod::herding;
    result.indices.reserve(m);
    result.distances.reserve(m);
    std::vector<bool> chosen(n, false);

    for (std::size_t k = 1; k <= m; ++k) {
        double best = 0.0;
        std::size_t best_idx = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (chosen[i]) continue;
            const float* cand = features.data.data() + i * d;
            double acc = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                // Re-sums the already-chosen features per candidate, matching
                // the O(n m^2) reference procedure the cost model describes.
                double sum = cand[c];
                for (std::size_t j : result.indices) sum += features.data[j * d + c];
                const double diff = static_cast<double>(mean.mean[c]) -
                                    sum / static_cast<double>(k);
                acc += diff * diff;
            }
            if (best_idx == n || acc < best) {
                best = acc;
                best_idx = i;
            }
        }
        chosen[best_idx] = true;
        result.indices.push_back(best_idx);
        result.distances.push_back(static_cast<float>(std::sqrt(best)));
    }
    return result;
}

SelectionResult fast_select(const Tensor2& features, const ClassMean& mean, std::size_t m,
                            SelectionStats* stats) {
    const std::size_t n = features.rows, d = features.cols;
    check_contract(mean.mean.size() == d, "fast_select: mean dimension mismatch");
    check_contract(m >= 1 && m <= n, "fast_select: need 1 <= m <= n");

    BoundedMaxHeap heap(m);
    std::size_t ops = 0;
    std::size_t peak = 0;

    for (std::size_t i = 0; i < n; ++i) {
        const float dist =
            distance_to_mean({features.data.data() + i * d, d}, mean.mean);
        const HeapEntry entry{dist, static_cast<std::uint32_t>(i)};
        if (heap.size() < m) {
            heap.insert(entry);
            ++ops;
        } else if (dist < heap.max().dist) {
            heap.replace_max(entry);
            ++ops;
        }
        peak = std::max(peak, heap.size());
    }

    SelectionResult result;
    result.method = SelectionMethod::fast;
    result.indices.resize(m);
    result.distances.resize(m);
    for (std::size_t k = m; k-- > 0;) {
        const HeapEntry e = heap.pop_max();
        ++ops;
        result.indices[k] = e.index;
        result.distances[k] = e.dist;
    }
    if (stats != nullptr) {
        stats->peak_heap_size = peak;
        stats->heap_ops = ops;
    }
    return result;
}

double selection_cost_model(std::size_t n, std::size_t m, SelectionMethod method) {
    check_contract(m <= n, "selection_cost_model: m > n");
    const double nd = static_cast<double>(n), md = static_cast<double>(m);
    if (method == SelectionMethod::herding) return nd * md * md;
    const double log_m = m > 1 ? std::log2(md) : 0.0;
    return nd * (1.0 + log_m) + md * log_m;
}

} // namespace fasticarl
