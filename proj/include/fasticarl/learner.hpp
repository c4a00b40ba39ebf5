#ifndef FASTICARL_LEARNER_HPP
#define FASTICARL_LEARNER_HPP

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fasticarl/data_io.hpp"
#include "fasticarl/nn.hpp"
#include "fasticarl/replay_memory.hpp"

namespace fasticarl {

enum class Method : std::uint8_t { none = 0, icarl = 1, fasticarl = 2, joint = 3 };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

/// Ordered class-incremental curriculum. Group 0 is the base task; later
/// groups are learned one after another.
struct TaskSchedule {
    std::vector<std::vector<std::uint16_t>> class_groups;

    std::size_t task_count() const { return class_groups.size(); }
    void validate(std::uint16_t class_count) const; // disjoint, covering, non-empty
};

/// Base task with N/2 classes followed by one class per task (N even).
TaskSchedule make_default_schedule(std::uint16_t class_count);

struct LearnerConfig {
    Method method = Method::fasticarl;
    int bits = 32;                 // exemplar quantization width
    double budget_fraction = 0.10; // of total training samples
    std::vector<std::size_t> hidden_dims = {64, 64};
    std::size_t feature_dim = 32;
    float learning_rate = 1e-3f;
    std::size_t batch_size = 32;
    std::size_t epochs_base = 50;
    std::size_t epochs_incremental = 30;
    bool normalized_features = false; // L2-normalize features before nearest-mean
    std::uint32_t seed = 42;

    bool uses_exemplars() const { return method == Method::icarl || method == Method::fasticarl; }
    SelectionMethod selection_method() const {
        return method == Method::icarl ? SelectionMethod::herding : SelectionMethod::fast;
    }
};

/// Wall-clock split per task. Training time covers the gradient loop
/// (including the old model's logits); IL time is everything else spent
/// incorporating the class, itemized so the components sum to the total.
struct TaskTiming {
    double train_s = 0.0;
    double feature_extraction_s = 0.0;
    double selection_s = 0.0;
    double quantization_s = 0.0;
    double trim_s = 0.0;
    double replay_prep_s = 0.0; // model snapshot, expansion, exemplar dequantization

    double il_total() const {
        return feature_extraction_s + selection_s + quantization_s + trim_s + replay_prep_s;
    }
};

struct TaskRecord {
    std::size_t task_index = 0;
    std::vector<std::uint16_t> classes_so_far;
    double weighted_f1 = 0.0;
    TaskTiming timing;
    std::uint64_t model_bytes = 0;
    StorageBytes exemplar_bytes;
    std::map<std::uint16_t, std::size_t> exemplar_counts;
};

/// Support-weighted mean of per-class F1 scores. Classes with zero support
/// contribute nothing; a class predicted but absent drags precision of its
/// own score only.
double weighted_f1(std::span<const std::uint16_t> predictions,
                   std::span<const std::uint16_t> labels);

/// Drives the class-incremental protocol: base-task training, one-class
/// updates with distillation and replay, exemplar bookkeeping and
/// nearest-class-mean inference.
class IncrementalLearner {
public:
    IncrementalLearner(LearnerConfig config, const LabeledDataset& train_data);

    /// Trains on group 0 of the schedule and builds the base exemplar sets.
    TaskTiming train_base_task(const TaskSchedule& schedule);

    /// Incorporates one new class: snapshot old model, expand the head, train
    /// on exemplars + new data with the combined loss, then build/trim
    /// exemplar sets.
    TaskTiming learn_new_class(std::uint16_t class_id);

    /// Nearest-exemplar-class-mean predictions (argmax logits for
    /// method=none/joint). Returns class ids.
    std::vector<std::uint16_t> classify(const Tensor2& inputs) const;

    const MlpModel& model() const { return model_; }
    const ReplayMemory& memory() const { return memory_; }
    std::span<const std::uint16_t> learned_classes() const { return learned_classes_; }

private:
    void train_epochs(const Tensor2& inputs, const std::vector<std::uint16_t>& columns,
                      std::size_t epochs, const MlpModel* old_model,
                      std::size_t old_class_count);
    std::size_t column_of(std::uint16_t class_id) const;
    Tensor2 class_rows(std::uint16_t class_id) const;
    std::size_t quota_for_new_class() const;

    LearnerConfig config_;
    const LabeledDataset& train_data_;
    MlpModel model_;
    ReplayMemory memory_;
    std::vector<std::uint16_t> learned_classes_; // logit column -> class id
    std::mt19937 rng_;
};

/// Runs the full incremental protocol and evaluates weighted F1 on the
/// all-seen-classes test subset after each task.
std::vector<TaskRecord> run_incremental(const LearnerConfig& config, const TaskSchedule& schedule,
                                        const LabeledDataset& train_data,
                                        const LabeledDataset& test_data);

/// Upper-bound baseline: one task over every class, trained for
/// epochs_base * (1 + N/2) epochs. Produces a single record.
std::vector<TaskRecord> run_joint(const LearnerConfig& config, const LabeledDataset& train_data,
                                  const LabeledDataset& test_data);

} // namespace fasticarl

#endif
