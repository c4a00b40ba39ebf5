#include "fasticarl/learner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace fasticarl {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

class Stopwatch {
public:
    explicit Stopwatch(double& sink) : sink_(sink), start_(Clock::now()) {}
    ~Stopwatch() { sink_ += seconds_since(start_); }

private:
    double& sink_;
    Clock::time_point start_;
};

} // namespace

std::string method_name(Method m) {
    switch (m) {
    case Method::none: return "none";
    case Method::icarl: return "icarl";
    case Method::fasticarl: return "fasticarl";
    case Method::joint: return "joint";
    }
    return "unknown";
}

Method method_from_name(const std::string& name) {
    if (name == "none") return Method::none;
    if (name == "icarl") return Method::icarl;
    if (name == "fasticarl") return Method::fasticarl;
    if (name == "joint") return Method::joint;
    throw ContractViolation("unknown method: " + name);
}

void TaskSchedule::validate(std::uint16_t class_count) const {
    check_contract(!class_groups.empty(), "TaskSchedule: no task groups");
    std::vector<bool> seen(class_count, false);
    for (const auto& group : class_groups) {
        check_contract(!group.empty(), "TaskSchedule: empty task group");
        for (std::uint16_t c : group) {
            check_contract(c < class_count, "TaskSchedule: class id out of range");
            check_contract(!seen[c], "TaskSchedule: class appears in two groups");
            seen[c] = true;
        }
    }
    check_contract(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }),
                   "TaskSchedule: groups do not cover every class");
}

TaskSchedule make_default_schedule(std::uint16_t class_count) {
    check_contract(class_count >= 2 && class_count % 2 == 0,
                   "make_default_schedule: class count must be even and >= 2");
    TaskSchedule schedule;
    std::vector<std::uint16_t> base;
    for (std::uint16_t c = 0; c < class_count / 2; ++c) base.push_back(c);
    schedule.class_groups.push_back(std::move(base));
    for (std::uint16_t c = class_count / 2; c < class_count; ++c)
        schedule.class_groups.push_back({c});
    return schedule;
}

double weighted_f1(std::span<const std::uint16_t> predictions,
                   std::span<const std::uint16_t> labels) {
    check_contract(predictions.size() == labels.size(), "weighted_f1: length mismatch");
    check_contract(!labels.empty(), "weighted_f1: empty input");

    std::uint16_t max_class = 0;
    for (std::uint16_t p : predictions) max_class = std::max(max_class, p);
    for (std::uint16_t l : labels) max_class = std::max(max_class, l);

    const std::size_t classes = static_cast<std::size_t>(max_class) + 1;
    std::vector<std::size_t> tp(classes, 0), pred_count(classes, 0), support(classes, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        ++support[labels[i]];
        ++pred_count[predictions[i]];
        if (predictions[i] == labels[i]) ++tp[labels[i]];
    }

    double weighted_sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
        if (support[c] == 0) continue;
        const double precision =
            pred_count[c] > 0 ? static_cast<double>(tp[c]) / static_cast<double>(pred_count[c])
                              : 0.0;
        const double recall = static_cast<double>(tp[c]) / static_cast<double>(support[c]);
        const double f1 =
            precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        weighted_sum += f1 * static_cast<double>(support[c]);
    }
    return weighted_sum / static_cast<double>(labels.size());
}

IncrementalLearner::IncrementalLearner(LearnerConfig config, const LabeledDataset& train_data)
    : config_(std::move(config)), train_data_(train_data), rng_(config_.seed) {
    check_contract(config_.bits == 32 || config_.bits == 16 || config_.bits == 8,
                   "LearnerConfig: bits must be 32/16/8");
    check_contract(config_.batch_size >= 1, "LearnerConfig: batch_size must be >= 1");
}

std::size_t IncrementalLearner::column_of(std::uint16_t class_id) const {
    for (std::size_t i = 0; i < learned_classes_.size(); ++i)
        if (learned_classes_[i] == class_id) return i;
    throw ContractViolation("learner: class not learned yet");
}

Tensor2 IncrementalLearner::class_rows(std::uint16_t class_id) const {
    const std::vector<std::size_t> rows = train_data_.indices_of_class(class_id);
    check_contract(!rows.empty(), "learner: class has no training data");
    return gather_rows(train_data_.features, rows);
}

void IncrementalLearner::train_epochs(const Tensor2& inputs,
                                      const std::vector<std::uint16_t>& columns,
                                      std::size_t epochs, const MlpModel* old_model,
                                      std::size_t old_class_count) {
    const std::size_t n = inputs.rows;
    AdamState adam = make_adam_state(model_, config_.learning_rate);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng_);
        for (std::size_t start = 0; start < n; start += config_.batch_size) {
            const std::size_t len = std::min(config_.batch_size, n - start);
            const std::span<const std::size_t> rows(order.data() + start, len);
            const Tensor2 batch = gather_rows(inputs, rows);
            std::vector<std::uint16_t> batch_labels(len);
            for (std::size_t i = 0; i < len; ++i) batch_labels[i] = columns[rows[i]];

            Tensor2 old_logits;
            const Tensor2* old_ptr = nullptr;
            if (old_model != nullptr) {
                old_logits = forward_logits(*old_model, batch);
                old_ptr = &old_logits;
            }
            auto [loss, grads] =
                loss_and_grads(model_, batch, batch_labels, old_ptr, old_class_count);
            adam_step(model_, grads, adam);
        }
    }
}

TaskTiming IncrementalLearner::train_base_task(const TaskSchedule& schedule) {
    schedule.validate(train_data_.class_count);
    check_contract(learned_classes_.empty(), "train_base_task: learner already trained");
    const std::vector<std::uint16_t>& base_classes = schedule.class_groups.front();

    std::vector<std::size_t> dims;
    dims.push_back(train_data_.features.cols);
    for (std::size_t h : config_.hidden_dims) dims.push_back(h);
    dims.push_back(config_.feature_dim);
    dims.push_back(base_classes.size());
    model_ = make_mlp(dims, config_.seed);
    learned_classes_ = base_classes;

    // Gather the base-task rows in dataset order.
    std::vector<std::size_t> rows;
    std::vector<std::uint16_t> columns;
    for (std::size_t i = 0; i < train_data_.size(); ++i) {
        const auto it =
            std::find(base_classes.begin(), base_classes.end(), train_data_.labels[i]);
        if (it == base_classes.end()) continue;
        rows.push_back(i);
        columns.push_back(static_cast<std::uint16_t>(it - base_classes.begin()));
    }
    check_contract(!rows.empty(), "train_base_task: no data for base classes");
    const Tensor2 inputs = gather_rows(train_data_.features, rows);

    TaskTiming timing;
    {
        Stopwatch sw(timing.train_s);
        train_epochs(inputs, columns, config_.epochs_base, nullptr, 0);
    }

    if (config_.uses_exemplars()) {
        memory_ = ReplayMemory(
            BudgetPolicy::from_fraction(config_.budget_fraction, train_data_.size()));
        const std::uint64_t budget = memory_.policy().total_budget;
        check_contract(budget >= base_classes.size(),
                       "train_base_task: budget smaller than base class count");
        const std::size_t quota = static_cast<std::size_t>(budget / base_classes.size());
        for (std::uint16_t c : base_classes) {
            const Tensor2 data = class_rows(c);
            const std::size_t m = std::min(quota, data.rows);
            memory_.insert(build_class_set(data, c, m, timing));
        }
    }
    return timing;
}

TaskTiming IncrementalLearner::learn_new_class(std::uint16_t class_id) {
    check_contract(!learned_classes_.empty(), "learn_new_class: train_base_task first");
    check_contract(std::find(learned_classes_.begin(), learned_classes_.end(), class_id) ==
                       learned_classes_.end(),
                   "learn_new_class: class already learned");

    TaskTiming timing;
    const Tensor2 new_data = class_rows(class_id);
    const std::size_t old_class_count = learned_classes_.size();

    MlpModel old_model;
    Tensor2 inputs;
    std::vector<std::uint16_t> columns;
    {
        Stopwatch sw(timing.replay_prep_s);
        if (config_.uses_exemplars()) old_model = model_; // distillation snapshot
        expand_outputs(model_, 1);
        learned_classes_.push_back(class_id);

        // Replay set: dequantized exemplars of every old class, then the new data.
        std::size_t replay_rows = 0;
        for (const auto& [id, set] : memory_.sets()) replay_rows += set.size();
        inputs = Tensor2(replay_rows + new_data.rows, new_data.cols);
        columns.reserve(inputs.rows);
        std::size_t row = 0;
        for (const auto& [id, set] : memory_.sets()) {
            const std::uint16_t column = static_cast<std::uint16_t>(column_of(id));
            for (const QuantizedVector& qv : set.exemplars) {
                const std::vector<float> values = dequantize(qv);
                std::copy(values.begin(), values.end(), inputs.row(row).begin());
                columns.push_back(column);
                ++row;
            }
        }
        for (std::size_t i = 0; i < new_data.rows; ++i) {
            std::copy(new_data.row(i).begin(), new_data.row(i).end(), inputs.row(row).begin());
            columns.push_back(static_cast<std::uint16_t>(old_class_count));
            ++row;
        }
    }

    {
        Stopwatch sw(timing.train_s);
        const MlpModel* old_ptr = config_.uses_exemplars() ? &old_model : nullptr;
        train_epochs(inputs, columns, config_.epochs_incremental, old_ptr, old_class_count);
    }

    if (config_.uses_exemplars()) {
        const std::vector<std::size_t> quotas =
            quotas_for(learned_classes_.size(), memory_.policy().total_budget);
        // Rank of the new class among all observed ids decides its share.
        std::vector<std::uint16_t> sorted_ids = learned_classes_;
        std::sort(sorted_ids.begin(), sorted_ids.end());
        const std::size_t rank = static_cast<std::size_t>(
            std::find(sorted_ids.begin(), sorted_ids.end(), class_id) - sorted_ids.begin());
        const std::size_t m = std::min(quotas[rank], new_data.rows);
        memory_.insert(build_class_set(new_data, class_id, m, timing));
        {
            Stopwatch sw(timing.trim_s);
            memory_.rebalance();
        }
    }
    return timing;
}

std::vector<std::uint16_t> IncrementalLearner::classify(const Tensor2& inputs) const {
    check_contract(!learned_classes_.empty(), "classify: nothing learned yet");

    if (!config_.uses_exemplars()) {
        // Fine-tuning / joint baselines predict by argmax over logits,
        // breaking ties toward the lowest class id.
        const Tensor2 logits = forward_logits(model_, inputs);
        std::vector<std::uint16_t> out(inputs.rows);
        for (std::size_t r = 0; r < inputs.rows; ++r) {
            const float* z = logits.data.data() + r * logits.cols;
            std::size_t best = 0;
            for (std::size_t c = 1; c < logits.cols; ++c) {
                if (z[c] > z[best] ||
                    (z[c] == z[best] && learned_classes_[c] < learned_classes_[best]))
                    best = c;
            }
            out[r] = learned_classes_[best];
        }
        return out;
    }

    check_contract(!memory_.empty(), "classify: replay memory is empty");
    // Exemplar means drift with the model, so they are recomputed per call.
    std::vector<std::uint16_t> ids;
    std::vector<std::vector<float>> means;
    for (const auto& [id, set] : memory_.sets()) {
        ids.push_back(id);
        means.push_back(exemplar_class_mean(set, model_));
    }
    Tensor2 features = forward_features(model_, inputs);
    if (config_.normalized_features) {
        for (auto& mean : means) normalize_rows_inplace(mean);
        for (std::size_t r = 0; r < features.rows; ++r) {
            auto row = features.row(r);
            std::vector<float> tmp(row.begin(), row.end());
            normalize_rows_inplace(tmp);
            std::copy(tmp.begin(), tmp.end(), row.begin());
        }
    }

    std::vector<std::uint16_t> out(inputs.rows);
    for (std::size_t r = 0; r < features.rows; ++r) {
        const auto row = features.row(r);
        double best = 0.0;
        std::size_t best_idx = means.size();
        for (std::size_t k = 0; k < means.size(); ++k) {
            double acc = 0.0;
            for (std::size_t c = 0; c < row.size(); ++c) {
                const double diff =
                    static_cast<double>(row[c]) - static_cast<double>(means[k][c]);
                acc += diff * diff;
            }
            if (best_idx == means.size() || acc < best) { // ties keep the lower class id
                best = acc;
                best_idx = k;
            }
        }
        out[r] = ids[best_idx];
    }
    return out;
}

} // namespace fasticarl
