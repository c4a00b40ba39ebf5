#ifndef FASTICARL_NN_HPP
#define FASTICARL_NN_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fasticarl/tensor.hpp"

namespace fasticarl {

/// Feedforward network: input -> ReLU hidden layers -> linear feature layer -> linear head.
///
/// layer_dims = [d0, hidden..., feature_dim, classes]. weights[l] has shape
/// (layer_dims[l] x layer_dims[l+1]); ReLU follows every layer except the last
/// two (the feature layer and the classifier head are purely affine). The
/// feature dimension is fixed for the lifetime of a run; growing the model adds
/// output units only (see expand_outputs).
struct MlpModel {
    std::vector<std::size_t> layer_dims;
    std::vector<Tensor2> weights;
    std::vector<std::vector<float>> biases;

    std::size_t layer_count() const { return weights.size(); }
    std::size_t input_dim() const { return layer_dims.front(); }
    std::size_t feature_dim() const { return layer_dims[layer_dims.size() - 2]; }
    std::size_t output_dim() const { return layer_dims.back(); }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (std::size_t l = 0; l < weights.size(); ++l)
            n += weights[l].data.size() + biases[l].size();
        return n;
    }
    std::uint64_t parameter_bytes() const {
        return static_cast<std::uint64_t>(parameter_count()) * sizeof(float);
    }
};

/// Builds a model with the given dims. Weights are drawn from a seeded normal
/// distribution scaled by fan-in; biases start at zero.
MlpModel make_mlp(const std::vector<std::size_t>& layer_dims, std::uint32_t seed);

/// Parameter-shaped gradient set.
struct ModelGrads {
    std::vector<Tensor2> weights;
    std::vector<std::vector<float>> biases;
};

ModelGrads zero_grads_like(const MlpModel& model);

/// Adam accumulators mirroring the parameter shapes.
struct AdamState {
    std::vector<Tensor2> m_weights, v_weights;
    std::vector<std::vector<float>> m_biases, v_biases;
    std::uint64_t step = 0;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float epsilon = 1e-8f;
    float learning_rate = 1e-3f;
};

AdamState make_adam_state(const MlpModel& model, float learning_rate = 1e-3f);

/// Runs the feature stack (all layers but the head). Returns an n x feature_dim matrix.
Tensor2 forward_features(const MlpModel& model, const Tensor2& batch);

/// Full forward pass. Returns n x classes logits.
Tensor2 forward_logits(const MlpModel& model, const Tensor2& batch);

struct LossBreakdown {
    float total = 0.0f;
    float classification = 0.0f;
    float distillation = 0.0f;
};

/// Softmax cross-entropy on the labels plus, when old_logits is present, a
/// per-output sigmoid binary cross-entropy distillation term over the first
/// old_class_count outputs with sigmoid(old_logits) as targets. Both terms are
/// averaged over the batch and summed with unit weight. Labels index logit
/// columns.
std::pair<LossBreakdown, ModelGrads> loss_and_grads(const MlpModel& model,
                                                    const Tensor2& batch,
                                                    std::span<const std::uint16_t> labels,
                                                    const Tensor2* old_logits = nullptr,
                                                    std::size_t old_class_count = 0);

/// Standard Adam update with bias correction. Increments the step counter.
void adam_step(MlpModel& model, const ModelGrads& grads, AdamState& state);

/// Widens the head by new_classes zero-initialized output units. Existing
/// parameters are preserved bit for bit, so pre-existing logits never change.
void expand_outputs(MlpModel& model, std::size_t new_classes);

} // namespace fasticarl

#endif
