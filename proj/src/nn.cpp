#include "fasticarl/nn.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace fasticarl {

namespace {

void check_model_shape(const MlpModel& model) {
    check_contract(model.layer_dims.size() >= 3,
                   "MlpModel: need at least [input, feature_dim, classes]");
    check_contract(model.weights.size() == model.layer_dims.size() - 1 &&
                       model.biases.size() == model.weights.size(),
                   "MlpModel: weights/biases do not match layer_dims");
}

// y = x * W + b for one layer.
void affine_forward(const Tensor2& x, const Tensor2& w, const std::vector<float>& b,
                    Tensor2& y) {
    const std::size_t n = x.rows, in = w.rows, out = w.cols;
    y = Tensor2(n, out);
    for (std::size_t r = 0; r < n; ++r) {
        const float* xr = x.data.data() + r * in;
        float* yr = y.data.data() + r * out;
        for (std::size_t o = 0; o < out; ++o) yr[o] = b[o];
        for (std::size_t i = 0; i < in; ++i) {
            const float xi = xr[i];
            if (xi == 0.0f) continue;
            const float* wr = w.data.data() + i * out;
            for (std::size_t o = 0; o < out; ++o) yr[o] += xi * wr[o];
        }
    }
}

void relu_inplace(Tensor2& t) {
    for (float& v : t.data) v = v > 0.0f ? v : 0.0f;
}

// Forward pass keeping every layer's post-activation output. acts[0] is the
// input batch; acts.back() is the logits.
std::vector<Tensor2> forward_all(const MlpModel& model, const Tensor2& batch) {
    check_model_shape(model);
    check_contract(batch.cols == model.input_dim(), "forward: batch width != model input width");
    const std::size_t layers = model.layer_count();
    std::vector<Tensor2> acts(layers + 1);
    acts[0] = batch;
    for (std::size_t l = 0; l < layers; ++l) {
        affine_forward(acts[l], model.weights[l], model.biases[l], acts[l + 1]);
        if (l + 2 < layers) relu_inplace(acts[l + 1]); // hidden layers only
    }
    return acts;
}

float stable_sigmoid(float z) {
    if (z >= 0.0f) {
        const float e = std::exp(-z);
        return 1.0f / (1.0f + e);
    }
    const float e = std::exp(z);
    return e / (1.0f + e);
}

// Binary cross-entropy with logits: max(z,0) - z*t + log(1 + exp(-|z|)).
float bce_with_logits(float z, float t) {
    return std::max(z, 0.0f) - z * t + std::log1p(std::exp(-std::fabs(z)));
}

} // namespace

MlpModel make_mlp(const std::vector<std::size_t>& layer_dims, std::uint32_t seed) {
    check_contract(layer_dims.size() >= 3, "make_mlp: need at least [input, feature_dim, classes]");
    for (std::size_t d : layer_dims) check_contract(d >= 1, "make_mlp: zero-width layer");

    MlpModel model;
    model.layer_dims = layer_dims;
    const std::size_t layers = layer_dims.size() - 1;
    std::mt19937 rng(seed);
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t in = layer_dims[l], out = layer_dims[l + 1];
        // He scaling for ReLU layers, plain fan-in scaling for the affine tail.
        const float gain = (l + 2 < layers) ? 2.0f : 1.0f;
        std::normal_distribution<float> dist(0.0f, std::sqrt(gain / static_cast<float>(in)));
        Tensor2 w(in, out);
        for (float& v : w.data) v = dist(rng);
        model.weights.push_back(std::move(w));
        model.biases.emplace_back(out, 0.0f);
    }
    return model;
}

ModelGrads zero_grads_like(const MlpModel& model) {
    ModelGrads g;
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        g.weights.emplace_back(model.weights[l].rows, model.weights[l].cols);
        g.biases.emplace_back(model.biases[l].size(), 0.0f);
    }
    return g;
}

AdamState make_adam_state(const MlpModel& model, float learning_rate) {
    AdamState s;
    s.learning_rate = learning_rate;
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        s.m_weights.emplace_back(model.weights[l].rows, model.weights[l].cols);
        s.v_weights.emplace_back(model.weights[l].rows, model.weights[l].cols);
        s.m_biases.emplace_back(model.biases[l].size(), 0.0f);
        s.v_biases.emplace_back(model.biases[l].size(), 0.0f);
    }
    return s;
}

Tensor2 forward_features(const MlpModel& model, const Tensor2& batch) {
    check_model_shape(model);
    check_contract(batch.cols == model.input_dim(),
                   "forward_features: batch width != model input width");
    Tensor2 cur = batch;
    Tensor2 next;
    const std::size_t layers = model.layer_count();
    for (std::size_t l = 0; l + 1 < layers; ++l) {
        affine_forward(cur, model.weights[l], model.biases[l], next);
        if (l + 2 < layers) relu_inplace(next);
        cur = std::move(next);
    }
    return cur;
}

Tensor2 forward_logits(const MlpModel& model, const Tensor2& batch) {
    Tensor2 features = forward_features(model, batch);
    Tensor2 logits;
    affine_forward(features, model.weights.back(), model.biases.back(), logits);
    return logits;
}

std::pair<LossBreakdown, ModelGrads> loss_and_grads(const MlpModel& model,
                                                    const Tensor2& batch,
                                                    std::span<const std::uint16_t> labels,
                                                    const Tensor2* old_logits,
                                                    std::size_t old_class_count) {
    check_contract(labels.size() == batch.rows, "loss_and_grads: labels/batch size mismatch");
    check_contract(batch.rows >= 1, "loss_and_grads: empty batch");
    const std::size_t classes = model.output_dim();
    for (std::uint16_t y : labels)
        check_contract(y < classes, "loss_and_grads: label index >= output width");
    if (old_logits != nullptr) {
        check_contract(old_logits->cols == old_class_count && old_class_count <= classes,
                       "loss_and_grads: old_logits columns != old_class_count <= classes");
        check_contract(old_logits->rows == batch.rows,
                       "loss_and_grads: old_logits rows != batch rows");
    }

    std::vector<Tensor2> acts = forward_all(model, batch);
    const Tensor2& logits = acts.back();
    const std::size_t n = batch.rows;
    const float inv_n = 1.0f / static_cast<float>(n);

    LossBreakdown loss;
    Tensor2 dlogits(n, classes);

    // Softmax cross-entropy over the current label set.
    double ce_sum = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        const float* z = logits.data.data() + r * classes;
        float zmax = z[0];
        for (std::size_t c = 1; c < classes; ++c) zmax = std::max(zmax, z[c]);
        float sum = 0.0f;
        for (std::size_t c = 0; c < classes; ++c) sum += std::exp(z[c] - zmax);
        const float log_sum = std::log(sum) + zmax;
        ce_sum += static_cast<double>(log_sum - z[labels[r]]);
        float* d = dlogits.data.data() + r * classes;
        for (std::size_t c = 0; c < classes; ++c)
            d[c] = (std::exp(z[c] - log_sum) - (c == labels[r] ? 1.0f : 0.0f)) * inv_n;
    }
    loss.classification = static_cast<float>(ce_sum * inv_n);

    // Distillation: per-output sigmoid BCE against the old model's sigmoided
    // logits, summed over the old outputs, averaged over the batch.
    if (old_logits != nullptr && old_class_count > 0) {
        double kd_sum = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const float* z = logits.data.data() + r * classes;
            const float* zo = old_logits->data.data() + r * old_class_count;
            float* d = dlogits.data.data() + r * classes;
            for (std::size_t c = 0; c < old_class_count; ++c) {
                const float target = stable_sigmoid(zo[c]);
                kd_sum += static_cast<double>(bce_with_logits(z[c], target));
                d[c] += (stable_sigmoid(z[c]) - target) * inv_n;
            }
        }
        loss.distillation = static_cast<float>(kd_sum * inv_n);
    }
    loss.total = loss.classification + loss.distillation;

    // Backward through the affine/ReLU stack.
    ModelGrads grads = zero_grads_like(model);
    Tensor2 delta = std::move(dlogits);
    for (std::size_t li = model.layer_count(); li-- > 0;) {
        const Tensor2& x = acts[li];
        const Tensor2& w = model.weights[li];
        Tensor2& gw = grads.weights[li];
        std::vector<float>& gb = grads.biases[li];
        const std::size_t in = w.rows, out = w.cols;

        for (std::size_t r = 0; r < n; ++r) {
            const float* dr = delta.data.data() + r * out;
            const float* xr = x.data.data() + r * in;
            for (std::size_t o = 0; o < out; ++o) gb[o] += dr[o];
            for (std::size_t i = 0; i < in; ++i) {
                const float xi = xr[i];
                if (xi == 0.0f) continue;
                float* gwr = gw.data.data() + i * out;
                for (std::size_t o = 0; o < out; ++o) gwr[o] += xi * dr[o];
            }
        }
        if (li == 0) break;

        Tensor2 prev_delta(n, in);
        for (std::size_t r = 0; r < n; ++r) {
            const float* dr = delta.data.data() + r * out;
            float* pr = prev_delta.data.data() + r * in;
            for (std::size_t i = 0; i < in; ++i) {
                const float* wr = w.data.data() + i * out;
                float acc = 0.0f;
                for (std::size_t o = 0; o < out; ++o) acc += wr[o] * dr[o];
                pr[i] = acc;
            }
        }
        // ReLU derivative for hidden layers; the feature layer (li == L-1's
        // input) is affine, so its delta passes through unchanged.
        if (li + 1 < model.layer_count()) {
            const Tensor2& a = acts[li];
            for (std::size_t k = 0; k < prev_delta.data.size(); ++k)
                if (a.data[k] <= 0.0f) prev_delta.data[k] = 0.0f;
        }
        delta = std::move(prev_delta);
    }
    return {loss, grads};
}

void adam_step(MlpModel& model, const ModelGrads& grads, AdamState& state) {
    check_contract(grads.weights.size() == model.layer_count() &&
                       state.m_weights.size() == model.layer_count(),
                   "adam_step: shape mismatch");
    state.step += 1;
    const float b1 = state.beta1, b2 = state.beta2;
    const float bc1 = 1.0f - std::pow(b1, static_cast<float>(state.step));
    const float bc2 = 1.0f - std::pow(b2, static_cast<float>(state.step));

    auto update = [&](float* p, const float* g, float* m, float* v, std::size_t len) {
        for (std::size_t i = 0; i < len; ++i) {
            m[i] = b1 * m[i] + (1.0f - b1) * g[i];
            v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
            const float mhat = m[i] / bc1;
            const float vhat = v[i] / bc2;
            p[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    };

    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        check_contract(grads.weights[l].rows == model.weights[l].rows &&
                           grads.weights[l].cols == model.weights[l].cols &&
                           grads.biases[l].size() == model.biases[l].size(),
                       "adam_step: gradient shape mismatch");
        update(model.weights[l].data.data(), grads.weights[l].data.data(),
               state.m_weights[l].data.data(), state.v_weights[l].data.data(),
               model.weights[l].data.size());
        update(model.biases[l].data(), grads.biases[l].data(), state.m_biases[l].data(),
               state.v_biases[l].data(), model.biases[l].size());
    }
}

void expand_outputs(MlpModel& model, std::size_t new_classes) {
    check_contract(new_classes >= 1, "expand_outputs: new_classes must be >= 1");
    check_model_shape(model);
    Tensor2& w = model.weights.back();
    const std::size_t in = w.rows, out = w.cols, wider = out + new_classes;

    Tensor2 grown(in, wider);
    for (std::size_t i = 0; i < in; ++i) {
        const float* src = w.data.data() + i * out;
        float* dst = grown.data.data() + i * wider;
        std::copy(src, src + out, dst);
    }
    w = std::move(grown);
    model.biases.back().resize(wider, 0.0f);
    model.layer_dims.back() = wider;
}

} // namespace fasticarl
