#include "fdrl/neural.hpp"

#include "fdrl/error.hpp"
#include "fdrl/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace fdrl {

std::size_t MlpSpec::parameter_count() const {
    std::size_t count = 0;
    std::size_t in = input_dim;
    for (const auto width : hidden) {
        count += width * in + width;
        in = width;
    }
    return count + output_dim * in + output_dim;
}

std::string MlpSpec::hash() const {
    std::string h = "mlp:" + std::to_string(input_dim);
    for (const auto width : hidden) h += "-" + std::to_string(width);
    h += "-" + std::to_string(output_dim);
    h += ":tanh";
    h += head == OutputHead::Softmax ? ":softmax" : ":linear";
    return h;
}

void MlpSpec::validate() const {
    if (input_dim == 0 || output_dim == 0) throw ParameterError("network input and output widths must be positive");
    if (std::find(hidden.begin(), hidden.end(), std::size_t{0}) != hidden.end())
        throw ParameterError("hidden layer widths must be positive");
}

std::vector<double> softmax(std::span<const double> logits) {
    const double peak = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) total += out[i] = std::exp(logits[i] - peak);
    for (auto &v : out) v /= total;
    return out;
}

std::vector<double> log_softmax(std::span<const double> logits) {
    const double peak = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (const double z : logits) total += std::exp(z - peak);
    const double log_total = peak + std::log(total);
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - log_total;
    return out;
}

Mlp::Mlp(MlpSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    std::size_t offset = 0;
    std::size_t in = spec_.input_dim;
    const auto add_layer = [&](std::size_t out) {
        layers_.push_back({in, out, offset, offset + in * out});
        offset += in * out + out;
        in = out;
    };
    for (const auto width : spec_.hidden) add_layer(width);
    add_layer(spec_.output_dim);
    params_.assign(offset, 0.0);
}

Mlp::Mlp(MlpSpec spec, Rng &rng) : Mlp(std::move(spec)) {
    for (const auto &layer : layers_) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
        for (std::size_t i = 0; i < layer.in * layer.out + layer.out; ++i)
            params_[layer.weight_offset + i] = uniform(rng, -bound, bound);
    }
}

Mlp::Mlp(MlpSpec spec, const WeightVector &weights) : Mlp(std::move(spec)) { load(weights); }

WeightVector Mlp::flatten() const { return {params_, spec_.hash()}; }

void Mlp::load(const WeightVector &weights) {
    if (weights.spec_hash != spec_.hash())
        throw ShapeError("weights for '" + weights.spec_hash + "' do not fit '" + spec_.hash() + "'");
    if (weights.values.size() != params_.size())
        throw ShapeError("expected " + std::to_string(params_.size()) + " parameters, got " +
                         std::to_string(weights.values.size()));
    params_ = weights.values;
}

std::vector<double> Mlp::forward(std::span<const double> input) const {
    ForwardCache cache;
    forward(input, cache);
    return std::move(cache.output);
}

void Mlp::forward(std::span<const double> input, ForwardCache &cache) const {
    if (input.size() != spec_.input_dim)
        throw ShapeError("network expects " + std::to_string(spec_.input_dim) + " inputs, got " +
                         std::to_string(input.size()));
    const auto &k = kernels::active();
    cache.layer_inputs.resize(layers_.size());
    cache.layer_inputs[0].assign(input.begin(), input.end());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto &layer = layers_[l];
        const bool last = l + 1 == layers_.size();
        auto &out = last ? cache.logits : cache.layer_inputs[l + 1];
        out.resize(layer.out);
        k.matvec(params_.data() + layer.weight_offset, params_.data() + layer.bias_offset,
                 cache.layer_inputs[l].data(), out.data(), layer.out, layer.in);
        if (!last)
            for (auto &v : out) v = std::tanh(v);
    }
    if (spec_.head == OutputHead::Softmax) cache.output = softmax(cache.logits);
    else cache.output = cache.logits;
}

void Mlp::backward(const ForwardCache &cache, std::span<const double> grad_output, std::span<double> grad) const {
    if (grad_output.size() != spec_.output_dim) throw ShapeError("upstream gradient has the wrong width");
    if (spec_.head == OutputHead::Linear) {
        backward_logits(cache, grad_output, grad);
        return;
    }
    // Softmax Jacobian: dz_i = p_i (g_i - <g, p>).
    const auto &p = cache.output;
    double inner = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) inner += grad_output[i] * p[i];
    std::vector<double> grad_logits(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) grad_logits[i] = p[i] * (grad_output[i] - inner);
    backward_logits(cache, grad_logits, grad);
}

void Mlp::backward_logits(const ForwardCache &cache, std::span<const double> grad_logits,
                          std::span<double> grad) const {
    if (grad_logits.size() != spec_.output_dim) throw ShapeError("upstream gradient has the wrong width");
    if (grad.size() != params_.size()) throw ShapeError("gradient buffer has the wrong length");
    const auto &k = kernels::active();
    std::vector<double> delta(grad_logits.begin(), grad_logits.end());
    std::vector<double> next;
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const auto &layer = layers_[l];
        const auto &input = cache.layer_inputs[l];
        k.rank1_update(delta.data(), input.data(), grad.data() + layer.weight_offset, layer.out, layer.in);
        k.add(delta.data(), grad.data() + layer.bias_offset, layer.out);
        if (l == 0) break;
        next.assign(layer.in, 0.0);
        k.matvec_transposed(params_.data() + layer.weight_offset, delta.data(), next.data(), layer.out, layer.in);
        // input holds tanh(z) of the previous layer
        for (std::size_t i = 0; i < layer.in; ++i) next[i] *= 1.0 - input[i] * input[i];
        delta.swap(next);
    }
}

void adam_step(AdamState &adam, std::span<double> weights, std::span<const double> gradient) {
    if (weights.size() != gradient.size() || adam.first_moment.size() != weights.size() ||
        adam.second_moment.size() != weights.size())
        throw ShapeError("Adam state, weights and gradient lengths differ");
    adam.step += 1;
    const double t = static_cast<double>(adam.step);
    const double bias1 = 1.0 - std::pow(adam.beta1, t);
    const double bias2_sqrt = std::sqrt(1.0 - std::pow(adam.beta2, t));
    const kernels::AdamCoefficients c{adam.learning_rate * bias2_sqrt / bias1, adam.beta1, adam.beta2,
                                      adam.epsilon * bias2_sqrt};
    kernels::active().adam(c, gradient.data(), adam.first_moment.data(), adam.second_moment.data(), weights.data(),
                           weights.size());
}

double clip_grad_norm(std::span<double> grad, double max_norm) {
    const double norm = std::sqrt(kernels::active().dot(grad.data(), grad.data(), grad.size()));
    if (norm > max_norm && norm > 0.0) {
        const double scale = max_norm / (norm + 1e-6);
        for (auto &g : grad) g *= scale;
    }
    return norm;
}

} // namespace fdrl
