#pragma once

#include "fdrl/random.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fdrl {

enum class Activation { Tanh };
enum class OutputHead { Linear, Softmax };

struct MlpSpec {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden;
    std::size_t output_dim = 0;
    Activation activation = Activation::Tanh;
    OutputHead head = OutputHead::Linear;

    std::size_t parameter_count() const;
    /// Identifier of the parameter layout, e.g. "mlp:22-64-64-7:tanh:linear".
    std::string hash() const;
    /// Throws ParameterError on zero-width layers.
    void validate() const;

    bool operator==(const MlpSpec &) const = default;
};

/// Flat parameters in canonical order: for each layer, the row-major weight
/// matrix (out x in) followed by the bias.
struct WeightVector {
    std::vector<double> values;
    std::string spec_hash;

    bool operator==(const WeightVector &) const = default;
};

/// Per-sample intermediate values kept for backpropagation.
struct ForwardCache {
    std::vector<std::vector<double>> layer_inputs; // x, then each hidden activation
    std::vector<double> logits;                    // final affine output
    std::vector<double> output;                    // logits, or softmax(logits)
};

std::vector<double> softmax(std::span<const double> logits);
std::vector<double> log_softmax(std::span<const double> logits);

/// Fully connected network with tanh hidden layers.
class Mlp {
public:
    /// All-zero parameters.
    explicit Mlp(MlpSpec spec);
    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
    Mlp(MlpSpec spec, Rng &rng);
    /// Throws ShapeError if `weights` was not produced for `spec`.
    Mlp(MlpSpec spec, const WeightVector &weights);

    const MlpSpec &spec() const { return spec_; }
    std::size_t parameter_count() const { return params_.size(); }
    std::span<double> parameters() { return params_; }
    std::span<const double> parameters() const { return params_; }

    WeightVector flatten() const;
    /// Throws ShapeError on spec hash or length mismatch.
    void load(const WeightVector &weights);

    std::vector<double> forward(std::span<const double> input) const;
    void forward(std::span<const double> input, ForwardCache &cache) const;

    /// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output).
    void backward(const ForwardCache &cache, std::span<const double> grad_output, std::span<double> grad) const;
    /// Same, given d(loss)/d(logits); skips the softmax Jacobian.
    void backward_logits(const ForwardCache &cache, std::span<const double> grad_logits,
                         std::span<double> grad) const;

private:
    struct Layer {
        std::size_t in, out, weight_offset, bias_offset;
    };

    MlpSpec spec_;
    std::vector<Layer> layers_;
    std::vector<double> params_;
};

struct AdamState {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t step = 0;
    std::vector<double> first_moment;
    std::vector<double> second_moment;

    explicit AdamState(std::size_t parameter_count = 0, double lr = 1e-3)
        : learning_rate(lr), first_moment(parameter_count, 0.0), second_moment(parameter_count, 0.0) {}

    bool operator==(const AdamState &) const = default;
};

/// Bias-corrected Adam update of `weights` in place.
void adam_step(AdamState &adam, std::span<double> weights, std::span<const double> gradient);

/// Rescales `grad` so its L2 norm is at most `max_norm`; returns the original norm.
double clip_grad_norm(std::span<double> grad, double max_norm);

} // namespace fdrl
