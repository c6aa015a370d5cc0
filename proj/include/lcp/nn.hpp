#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lcp/rng.hpp"
#include "lcp/tensor.hpp"

namespace lcp {

enum class Family { kTcn, kRnn, kCnn };
enum class Mode { kTrain, kEval };

std::string family_name(Family f);
Family family_from_string(const std::string& name);

// Architecture description shared by the three model families.
// `levels` means residual blocks for the TCN, conv layers for the CNN and
// hidden units for the RNN; `channels`/`kernel` apply to the conv families.
struct ModelSpec {
    Family family = Family::kTcn;
    int input_dim = 3;   // D, channels of the input window
    int output_dim = 3;  // D_out, variables predicted per future step
    int horizon = 10;    // T, future steps per window
    int levels = 4;
    int channels = 32;
    int kernel = 2;
    double dropout = 0.1;

    void validate() const;
};

/// Trailing input steps that can influence the final output step of a TCN:
/// 1 + sum_i 2*(k-1)*2^i over the block dilations. TCN specs only.
int receptive_field(const ModelSpec& spec);

// ---------------------------------------------------------------------------
// Layer primitives. Inputs are [C_in x n] activations; every causal conv maps
// length n to length n with left zero padding, so position s never reads
// inputs past s.
// ---------------------------------------------------------------------------

struct ConvLayer {
    Tensor weights; // [C_out x C_in x k]
    Tensor bias;    // [C_out]
    int dilation = 1;

    int64_t out_channels() const { return weights.dim(0); }
    int64_t in_channels() const { return weights.dim(1); }
    int64_t kernel() const { return weights.dim(2); }
};

Tensor causal_conv_forward(const Tensor& x, const ConvLayer& layer);

struct ConvGrads {
    Tensor x;       // same shape as the forward input
    Tensor weights; // same shape as layer.weights
    Tensor bias;    // same shape as layer.bias
};

ConvGrads causal_conv_backward(const Tensor& x, const ConvLayer& layer, const Tensor& grad_out);

Tensor relu_forward(const Tensor& x);
/// Gradient mask uses the forward *input*; the subgradient at exactly 0 is 0.
Tensor relu_backward(const Tensor& x, const Tensor& grad_out);

struct DropoutResult {
    Tensor out;
    Tensor mask; // per-element factor applied (0 or 1/(1-rate)); all ones in eval mode
};

// Inverted dropout: train mode zeroes each element with probability `rate`
// and scales survivors by 1/(1-rate); eval mode is a passthrough. `rng` may
// be null in eval mode or when rate == 0.
DropoutResult dropout_forward(const Tensor& x, double rate, Mode mode, Rng* rng);

struct ResidualBlock {
    ConvLayer conv1;
    ConvLayer conv2; // same dilation as conv1
    double dropout_rate = 0.0;
    std::optional<ConvLayer> shortcut; // 1x1 conv, present iff in/out channels differ
};

struct ResidualBlockCache {
    Tensor input;
    Tensor conv1_pre;  // conv1 output before ReLU
    Tensor drop1_mask;
    Tensor conv2_in;   // branch activation entering conv2
    Tensor conv2_pre;  // conv2 output before ReLU
    Tensor drop2_mask;
    Tensor sum_pre;    // shortcut + branch, before the final ReLU
    Tensor out;
};

/// Branch is Conv1 -> ReLU -> Dropout -> Conv2 -> ReLU -> Dropout; output is
/// ReLU(shortcut(x) + branch(x)).
Tensor residual_block_forward(const Tensor& x, const ResidualBlock& block, Mode mode, Rng* rng,
                              ResidualBlockCache* cache = nullptr);

struct ResidualBlockGrads {
    Tensor input;
    Tensor conv1_weights, conv1_bias;
    Tensor conv2_weights, conv2_bias;
    Tensor shortcut_weights, shortcut_bias; // empty tensors when no shortcut
};

ResidualBlockGrads residual_block_backward(const ResidualBlock& block,
                                           const ResidualBlockCache& cache,
                                           const Tensor& grad_out);

// ---------------------------------------------------------------------------
// Models. A model owns its parameters; forward maps an input window
// [input_dim x L] to predictions [horizon x output_dim] read from the final
// time step through a linear head. Backward consumes the cache produced by
// forward_with_cache and *accumulates* into the gradient tensors.
// ---------------------------------------------------------------------------

class Model;

struct Cache {
    virtual ~Cache() = default;
    const Model* owner = nullptr;
    Tensor input;
    /// Named intermediate activations laid out as [channels x time], used by
    /// the causality and receptive-field probes.
    virtual std::vector<std::pair<std::string, const Tensor*>> activations() const = 0;
};

struct ForwardResult {
    Tensor y; // [horizon x output_dim]
    std::unique_ptr<Cache> cache;
};

class Model {
public:
    explicit Model(const ModelSpec& spec) : spec_(spec) {}
    virtual ~Model() = default;
    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;

    const ModelSpec& spec() const { return spec_; }

    /// Parameters in declaration order (also the serialization order).
    std::vector<Tensor*> params();
    std::vector<const Tensor*> params() const;
    const std::vector<std::string>& param_names() const { return param_names_; }
    int64_t param_count() const;

    std::vector<Tensor> snapshot_params() const;
    void load_params(const std::vector<Tensor>& snapshot);

    /// Zero gradient tensors shaped like params(), for backward to accumulate into.
    std::vector<Tensor> make_grad_storage() const;

    virtual Tensor forward(const Tensor& x, Mode mode, Rng* rng) const;
    virtual ForwardResult forward_with_cache(const Tensor& x, Mode mode, Rng* rng) const = 0;
    virtual void backward(const Cache& cache, const Tensor& grad_y,
                          std::vector<Tensor>& param_grads, Tensor* grad_x = nullptr) const = 0;

    /// Eval-mode inference. Conv families crop the window to the trailing
    /// `history_window()` steps first; the result is bit-identical to the full
    /// forward pass because nothing earlier can reach the final step.
    virtual Tensor predict(const Tensor& x) const;

    /// Trailing steps needed for an exact final-step output (L itself for the RNN).
    virtual int64_t history_window() const = 0;

protected:
    void register_param(std::string name, Tensor* tensor);
    void check_cache(const Cache& cache) const;
    void check_input(const Tensor& x) const;
    void check_grad_storage(const std::vector<Tensor>& grads) const;

    ModelSpec spec_;

private:
    std::vector<std::string> param_names_;
    std::vector<Tensor*> param_ptrs_;
};

/// Builds a model of spec.family with seeded uniform(+-sqrt(1/fan_in)) weights
/// and zero biases.
std::unique_ptr<Model> make_model(const ModelSpec& spec, Rng& init_rng);

// Flat binary container: little-endian header (format version + spec fields),
// then each parameter tensor as shape list + f64 payload in declaration
// order. Round-trips are bit exact.
void save_model(const Model& model, const std::filesystem::path& path);
std::unique_ptr<Model> load_model(const std::filesystem::path& path);

} // namespace lcp
