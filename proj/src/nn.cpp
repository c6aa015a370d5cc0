#include "lcp/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "lcp/errors.hpp"

namespace lcp {

namespace {

constexpr uint32_t kModelMagic = 0x4d50434cu; // "LCPM"
constexpr uint32_t kModelFormatVersion = 1;

std::string dims_string(const Tensor& t) {
    std::string s = "[";
    for (int i = 0; i < t.rank(); ++i) {
        if (i) s += "x";
        s += std::to_string(t.dim(i));
    }
    return s + "]";
}

} // namespace

std::string family_name(Family f) {
    switch (f) {
    case Family::kTcn: return "tcn";
    case Family::kRnn: return "rnn";
    case Family::kCnn: return "cnn";
    }
    return "?";
}

Family family_from_string(const std::string& name) {
    if (name == "tcn") return Family::kTcn;
    if (name == "rnn") return Family::kRnn;
    if (name == "cnn") return Family::kCnn;
    throw ParameterError("unknown model family: " + name);
}

void ModelSpec::validate() const {
    if (input_dim < 1) throw ParameterError("model spec: input_dim must be >= 1");
    if (output_dim < 1) throw ParameterError("model spec: output_dim must be >= 1");
    if (horizon < 1) throw ParameterError("model spec: horizon must be >= 1");
    if (levels < 1) throw ParameterError("model spec: levels must be >= 1");
    if (family != Family::kRnn && channels < 1) throw ParameterError("model spec: channels must be >= 1");
    if (family != Family::kRnn && kernel < 1) throw ParameterError("model spec: kernel must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ParameterError("model spec: dropout must be in [0, 1)");
}

int receptive_field(const ModelSpec& spec) {
    if (spec.family != Family::kTcn) {
        throw ParameterError("receptive_field is defined for TCN specs only");
    }
    int field = 1;
    int dilation = 1;
    for (int i = 0; i < spec.levels; ++i) {
        field += 2 * (spec.kernel - 1) * dilation; // two convs per block
        dilation *= 2;
    }
    return field;
}

// ---------------------------------------------------------------------------
// Layer primitives
// ---------------------------------------------------------------------------

Tensor causal_conv_forward(const Tensor& x, const ConvLayer& layer) {
    if (x.rank() != 2) throw ShapeError("conv input must be [channels x time]");
    const int64_t cin = layer.in_channels(), cout = layer.out_channels(), k = layer.kernel();
    if (x.dim(0) != cin) {
        throw ShapeError("conv input channels " + std::to_string(x.dim(0)) +
                         " != layer in_channels " + std::to_string(cin));
    }
    const int64_t n = x.dim(1);
    const int64_t d = layer.dilation;
    Tensor out = Tensor::zeros({cout, n});
    const double* xp = x.data().data();
    const double* wp = layer.weights.data().data();
    double* op = out.data().data();
    for (int64_t co = 0; co < cout; ++co) {
        double* orow = op + co * n;
        const double b = layer.bias[co];
        for (int64_t s = 0; s < n; ++s) orow[s] = b;
        for (int64_t ci = 0; ci < cin; ++ci) {
            const double* xrow = xp + ci * n;
            const double* wrow = wp + (co * cin + ci) * k;
            for (int64_t i = 0; i < k; ++i) {
                const double w = wrow[i];
                const int64_t off = d * i; // taps below 0 read left zero padding
                for (int64_t s = off; s < n; ++s) orow[s] += w * xrow[s - off];
            }
        }
    }
    return out;
}

namespace {

// Accumulating adjoint of causal_conv_forward. grad_x may be null.
void conv_backward_acc(const Tensor& x, const ConvLayer& layer, const Tensor& grad_out,
                       Tensor* grad_x, Tensor& grad_w, Tensor& grad_b) {
    const int64_t cin = layer.in_channels(), cout = layer.out_channels(), k = layer.kernel();
    const int64_t n = x.dim(1);
    const int64_t d = layer.dilation;
    if (grad_out.rank() != 2 || grad_out.dim(0) != cout || grad_out.dim(1) != n) {
        throw ShapeError("conv grad_out shape " + dims_string(grad_out) + " does not match output");
    }
    const double* xp = x.data().data();
    const double* gp = grad_out.data().data();
    const double* wp = layer.weights.data().data();
    double* gwp = grad_w.data().data();
    double* gbp = grad_b.data().data();
    double* gxp = grad_x ? grad_x->data().data() : nullptr;
    for (int64_t co = 0; co < cout; ++co) {
        const double* grow = gp + co * n;
        double acc = 0.0;
        for (int64_t s = 0; s < n; ++s) acc += grow[s];
        gbp[co] += acc;
        for (int64_t ci = 0; ci < cin; ++ci) {
            const double* xrow = xp + ci * n;
            double* gxrow = gxp ? gxp + ci * n : nullptr;
            const double* wrow = wp + (co * cin + ci) * k;
            double* gwrow = gwp + (co * cin + ci) * k;
            for (int64_t i = 0; i < k; ++i) {
                const int64_t off = d * i;
                double wacc = 0.0;
                for (int64_t s = off; s < n; ++s) wacc += grow[s] * xrow[s - off];
                gwrow[i] += wacc;
                if (gxrow) {
                    const double w = wrow[i];
                    for (int64_t s = off; s < n; ++s) gxrow[s - off] += w * grow[s];
                }
            }
        }
    }
}

} // namespace

ConvGrads causal_conv_backward(const Tensor& x, const ConvLayer& layer, const Tensor& grad_out) {
    if (x.rank() != 2 || x.dim(0) != layer.in_channels()) {
        throw ShapeError("conv backward input shape " + dims_string(x) + " does not match layer");
    }
    ConvGrads g;
    g.x = Tensor::zeros(x.shape());
    g.weights = Tensor::zeros(layer.weights.shape());
    g.bias = Tensor::zeros(layer.bias.shape());
    conv_backward_acc(x, layer, grad_out, &g.x, g.weights, g.bias);
    return g;
}

Tensor relu_forward(const Tensor& x) {
    Tensor out = x;
    for (double& v : out.data()) {
        if (v <= 0.0) v = 0.0;
    }
    return out;
}

Tensor relu_backward(const Tensor& x, const Tensor& grad_out) {
    if (!x.same_shape(grad_out)) throw ShapeError("relu_backward shape mismatch");
    Tensor out = grad_out;
    const std::vector<double>& xv = x.data();
    std::vector<double>& ov = out.data();
    for (size_t i = 0; i < ov.size(); ++i) {
        if (xv[i] <= 0.0) ov[i] = 0.0;
    }
    return out;
}

DropoutResult dropout_forward(const Tensor& x, double rate, Mode mode, Rng* rng) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ParameterError("dropout rate must be in [0, 1)");
    DropoutResult r;
    if (mode == Mode::kEval || rate == 0.0) {
        r.out = x;
        r.mask = Tensor::zeros(x.shape());
        for (double& v : r.mask.data()) v = 1.0;
        return r;
    }
    if (!rng) throw ParameterError("dropout in train mode needs an rng");
    const double keep_scale = 1.0 / (1.0 - rate);
    r.out = x;
    r.mask = Tensor::zeros(x.shape());
    std::vector<double>& ov = r.out.data();
    std::vector<double>& mv = r.mask.data();
    for (size_t i = 0; i < ov.size(); ++i) {
        const double m = rng->uniform() < rate ? 0.0 : keep_scale;
        mv[i] = m;
        ov[i] *= m;
    }
    return r;
}

Tensor residual_block_forward(const Tensor& x, const ResidualBlock& block, Mode mode, Rng* rng,
                              ResidualBlockCache* cache) {
    if (x.rank() != 2 || x.dim(0) != block.conv1.in_channels()) {
        throw ShapeError("residual block input shape " + dims_string(x) + " does not match conv1");
    }
    Tensor a1 = causal_conv_forward(x, block.conv1);
    DropoutResult d1 = dropout_forward(relu_forward(a1), block.dropout_rate, mode, rng);
    Tensor a2 = causal_conv_forward(d1.out, block.conv2);
    DropoutResult d2 = dropout_forward(relu_forward(a2), block.dropout_rate, mode, rng);
    Tensor s = block.shortcut ? causal_conv_forward(x, *block.shortcut) : x;
    Tensor z = add(s, d2.out);
    Tensor out = relu_forward(z);
    if (cache) {
        cache->input = x;
        cache->conv1_pre = std::move(a1);
        cache->drop1_mask = std::move(d1.mask);
        cache->conv2_in = std::move(d1.out);
        cache->conv2_pre = std::move(a2);
        cache->drop2_mask = std::move(d2.mask);
        cache->sum_pre = std::move(z);
        cache->out = out;
    }
    return out;
}

ResidualBlockGrads residual_block_backward(const ResidualBlock& block,
                                           const ResidualBlockCache& cache,
                                           const Tensor& grad_out) {
    if (!grad_out.same_shape(cache.sum_pre)) {
        throw ShapeError("residual block grad_out shape " + dims_string(grad_out) +
                         " does not match block output");
    }
    ResidualBlockGrads g;
    Tensor g_z = relu_backward(cache.sum_pre, grad_out);
    // Branch side.
    Tensor g_r2 = mul(g_z, cache.drop2_mask);
    Tensor g_a2 = relu_backward(cache.conv2_pre, g_r2);
    ConvGrads c2 = causal_conv_backward(cache.conv2_in, block.conv2, g_a2);
    g.conv2_weights = std::move(c2.weights);
    g.conv2_bias = std::move(c2.bias);
    Tensor g_r1 = mul(c2.x, cache.drop1_mask);
    Tensor g_a1 = relu_backward(cache.conv1_pre, g_r1);
    ConvGrads c1 = causal_conv_backward(cache.input, block.conv1, g_a1);
    g.conv1_weights = std::move(c1.weights);
    g.conv1_bias = std::move(c1.bias);
    // Shortcut side.
    if (block.shortcut) {
        ConvGrads cs = causal_conv_backward(cache.input, *block.shortcut, g_z);
        g.shortcut_weights = std::move(cs.weights);
        g.shortcut_bias = std::move(cs.bias);
        g.input = add(c1.x, cs.x);
    } else {
        g.input = add(c1.x, g_z);
    }
    return g;
}

// ---------------------------------------------------------------------------
// Model base
// ---------------------------------------------------------------------------

void Model::register_param(std::string name, Tensor* tensor) {
    param_names_.push_back(std::move(name));
    param_ptrs_.push_back(tensor);
}

std::vector<Tensor*> Model::params() { return param_ptrs_; }

std::vector<const Tensor*> Model::params() const {
    return {param_ptrs_.begin(), param_ptrs_.end()};
}

int64_t Model::param_count() const {
    int64_t n = 0;
    for (const Tensor* t : param_ptrs_) n += t->numel();
    return n;
}

std::vector<Tensor> Model::snapshot_params() const {
    std::vector<Tensor> out;
    out.reserve(param_ptrs_.size());
    for (const Tensor* t : param_ptrs_) out.push_back(*t);
    return out;
}

void Model::load_params(const std::vector<Tensor>& snapshot) {
    if (snapshot.size() != param_ptrs_.size()) {
        throw ShapeError("parameter snapshot has " + std::to_string(snapshot.size()) +
                         " tensors, model has " + std::to_string(param_ptrs_.size()));
    }
    for (size_t i = 0; i < snapshot.size(); ++i) {
        if (!snapshot[i].same_shape(*param_ptrs_[i])) {
            throw ShapeError("parameter snapshot shape mismatch at " + param_names_[i]);
        }
    }
    for (size_t i = 0; i < snapshot.size(); ++i) *param_ptrs_[i] = snapshot[i];
}

std::vector<Tensor> Model::make_grad_storage() const {
    std::vector<Tensor> out;
    out.reserve(param_ptrs_.size());
    for (const Tensor* t : param_ptrs_) out.push_back(Tensor::zeros(t->shape()));
    return out;
}

Tensor Model::forward(const Tensor& x, Mode mode, Rng* rng) const {
    return forward_with_cache(x, mode, rng).y;
}

Tensor Model::predict(const Tensor& x) const {
    check_input(x);
    const int64_t need = history_window();
    const int64_t len = x.dim(1);
    if (len <= need) return forward(x, Mode::kEval, nullptr);
    Tensor cropped = Tensor::zeros({x.dim(0), need});
    for (int64_t c = 0; c < x.dim(0); ++c) {
        for (int64_t s = 0; s < need; ++s) cropped(c, s) = x(c, len - need + s);
    }
    return forward(cropped, Mode::kEval, nullptr);
}

void Model::check_cache(const Cache& cache) const {
    if (cache.owner != this) throw StateError("backward called with a cache from another model");
}

void Model::check_grad_storage(const std::vector<Tensor>& grads) const {
    if (grads.size() != param_ptrs_.size()) {
        throw ShapeError("gradient storage has " + std::to_string(grads.size()) +
                         " tensors, model has " + std::to_string(param_ptrs_.size()));
    }
}

void Model::check_input(const Tensor& x) const {
    if (x.rank() != 2 || x.dim(0) != spec_.input_dim) {
        throw ShapeError("model input must be [" + std::to_string(spec_.input_dim) +
                         " x L], got " + dims_string(x));
    }
}

namespace {

// Shared linear output head: y_flat = W * h + b read from the final-step
// feature vector, reshaped to [horizon x output_dim].
struct Head {
    Tensor weights; // [horizon*output_dim x features]
    Tensor bias;    // [horizon*output_dim]

    Tensor apply(const std::vector<double>& h, int64_t horizon, int64_t dout) const {
        const int64_t m = weights.dim(0), f = weights.dim(1);
        Tensor y = Tensor::zeros({horizon, dout});
        const double* wp = weights.data().data();
        double* yp = y.data().data();
        for (int64_t r = 0; r < m; ++r) {
            double acc = bias[r];
            const double* wrow = wp + r * f;
            for (int64_t c = 0; c < f; ++c) acc += wrow[c] * h[static_cast<size_t>(c)];
            yp[r] = acc;
        }
        return y;
    }

    // Returns d loss / d h; accumulates into the weight/bias grads.
    std::vector<double> backward(const std::vector<double>& h, const Tensor& grad_y,
                                 Tensor& grad_w, Tensor& grad_b) const {
        const int64_t m = weights.dim(0), f = weights.dim(1);
        std::vector<double> gh(static_cast<size_t>(f), 0.0);
        const double* gp = grad_y.data().data();
        const double* wp = weights.data().data();
        double* gwp = grad_w.data().data();
        for (int64_t r = 0; r < m; ++r) {
            const double gr = gp[r];
            grad_b[r] += gr;
            const double* wrow = wp + r * f;
            double* gwrow = gwp + r * f;
            for (int64_t c = 0; c < f; ++c) {
                gwrow[c] += gr * h[static_cast<size_t>(c)];
                gh[static_cast<size_t>(c)] += wrow[c] * gr;
            }
        }
        return gh;
    }
};

std::vector<double> last_column(const Tensor& m) {
    std::vector<double> h(static_cast<size_t>(m.dim(0)));
    for (int64_t c = 0; c < m.dim(0); ++c) h[static_cast<size_t>(c)] = m(c, m.dim(1) - 1);
    return h;
}

Tensor init_uniform(std::vector<int64_t> shape, int64_t fan_in, Rng& rng) {
    Tensor t = Tensor::zeros(shape);
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    for (double& v : t.data()) v = rng.uniform(-bound, bound);
    return t;
}

void check_grad_y(const Tensor& grad_y, const ModelSpec& spec) {
    if (grad_y.rank() != 2 || grad_y.dim(0) != spec.horizon || grad_y.dim(1) != spec.output_dim) {
        throw ShapeError("grad_y must be [horizon x output_dim]");
    }
}

// ---------------------------------------------------------------------------
// TCN
// ---------------------------------------------------------------------------

struct TcnCache : Cache {
    std::vector<ResidualBlockCache> blocks;

    std::vector<std::pair<std::string, const Tensor*>> activations() const override {
        std::vector<std::pair<std::string, const Tensor*>> out;
        for (size_t i = 0; i < blocks.size(); ++i) {
            out.emplace_back("block" + std::to_string(i) + ".conv1_pre", &blocks[i].conv1_pre);
            out.emplace_back("block" + std::to_string(i) + ".conv2_pre", &blocks[i].conv2_pre);
            out.emplace_back("block" + std::to_string(i) + ".out", &blocks[i].out);
        }
        return out;
    }
};

class TcnModel final : public Model {
public:
    TcnModel(const ModelSpec& spec, Rng& rng) : Model(spec) {
        blocks_.resize(static_cast<size_t>(spec.levels));
        int dilation = 1;
        for (int i = 0; i < spec.levels; ++i) {
            ResidualBlock& b = blocks_[static_cast<size_t>(i)];
            const int64_t cin = i == 0 ? spec.input_dim : spec.channels;
            const int64_t c = spec.channels;
            const int64_t k = spec.kernel;
            b.conv1.weights = init_uniform({c, cin, k}, cin * k, rng);
            b.conv1.bias = Tensor::zeros({c});
            b.conv1.dilation = dilation;
            b.conv2.weights = init_uniform({c, c, k}, c * k, rng);
            b.conv2.bias = Tensor::zeros({c});
            b.conv2.dilation = dilation;
            b.dropout_rate = spec.dropout;
            if (cin != c) {
                ConvLayer sc;
                sc.weights = init_uniform({c, cin, 1}, cin, rng);
                sc.bias = Tensor::zeros({c});
                sc.dilation = 1;
                b.shortcut = std::move(sc);
            }
            dilation *= 2;

            const std::string p = "block" + std::to_string(i) + ".";
            register_param(p + "conv1.weights", &b.conv1.weights);
            register_param(p + "conv1.bias", &b.conv1.bias);
            register_param(p + "conv2.weights", &b.conv2.weights);
            register_param(p + "conv2.bias", &b.conv2.bias);
            if (b.shortcut) {
                register_param(p + "shortcut.weights", &b.shortcut->weights);
                register_param(p + "shortcut.bias", &b.shortcut->bias);
            }
        }
        const int64_t m = static_cast<int64_t>(spec.horizon) * spec.output_dim;
        head_.weights = init_uniform({m, spec.channels}, spec.channels, rng);
        head_.bias = Tensor::zeros({m});
        register_param("head.weights", &head_.weights);
        register_param("head.bias", &head_.bias);
    }

    ForwardResult forward_with_cache(const Tensor& x, Mode mode, Rng* rng) const override {
        check_input(x);
        auto cache = std::make_unique<TcnCache>();
        cache->owner = this;
        cache->input = x;
        cache->blocks.resize(blocks_.size());
        const Tensor* cur = &x;
        for (size_t i = 0; i < blocks_.size(); ++i) {
            residual_block_forward(*cur, blocks_[i], mode, rng, &cache->blocks[i]);
            cur = &cache->blocks[i].out;
        }
        ForwardResult r;
        r.y = head_.apply(last_column(*cur), spec_.horizon, spec_.output_dim);
        r.cache = std::move(cache);
        return r;
    }

    void backward(const Cache& cache, const Tensor& grad_y, std::vector<Tensor>& param_grads,
                  Tensor* grad_x) const override {
        check_cache(cache);
        check_grad_y(grad_y, spec_);
        check_grad_storage(param_grads);
        const auto& tc = static_cast<const TcnCache&>(cache);
        size_t gi = param_grads.size() - 2;
        const Tensor& last_out = tc.blocks.back().out;
        std::vector<double> gh =
            head_.backward(last_column(last_out), grad_y, param_grads[gi], param_grads[gi + 1]);

        Tensor g_cur = Tensor::zeros(last_out.shape());
        for (int64_t c = 0; c < last_out.dim(0); ++c) {
            g_cur(c, last_out.dim(1) - 1) = gh[static_cast<size_t>(c)];
        }
        for (size_t i = blocks_.size(); i-- > 0;) {
            ResidualBlockGrads g = residual_block_backward(blocks_[i], tc.blocks[i], g_cur);
            gi -= blocks_[i].shortcut ? 6 : 4;
            size_t j = gi;
            accumulate(param_grads[j++], g.conv1_weights);
            accumulate(param_grads[j++], g.conv1_bias);
            accumulate(param_grads[j++], g.conv2_weights);
            accumulate(param_grads[j++], g.conv2_bias);
            if (blocks_[i].shortcut) {
                accumulate(param_grads[j++], g.shortcut_weights);
                accumulate(param_grads[j++], g.shortcut_bias);
            }
            g_cur = std::move(g.input);
        }
        if (grad_x) *grad_x = std::move(g_cur);
    }

    int64_t history_window() const override { return receptive_field(spec_); }

private:
    static void accumulate(Tensor& into, const Tensor& g) {
        double* a = into.data().data();
        const double* b = g.data().data();
        for (int64_t i = 0, n = into.numel(); i < n; ++i) a[i] += b[i];
    }

    std::vector<ResidualBlock> blocks_;
    Head head_;
};

// ---------------------------------------------------------------------------
// RNN (single-layer Elman, tanh). spec.levels is the hidden width.
// ---------------------------------------------------------------------------

struct RnnCache : Cache {
    Tensor hidden; // [H x L], hidden state after each step

    std::vector<std::pair<std::string, const Tensor*>> activations() const override {
        return {{"hidden", &hidden}};
    }
};

class RnnModel final : public Model {
public:
    RnnModel(const ModelSpec& spec, Rng& rng) : Model(spec) {
        const int64_t h = spec.levels, d = spec.input_dim;
        wx_ = init_uniform({h, d}, d, rng);
        wh_ = init_uniform({h, h}, h, rng);
        bias_ = Tensor::zeros({h});
        const int64_t m = static_cast<int64_t>(spec.horizon) * spec.output_dim;
        head_.weights = init_uniform({m, h}, h, rng);
        head_.bias = Tensor::zeros({m});
        register_param("wx", &wx_);
        register_param("wh", &wh_);
        register_param("bias", &bias_);
        register_param("head.weights", &head_.weights);
        register_param("head.bias", &head_.bias);
    }

    ForwardResult forward_with_cache(const Tensor& x, Mode mode, Rng* rng) const override {
        (void)mode;
        (void)rng; // no dropout in the baseline recurrence
        check_input(x);
        const int64_t h = spec_.levels, d = spec_.input_dim, len = x.dim(1);
        auto cache = std::make_unique<RnnCache>();
        cache->owner = this;
        cache->input = x;
        cache->hidden = Tensor::zeros({h, len});
        std::vector<double> state(static_cast<size_t>(h), 0.0);
        for (int64_t t = 0; t < len; ++t) {
            for (int64_t r = 0; r < h; ++r) {
                double acc = bias_[r];
                for (int64_t c = 0; c < d; ++c) acc += wx_(r, c) * x(c, t);
                for (int64_t c = 0; c < h; ++c) acc += wh_(r, c) * state[static_cast<size_t>(c)];
                cache->hidden(r, t) = std::tanh(acc);
            }
            for (int64_t r = 0; r < h; ++r) state[static_cast<size_t>(r)] = cache->hidden(r, t);
        }
        ForwardResult r;
        r.y = head_.apply(state, spec_.horizon, spec_.output_dim);
        r.cache = std::move(cache);
        return r;
    }

    void backward(const Cache& cache, const Tensor& grad_y, std::vector<Tensor>& param_grads,
                  Tensor* grad_x) const override {
        check_cache(cache);
        check_grad_y(grad_y, spec_);
        check_grad_storage(param_grads);
        const auto& rc = static_cast<const RnnCache&>(cache);
        const Tensor& x = rc.input;
        const int64_t h = spec_.levels, d = spec_.input_dim, len = x.dim(1);

        std::vector<double> gh = head_.backward(last_column(rc.hidden), grad_y, param_grads[3],
                                                param_grads[4]);
        Tensor gx = Tensor::zeros(x.shape());
        std::vector<double> gpre(static_cast<size_t>(h));
        for (int64_t t = len - 1; t >= 0; --t) {
            for (int64_t r = 0; r < h; ++r) {
                const double ht = rc.hidden(r, t);
                gpre[static_cast<size_t>(r)] = gh[static_cast<size_t>(r)] * (1.0 - ht * ht);
            }
            for (int64_t r = 0; r < h; ++r) {
                const double g = gpre[static_cast<size_t>(r)];
                param_grads[2][r] += g;
                for (int64_t c = 0; c < d; ++c) {
                    param_grads[0](r, c) += g * x(c, t);
                    gx(c, t) += wx_(r, c) * g;
                }
                if (t > 0) {
                    for (int64_t c = 0; c < h; ++c) param_grads[1](r, c) += g * rc.hidden(c, t - 1);
                }
            }
            std::fill(gh.begin(), gh.end(), 0.0);
            if (t > 0) {
                for (int64_t r = 0; r < h; ++r) {
                    const double g = gpre[static_cast<size_t>(r)];
                    for (int64_t c = 0; c < h; ++c) gh[static_cast<size_t>(c)] += wh_(r, c) * g;
                }
            }
        }
        if (grad_x) *grad_x = std::move(gx);
    }

    int64_t history_window() const override { return INT64_MAX; }

private:
    Tensor wx_, wh_, bias_;
    Head head_;
};

// ---------------------------------------------------------------------------
// CNN: non-dilated causal conv + ReLU stack, no shortcuts, same head.
// ---------------------------------------------------------------------------

struct CnnCache : Cache {
    std::vector<Tensor> pre;  // conv outputs before ReLU
    std::vector<Tensor> post; // after ReLU

    std::vector<std::pair<std::string, const Tensor*>> activations() const override {
        std::vector<std::pair<std::string, const Tensor*>> out;
        for (size_t i = 0; i < pre.size(); ++i) {
            out.emplace_back("layer" + std::to_string(i) + ".pre", &pre[i]);
            out.emplace_back("layer" + std::to_string(i) + ".out", &post[i]);
        }
        return out;
    }
};

class CnnModel final : public Model {
public:
    CnnModel(const ModelSpec& spec, Rng& rng) : Model(spec) {
        layers_.resize(static_cast<size_t>(spec.levels));
        for (int i = 0; i < spec.levels; ++i) {
            ConvLayer& l = layers_[static_cast<size_t>(i)];
            const int64_t cin = i == 0 ? spec.input_dim : spec.channels;
            l.weights = init_uniform({spec.channels, cin, spec.kernel}, cin * spec.kernel, rng);
            l.bias = Tensor::zeros({spec.channels});
            l.dilation = 1;
            const std::string p = "layer" + std::to_string(i) + ".";
            register_param(p + "weights", &l.weights);
            register_param(p + "bias", &l.bias);
        }
        const int64_t m = static_cast<int64_t>(spec.horizon) * spec.output_dim;
        head_.weights = init_uniform({m, spec.channels}, spec.channels, rng);
        head_.bias = Tensor::zeros({m});
        register_param("head.weights", &head_.weights);
        register_param("head.bias", &head_.bias);
    }

    ForwardResult forward_with_cache(const Tensor& x, Mode mode, Rng* rng) const override {
        (void)mode;
        (void)rng;
        check_input(x);
        auto cache = std::make_unique<CnnCache>();
        cache->owner = this;
        cache->input = x;
        const Tensor* cur = &x;
        for (const ConvLayer& l : layers_) {
            cache->pre.push_back(causal_conv_forward(*cur, l));
            cache->post.push_back(relu_forward(cache->pre.back()));
            cur = &cache->post.back();
        }
        ForwardResult r;
        r.y = head_.apply(last_column(*cur), spec_.horizon, spec_.output_dim);
        r.cache = std::move(cache);
        return r;
    }

    void backward(const Cache& cache, const Tensor& grad_y, std::vector<Tensor>& param_grads,
                  Tensor* grad_x) const override {
        check_cache(cache);
        check_grad_y(grad_y, spec_);
        check_grad_storage(param_grads);
        const auto& cc = static_cast<const CnnCache&>(cache);
        const size_t n = layers_.size();
        std::vector<double> gh = head_.backward(last_column(cc.post.back()), grad_y,
                                                param_grads[2 * n], param_grads[2 * n + 1]);
        Tensor g_cur = Tensor::zeros(cc.post.back().shape());
        for (int64_t c = 0; c < g_cur.dim(0); ++c) {
            g_cur(c, g_cur.dim(1) - 1) = gh[static_cast<size_t>(c)];
        }
        for (size_t i = n; i-- > 0;) {
            Tensor g_pre = relu_backward(cc.pre[i], g_cur);
            const Tensor& in = i == 0 ? cc.input : cc.post[i - 1];
            ConvGrads g = causal_conv_backward(in, layers_[i], g_pre);
            accumulate(param_grads[2 * i], g.weights);
            accumulate(param_grads[2 * i + 1], g.bias);
            g_cur = std::move(g.x);
        }
        if (grad_x) *grad_x = std::move(g_cur);
    }

    int64_t history_window() const override {
        return 1 + static_cast<int64_t>(spec_.levels) * (spec_.kernel - 1);
    }

private:
    static void accumulate(Tensor& into, const Tensor& g) {
        double* a = into.data().data();
        const double* b = g.data().data();
        for (int64_t i = 0, n = into.numel(); i < n; ++i) a[i] += b[i];
    }

    std::vector<ConvLayer> layers_;
    Head head_;
};

} // namespace

std::unique_ptr<Model> make_model(const ModelSpec& spec, Rng& init_rng) {
    spec.validate();
    switch (spec.family) {
    case Family::kTcn: return std::make_unique<TcnModel>(spec, init_rng);
    case Family::kRnn: return std::make_unique<RnnModel>(spec, init_rng);
    case Family::kCnn: return std::make_unique<CnnModel>(spec, init_rng);
    }
    throw ParameterError("unknown model family");
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

template <typename T>
void write_le(std::ostream& out, T value) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (sizeof(T) > 1) {
        uint16_t probe = 1;
        unsigned char p0;
        std::memcpy(&p0, &probe, 1);
        if (p0 == 0) std::reverse(std::begin(bytes), std::end(bytes));
    }
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
    if (!out) throw IoError("model write failed");
}

template <typename T>
T read_le(std::istream& in) {
    unsigned char bytes[sizeof(T)];
    in.read(reinterpret_cast<char*>(bytes), sizeof(T));
    if (!in) throw IoError("model read failed or file truncated");
    if constexpr (sizeof(T) > 1) {
        uint16_t probe = 1;
        unsigned char p0;
        std::memcpy(&p0, &probe, 1);
        if (p0 == 0) std::reverse(std::begin(bytes), std::end(bytes));
    }
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

} // namespace

void save_model(const Model& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open model file for writing: " + path.string());
    const ModelSpec& s = model.spec();
    write_le<uint32_t>(out, kModelMagic);
    write_le<uint32_t>(out, kModelFormatVersion);
    write_le<uint32_t>(out, static_cast<uint32_t>(s.family));
    write_le<uint32_t>(out, static_cast<uint32_t>(s.input_dim));
    write_le<uint32_t>(out, static_cast<uint32_t>(s.output_dim));
    write_le<uint32_t>(out, static_cast<uint32_t>(s.horizon));
    write_le<uint32_t>(out, static_cast<uint32_t>(s.levels));
    write_le<uint32_t>(out, static_cast<uint32_t>(s.channels));
    write_le<uint32_t>(out, static_cast<uint32_t>(s.kernel));
    write_le<double>(out, s.dropout);
    const auto tensors = model.params();
    write_le<uint32_t>(out, static_cast<uint32_t>(tensors.size()));
    for (const Tensor* t : tensors) {
        write_le<uint32_t>(out, static_cast<uint32_t>(t->rank()));
        for (int i = 0; i < t->rank(); ++i) write_le<uint64_t>(out, static_cast<uint64_t>(t->dim(i)));
        for (double v : t->data()) write_le<double>(out, v);
    }
}

std::unique_ptr<Model> load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model file: " + path.string());
    if (read_le<uint32_t>(in) != kModelMagic) throw IoError("not a model file: " + path.string());
    const uint32_t version = read_le<uint32_t>(in);
    if (version != kModelFormatVersion) {
        throw IoError("unsupported model format version " + std::to_string(version));
    }
    ModelSpec s;
    const uint32_t fam = read_le<uint32_t>(in);
    if (fam > 2) throw IoError("corrupt model file: bad family tag");
    s.family = static_cast<Family>(fam);
    s.input_dim = static_cast<int>(read_le<uint32_t>(in));
    s.output_dim = static_cast<int>(read_le<uint32_t>(in));
    s.horizon = static_cast<int>(read_le<uint32_t>(in));
    s.levels = static_cast<int>(read_le<uint32_t>(in));
    s.channels = static_cast<int>(read_le<uint32_t>(in));
    s.kernel = static_cast<int>(read_le<uint32_t>(in));
    s.dropout = read_le<double>(in);
    Rng scratch(0);
    std::unique_ptr<Model> model = make_model(s, scratch);
    auto tensors = model->params();
    const uint32_t count = read_le<uint32_t>(in);
    if (count != tensors.size()) {
        throw IoError("model file has " + std::to_string(count) + " tensors, expected " +
                      std::to_string(tensors.size()));
    }
    for (Tensor* t : tensors) {
        const uint32_t rank = read_le<uint32_t>(in);
        std::vector<int64_t> shape(rank);
        for (uint32_t i = 0; i < rank; ++i) shape[i] = static_cast<int64_t>(read_le<uint64_t>(in));
        if (shape != t->shape()) throw IoError("model file tensor shape mismatch");
        for (double& v : t->data()) v = read_le<double>(in);
    }
    return model;
}

} // namespace lcp
