#include "lcp/probes.hpp"

#include <cmath>

#include "lcp/errors.hpp"

namespace lcp {

CausalityProbeResult causality_probe_model(const Model& model, int64_t length, Rng& rng,
                                           int probes) {
    CausalityProbeResult result;
    const int64_t d = model.spec().input_dim;
    for (int p = 0; p < probes; ++p) {
        Tensor x = Tensor::zeros({d, length});
        for (double& v : x.data()) v = rng.uniform(-1.0, 1.0);
        const int64_t t = 1 + rng.uniform_int(length - 1);
        const int64_t c = rng.uniform_int(d);
        Tensor x2 = x;
        x2(c, t) += rng.uniform(0.1, 1.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);

        ForwardResult a = model.forward_with_cache(x, Mode::kEval, nullptr);
        ForwardResult b = model.forward_with_cache(x2, Mode::kEval, nullptr);
        const auto acts_a = a.cache->activations();
        const auto acts_b = b.cache->activations();
        for (size_t l = 0; l < acts_a.size(); ++l) {
            const Tensor& ta = *acts_a[l].second;
            const Tensor& tb = *acts_b[l].second;
            for (int64_t ch = 0; ch < ta.dim(0); ++ch) {
                for (int64_t s = 0; s < t; ++s) {
                    const double diff = std::fabs(ta(ch, s) - tb(ch, s));
                    if (diff > result.max_violation) result.max_violation = diff;
                }
            }
        }
        ++result.probes;
    }
    return result;
}

CausalityProbeResult causality_probe(uint64_t seed, int probes) {
    Rng rng = make_stream(seed, "causality");
    CausalityProbeResult total;
    const Family families[3] = {Family::kTcn, Family::kRnn, Family::kCnn};
    for (int p = 0; p < probes; ++p) {
        ModelSpec spec;
        spec.family = families[p % 3];
        spec.input_dim = 1 + static_cast<int>(rng.uniform_int(3));
        spec.output_dim = 1 + static_cast<int>(rng.uniform_int(2));
        spec.horizon = 1 + static_cast<int>(rng.uniform_int(4));
        spec.levels = spec.family == Family::kRnn ? 4 + static_cast<int>(rng.uniform_int(5))
                                                  : 1 + static_cast<int>(rng.uniform_int(3));
        spec.channels = 2 + static_cast<int>(rng.uniform_int(5));
        spec.kernel = 2 + static_cast<int>(rng.uniform_int(2));
        spec.dropout = 0.0;
        Rng init = make_stream(seed, "causality.init", static_cast<uint64_t>(p));
        auto model = make_model(spec, init);
        const int64_t length = 8 + rng.uniform_int(33);
        CausalityProbeResult one = causality_probe_model(*model, length, rng, 1);
        total.probes += one.probes;
        if (one.max_violation > total.max_violation) total.max_violation = one.max_violation;
    }
    return total;
}

int measured_receptive_field(const ModelSpec& spec) {
    if (spec.family != Family::kTcn) {
        throw ParameterError("measured_receptive_field probes TCN specs only");
    }
    ModelSpec probe_spec = spec;
    probe_spec.dropout = 0.0;
    Rng init(12345);
    auto model = make_model(probe_spec, init);
    // Positive weights and biases keep every ReLU active, so any in-range
    // perturbation strictly changes the output.
    for (Tensor* p : model->params()) {
        for (double& v : p->data()) v = std::fabs(v) + 0.05;
    }
    const int formula_hint = receptive_field(probe_spec);
    const int64_t length = formula_hint + 8;
    Tensor x = Tensor::zeros({probe_spec.input_dim, length});
    Rng xs(54321);
    for (double& v : x.data()) v = xs.uniform(0.5, 1.5);
    const Tensor base = model->forward(x, Mode::kEval, nullptr);

    auto influences = [&](int64_t r) {
        Tensor x2 = x;
        for (int64_t c = 0; c < probe_spec.input_dim; ++c) x2(c, length - 1 - r) += 1.0;
        const Tensor out = model->forward(x2, Mode::kEval, nullptr);
        for (int64_t i = 0; i < out.numel(); ++i) {
            if (out[i] != base[i]) return true;
        }
        return false;
    };

    int64_t boundary = -1;
    for (int64_t r = 0; r < length; ++r) {
        if (!influences(r)) {
            boundary = r;
            break;
        }
    }
    if (boundary < 0) throw StateError("receptive field probe found no boundary");
    // The influence region must be contiguous: everything past the boundary stays inert.
    for (int64_t r = boundary; r < std::min<int64_t>(boundary + 4, length); ++r) {
        if (influences(r)) throw StateError("receptive field probe found a non-contiguous boundary");
    }
    return static_cast<int>(boundary);
}

} // namespace lcp
