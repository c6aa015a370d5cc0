#pragma once

#include <cstdint>

#include "lcp/nn.hpp"
#include "lcp/rng.hpp"

namespace lcp {

// Perturbation probes used by the verify command and the test suites. Both
// rely on exact floating-point equality: causality means an input change at
// step t cannot alter any computation at steps before t, so the bits must
// match, not just the values approximately.

struct CausalityProbeResult {
    int probes = 0;
    double max_violation = 0.0; // largest |difference| seen at a step before t
    bool exact() const { return max_violation == 0.0; }
};

/// Runs `probes` random perturbation probes on the given model family mix:
/// random spec, random input, random step t; compares every intermediate
/// activation at steps < t before and after the perturbation.
CausalityProbeResult causality_probe(uint64_t seed, int probes);

/// Same probe against one concrete model and input length.
CausalityProbeResult causality_probe_model(const Model& model, int64_t length, Rng& rng,
                                           int probes);

// Measures how many trailing input steps influence the final output step of a
// TCN built from `spec`, using strictly positive weights and inputs so every
// in-range perturbation must propagate. Returns the smallest r such that
// perturbing step L-1-r leaves the output bit-identical.
int measured_receptive_field(const ModelSpec& spec);

} // namespace lcp
