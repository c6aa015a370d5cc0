#pragma once

#include <iosfwd>

#include "lcp/config.hpp"

namespace lcp {

/// Writes the event CSVs and manifest for the configured generator. Returns 0.
int cmd_generate(const RunConfig& cfg, std::ostream& log);

/// Trains the configured model on the stored dataset; writes the model
/// container and the loss-history CSV. Returns 0.
int cmd_train(const RunConfig& cfg, std::ostream& log);

/// Runs the configured evaluation mode and writes its report CSVs. Returns 0.
int cmd_evaluate(const RunConfig& cfg, std::ostream& log);

/// Runs the built-in verification suite (gradient checks, causality and
/// receptive-field probes, Adam trace, normalization round-trip). Prints one
/// line per check; returns the number of failed checks.
int cmd_verify(std::ostream& log);

} // namespace lcp
