#pragma once

#include <stdexcept>
#include <string>

namespace vta {

// Precondition violations use std::invalid_argument directly.
// The types below carry the remaining error contracts of the pipeline.

// Operation called on an object in the wrong state (e.g. corrupting an
// already-corrupted clip).
struct invalid_state_error : std::logic_error {
    using std::logic_error::logic_error;
};

// Token id outside [0, K-1] where a real token was required.
struct invalid_token_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Delayed grid whose mandatory PAD cells hold tokens.
struct malformed_grid_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values produced where finite ones are required.
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Artifact files whose version or hyperparameters do not match the consumer.
struct artifact_mismatch_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Metric has no defined value for this input (silent clip, empty timeline).
struct undefined_metric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace vta
