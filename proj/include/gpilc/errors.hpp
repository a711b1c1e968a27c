#ifndef GPILC_ERRORS_HPP
#define GPILC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace gpilc {

// Linear algebra failed (factorization after jitter escalation, solver
// breakdown, non-finite intermediate values).
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A simulated state left the configured bound, or a rollout produced a
// non-finite value. Carries the first offending sample index (1-based).
struct DivergenceError : NumericalError {
    DivergenceError(const std::string& msg, int sample)
        : NumericalError(msg), sample_index(sample) {}
    int sample_index;
};

// The learned sensitivity matrix is numerically zero; the model carries no
// usable gradient information.
struct DegenerateModelError : NumericalError {
    using NumericalError::NumericalError;
};

// Input-variance probing hit its doubling cap without exceeding the noise
// floor.
struct ActuationIneffectiveError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Reference generation could not produce a finite output trajectory.
struct GenerationFailedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A file exists but does not parse; message names the file and line/field.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotFoundError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace gpilc

#endif
