#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace tilt {

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A loss entry or other data value is non-finite or out of domain.
struct invalid_input : error {
    using error::error;
};

// A scalar knob (lambda, gamma, step constants, ...) is out of range.
struct invalid_parameter : error {
    using error::error;
};

// A group partition is inconsistent with the profile it is applied to.
struct invalid_partition : error {
    using error::error;
};

struct dimension_error : error {
    using error::error;
};

// Problems with user-facing configuration (CLI flags, config files).
struct config_error : error {
    using error::error;
};

// Problems reading or interpreting a dataset.
struct data_error : error {
    using error::error;
};

// Gradient descent produced a non-finite or runaway objective.
struct divergence_error : error {
    divergence_error(const std::string& what, std::vector<double> iterate_,
                     double objective_, int iteration_)
        : error(what), iterate(std::move(iterate_)), objective(objective_),
          iteration(iteration_) {}

    std::vector<double> iterate;
    double objective;
    int iteration;
};

}  // namespace tilt
