#pragma once

#include <stdexcept>
#include <string>

namespace divrec {

// Bad input files, malformed rows, invalid configuration. CLI exit code 1.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numerical failure mid-pipeline (non-convergence, degenerate data). CLI exit code 2.
class ComputeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace divrec
