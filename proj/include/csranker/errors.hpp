#pragma once

#include <stdexcept>

namespace csranker {

// Bad configuration: unknown keys, invalid parameter combinations, CLI misuse.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data: TSV parse failures, dimension
// mismatches, degenerate inputs.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace csranker
