#pragma once

#include <stdexcept>
#include <string>

namespace cadenza {

// Input or schema problem (bad manifest, bad listener file, bad audiogram).
// The CLI maps these to exit code 1; everything else is a runtime error
// and maps to exit code 2.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace cadenza
