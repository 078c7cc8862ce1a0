#pragma once

#include <stdexcept>
#include <string>

namespace patchgraph {

/// Raised for malformed files, shape mismatches and inputs that violate a
/// documented precondition. The CLI maps it to exit code 2.
class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace patchgraph
