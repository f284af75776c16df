#pragma once

#include <stdexcept>
#include <string>

namespace longsum {

// Exit-code-bearing error categories used across the CLI surface:
// usage errors map to 1, data errors to 2, missing artifacts to 3.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ArtifactMissingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace longsum
