#pragma once

#include <stdexcept>
#include <string>

namespace vecsketch {

/// Error category surfaced by the CLI as a machine-readable tag and exit code.
enum class ErrorCategory { Config, Io, Numeric, Model };

inline const char* to_string(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::Config: return "config";
        case ErrorCategory::Io: return "io";
        case ErrorCategory::Numeric: return "numeric";
        case ErrorCategory::Model: return "model";
    }
    return "unknown";
}

class Error : public std::runtime_error {
  public:
    Error(ErrorCategory category, const std::string& message)
        : std::runtime_error(message), category_(category) {}

    ErrorCategory category() const { return category_; }

  private:
    ErrorCategory category_;
};

}  // namespace vecsketch
