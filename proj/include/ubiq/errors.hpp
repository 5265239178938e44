#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ubiq {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DomainError : Error { using Error::Error; };
struct IndexError : Error { using Error::Error; };
struct ConsistencyError : Error { using Error::Error; };
struct RegimeError : Error { using Error::Error; };
struct StepSizeError : Error { using Error::Error; };
struct NoConvergence : Error { using Error::Error; };
struct GridError : Error { using Error::Error; };
struct SeedRequired : Error { using Error::Error; };
struct OutOfGrid : Error { using Error::Error; };
struct InsufficientPaths : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct VerificationFailure : Error { using Error::Error; };

enum class Violation {
    InvalidPolicy,
    InvalidPreferences,
    ShareImbalance,
    LengthMismatch,
    InvalidDiffusion,
    InvalidHorizon,
};

struct ValidationIssue {
    Violation kind;
    std::string message;
};

// Thrown by validation with the complete list of violations, not just the first.
struct ValidationError : Error {
    std::vector<ValidationIssue> issues;

    explicit ValidationError(std::vector<ValidationIssue> found)
        : Error(join(found)), issues(std::move(found)) {}

private:
    static std::string join(const std::vector<ValidationIssue>& found) {
        std::string msg = "validation failed:";
        for (const auto& issue : found) {
            msg += "\n  - ";
            msg += issue.message;
        }
        return msg;
    }
};

}  // namespace ubiq
