#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dass {

/// Field-level validation message. `field` is a dotted path into the
/// offending input ("spec.window.lo", "row 3: Parotid_L__V50").
struct FieldError {
    std::string field;
    std::string message;
};

/// Input rejected before any computation ran. Maps to CLI exit code 2
/// and HTTP 422.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(std::string field, const std::string& message)
        : std::runtime_error(field.empty() ? message : field + ": " + message),
          fields_{FieldError{std::move(field), message}} {}

    explicit ValidationError(std::vector<FieldError> fields)
        : std::runtime_error(join(fields)), fields_(std::move(fields)) {}

    const std::vector<FieldError>& fields() const noexcept { return fields_; }

private:
    static std::string join(const std::vector<FieldError>& fields) {
        std::string out;
        for (const auto& f : fields) {
            if (!out.empty()) out += "; ";
            out += f.field.empty() ? f.message : f.field + ": " + f.message;
        }
        return out;
    }

    std::vector<FieldError> fields_;
};

/// Numerical failure inside the engine (EM failed after restarts, single-class
/// outcome reaching a fit, ...). Exit code 3, HTTP 500.
class EngineError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File could not be read or written. Exit code 4.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace dass
