#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace canica {

/// Failure category, used by the CLI to pick an exit code.
enum class ErrorKind {
    kValidation,  // bad input, bad configuration, bad dimensions
    kNumerical,   // a numerical routine failed to converge or produced garbage
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string name, const std::string& what)
        : std::runtime_error(what), kind_(kind), name_(std::move(name)) {}

    ErrorKind kind() const noexcept { return kind_; }
    /// Short error class name, e.g. "DimensionError".
    const std::string& name() const noexcept { return name_; }

private:
    ErrorKind kind_;
    std::string name_;
};

#define CANICA_DEFINE_ERROR(Name, Kind)                                 \
    class Name : public Error {                                         \
    public:                                                             \
        explicit Name(const std::string& what) : Error(Kind, #Name, what) {} \
    }

CANICA_DEFINE_ERROR(DimensionError, ErrorKind::kValidation);
CANICA_DEFINE_ERROR(InsufficientFramesError, ErrorKind::kValidation);
CANICA_DEFINE_ERROR(InsufficientSubjectsError, ErrorKind::kValidation);
CANICA_DEFINE_ERROR(InsufficientNoiseError, ErrorKind::kValidation);
CANICA_DEFINE_ERROR(PreconditionError, ErrorKind::kValidation);
CANICA_DEFINE_ERROR(ParameterError, ErrorKind::kValidation);
CANICA_DEFINE_ERROR(DegenerateRowError, ErrorKind::kValidation);
CANICA_DEFINE_ERROR(CombinatoricsError, ErrorKind::kValidation);
CANICA_DEFINE_ERROR(ConfigError, ErrorKind::kValidation);
CANICA_DEFINE_ERROR(IoError, ErrorKind::kValidation);
CANICA_DEFINE_ERROR(NumericalError, ErrorKind::kNumerical);

#undef CANICA_DEFINE_ERROR

/// Malformed file contents. Carries the byte offset where parsing stopped.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::uint64_t offset)
        : Error(ErrorKind::kValidation, "FormatError",
                what + " (at byte offset " + std::to_string(offset) + ")"),
          offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

}  // namespace canica
