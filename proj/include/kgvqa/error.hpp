#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kgvqa {

enum class ErrorCode {
    kShapeMismatch,
    kInvalidArgument,
    kPrecondition,
    kNonFinite,
    kSchema,
    kIo,
    kUsage,
};

constexpr std::string_view error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::kShapeMismatch: return "E_SHAPE";
        case ErrorCode::kInvalidArgument: return "E_ARG";
        case ErrorCode::kPrecondition: return "E_PRECONDITION";
        case ErrorCode::kNonFinite: return "E_NONFINITE";
        case ErrorCode::kSchema: return "E_SCHEMA";
        case ErrorCode::kIo: return "E_IO";
        case ErrorCode::kUsage: return "E_USAGE";
    }
    return "E_UNKNOWN";
}

class Error : public std::runtime_error {
   public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

   private:
    ErrorCode code_;
};

}  // namespace kgvqa
