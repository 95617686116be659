#pragma once

#include <stdexcept>
#include <string>

namespace fedgcv {

enum class ErrorCode {
    parse,
    validation,
    degree_zero,
    convergence,
    partition,
    shape,
    empty_mask,
    empty_split,
    divergence,
    config,
    phase_dependency,
    io,
    runtime,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& msg)
        : std::runtime_error(msg), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
    throw Error(code, msg);
}

inline const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::parse: return "parse";
        case ErrorCode::validation: return "validation";
        case ErrorCode::degree_zero: return "degree_zero";
        case ErrorCode::convergence: return "convergence";
        case ErrorCode::partition: return "partition";
        case ErrorCode::shape: return "shape";
        case ErrorCode::empty_mask: return "empty_mask";
        case ErrorCode::empty_split: return "empty_split";
        case ErrorCode::divergence: return "divergence";
        case ErrorCode::config: return "config";
        case ErrorCode::phase_dependency: return "phase_dependency";
        case ErrorCode::io: return "io";
        case ErrorCode::runtime: return "runtime";
    }
    return "unknown";
}

} // namespace fedgcv
