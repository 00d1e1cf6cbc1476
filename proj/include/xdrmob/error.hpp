#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace xdrmob {

enum class Errc {
    EmptySeries,
    IoError,
    SchemaError,
    ValidationError,
    DegenerateOrigin,
    DegenerateGeometry,
    DegenerateData,
    InsufficientData,
    NoBaseline,
    PipelineOrderError,
};

std::string_view to_string(Errc code) noexcept;

/// Every failure raised by the library carries one of the codes above so the
/// CLI can map it onto an exit status.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message);

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace xdrmob
