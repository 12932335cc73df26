#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sqfit {

enum class Errc {
    DegenerateTaperPlane,
    BendOutOfRange,
    DegenerateOrigin,
    InvalidSpacing,
    NonFiniteResidual,
    InvalidProblem,
    TooFewPoints,
    DegenerateCloud,
    InvalidConfig,
    InvalidK,
    CoincidentCentroid,
    FileNotFound,
    MalformedHeader,
    UnsupportedPlyEncoding,
    EmptyCloud,
    IoError,
    SchemaViolation,
};

/// Stable name used in diagnostics and reports.
std::string_view to_string(Errc code);

/// Library exception; every failure the library reports carries one of the
/// codes above so that callers (the CLI in particular) can map it to an exit
/// status without parsing messages.
class Error : public std::runtime_error {
  public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

    Errc code() const noexcept { return code_; }

  private:
    Errc code_;
};

}  // namespace sqfit
