#include "sqfit/error.hpp"

namespace sqfit {

std::string_view to_string(Errc code) {
    switch (code) {
        case Errc::DegenerateTaperPlane: return "DegenerateTaperPlane";
        case Errc::BendOutOfRange: return "BendOutOfRange";
        case Errc::DegenerateOrigin: return "DegenerateOrigin";
        case Errc::InvalidSpacing: return "InvalidSpacing";
        case Errc::NonFiniteResidual: return "NonFiniteResidual";
        case Errc::InvalidProblem: return "InvalidProblem";
        case Errc::TooFewPoints: return "TooFewPoints";
        case Errc::DegenerateCloud: return "DegenerateCloud";
        case Errc::InvalidConfig: return "InvalidConfig";
        case Errc::InvalidK: return "InvalidK";
        case Errc::CoincidentCentroid: return "CoincidentCentroid";
        case Errc::FileNotFound: return "FileNotFound";
        case Errc::MalformedHeader: return "MalformedHeader";
        case Errc::UnsupportedPlyEncoding: return "UnsupportedPlyEncoding";
        case Errc::EmptyCloud: return "EmptyCloud";
        case Errc::IoError: return "IoError";
        case Errc::SchemaViolation: return "SchemaViolation";
    }
    return "Unknown";
}

}  // namespace sqfit
