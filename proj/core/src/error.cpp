#include "facedose/error.hpp"

namespace facedose {

std::string_view to_string(Errc code) noexcept
{
    switch (code) {
    case Errc::degenerate_configuration: return "DegenerateConfiguration";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::invalid_measurement: return "InvalidMeasurement";
    case Errc::insufficient_data: return "InsufficientData";
    case Errc::invalid_data: return "InvalidData";
    case Errc::format_error: return "FormatError";
    case Errc::calibration_diverged: return "CalibrationDiverged";
    case Errc::not_calibrated: return "NotCalibrated";
    case Errc::ingest_error: return "IngestError";
    case Errc::out_of_bounds: return "OutOfBounds";
    case Errc::invalid_config: return "InvalidConfig";
    case Errc::io_error: return "IOError";
    }
    return "Unknown";
}

namespace {
std::string compose(Errc code, const std::string& message, const std::string& location)
{
    std::string out{to_string(code)};
    out += ": ";
    out += message;
    if (!location.empty()) {
        out += " (at ";
        out += location;
        out += ")";
    }
    return out;
}
} // namespace

Error::Error(Errc code, const std::string& message, std::string location)
    : std::runtime_error(compose(code, message, location)), code_(code), message_(message), location_(std::move(location))
{
}

} // namespace facedose
