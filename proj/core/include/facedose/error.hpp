#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace facedose {

enum class Errc {
    degenerate_configuration,
    shape_mismatch,
    invalid_measurement,
    insufficient_data,
    invalid_data,
    format_error,
    calibration_diverged,
    not_calibrated,
    ingest_error,
    out_of_bounds,
    invalid_config,
    io_error,
};

std::string_view to_string(Errc code) noexcept;

/// Every failure raised by the library. `location()` names the offending
/// field or file position when one is known (e.g. "sessions[2].points").
class Error : public std::runtime_error
{
public:
    Error(Errc code, const std::string& message, std::string location = {});

    Errc code() const noexcept { return code_; }
    const std::string& location() const noexcept { return location_; }
    /// The message without the code prefix and location suffix.
    const std::string& message() const noexcept { return message_; }

private:
    Errc code_;
    std::string message_;
    std::string location_;
};

} // namespace facedose
