#ifndef CRACKSCAN_ERRORS_HPP
#define CRACKSCAN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace crackscan {

// Parameter / configuration problems. CLI maps these to exit code 2.
struct ParamError : std::runtime_error {
    explicit ParamError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad input data (size mismatch, unreadable file, non-finite values). Exit code 3.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Calibration metadata mismatch (null built with a different configuration). Exit code 4.
struct CalibError : std::runtime_error {
    explicit CalibError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace crackscan

#endif
