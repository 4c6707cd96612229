#ifndef SUPERHET_ERRORS_HPP
#define SUPERHET_ERRORS_HPP

#include <exception>
#include <string>
#include <utility>

namespace superhet {

/// Base of every error the library raises. The message can be extended with
/// provenance (sweep length, frequency, seed) while the exception propagates.
class Error : public std::exception {
public:
    explicit Error(std::string message) : m_message(std::move(message)) {}

    const char* what() const noexcept override { return m_message.c_str(); }

    void add_context(const std::string& context)
    {
        m_message = "[" + context + "] " + m_message;
    }

private:
    std::string m_message;
};

/// Argument outside the mathematical or physical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Iterative numerics did not reach the requested accuracy.
class NumericalError : public Error {
public:
    NumericalError(std::string message, double achieved_error, int iterations)
        : Error(std::move(message) + " (achieved error estimate "
                + std::to_string(achieved_error) + " after "
                + std::to_string(iterations) + " iterations)"),
          m_achieved_error(achieved_error), m_iterations(iterations)
    {
    }

    double achieved_error() const noexcept { return m_achieved_error; }
    int iterations() const noexcept { return m_iterations; }

private:
    double m_achieved_error;
    int m_iterations;
};

class FitError : public Error {
public:
    using Error::Error;
};

/// Spectral feature needed for calibration (A-T doublet) was not resolved.
class CalibrationError : public Error {
public:
    using Error::Error;
};

/// No usable peak in a transmission spectrum.
class ExtractionError : public Error {
public:
    using Error::Error;
};

/// Two spectra that must share a frequency grid do not.
class AlignmentError : public Error {
public:
    using Error::Error;
};

/// Configuration parse or validation failure. `field()` is the dotted path
/// (e.g. "transit.omega") and `line()` the 1-based source line, 0 if unknown.
class ConfigError : public Error {
public:
    ConfigError(std::string message, std::string field = {}, int line = 0)
        : Error(format(message, field, line)), m_field(std::move(field)), m_line(line)
    {
    }

    const std::string& field() const noexcept { return m_field; }
    int line() const noexcept { return m_line; }

private:
    static std::string format(const std::string& message, const std::string& field, int line)
    {
        std::string out;
        if (line > 0) {
            out += "line " + std::to_string(line) + ": ";
        }
        if (!field.empty()) {
            out += field + ": ";
        }
        return out + message;
    }

    std::string m_field;
    int m_line;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace superhet

#endif
