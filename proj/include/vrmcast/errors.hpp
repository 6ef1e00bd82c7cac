#ifndef VRMCAST_ERRORS_HPP
#define VRMCAST_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace vrmcast {

/// Invalid or out-of-range configuration value.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed input file (carries the 1-based line number when known).
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, int line)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

/// Well-formed input whose content violates a data contract.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace vrmcast

#endif  // VRMCAST_ERRORS_HPP
