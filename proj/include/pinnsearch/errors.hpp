#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pinnsearch {

/// Integration state magnitude crossed the divergence guard (non-physical
/// parameters or a hopeless optimizer step).
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Trajectory has fewer than two points, peaks are undefined.
class EmptyTrajectoryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Statistics requested on a dataset with fewer than two samples.
class TooFewSamplesError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed text input; carries the 1-based line number when known.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg, std::size_t line = 0)
        : std::runtime_error(line > 0 ? msg + " (line " + std::to_string(line) + ")" : msg),
          line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_ = 0;
};

/// CSV header is missing a required column.
class MissingColumnError : public std::runtime_error {
public:
    explicit MissingColumnError(const std::string& column)
        : std::runtime_error("missing column: " + column), column_(column) {}

    const std::string& column() const { return column_; }

private:
    std::string column_;
};

/// Model or data file exists but its version/shape does not match.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Filesystem failure; message names the offending path.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what, const std::string& path)
        : std::runtime_error(what + ": " + path), path_(path) {}

    const std::string& path() const { return path_; }

private:
    std::string path_;
};

/// Bad configuration value or unusable flag combination.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace pinnsearch
