#pragma once

#include <stdexcept>
#include <string>

namespace turb {

/// Input with zero variance or otherwise unusable content.
class DegenerateInput : public std::runtime_error {
public:
    explicit DegenerateInput(const std::string& msg) : std::runtime_error(msg) {}
};

/// A statistic could not be formed at a specific lag (e.g. S_2 = 0).
class DegenerateScale : public std::runtime_error {
public:
    DegenerateScale(const std::string& msg, long lag)
        : std::runtime_error(msg + " (lag " + std::to_string(lag) + ")"), lag_(lag) {}
    long lag() const { return lag_; }

private:
    long lag_;
};

/// Malformed or incompatible file content (ensemble, checkpoint, CSV, config).
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Spectral synthesis failed (covariance embedding not nonnegative at large N).
class EmbeddingFailure : public std::runtime_error {
public:
    explicit EmbeddingFailure(const std::string& msg) : std::runtime_error(msg) {}
};

/// A non-finite loss appeared during optimization.
class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(const std::string& msg, long step)
        : std::runtime_error(msg + " (step " + std::to_string(step) + ")"), step_(step) {}
    long step() const { return step_; }

private:
    long step_;
};

} // namespace turb
