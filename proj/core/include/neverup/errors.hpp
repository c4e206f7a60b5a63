#pragma once

#include <stdexcept>
#include <string>

namespace neverup {

// Wrong shapes, bad hyperparameters, malformed config files.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// API misuse: backward without a recorded graph, stepping a finished episode.
struct UsageError : std::logic_error {
  explicit UsageError(const std::string& msg) : std::logic_error(msg) {}
};

// Corrupt or inconsistent stored data (replay entries, checkpoints, CSVs).
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values where the numeric contract forbids them.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace neverup
