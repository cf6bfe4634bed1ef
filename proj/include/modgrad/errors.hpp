#pragma once

#include <stdexcept>
#include <string>

namespace modgrad {

// Maps to process exit code 2.
struct InputError : std::runtime_error {
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// Maps to process exit code 3: an enumeration or solver budget was exhausted
// before the question could be answered. Never silently truncates.
struct BudgetError : std::runtime_error {
  explicit BudgetError(const std::string& what) : std::runtime_error(what) {}
};

// Maps to process exit code 1: a verification the caller asked for failed.
struct CheckError : std::runtime_error {
  explicit CheckError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace modgrad
