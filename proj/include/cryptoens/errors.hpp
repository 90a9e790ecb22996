#pragma once

#include <stdexcept>
#include <string>

namespace cryptoens {

// Error categories map onto distinct CLI exit codes (see tools/cryptoens.cpp).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cryptoens
