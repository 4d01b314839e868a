#pragma once

#include <stdexcept>
#include <string>

namespace airdisrupt {

// Error categories map 1:1 onto CLI exit codes (see tools/).
// ConfigError -> 2, DataError -> 3, NumericError -> 4.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace airdisrupt
