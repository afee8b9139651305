#pragma once

#include <stdexcept>

namespace aoba {

// Invalid or inconsistent configuration value (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

// File system or serialization failure (CLI exit code 3).
class IoError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

// Numerical breakdown such as filter divergence (CLI exit code 4).
class NumericError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

} // namespace aoba
