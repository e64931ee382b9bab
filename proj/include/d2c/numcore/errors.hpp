#pragma once

#include <stdexcept>
#include <string>

namespace d2c {

// Every error raised by the library derives from Error so callers can map
// failures to exit codes without knowing the full hierarchy.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error { using Error::Error; };
class ParameterError : public Error { using Error::Error; };
class DegenerateInputError : public Error { using Error::Error; };
class DivergenceError : public Error { using Error::Error; };
class EvaluationError : public Error { using Error::Error; };
class LookupError : public Error { using Error::Error; };
class FormatError : public Error { using Error::Error; };
class PartitionError : public Error { using Error::Error; };
class CapacityError : public Error { using Error::Error; };
class NonFiniteError : public Error { using Error::Error; };
class LoadError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };

} // namespace d2c
