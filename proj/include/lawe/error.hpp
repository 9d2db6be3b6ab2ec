#ifndef LAWE_ERROR_HPP
#define LAWE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace lawe {

/// Violated precondition; the message names the failed constraint.
struct validation_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Numerical breakdown (overflow, step underflow, failed fit); the message carries a location.
struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const std::string& what)
{
    if (!ok) throw validation_error(what);
}

}  // namespace detail
}  // namespace lawe

#endif
