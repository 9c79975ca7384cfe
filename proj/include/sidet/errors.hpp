#pragma once

#include <stdexcept>
#include <string>

namespace sidet {

// Thrown when an iterative or numerical procedure fails to converge or
// produces no usable result (eigensolver breakdown, quadrature failure,
// no admissible polynomial root).
class numerical_error : public std::runtime_error {
public:
    explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

// Thrown on file format / filesystem problems.
class io_error : public std::runtime_error {
public:
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace sidet
