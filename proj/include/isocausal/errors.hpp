#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace isocausal {

// Bad user input: malformed documents, unknown fixtures, mismatched shapes.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public InputError {
public:
    ParseError(const std::string& what, std::size_t offset)
        : InputError(what + " at offset " + std::to_string(offset)), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

// Evaluation left the domain of a function, or a geometric precondition
// (Lorentzian signature, positive warping factor...) failed at a point.
class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// An iterative procedure did not converge or lost all accuracy.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace isocausal
