#ifndef OPTEXEC_ERRORS_HPP
#define OPTEXEC_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace optexec {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Violation {
    std::string field;
    std::string constraint;
};

// Carries every violated invariant, not only the first one found.
class Inadmissible : public Error {
public:
    explicit Inadmissible(std::vector<Violation> v)
        : Error(describe(v)), violations_(std::move(v)) {}

    const std::vector<Violation>& violations() const { return violations_; }

private:
    static std::string describe(const std::vector<Violation>& v) {
        std::string s = "inadmissible parameters:";
        for (const auto& x : v) s += " {" + x.field + ", \"" + x.constraint + "\"}";
        return s;
    }
    std::vector<Violation> violations_;
};

class OutOfRange : public Error {
public:
    using Error::Error;
};

class DegenerateRegime : public Error {
public:
    using Error::Error;
};

class GridError : public Error {
public:
    using Error::Error;
};

class BlowUp : public Error {
public:
    using Error::Error;
};

class NonFinite : public Error {
public:
    using Error::Error;
};

class Overflow : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace optexec

#endif // OPTEXEC_ERRORS_HPP
