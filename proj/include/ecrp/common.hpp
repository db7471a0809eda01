#pragma once

#include <stdexcept>
#include <string>

namespace ecrp {

// Variances below this threshold are treated as a degenerate risk factor (Lambda == 1).
inline constexpr double kDegenerateVariance = 1e-12;

inline constexpr int kGenders = 2;

enum class Gender : int { female = 0, male = 1 };

inline int index(Gender g) { return static_cast<int>(g); }

inline Gender gender_from_index(int i) { return i == 0 ? Gender::female : Gender::male; }

Gender parse_gender(const std::string& s);
char gender_code(Gender g);

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input files.
struct DataError : Error {
    using Error::Error;
};

// Violated preconditions on arguments.
struct DomainError : Error {
    using Error::Error;
};

// MAP estimate outside the interior of the parameter space, or a degenerate cell.
struct BoundaryError : Error {
    using Error::Error;
};

// A quantity was requested from the truncated tail of a distribution.
struct TruncationError : Error {
    using Error::Error;
};

struct McmcError : Error {
    using Error::Error;
};

}  // namespace ecrp
