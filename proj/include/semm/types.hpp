#ifndef SEMM_TYPES_HPP
#define SEMM_TYPES_HPP

// Unit convention used throughout the library:
//   time       µs
//   frequency  MHz (ordinary, not angular; 2π lives inside the propagators)
//   field      V/cm
//   Stark k    MHz/(V/cm)
//   angles     rad

#include <Eigen/Core>

#include <complex>
#include <limits>
#include <stdexcept>
#include <string>

namespace semm {

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

using Vec3 = Vector3<double>;
using Complex = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Raised when an input violates a documented precondition.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised by the sequence-file parser; carries a 1-based location.
class ParseError : public ValidationError {
 public:
  ParseError(int line, int column, const std::string& what)
      : ValidationError("line " + std::to_string(line) + ", column " +
                        std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

inline bool is_unit(const Vec3& v, double tol = 1e-9) {
  return std::abs(v.norm() - 1.0) <= tol;
}

}  // namespace semm

#endif  // SEMM_TYPES_HPP
