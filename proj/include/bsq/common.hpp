#ifndef BSQ_COMMON_HPP
#define BSQ_COMMON_HPP

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace bsq {

using cxd = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;
inline constexpr double kSpeedOfLight = 299792458.0;

/// Thrown when a caller violates a documented precondition (bad sizes,
/// out-of-range indices, inconsistent dimensions).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown when a linear solve or decomposition fails beyond recovery.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace bsq

#endif  // BSQ_COMMON_HPP
