#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace skt {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vector = VectorX<double>;
using Matrix = MatrixX<double>;

// Thrown when an input file or scenario description is malformed.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown when a solve cannot produce an acceptable answer (Newton failure,
// non-finite intermediate, step-size floor reached).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

template <typename A, typename B>
void require_same_size(const A& lhs, const B& rhs, const char* what) {
  if (lhs.size() != rhs.size())
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                std::to_string(lhs.size()) + " vs " +
                                std::to_string(rhs.size()) + ")");
}

}  // namespace detail
}  // namespace skt
