#ifndef HYPOLANG_TYPES_HPP
#define HYPOLANG_TYPES_HPP

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace hypolang {

using Vec = std::vector<double>;

/// Raised for invalid configurations and violated preconditions.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Spectral coefficients (u, v) of the position/velocity pair at time t.
struct StateVector {
  Vec u;
  Vec v;
  double t = 0.0;

  StateVector() = default;
  explicit StateVector(std::size_t n) : u(n, 0.0), v(n, 0.0) {}
  StateVector(Vec u_, Vec v_, double t_ = 0.0)
      : u(std::move(u_)), v(std::move(v_)), t(t_) {}

  std::size_t modes() const { return u.size(); }

  bool finite() const {
    for (double x : u)
      if (!std::isfinite(x)) return false;
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return std::isfinite(t);
  }
};

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  const std::size_t n = a.size() < b.size() ? a.size() : b.size();
  for (std::size_t k = 0; k < n; ++k) s += a[k] * b[k];
  return s;
}

}  // namespace hypolang

#endif  // HYPOLANG_TYPES_HPP
