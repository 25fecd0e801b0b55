#ifndef HYPOLANG_GAUSS_HERMITE_HPP
#define HYPOLANG_GAUSS_HERMITE_HPP

#include <cmath>
#include <cstddef>

#include <Eigen/Dense>

#include "hypolang/types.hpp"

namespace hypolang {

/// Gauss-Hermite rule for the standard normal weight: E[f(Z)] ~ sum w_i f(x_i).
/// Exact for polynomials of degree <= 2*order - 1.
struct HermiteRule {
  Vec nodes;
  Vec weights;

  std::size_t order() const { return nodes.size(); }

  /// Golub-Welsch on the Jacobi matrix of the probabilists' Hermite polynomials.
  static HermiteRule make(std::size_t order) {
    if (order == 0) throw Error("Gauss-Hermite order must be >= 1");
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(order),
                                              static_cast<Eigen::Index>(order));
    for (std::size_t k = 1; k < order; ++k) {
      const double b = std::sqrt(static_cast<double>(k));
      J(static_cast<Eigen::Index>(k - 1), static_cast<Eigen::Index>(k)) = b;
      J(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k - 1)) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(J);
    HermiteRule rule;
    rule.nodes.resize(order);
    rule.weights.resize(order);
    for (std::size_t i = 0; i < order; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      rule.nodes[i] = solver.eigenvalues()(ii);
      const double v0 = solver.eigenvectors()(0, ii);
      rule.weights[i] = v0 * v0;
    }
    return rule;
  }

  template <class F>
  double expectation(F&& f, double sigma = 1.0) const {
    double s = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * f(sigma * nodes[i]);
    return s;
  }
};

}  // namespace hypolang

#endif  // HYPOLANG_GAUSS_HERMITE_HPP
