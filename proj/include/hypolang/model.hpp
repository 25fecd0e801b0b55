#ifndef HYPOLANG_MODEL_HPP
#define HYPOLANG_MODEL_HPP

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>

#include "hypolang/spectral.hpp"
#include "hypolang/types.hpp"

namespace hypolang {

/// Q1 = Q^alpha1, Q2 = Q^alpha2, K12 = K21 = Q^beta1, K22 = Q^beta2.
struct Exponents {
  double alpha1 = 1.0;
  double alpha2 = 1.0;
  double beta1 = 1.0;
  double beta2 = 1.0;
};

/// Per-mode coefficients of the truncated equation
///   du_k = coupling_k v_k dt
///   dv_k = -(damping_k v_k + restoring_k u_k + force_k dPhi_k) dt + sqrt(2 diffusion_k) dW_k
struct ModeCoefficients {
  double lambda = 0.0;
  double var_u = 0.0;      ///< lambda^alpha1, eigenvalue of Q1
  double var_v = 0.0;      ///< lambda^alpha2, eigenvalue of Q2
  double coupling = 0.0;   ///< lambda^(beta1 - alpha2)
  double restoring = 0.0;  ///< lambda^(beta1 - alpha1)
  double damping = 0.0;    ///< lambda^(beta2 - alpha2)
  double force = 0.0;      ///< lambda^beta1
  double diffusion = 0.0;  ///< lambda^beta2
};

/// Galerkin truncation to the first n modes of the shared eigenbasis.
class Model {
 public:
  Model(Exponents e, std::size_t n, BaseSpectrum spectrum = BaseSpectrum::dirichlet())
      : exponents_(e), n_(n), spectrum_(std::move(spectrum)) {
    for (double x : {e.alpha1, e.alpha2, e.beta1, e.beta2})
      if (!std::isfinite(x)) throw Error("model exponents must be finite");
    if (n_ == 0) throw Error("model needs at least one mode");
    if (n_ > spectrum_.size())
      throw Error("model uses " + std::to_string(n_) + " modes but the spectrum has " +
                  std::to_string(spectrum_.size()));
    modes_.resize(n_);
    for (std::size_t k = 1; k <= n_; ++k) {
      auto pw = [&](double g) { return DiagonalOperator(spectrum_, g).eigenvalue(k); };
      ModeCoefficients& m = modes_[k - 1];
      m.lambda = spectrum_.eigenvalue(k);
      m.var_u = pw(e.alpha1);
      m.var_v = pw(e.alpha2);
      m.coupling = pw(e.beta1 - e.alpha2);
      m.restoring = pw(e.beta1 - e.alpha1);
      m.damping = pw(e.beta2 - e.alpha2);
      m.force = pw(e.beta1);
      m.diffusion = pw(e.beta2);
    }
  }

  const Exponents& exponents() const { return exponents_; }
  std::size_t modes() const { return n_; }
  const BaseSpectrum& spectrum() const { return spectrum_; }
  /// k is 1-based
  const ModeCoefficients& mode(std::size_t k) const { return modes_.at(k - 1); }

  DiagonalOperator op(double exponent) const { return DiagonalOperator(spectrum_, exponent); }
  DiagonalOperator Q1() const { return op(exponents_.alpha1); }
  DiagonalOperator Q2() const { return op(exponents_.alpha2); }
  DiagonalOperator K12() const { return op(exponents_.beta1); }
  DiagonalOperator K22() const { return op(exponents_.beta2); }
  /// C = K21 Q2^{-1} K12
  DiagonalOperator C() const { return op(2.0 * exponents_.beta1 - exponents_.alpha2); }
  DiagonalOperator Q1inv_C() const {
    return op(2.0 * exponents_.beta1 - exponents_.alpha1 - exponents_.alpha2);
  }

 private:
  Exponents exponents_;
  std::size_t n_;
  BaseSpectrum spectrum_;
  std::vector<ModeCoefficients> modes_;
};

/// Independent centered Gaussian coordinates with per-mode variances.
struct GaussianSpec {
  Vec variances;

  static GaussianSpec mu1(const Model& m) {
    GaussianSpec s;
    for (std::size_t k = 1; k <= m.modes(); ++k) s.variances.push_back(m.mode(k).var_u);
    return s;
  }
  static GaussianSpec mu2(const Model& m) {
    GaussianSpec s;
    for (std::size_t k = 1; k <= m.modes(); ++k) s.variances.push_back(m.mode(k).var_v);
    return s;
  }

  std::size_t modes() const { return variances.size(); }

  void validate() const {
    for (double x : variances)
      if (!(x > 0.0) || !std::isfinite(x)) throw Error("Gaussian variances must be positive");
  }
};

}  // namespace hypolang

#endif  // HYPOLANG_MODEL_HPP
