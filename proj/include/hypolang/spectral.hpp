#ifndef HYPOLANG_SPECTRAL_HPP
#define HYPOLANG_SPECTRAL_HPP

// Diagonal operators over the shared sine eigenbasis.
//
// Every operator in the model (Q, Q1, Q2, K12, K22, C, ...) is a real power of
// one base operator Q whose eigenvalues lambda_k are positive, strictly
// decreasing and below one. Indices are 1-based throughout, matching mode k.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <utility>

#include "hypolang/types.hpp"

namespace hypolang {

class BaseSpectrum {
 public:
  enum class Rule { DirichletLaplacianInverse, ExplicitList };

  static constexpr std::size_t kLazyCapacity = std::size_t{1} << 40;

  /// Eigenvalues 1/(k^2 pi^2) of the inverse negative Dirichlet Laplacian on (0,1).
  static BaseSpectrum dirichlet(std::size_t n_max = kLazyCapacity) {
    if (n_max == 0) throw Error("spectrum needs at least one eigenvalue");
    BaseSpectrum s;
    s.rule_ = Rule::DirichletLaplacianInverse;
    s.n_max_ = n_max;
    return s;
  }

  /// Explicit table; must be positive, strictly decreasing and start below 1.
  static BaseSpectrum explicit_list(Vec eigenvalues) {
    if (eigenvalues.empty()) throw Error("explicit spectrum is empty");
    for (std::size_t k = 0; k < eigenvalues.size(); ++k) {
      const double x = eigenvalues[k];
      if (!(x > 0.0) || !std::isfinite(x))
        throw Error("explicit spectrum: eigenvalue " + std::to_string(k + 1) +
                    " is not a finite positive number");
      if (k > 0 && !(x < eigenvalues[k - 1]))
        throw Error("explicit spectrum: eigenvalues must be strictly decreasing");
    }
    if (!(eigenvalues.front() < 1.0))
      throw Error("explicit spectrum: top eigenvalue must be < 1");
    BaseSpectrum s;
    s.rule_ = Rule::ExplicitList;
    s.n_max_ = eigenvalues.size();
    s.table_ = std::make_shared<const Vec>(std::move(eigenvalues));
    return s;
  }

  Rule rule() const { return rule_; }
  std::size_t size() const { return n_max_; }

  double eigenvalue(std::size_t k) const {
    if (k < 1 || k > n_max_)
      throw Error("eigenvalue index " + std::to_string(k) + " out of range [1, " +
                  std::to_string(n_max_) + "]");
    if (rule_ == Rule::DirichletLaplacianInverse) {
      const double kp = static_cast<double>(k) * std::numbers::pi;
      return 1.0 / (kp * kp);
    }
    return (*table_)[k - 1];
  }

 private:
  BaseSpectrum() = default;

  Rule rule_ = Rule::DirichletLaplacianInverse;
  std::size_t n_max_ = 0;
  std::shared_ptr<const Vec> table_;
};

struct SummabilityVerdict {
  bool summable = false;
  /// false when the verdict is a tail-fit heuristic (explicit tables)
  bool rigorous = true;
  double partial_sum = 0.0;
  /// fitted or exact p in lambda_k^gamma ~ k^{-p}
  double decay_exponent = 0.0;
  std::string note;
};

struct TraceEstimate {
  double partial_sum = 0.0;
  double tail_bound = 0.0;
  std::size_t terms = 0;
  bool rigorous = true;

  double upper() const { return partial_sum + tail_bound; }
};

/// The power Q^gamma of the base operator.
class DiagonalOperator {
 public:
  DiagonalOperator(BaseSpectrum base, double exponent)
      : base_(std::move(base)), exponent_(exponent) {
    if (!std::isfinite(exponent_)) throw Error("operator exponent must be finite");
  }

  const BaseSpectrum& base() const { return base_; }
  double exponent() const { return exponent_; }

  double eigenvalue(std::size_t k) const {
    if (exponent_ == 0.0) {
      base_.eigenvalue(k);  // range check only
      return 1.0;
    }
    return std::pow(base_.eigenvalue(k), exponent_);
  }

  Vec apply(std::span<const double> x) const {
    if (x.size() > base_.size())
      throw Error("vector length exceeds the spectrum size");
    Vec out(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) out[k] = eigenvalue(k + 1) * x[k];
    return out;
  }

  SummabilityVerdict is_summable() const {
    SummabilityVerdict verdict;
    if (base_.rule() == BaseSpectrum::Rule::DirichletLaplacianInverse) {
      // lambda_k^gamma = (k pi)^{-2 gamma}: a p-series with p = 2 gamma.
      verdict.decay_exponent = 2.0 * exponent_;
      verdict.summable = verdict.decay_exponent > 1.0;
      verdict.rigorous = true;
      const std::size_t shown = std::min<std::size_t>(base_.size(), 1000);
      verdict.partial_sum = partial_sum(shown);
      verdict.note = "p-series with p = 2*gamma";
      return verdict;
    }
    // Explicit tables: fit the power-law decay of the increments over the
    // second half of the table. Not a proof.
    const std::size_t n = base_.size();
    verdict.rigorous = false;
    verdict.partial_sum = partial_sum(n);
    if (n < 4) {
      verdict.summable = false;
      verdict.note = "heuristic: fewer than 4 terms, no tail fit possible";
      return verdict;
    }
    const std::size_t k1 = (n + 1) / 2;
    const double a1 = eigenvalue(k1);
    const double a2 = eigenvalue(n);
    verdict.decay_exponent =
        std::log(a1 / a2) / std::log(static_cast<double>(n) / static_cast<double>(k1));
    verdict.summable = verdict.decay_exponent > 1.0;
    verdict.note = "heuristic: tail power-law fit over terms " + std::to_string(k1) +
                   ".." + std::to_string(n);
    return verdict;
  }

  /// Partial sum of the first n_terms eigenvalues plus an integral-test tail bound.
  TraceEstimate trace(std::size_t n_terms) const {
    const SummabilityVerdict verdict = is_summable();
    if (!verdict.summable)
      throw Error("trace: operator Q^" + std::to_string(exponent_) + " is not summable");
    TraceEstimate est;
    est.rigorous = verdict.rigorous;
    est.terms = std::min(n_terms, base_.size());
    est.partial_sum = partial_sum(est.terms);
    const double p = verdict.decay_exponent;
    const double nn = static_cast<double>(est.terms);
    if (base_.rule() == BaseSpectrum::Rule::DirichletLaplacianInverse) {
      // sum_{k>N} (k pi)^{-p} <= int_N^inf (x pi)^{-p} dx
      est.tail_bound = std::pow(std::numbers::pi, -p) * std::pow(nn, 1.0 - p) / (p - 1.0);
    } else {
      est.tail_bound = eigenvalue(est.terms) * nn / (p - 1.0);
    }
    return est;
  }

 private:
  double partial_sum(std::size_t n_terms) const {
    double s = 0.0;
    for (std::size_t k = n_terms; k >= 1; --k) s += eigenvalue(k);  // small terms first
    return s;
  }

  BaseSpectrum base_;
  double exponent_;
};

}  // namespace hypolang

#endif  // HYPOLANG_SPECTRAL_HPP
