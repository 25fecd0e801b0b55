#ifndef HYPOLANG_MEASURES_HPP
#define HYPOLANG_MEASURES_HPP

#include <cmath>
#include <cstddef>
#include <string>

#include "hypolang/model.hpp"
#include "hypolang/potential.hpp"
#include "hypolang/rng.hpp"
#include "hypolang/types.hpp"

namespace hypolang {

/// Independent x_k ~ N(0, nu_k), k = 1..n.
inline Vec sample_gaussian(const GaussianSpec& spec, std::size_t n, RngStream& rng) {
  if (n == 0) throw Error("sample_gaussian: n must be >= 1");
  if (n > spec.modes()) throw Error("sample_gaussian: more modes than the covariance has");
  Vec x(n);
  for (std::size_t k = 0; k < n; ++k) x[k] = std::sqrt(spec.variances[k]) * rng.normal();
  return x;
}

/// Proposal/acceptance counters of the Gibbs rejection sampler.
struct RejectionStats {
  std::size_t proposals = 0;
  std::size_t accepted = 0;

  double acceptance_rate() const {
    return proposals == 0 ? 1.0 : static_cast<double>(accepted) / static_cast<double>(proposals);
  }
};

inline constexpr std::size_t kRejectionWindow = 100000;
inline constexpr double kMinAcceptance = 1e-4;

/// Exact draw from the truncated mu1^Phi = e^{-Phi} mu1 by rejection from mu1.
///
/// A proposal u ~ mu1 is accepted with probability exp(-(Phi(u) - inf phi)),
/// which is <= 1 since Phi(u) >= inf phi on the unit interval.
inline Vec sample_mu1_Phi(const Model& model, const GibbsPotential& pot, RngStream& rng,
                          RejectionStats* stats = nullptr) {
  const GaussianSpec mu1 = GaussianSpec::mu1(model);
  if (!std::isfinite(pot.lower_bound())) throw Error("potential lower bound must be finite");
  RejectionStats local;
  RejectionStats& st = stats ? *stats : local;
  std::size_t tries = 0;
  for (;;) {
    Vec u = sample_gaussian(mu1, model.modes(), rng);
    ++st.proposals;
    ++tries;
    if (pot.is_zero()) {
      ++st.accepted;
      return u;
    }
    const double excess = pot.value(u) - pot.lower_bound();
    if (rng.uniform() < std::exp(-excess)) {
      ++st.accepted;
      return u;
    }
    if (tries >= kRejectionWindow ||
        (st.proposals >= kRejectionWindow && st.acceptance_rate() < kMinAcceptance))
      throw Error("rejection sampler: acceptance rate " + std::to_string(st.acceptance_rate()) +
                  " over " + std::to_string(st.proposals) +
                  " proposals is below 1e-4; the potential is too strong for rejection");
  }
}

/// (u, v) ~ mu1^Phi (x) mu2.
inline StateVector sample_mu_Phi(const Model& model, const GibbsPotential& pot, RngStream& rng,
                                 RejectionStats* stats = nullptr) {
  Vec u = sample_mu1_Phi(model, pot, rng, stats);
  Vec v = sample_gaussian(GaussianSpec::mu2(model), model.modes(), rng);
  return StateVector(std::move(u), std::move(v), 0.0);
}

}  // namespace hypolang

#endif  // HYPOLANG_MEASURES_HPP
