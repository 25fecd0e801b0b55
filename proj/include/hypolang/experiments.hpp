#ifndef HYPOLANG_EXPERIMENTS_HPP
#define HYPOLANG_EXPERIMENTS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hypolang/certifier.hpp"
#include "hypolang/dynamics.hpp"
#include "hypolang/generator.hpp"
#include "hypolang/measures.hpp"
#include "hypolang/model.hpp"
#include "hypolang/parallel.hpp"
#include "hypolang/potential.hpp"
#include "hypolang/rng.hpp"
#include "hypolang/stats.hpp"

namespace hypolang {

struct MonteCarloParams {
  std::size_t M_out = 2000;  ///< outer samples / trajectories
  std::size_t M_in = 50;     ///< inner trajectories per outer start
  double h = 0.01;
  std::size_t samples = 100000;      ///< static mu^Phi draws
  std::size_t trajectories = 10000;  ///< dynamic invariance runs
  std::size_t workers = 1;
  std::uint64_t seed = 20240917;
};

/// Exact mu^Phi draws; draw i uses stream base + i.
inline std::vector<StateVector> stationary_draws(const Model& model, const GibbsPotential& pot,
                                                 std::uint64_t seed, std::uint64_t base,
                                                 std::size_t count, std::size_t workers) {
  std::vector<StateVector> out(count, StateVector(model.modes()));
  parallel_for(count, workers, [&](std::size_t i) {
    RngStream rng(seed, base + i);
    out[i] = sample_mu_Phi(model, pot, rng);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Decay of T_t g

struct DecayCurve {
  std::string name;
  Vec times;
  Vec D;    ///< estimated |T_t g - (g,1)|
  Vec SE;
  Vec D2;   ///< bias-corrected D^2 before clamping
  Vec SE2;
  Vec envelope;  ///< theta1 e^{-theta2 t} D(0)
  std::vector<bool> under_resolved;
  std::vector<bool> within_envelope;
  double mean = 0.0;  ///< pooled stationary mean of g
  double theta1 = 0.0, theta2 = 0.0;
  double fitted_rate = std::numeric_limits<double>::quiet_NaN();

  bool passed() const {
    return std::all_of(within_envelope.begin(), within_envelope.end(), [](bool b) { return b; });
  }
  bool resolved() const {
    return std::none_of(under_resolved.begin(), under_resolved.end(), [](bool b) { return b; });
  }

  void write_csv(std::ostream& os) const {
    os << "t,D_hat,SE,envelope\n";
    os.precision(17);
    for (std::size_t i = 0; i < times.size(); ++i)
      os << times[i] << ',' << D[i] << ',' << SE[i] << ',' << envelope[i] << '\n';
  }
};

/// Least-squares slope of log D against t over points with D > 3 SE; the
/// returned rate is minus the slope.
inline double fit_decay_rate(const Vec& t, const Vec& D, const Vec& SE) {
  double st = 0, sy = 0, stt = 0, sty = 0;
  std::size_t m = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(D[i] > 3.0 * SE[i]) || !(D[i] > 0.0)) continue;
    const double y = std::log(D[i]);
    st += t[i], sy += y, stt += t[i] * t[i], sty += t[i] * y;
    ++m;
  }
  if (m < 2) return std::numeric_limits<double>::quiet_NaN();
  const double den = static_cast<double>(m) * stt - st * st;
  if (den <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return -(static_cast<double>(m) * sty - st * sy) / den;
}

/// Nested Monte Carlo estimate of t -> |T_t g - (g,1)|_{L^2(mu^Phi)} for several g at once.
///
/// Outer starts w_i ~ mu^Phi; from each, M_in independent trajectories. The
/// variance of the inner means overestimates D^2 by E[inner var]/M_in, which
/// is subtracted.
inline std::vector<DecayCurve> estimate_decay(const std::vector<FunctionPtr>& gs, const Vec& times,
                                              const Model& model, const GibbsPotential& pot,
                                              const MonteCarloParams& mc, double theta1,
                                              double theta2) {
  if (times.empty() || times.front() != 0.0) throw Error("decay times must start at 0");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1])) throw Error("decay times must be increasing");
  if (mc.M_out < 2 || mc.M_in < 2) throw Error("decay needs M_out >= 2 and M_in >= 2");
  std::vector<std::size_t> step_at(times.size(), 0);
  for (std::size_t k = 1; k < times.size(); ++k)
    step_at[k] = steps_in(times[k], mc.h, "decay time");

  const std::size_t G = gs.size(), K = times.size();
  // [i][g][k]: inner mean and inner sample variance
  std::vector<double> inner_mean(mc.M_out * G * K), inner_var(mc.M_out * G * K);
  auto at = [&](std::size_t i, std::size_t g, std::size_t k) { return (i * G + g) * K + k; };

  parallel_for(mc.M_out, mc.workers, [&](std::size_t i) {
    RngStream rng(mc.seed, streams::kDecay + i);
    const StateVector w = sample_mu_Phi(model, pot, rng);
    SplittingIntegrator integ(model, pot, mc.h);
    std::vector<RunningStats> acc(G * K);
    for (std::size_t j = 0; j < mc.M_in; ++j) {
      StateVector x = w;
      integ.reset(x);
      std::size_t done = 0;
      for (std::size_t k = 0; k < K; ++k) {
        for (; done < step_at[k]; ++done) integ.advance(x, rng);
        for (std::size_t g = 0; g < G; ++g) acc[g * K + k].add(gs[g]->value(x));
      }
    }
    for (std::size_t g = 0; g < G; ++g)
      for (std::size_t k = 0; k < K; ++k) {
        inner_mean[at(i, g, k)] = acc[g * K + k].mean();
        inner_var[at(i, g, k)] = acc[g * K + k].variance();
      }
  });

  std::vector<DecayCurve> out;
  for (std::size_t g = 0; g < G; ++g) {
    DecayCurve c;
    c.name = gs[g]->name();
    c.times = times;
    c.theta1 = theta1;
    c.theta2 = theta2;
    RunningStats pooled;
    for (std::size_t i = 0; i < mc.M_out; ++i)
      for (std::size_t k = 0; k < K; ++k) pooled.add(inner_mean[at(i, g, k)]);
    c.mean = pooled.mean();
    for (std::size_t k = 0; k < K; ++k) {
      RunningStats y;
      for (std::size_t i = 0; i < mc.M_out; ++i) {
        const double d = inner_mean[at(i, g, k)] - c.mean;
        y.add(d * d - inner_var[at(i, g, k)] / static_cast<double>(mc.M_in));
      }
      const double d2 = y.mean(), se2 = y.sem();
      const double d = std::sqrt(std::max(d2, 0.0));
      double se = std::sqrt(se2);
      if (d > 0.0) se = std::min(se2 / (2.0 * d), se);
      c.D2.push_back(d2);
      c.SE2.push_back(se2);
      c.D.push_back(d);
      c.SE.push_back(se);
      c.under_resolved.push_back(d2 < -3.0 * se2);
    }
    for (std::size_t k = 0; k < K; ++k) {
      const double env = theta1 * std::exp(-theta2 * times[k]) * c.D[0];
      c.envelope.push_back(env);
      c.within_envelope.push_back(c.D[k] <= env + 3.0 * c.SE[k]);
    }
    c.fitted_rate = fit_decay_rate(c.times, c.D, c.SE);
    out.push_back(std::move(c));
  }
  return out;
}

inline DecayCurve estimate_decay(const FunctionPtr& g, const Vec& times, const Model& model,
                                 const GibbsPotential& pot, const MonteCarloParams& mc,
                                 double theta1, double theta2) {
  return estimate_decay(std::vector<FunctionPtr>{g}, times, model, pot, mc, theta1, theta2)
      .front();
}

// ---------------------------------------------------------------------------
// Ergodic averages

struct ErgodicResult {
  std::string name;
  Vec T;
  Vec error;  ///< |time average - (g,1)|_{L^2(P)}
  Vec SE;
  Vec bound;
  std::vector<bool> within_bound;
  double mean = 0.0;       ///< (g,1) from an independent stationary batch
  double mean_se = 0.0;
  double base_norm = 0.0;  ///< |g - (g,1)|

  bool passed() const {
    return std::all_of(within_bound.begin(), within_bound.end(), [](bool b) { return b; });
  }

  void write_csv(std::ostream& os) const {
    os << "T,error,SE,bound\n";
    os.precision(17);
    for (std::size_t i = 0; i < T.size(); ++i)
      os << T[i] << ',' << error[i] << ',' << SE[i] << ',' << bound[i] << '\n';
  }
};

/// Trapezoid time averages along M_out stationary trajectories, compared with
/// the ergodic bound. (g,1) and |g - (g,1)| come from mc.samples independent draws.
inline std::vector<ErgodicResult> ergodic_average_test(const std::vector<FunctionPtr>& gs,
                                                       const Vec& T_list, const Model& model,
                                                       const GibbsPotential& pot,
                                                       const MonteCarloParams& mc, double theta1,
                                                       double theta2) {
  if (T_list.empty()) throw Error("ergodic test needs at least one horizon");
  for (std::size_t i = 1; i < T_list.size(); ++i)
    if (!(T_list[i] > T_list[i - 1])) throw Error("ergodic horizons must be increasing");
  if (mc.M_out < 2 || mc.samples < 2) throw Error("ergodic test needs M_out >= 2, samples >= 2");
  std::vector<std::size_t> step_at;
  for (double T : T_list) step_at.push_back(steps_in(T, mc.h, "ergodic horizon"));
  const std::size_t G = gs.size(), K = T_list.size();

  const std::vector<StateVector> draws =
      stationary_draws(model, pot, mc.seed, streams::kMeanEstimate, mc.samples, mc.workers);

  std::vector<double> avg(mc.M_out * G * K);
  parallel_for(mc.M_out, mc.workers, [&](std::size_t i) {
    RngStream rng(mc.seed, streams::kErgodic + i);
    StateVector x = sample_mu_Phi(model, pot, rng);
    SplittingIntegrator integ(model, pot, mc.h);
    integ.reset(x);
    Vec prev(G), integral(G, 0.0);
    for (std::size_t g = 0; g < G; ++g) prev[g] = gs[g]->value(x);
    std::size_t done = 0;
    for (std::size_t k = 0; k < K; ++k) {
      for (; done < step_at[k]; ++done) {
        integ.advance(x, rng);
        for (std::size_t g = 0; g < G; ++g) {
          const double cur = gs[g]->value(x);
          integral[g] += 0.5 * mc.h * (prev[g] + cur);
          prev[g] = cur;
        }
      }
      for (std::size_t g = 0; g < G; ++g)
        avg[(i * G + g) * K + k] = integral[g] / (static_cast<double>(step_at[k]) * mc.h);
    }
  });

  std::vector<ErgodicResult> out;
  for (std::size_t g = 0; g < G; ++g) {
    ErgodicResult r;
    r.name = gs[g]->name();
    r.T = T_list;
    RunningStats ref;
    for (const StateVector& x : draws) ref.add(gs[g]->value(x));
    r.mean = ref.mean();
    r.mean_se = ref.sem();
    r.base_norm = ref.stddev();
    const double mean_var = r.mean_se * r.mean_se;
    for (std::size_t k = 0; k < K; ++k) {
      RunningStats y;
      for (std::size_t i = 0; i < mc.M_out; ++i) {
        const double d = avg[(i * G + g) * K + k] - r.mean;
        y.add(d * d);
      }
      // E(A - mean_hat)^2 = E(A - mean)^2 + Var(mean_hat) for independent batches
      const double e2 = y.mean() - mean_var, se2 = y.sem();
      const double e = std::sqrt(std::max(e2, 0.0));
      double se = std::sqrt(se2);
      if (e > 0.0) se = std::min(se2 / (2.0 * e), se);
      const double b = ergodic_bound(theta1, theta2, T_list[k], r.base_norm);
      r.error.push_back(e);
      r.SE.push_back(se);
      r.bound.push_back(b);
      r.within_bound.push_back(e <= b + 3.0 * se);
    }
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Closed forms for Phi = 0 and g = a u_k + b v_k

inline Mat2 inverse(const Mat2& A) {
  const double d = A.det();
  if (d == 0.0) throw Error("singular 2x2 matrix");
  return {A.d / d, -A.b / d, -A.c / d, A.a / d};
}

/// |T_t g|_{L^2(mu)} with T_t g(x) = (a, b) exp(A t) x and mu stationary.
inline double ou_decay_norm(const Model& model, std::size_t k, double a, double b, double t) {
  const ModeCoefficients& m = model.mode(k);
  const Mat2 E = expm2(drift_block(m), t);
  const double wu = a * E.a + b * E.c, wv = a * E.b + b * E.d;
  return std::sqrt(wu * wu * m.var_u + wv * wv * m.var_v);
}

/// L^2(P_mu) distance of the time average over [0, T] to the mean:
/// e^2 = (2/T^2) w^T [A^{-2}(e^{AT} - I) - A^{-1} T] Sigma_inf w.
inline double ou_time_average_error(const Model& model, std::size_t k, double a, double b,
                                    double T) {
  if (!(T > 0.0)) throw Error("horizon must be > 0");
  const ModeCoefficients& m = model.mode(k);
  const Mat2 A = drift_block(m);
  const Mat2 Ai = inverse(A);
  const Mat2 J = Ai * Ai * (expm2(A, T) - Mat2::identity()) - T * Ai;
  const Mat2 K = J * stationary_covariance(m);
  const double q = a * (K.a * a + K.b * b) + b * (K.c * a + K.d * b);
  return std::sqrt(std::max(2.0 * q / (T * T), 0.0));
}

// ---------------------------------------------------------------------------
// Static identities under mu^Phi

struct MeanCheck {
  std::string name;
  double mean = 0.0;
  double se = 0.0;
  bool passed = false;
};

inline MeanCheck zero_mean_check(std::string name, const RunningStats& s, double k = 3.0) {
  MeanCheck c{std::move(name), s.mean(), s.sem(), false};
  c.passed = std::fabs(c.mean) <= k * c.se;
  return c;
}

struct DriftCheck {
  double t = 0.0;
  double drift = 0.0;  ///< mean of f(X_t) - f(X_0)
  double se = 0.0;
  bool passed = false;
};

struct InvarianceEntry {
  std::string name;
  MeanCheck generator;  ///< E[L f] = 0
  std::vector<DriftCheck> dynamic;

  bool passed() const {
    return generator.passed &&
           std::all_of(dynamic.begin(), dynamic.end(), [](const DriftCheck& d) { return d.passed; });
  }
};

struct InvarianceReport {
  std::vector<InvarianceEntry> entries;
  bool passed() const {
    return std::all_of(entries.begin(), entries.end(),
                       [](const InvarianceEntry& e) { return e.passed(); });
  }
};

/// Monte Carlo mean of L f over mu^Phi draws, for each f.
inline std::vector<MeanCheck> generator_mean_checks(const std::vector<FunctionPtr>& fs,
                                                    const Model& model, const GibbsPotential& pot,
                                                    const std::vector<StateVector>& draws) {
  std::vector<RunningStats> acc(fs.size());
  Vec dphi, phys;
  for (const StateVector& x : draws) {
    pot.gradient_into(x.u, dphi, phys);
    for (std::size_t f = 0; f < fs.size(); ++f) acc[f].add(apply_L(*fs[f], x, model, dphi));
  }
  std::vector<MeanCheck> out;
  for (std::size_t f = 0; f < fs.size(); ++f) out.push_back(zero_mean_check(fs[f]->name(), acc[f]));
  return out;
}

/// Static E[L f] = 0 over mc.samples draws, plus the drift of E f(X_t) along
/// mc.trajectories stationary runs at the given times.
inline InvarianceReport invariance_suite(const std::vector<FunctionPtr>& fs, const Model& model,
                                         const GibbsPotential& pot, const MonteCarloParams& mc,
                                         const Vec& drift_times = {0.5, 1.0, 2.0}) {
  InvarianceReport rep;
  const auto draws =
      stationary_draws(model, pot, mc.seed, streams::kStationary, mc.samples, mc.workers);
  const auto gen = generator_mean_checks(fs, model, pot, draws);

  const std::size_t F = fs.size(), K = drift_times.size();
  std::vector<std::size_t> step_at;
  for (double t : drift_times) step_at.push_back(steps_in(t, mc.h, "drift time"));
  for (std::size_t k = 1; k < K; ++k)
    if (step_at[k] <= step_at[k - 1]) throw Error("drift times must be increasing");
  std::vector<double> diff(mc.trajectories * F * K);
  parallel_for(mc.trajectories, mc.workers, [&](std::size_t i) {
    RngStream rng(mc.seed, streams::kTrajectories + i);
    StateVector x = sample_mu_Phi(model, pot, rng);
    Vec f0(F);
    for (std::size_t f = 0; f < F; ++f) f0[f] = fs[f]->value(x);
    SplittingIntegrator integ(model, pot, mc.h);
    integ.reset(x);
    std::size_t done = 0;
    for (std::size_t k = 0; k < K; ++k) {
      for (; done < step_at[k]; ++done) integ.advance(x, rng);
      for (std::size_t f = 0; f < F; ++f) diff[(i * F + f) * K + k] = fs[f]->value(x) - f0[f];
    }
  });

  for (std::size_t f = 0; f < F; ++f) {
    InvarianceEntry e;
    e.name = fs[f]->name();
    e.generator = gen[f];
    for (std::size_t k = 0; k < K; ++k) {
      RunningStats s;
      for (std::size_t i = 0; i < mc.trajectories; ++i) s.add(diff[(i * F + f) * K + k]);
      DriftCheck d{drift_times[k], s.mean(), s.sem(), false};
      d.passed = std::fabs(d.drift) <= 3.0 * d.se;
      e.dynamic.push_back(d);
    }
    rep.entries.push_back(std::move(e));
  }
  return rep;
}

/// (A f, g) + (f, A g) = 0 under mu^Phi, for every ordered pair.
inline std::vector<MeanCheck> antisymmetry_checks(const std::vector<FunctionPtr>& fs,
                                                  const Model& model, const GibbsPotential& pot,
                                                  const std::vector<StateVector>& draws) {
  const std::size_t F = fs.size();
  std::vector<RunningStats> acc(F * F);
  Vec dphi, phys, Af(F), fv(F);
  for (const StateVector& x : draws) {
    pot.gradient_into(x.u, dphi, phys);
    for (std::size_t a = 0; a < F; ++a) {
      Af[a] = apply_A(*fs[a], x, model, dphi);
      fv[a] = fs[a]->value(x);
    }
    for (std::size_t a = 0; a < F; ++a)
      for (std::size_t b = a + 1; b < F; ++b) acc[a * F + b].add(Af[a] * fv[b] + fv[a] * Af[b]);
  }
  std::vector<MeanCheck> out;
  for (std::size_t a = 0; a < F; ++a)
    for (std::size_t b = a + 1; b < F; ++b)
      out.push_back(zero_mean_check(fs[a]->name() + " | " + fs[b]->name(), acc[a * F + b]));
  return out;
}

/// -(S f, f) = int (K22 D2 f, D2 f), checked as a zero-mean difference.
inline std::vector<MeanCheck> dirichlet_identity_checks(const std::vector<FunctionPtr>& fs,
                                                        const Model& model,
                                                        const std::vector<StateVector>& draws) {
  std::vector<MeanCheck> out;
  for (const auto& f : fs) {
    RunningStats s;
    for (const StateVector& x : draws)
      s.add(-apply_S(*f, x, model) * f->value(x) - carre_du_champ_v(*f, x, model));
    out.push_back(zero_mean_check(f->name(), s));
  }
  return out;
}

struct PoincareEntry {
  std::string name;
  double dirichlet = 0.0;  ///< int (Q1 Df, Df) dmu1^Phi
  double variance = 0.0;
  double lower = 0.0;      ///< lambda1^{alpha1} Var
  double margin = 0.0;     ///< dirichlet - lower
  double se = 0.0;         ///< of the margin
  bool passed = false;
};

/// int (Q1 Df, Df) dmu1^Phi >= lambda1^{alpha1} Var(f) - 3 SE for functions of u.
inline std::vector<PoincareEntry> poincare_checks(const std::vector<FunctionPtr>& fs,
                                                  const Model& model,
                                                  const std::vector<StateVector>& draws) {
  const double c = model.mode(1).var_u;
  std::vector<PoincareEntry> out;
  for (const auto& f : fs) {
    RunningStats val, carre;
    for (const StateVector& x : draws) {
      val.add(f->value(x));
      carre.add(carre_du_champ_u(*f, x, model));
    }
    RunningStats margin;
    for (const StateVector& x : draws) {
      const double d = f->value(x) - val.mean();
      margin.add(carre_du_champ_u(*f, x, model) - c * d * d);
    }
    PoincareEntry e;
    e.name = f->name();
    e.dirichlet = carre.mean();
    e.variance = val.variance();
    e.lower = c * e.variance;
    e.margin = margin.mean();
    e.se = margin.sem();
    e.passed = e.margin >= -3.0 * e.se;
    out.push_back(e);
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const DecayCurve& c) {
  nlohmann::json pts = nlohmann::json::array();
  for (std::size_t i = 0; i < c.times.size(); ++i)
    pts.push_back({{"t", c.times[i]},
                   {"D_hat", c.D[i]},
                   {"SE", c.SE[i]},
                   {"envelope", c.envelope[i]},
                   {"within_envelope", static_cast<bool>(c.within_envelope[i])},
                   {"under_resolved", static_cast<bool>(c.under_resolved[i])}});
  nlohmann::json j = {{"observable", c.name}, {"theta1", c.theta1}, {"theta2", c.theta2},
                      {"mean", c.mean},       {"points", pts},      {"passed", c.passed()},
                      {"resolved", c.resolved()}};
  if (std::isfinite(c.fitted_rate))
    j["fitted_rate"] = c.fitted_rate;
  else
    j["fitted_rate"] = nullptr;
  return j;
}

inline nlohmann::json to_json(const ErgodicResult& r) {
  nlohmann::json pts = nlohmann::json::array();
  for (std::size_t i = 0; i < r.T.size(); ++i)
    pts.push_back({{"T", r.T[i]},
                   {"error", r.error[i]},
                   {"SE", r.SE[i]},
                   {"bound", r.bound[i]},
                   {"within_bound", static_cast<bool>(r.within_bound[i])}});
  return {{"observable", r.name}, {"mean", r.mean},     {"mean_se", r.mean_se},
          {"base_norm", r.base_norm}, {"points", pts}, {"passed", r.passed()}};
}

}  // namespace hypolang

#endif  // HYPOLANG_EXPERIMENTS_HPP
