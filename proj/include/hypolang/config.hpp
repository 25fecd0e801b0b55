#ifndef HYPOLANG_CONFIG_HPP
#define HYPOLANG_CONFIG_HPP

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hypolang/certifier.hpp"
#include "hypolang/experiments.hpp"
#include "hypolang/generator.hpp"
#include "hypolang/model.hpp"
#include "hypolang/potential.hpp"
#include "hypolang/spectral.hpp"

namespace hypolang {

/// Malformed or incomplete configuration (exit code 2 at the command line).
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct PotentialSpec {
  std::string kind = "zero";  ///< zero | logcosh
  double c = 0.0;
};

struct RunConfig {
  Exponents exponents;
  std::size_t modes = 0;
  PotentialSpec potential;
  std::optional<Vec> eigenvalues;  ///< explicit base spectrum; Dirichlet when empty
  std::size_t grid_points = 0;     ///< 0: four per mode
  std::uint64_t seed = 20240917;
  MonteCarloParams mc;
  std::string output_dir;
  RateVariant variant = RateVariant::Thm5_2;
  Vec theta1{2.0};
  std::vector<std::string> observables;  ///< catalog names; empty means the default catalog
  Vec decay_times{0.0, 0.5, 1.0, 2.0, 5.0};
  Vec ergodic_T{1.0, 2.0, 5.0, 10.0};
  double sim_T = 10.0;
  double sim_output_dt = 0.1;
  std::string sim_initial = "stationary";  ///< stationary | zero
  double variance_scale = 1.0;
  std::optional<std::size_t> workers;

  BaseSpectrum spectrum() const {
    return eigenvalues ? BaseSpectrum::explicit_list(*eigenvalues) : BaseSpectrum::dirichlet();
  }
  Model model() const { return Model(exponents, modes, spectrum()); }
  ScalarPotential scalar_potential() const {
    if (potential.kind == "zero") return ScalarPotential::zero();
    return ScalarPotential::log_cosh(potential.c);
  }
  GibbsPotential gibbs() const {
    return GibbsPotential(scalar_potential(),
                          grid_points ? PhysicalGrid(modes, grid_points) : PhysicalGrid(modes));
  }
};

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& j, const char* key, const char* where) {
  if (!j.is_object() || !j.contains(key))
    throw ConfigError(std::string("missing required field '") + key + "' in " + where);
  return j.at(key);
}

inline double finite_number(const nlohmann::json& j, const std::string& what) {
  if (!j.is_number()) throw ConfigError(what + " must be a number");
  const double x = j.get<double>();
  if (!std::isfinite(x)) throw ConfigError(what + " must be finite");
  return x;
}

inline std::size_t positive_count(const nlohmann::json& j, const std::string& what) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) throw ConfigError(what + " must be an integer");
  const auto x = j.get<long long>();
  if (x < 1) throw ConfigError(what + " must be >= 1");
  return static_cast<std::size_t>(x);
}

inline Vec number_list(const nlohmann::json& j, const std::string& what) {
  Vec out;
  if (j.is_number()) {
    out.push_back(finite_number(j, what));
  } else if (j.is_array()) {
    for (const auto& x : j) out.push_back(finite_number(x, what));
  } else {
    throw ConfigError(what + " must be a number or a list of numbers");
  }
  if (out.empty()) throw ConfigError(what + " must not be empty");
  return out;
}

}  // namespace detail

/// Catalog function from its display name: u<i>, v<i>, u<i>*u<j>, v<i>*v<j>,
/// quadratic, tanh, const.
inline FunctionPtr observable_from_name(const std::string& name, std::size_t n) {
  static const std::regex single("([uv])([0-9]+)");
  static const std::regex pair("([uv])([0-9]+)\\*([uv])([0-9]+)");
  std::smatch m;
  auto idx = [&](const std::string& s) {
    const std::size_t k = std::stoul(s);
    if (k < 1 || k > n)
      throw ConfigError("observable " + name + ": mode index out of range 1.." + std::to_string(n));
    return k;
  };
  if (std::regex_match(name, m, single))
    return m[1] == "u" ? catalog::coordinate_u(idx(m[2])) : catalog::coordinate_v(idx(m[2]));
  if (std::regex_match(name, m, pair)) {
    if (m[1] != m[3]) throw ConfigError("observable " + name + ": mixed products are not in the catalog");
    return m[1] == "u" ? catalog::product_uu(idx(m[2]), idx(m[4]))
                       : catalog::product_vv(idx(m[2]), idx(m[4]));
  }
  for (const FunctionPtr& f : catalog::default_catalog(n))
    if (f->name() == name) return f;
  if (name == "const") return catalog::constant(1.0);
  throw ConfigError("unknown observable '" + name + "'");
}

inline RunConfig parse_config(const nlohmann::json& j) {
  using namespace detail;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;

  const auto& e = require(j, "exponents", "config");
  c.exponents.alpha1 = finite_number(require(e, "alpha1", "exponents"), "alpha1");
  c.exponents.alpha2 = finite_number(require(e, "alpha2", "exponents"), "alpha2");
  c.exponents.beta1 = finite_number(require(e, "beta1", "exponents"), "beta1");
  c.exponents.beta2 = finite_number(require(e, "beta2", "exponents"), "beta2");
  if (!(c.exponents.alpha1 > 0.0) || !(c.exponents.alpha2 > 0.0))
    throw ConfigError("alpha1 and alpha2 must be > 0");
  if (c.exponents.beta1 < 0.0 || c.exponents.beta2 < 0.0)
    throw ConfigError("beta1 and beta2 must be >= 0");
  c.modes = positive_count(require(j, "modes", "config"), "modes");

  const auto& p = require(j, "potential", "config");
  if (p.is_string()) {
    c.potential.kind = p.get<std::string>();
  } else {
    const auto& kind = require(p, "kind", "potential");
    if (!kind.is_string()) throw ConfigError("potential.kind must be a string");
    c.potential.kind = kind.get<std::string>();
    if (p.contains("c")) c.potential.c = finite_number(p.at("c"), "potential.c");
  }
  if (c.potential.kind == "logcosh") {
    if (!p.is_object() || !p.contains("c")) throw ConfigError("missing required field 'c' in potential");
    if (c.potential.c < 0.0) throw ConfigError("potential.c must be >= 0");
  } else if (c.potential.kind != "zero") {
    throw ConfigError("unrecognized potential kind '" + c.potential.kind + "' (zero | logcosh)");
  }

  if (j.contains("spectrum")) {
    const auto& s = j.at("spectrum");
    const std::string kind = s.value("kind", std::string("dirichlet"));
    if (kind == "explicit") {
      c.eigenvalues = number_list(require(s, "eigenvalues", "spectrum"), "spectrum.eigenvalues");
    } else if (kind != "dirichlet") {
      throw ConfigError("unrecognized spectrum kind '" + kind + "'");
    }
  }
  if (j.contains("grid_points")) c.grid_points = positive_count(j.at("grid_points"), "grid_points");
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer())
      throw ConfigError("seed must be an integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("mc")) {
    const auto& m = j.at("mc");
    if (!m.is_object()) throw ConfigError("mc must be an object");
    if (m.contains("M_out")) c.mc.M_out = positive_count(m.at("M_out"), "mc.M_out");
    if (m.contains("M_in")) c.mc.M_in = positive_count(m.at("M_in"), "mc.M_in");
    if (m.contains("samples")) c.mc.samples = positive_count(m.at("samples"), "mc.samples");
    if (m.contains("trajectories"))
      c.mc.trajectories = positive_count(m.at("trajectories"), "mc.trajectories");
    if (m.contains("h")) c.mc.h = finite_number(m.at("h"), "mc.h");
    if (!(c.mc.h > 0.0)) throw ConfigError("mc.h must be > 0");
  }
  if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
  if (j.contains("variant")) {
    try {
      c.variant = parse_variant(j.at("variant").get<std::string>());
    } catch (const Error& err) {
      throw ConfigError(err.what());
    }
  }
  if (j.contains("theta1")) c.theta1 = number_list(j.at("theta1"), "theta1");
  for (double t : c.theta1)
    if (!(t > 1.0)) throw ConfigError("theta1 values must be > 1");
  if (j.contains("observables")) {
    if (!j.at("observables").is_array()) throw ConfigError("observables must be a list of names");
    for (const auto& o : j.at("observables")) {
      if (!o.is_string()) throw ConfigError("observables must be a list of names");
      c.observables.push_back(o.get<std::string>());
    }
  }
  if (j.contains("decay")) {
    const auto& d = j.at("decay");
    if (d.contains("times")) c.decay_times = number_list(d.at("times"), "decay.times");
  }
  if (j.contains("ergodic")) {
    const auto& d = j.at("ergodic");
    if (d.contains("T")) c.ergodic_T = number_list(d.at("T"), "ergodic.T");
  }
  if (j.contains("simulate")) {
    const auto& s = j.at("simulate");
    if (s.contains("T")) c.sim_T = finite_number(s.at("T"), "simulate.T");
    if (s.contains("output_dt")) c.sim_output_dt = finite_number(s.at("output_dt"), "simulate.output_dt");
    if (s.contains("initial")) c.sim_initial = s.at("initial").get<std::string>();
    if (c.sim_initial != "stationary" && c.sim_initial != "zero")
      throw ConfigError("simulate.initial must be 'stationary' or 'zero'");
    if (!(c.sim_T > 0.0) || !(c.sim_output_dt > 0.0))
      throw ConfigError("simulate.T and simulate.output_dt must be > 0");
  }
  if (j.contains("fault_injection")) {
    const auto& f = j.at("fault_injection");
    if (f.contains("variance_scale"))
      c.variance_scale = finite_number(f.at("variance_scale"), "fault_injection.variance_scale");
  }
  if (j.contains("workers")) c.workers = positive_count(j.at("workers"), "workers");

  // validate the pieces that only fail on construction
  try {
    (void)c.model();
    (void)c.gibbs();
    for (const auto& name : c.observables) (void)observable_from_name(name, c.modes);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& err) {
    throw ConfigError(err.what());
  }
  return c;
}

/// Reads a config file; HYPOLANG_SEED, when set, overrides the seed.
inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error in '" + path + "': " + e.what());
  }
  RunConfig c;
  try {
    c = parse_config(j);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config type error: ") + e.what());
  }
  if (const char* s = std::getenv("HYPOLANG_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s, &end, 10);
    if (end == s || *end != '\0') throw ConfigError("HYPOLANG_SEED must be an unsigned integer");
    c.seed = v;
  }
  return c;
}

}  // namespace hypolang

#endif  // HYPOLANG_CONFIG_HPP
