#ifndef HYPOLANG_CLI_HPP
#define HYPOLANG_CLI_HPP

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hypolang/certifier.hpp"
#include "hypolang/config.hpp"
#include "hypolang/dynamics.hpp"
#include "hypolang/experiments.hpp"
#include "hypolang/measures.hpp"
#include "hypolang/parallel.hpp"
#include "hypolang/verify.hpp"

namespace hypolang::cli {

enum ExitCode : int { kPass = 0, kFail = 1, kUsage = 2 };

/// Command-line overrides applied on top of the config file.
struct Overrides {
  std::optional<std::string> out_dir;
  std::optional<std::size_t> workers;
  std::optional<RateVariant> variant;
};

/// The config with overrides folded in.
struct Context {
  RunConfig cfg;
  std::string out_dir;
  std::size_t workers = 1;
  RateVariant variant = RateVariant::Thm5_2;

  Context(RunConfig c, const Overrides& o) : cfg(std::move(c)) {
    out_dir = o.out_dir ? *o.out_dir : cfg.output_dir;
    workers = o.workers ? *o.workers : cfg.workers.value_or(default_workers());
    variant = o.variant ? *o.variant : cfg.variant;
  }

  MonteCarloParams mc() const {
    MonteCarloParams m = cfg.mc;
    m.seed = cfg.seed;
    m.workers = workers;
    return m;
  }

  std::vector<FunctionPtr> observables(std::vector<std::string> fallback = {}) const {
    std::vector<FunctionPtr> out;
    const auto& names = cfg.observables.empty() ? fallback : cfg.observables;
    if (names.empty()) return catalog::default_catalog(cfg.modes);
    for (const auto& n : names) out.push_back(observable_from_name(n, cfg.modes));
    return out;
  }

  /// Opens out_dir/name for writing, or returns nullopt when no directory is set.
  std::optional<std::ofstream> open(const std::string& name) const {
    if (out_dir.empty()) return std::nullopt;
    std::filesystem::create_directories(out_dir);
    std::ofstream f(std::filesystem::path(out_dir) / name);
    if (!f) throw Error("cannot write " + (std::filesystem::path(out_dir) / name).string());
    return f;
  }
};

inline std::string file_stem(std::string name) {
  for (char& ch : name)
    if (!std::isalnum(static_cast<unsigned char>(ch))) ch = '_';
  return name;
}

inline void write_json(const Context& ctx, const std::string& file, const nlohmann::json& j,
                       std::ostream& out) {
  out << j.dump(2) << '\n';
  if (auto f = ctx.open(file)) *f << j.dump(2) << '\n';
}

inline int cmd_check(const Context& ctx, std::ostream& out) {
  const ConditionReport r = check_conditions(ctx.cfg.model(), ctx.cfg.scalar_potential());
  write_json(ctx, "check.json", to_json(r), out);
  return r.passed() ? kPass : kFail;
}

/// Certificate and theta2 for the configured theta1 values; nullopt when conditions fail.
struct Certified {
  ConditionReport report;
  std::optional<RateCertificate> cert;
};

inline Certified certify(const Context& ctx) {
  Certified c{check_conditions(ctx.cfg.model(), ctx.cfg.scalar_potential()), std::nullopt};
  if (c.report.passed()) c.cert = derive_constants(ctx.cfg.model(), c.report, ctx.variant);
  return c;
}

inline int cmd_rate(const Context& ctx, std::ostream& out) {
  const Certified c = certify(ctx);
  nlohmann::json j = {{"conditions", to_json(c.report)}, {"variant", to_string(ctx.variant)}};
  if (!c.cert) {
    write_json(ctx, "rate.json", j, out);
    return kFail;
  }
  j["constants"] = to_json(*c.cert);
  nlohmann::json rates = nlohmann::json::array();
  for (double t1 : ctx.cfg.theta1)
    rates.push_back({{"theta1", t1},
                     {"theta2", compute_theta2(*c.cert, t1, ctx.variant)},
                     {"thm5_2", compute_theta2(*c.cert, t1, RateVariant::Thm5_2)},
                     {"thm6_10", compute_theta2(*c.cert, t1, RateVariant::Thm6_10)}});
  j["rates"] = rates;
  write_json(ctx, "rate.json", j, out);
  return kPass;
}

inline int cmd_simulate(const Context& ctx, std::ostream& out) {
  const Model model = ctx.cfg.model();
  const GibbsPotential pot = ctx.cfg.gibbs();
  RngStream rng(ctx.cfg.seed, streams::kTrajectories);
  StateVector x0(model.modes());
  if (ctx.cfg.sim_initial == "stationary") x0 = sample_mu_Phi(model, pot, rng);
  SimulateOptions opt;
  opt.output_dt = ctx.cfg.sim_output_dt;
  const TimeSeries ts =
      simulate(x0, ctx.cfg.sim_T, ctx.cfg.mc.h, model, pot, rng, ctx.observables(), opt);
  if (auto f = ctx.open("trajectory.csv"))
    ts.write_csv(*f);
  else
    ts.write_csv(out);
  return kPass;
}

inline int cmd_decay(const Context& ctx, std::ostream& out) {
  const Certified c = certify(ctx);
  if (!c.cert) {
    write_json(ctx, "decay.json", {{"conditions", to_json(c.report)}, {"passed", false}}, out);
    return kFail;
  }
  const double theta1 = ctx.cfg.theta1.front();
  const double theta2 = compute_theta2(*c.cert, theta1, ctx.variant);
  const auto curves = estimate_decay(ctx.observables({"u1", "v1", "tanh"}), ctx.cfg.decay_times,
                                     ctx.cfg.model(), ctx.cfg.gibbs(), ctx.mc(), theta1, theta2);
  nlohmann::json j = {{"variant", to_string(ctx.variant)}, {"curves", nlohmann::json::array()}};
  bool ok = true;
  for (const DecayCurve& cv : curves) {
    if (auto f = ctx.open("decay_" + file_stem(cv.name) + ".csv")) cv.write_csv(*f);
    j["curves"].push_back(to_json(cv));
    ok = ok && cv.passed();
  }
  j["passed"] = ok;
  write_json(ctx, "decay.json", j, out);
  return ok ? kPass : kFail;
}

inline int cmd_ergodic(const Context& ctx, std::ostream& out) {
  const Certified c = certify(ctx);
  if (!c.cert) {
    write_json(ctx, "ergodic.json", {{"conditions", to_json(c.report)}, {"passed", false}}, out);
    return kFail;
  }
  const double theta1 = ctx.cfg.theta1.front();
  const double theta2 = compute_theta2(*c.cert, theta1, ctx.variant);
  const auto results = ergodic_average_test(ctx.observables({"u1", "v1", "tanh"}),
                                            ctx.cfg.ergodic_T, ctx.cfg.model(), ctx.cfg.gibbs(),
                                            ctx.mc(), theta1, theta2);
  nlohmann::json j = {{"variant", to_string(ctx.variant)},
                      {"theta1", theta1},
                      {"theta2", theta2},
                      {"observables", nlohmann::json::array()}};
  bool ok = true;
  for (const ErgodicResult& r : results) {
    if (auto f = ctx.open("ergodic_" + file_stem(r.name) + ".csv")) r.write_csv(*f);
    j["observables"].push_back(to_json(r));
    ok = ok && r.passed();
  }
  j["passed"] = ok;
  write_json(ctx, "ergodic.json", j, out);
  return ok ? kPass : kFail;
}

inline int cmd_verify(const Context& ctx, std::ostream& out) {
  VerifyOptions opt;
  opt.seed = ctx.cfg.seed;
  opt.workers = ctx.workers;
  opt.samples = ctx.cfg.mc.samples;
  opt.variance_scale = ctx.cfg.variance_scale;
  const VerifyReport r = run_verify(ctx.cfg.model(), ctx.cfg.gibbs(), opt, ctx.cfg.mc.h);
  write_json(ctx, "verify.json", to_json(r), out);
  return r.passed() ? kPass : kFail;
}

}  // namespace hypolang::cli

#endif  // HYPOLANG_CLI_HPP
