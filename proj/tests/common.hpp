#ifndef HYPOLANG_TESTS_COMMON_HPP
#define HYPOLANG_TESTS_COMMON_HPP

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hypolang/certifier.hpp"

namespace testing_data {

inline nlohmann::json load(const std::string& name) {
  std::ifstream in(std::string(HYPOLANG_TEST_DATA) + "/" + name);
  if (!in) throw std::runtime_error("missing test data " + name);
  return nlohmann::json::parse(in);
}

/// Mismatches between the checker and the hand-evaluated verdicts of condition_grid.json.
inline std::vector<std::string> condition_grid_mismatches() {
  using namespace hypolang;
  std::vector<std::string> out;
  const nlohmann::json grid = load("condition_grid.json");
  int idx = 0;
  for (const auto& p : grid.at("points")) {
    ++idx;
    const Model m(Exponents{p.at("a1"), p.at("a2"), p.at("b1"), p.at("b2")}, 4);
    const double c = p.at("c");
    const ConditionReport r =
        check_conditions(m, c == 0.0 ? ScalarPotential::zero() : ScalarPotential::log_cosh(c));
    auto cmp = [&](const char* key, const Condition& cond) {
      if (cond.passed != p.at(key).get<bool>())
        out.push_back("point " + std::to_string(idx) + " " + key + ": got " +
                      (cond.passed ? "pass" : "fail") + " (" + cond.detail + ")");
    };
    cmp("m_dissipative", r.m_dissipative);
    cmp("trace_class_K22", r.trace_class_K22);
    cmp("process_ok", r.process_ok);
    cmp("gradient_bound", r.gradient_bound);
    cmp("hypo_ok", r.hypo_ok);
    const bool expect_all = p.at("m_dissipative").get<bool>() && p.at("trace_class_K22").get<bool>() &&
                            p.at("process_ok").get<bool>() && p.at("gradient_bound").get<bool>() &&
                            p.at("hypo_ok").get<bool>();
    if (r.passed() != expect_all)
      out.push_back("point " + std::to_string(idx) + " overall verdict differs");
  }
  return out;
}

}  // namespace testing_data

#endif  // HYPOLANG_TESTS_COMMON_HPP
