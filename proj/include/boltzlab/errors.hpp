#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace boltzlab {

// Two-body integrator could not continue (step-size underflow on a
// near-singular approach). Carries the closest separation reached.
class integration_error : public std::runtime_error {
 public:
  integration_error(const std::string& what, double closest_approach)
      : std::runtime_error(what), closest_approach_(closest_approach) {}
  double closest_approach() const { return closest_approach_; }

 private:
  double closest_approach_;
};

// Configuration rejected; all schema violations are collected before throwing.
class config_error : public std::runtime_error {
 public:
  explicit config_error(std::vector<std::string> violations)
      : std::runtime_error(join(violations)), violations_(std::move(violations)) {}
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s = "invalid configuration:";
    for (const auto& e : v) {
      s += "\n  - ";
      s += e;
    }
    return s;
  }
  std::vector<std::string> violations_;
};

}  // namespace boltzlab
