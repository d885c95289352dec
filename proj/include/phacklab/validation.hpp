#pragma once

#include <string>
#include <vector>

namespace phacklab {

struct Violation {
  std::string field;
  std::string message;
};

/// Outcome of a parameter check. Never throws; callers decide what to do.
struct ValidationResult {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  void add(std::string field, std::string message) {
    violations.push_back({std::move(field), std::move(message)});
  }
  void merge(const ValidationResult& other) {
    violations.insert(violations.end(), other.violations.begin(), other.violations.end());
  }
  bool has(const std::string& field) const {
    for (const auto& v : violations) {
      if (v.field == field) return true;
    }
    return false;
  }
  std::string to_string() const {
    std::string out;
    for (const auto& v : violations) {
      if (!out.empty()) out += "; ";
      out += v.field + ": " + v.message;
    }
    return out;
  }
};

}  // namespace phacklab
