#pragma once

#include <latticediff/latticediff.hpp>

#include <string>

namespace testing {

inline std::string config_path(const std::string& name) { return std::string(LATTICEDIFF_CONFIG_DIR) + "/" + name; }

inline latticediff::ModelConfig config(const std::string& name) { return latticediff::load_model(config_path(name)); }

inline const latticediff::ValidationCheck* find_check(const latticediff::ValidationReport& r, const std::string& name) {
  for (const auto& c : r.checks)
    if (c.name == name) return &c;
  return nullptr;
}

}  // namespace testing
