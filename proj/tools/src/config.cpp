#include <algorithm>

#include "lowlight/error.hpp"
#include "lowlight_cli/cli.hpp"

namespace lowlight::cli {

namespace {

bool has_flag(const std::vector<std::string>& args, const std::string& flag) {
  return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
    return a == flag || a.rfind(flag + "=", 0) == 0;
  });
}

std::string scalar_text(const nlohmann::json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number() || v.is_boolean()) return v.dump();
  throw ValidationError("config key '" + key + "' must be a scalar or a flat array");
}

}  // namespace

std::vector<std::string> merge_config(const std::vector<std::string>& args,
                                      const nlohmann::json& config) {
  if (!config.is_object()) throw ValidationError("config file must hold a JSON object");
  std::vector<std::string> merged = args;
  for (const auto& [key, value] : config.items()) {
    const std::string flag = "--" + key;
    if (has_flag(args, flag)) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) merged.push_back(flag);
      continue;
    }
    if (value.is_null()) continue;
    std::string text;
    if (value.is_array()) {
      for (const auto& item : value) {
        if (!text.empty()) text += ',';
        text += scalar_text(item, key);
      }
    } else {
      text = scalar_text(value, key);
    }
    merged.push_back(flag);
    merged.push_back(text);
  }
  return merged;
}

}  // namespace lowlight::cli
