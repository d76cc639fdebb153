#pragma once
// Strict helpers around nlohmann::json: unknown keys are rejected so file
// format drift is caught early.

#include <json.hpp>

#include <initializer_list>
#include <string>

#include "v2g/network.hpp"

namespace v2g::detail {

using nlohmann::json;

inline void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                                const std::string& context) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) throw ParseError("unknown key '" + it.key() + "' in " + context);
  }
}

template <typename T>
T get_required(const json& obj, const char* key, const std::string& context) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError("missing key '" + std::string(key) + "' in " + context);
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ParseError("bad value for '" + std::string(key) + "' in " + context);
  }
}

template <typename T>
std::optional<T> get_optional(const json& obj, const char* key, const std::string& context) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ParseError("bad value for '" + std::string(key) + "' in " + context);
  }
}

}  // namespace v2g::detail
