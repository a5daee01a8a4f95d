#pragma once

// Shared YAML helpers for the document loaders. Errors surface as
// lang::ParseError with 1-based positions.

#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "pnm/plan.hpp"

namespace pnm::lang::detail {

YAML::Node load(std::string_view document);
[[noreturn]] void syntax(const std::string& message, const YAML::Node& at);
std::string scalar(const YAML::Node& n, const char* what);
/// Map entries with merge keys applied and duplicate keys rejected.
std::vector<std::pair<YAML::Node, YAML::Node>> entries(const YAML::Node& map, const char* what);
kb::Value literal(const YAML::Node& n);
/// Rewraps yaml-cpp exceptions thrown by `f` as ParseError.
void guard(const std::function<void()>& f);

} // namespace pnm::lang::detail
