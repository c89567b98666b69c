#pragma once

#include <string>
#include <string_view>

#include "engagecf/data.hpp"
#include "json.hpp"

namespace engagecf {

using Json = nlohmann::json;

Json NormStatsToJsonValue(const NormStats& stats);
NormStats NormStatsFromJsonValue(const Json& j);

// Parses `text`, mapping parse failures to Error("invalid-json").
Json ParseJson(std::string_view text, std::string_view what);

// Field accessors that name the missing/mistyped field in the error.
const Json& RequireField(const Json& j, const char* field,
                         std::string_view what);
double RequireNumber(const Json& j, const char* field, std::string_view what);
std::string RequireString(const Json& j, const char* field,
                          std::string_view what);

}  // namespace engagecf
