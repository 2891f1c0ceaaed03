#pragma once

#include <chrono>
#include <string>

#include "tad/common.hpp"

namespace tad::detail {

/// POSTs a JSON body and parses a JSON reply. Transport failures and non-2xx
/// replies throw kUnavailable; unparseable replies throw kCorrupted.
Json PostJson(const std::string& base_url, const std::string& path, const Json& body,
              const std::string& auth_token_env, std::chrono::milliseconds timeout);

}  // namespace tad::detail
