#include "tad/executor.hpp"

#include "http_client.hpp"

namespace tad {

std::string MockExecutor::Run(const std::string& model, const std::string& prompt) const {
  if (failing_.count(model)) {
    throw Error(ErrorKind::kUnavailable, "executor for '" + model + "' is unavailable");
  }
  return "[" + model + "] " + prompt;
}

std::string HttpExecutor::Run(const std::string& model, const std::string& prompt) const {
  const Json reply = detail::PostJson(endpoint_.base_url, endpoint_.path,
                                      {{"model", model}, {"prompt", prompt}},
                                      endpoint_.auth_token_env, endpoint_.timeout);
  auto it = reply.find("output");
  if (it == reply.end() || !it->is_string()) {
    throw Error(ErrorKind::kCorrupted, "executor reply lacks a string 'output'");
  }
  return it->get<std::string>();
}

}  // namespace tad
