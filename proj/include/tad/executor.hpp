#pragma once

#include <chrono>
#include <set>
#include <string>

#include "tad/embedding.hpp"

namespace tad {

/// (model id, prompt) -> output text. Implementations throw tad::Error
/// (normally kUnavailable) on failure.
class AgentExecutor {
 public:
  virtual ~AgentExecutor() = default;
  virtual std::string Run(const std::string& model, const std::string& prompt) const = 0;
};

/// Deterministic echo: "[model] prompt". Models in `failing` throw
/// kUnavailable, for exercising the repair path.
class MockExecutor : public AgentExecutor {
 public:
  MockExecutor() = default;
  explicit MockExecutor(std::set<std::string> failing) : failing_(std::move(failing)) {}

  std::string Run(const std::string& model, const std::string& prompt) const override;

 private:
  std::set<std::string> failing_;
};

/// POSTs {"model", "prompt"} to the endpoint and reads {"output"}.
class HttpExecutor : public AgentExecutor {
 public:
  explicit HttpExecutor(EndpointConfig endpoint) : endpoint_(std::move(endpoint)) {}

  std::string Run(const std::string& model, const std::string& prompt) const override;

 private:
  EndpointConfig endpoint_;
};

}  // namespace tad
