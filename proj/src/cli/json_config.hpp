#pragma once

#include <set>

#include "json.hpp"
#include "slope/cli.hpp"

namespace slope::cli {

using nlohmann::json;

/// A JSON value at a field path; object nodes remember which keys were read
/// so unread ones can be rejected.
class Node {
 public:
  Node(const json& value, std::string path) : value_(&value), path_(std::move(path)) {}

  const json& value() const noexcept { return *value_; }
  const std::string& path() const noexcept { return path_; }

  [[noreturn]] void fail(const std::string& message) const { throw ConfigError(path_, message); }

  Node at(const std::string& key);
  std::optional<Node> find(const std::string& key);
  void reject_unknown() const;

  double number() const;
  double positive() const;
  std::int64_t integer() const;
  std::uint64_t seed() const;
  std::string string() const;
  bool boolean() const;
  Vector vector() const;
  Matrix matrix() const;
  std::vector<int> integers() const;

 private:
  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* value_;
  std::string path_;
  std::set<std::string> read_;
};

json parse_json(std::string_view text);

LossSpec parse_loss(Node node);
NoiseSpec parse_noise(Node node, const LossSpec& loss);
CovarianceMatrix parse_covariance(Node node, std::size_t p);
ModelSpec parse_model(Node node);
LambdaRule parse_lambda(Node node, std::size_t p, const ModelSpec* model);
/// Explicit lambda, or bhq with a numeric scale.
LambdaVector lambda_values(const LambdaRule& rule, std::size_t p);
SolverOptions parse_solver(Node node);
ExperimentConfig parse_experiment(Node node);
ProxRequest parse_prox(Node node);

}  // namespace slope::cli
