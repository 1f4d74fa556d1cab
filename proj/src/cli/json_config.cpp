#include "json_config.hpp"

#include <cmath>
#include <limits>

namespace slope::cli {

Node Node::at(const std::string& key) {
  auto found = find(key);
  if (!found) throw ConfigError(child(key), "required field is missing");
  return *found;
}

std::optional<Node> Node::find(const std::string& key) {
  if (!value_->is_object()) fail("must be an object");
  const auto it = value_->find(key);
  if (it == value_->end()) return std::nullopt;
  read_.insert(key);
  return Node(*it, child(key));
}

void Node::reject_unknown() const {
  if (!value_->is_object()) fail("must be an object");
  for (const auto& [key, unused] : value_->items()) {
    if (!read_.count(key)) throw ConfigError(child(key), "unknown field");
  }
}

double Node::number() const {
  if (!value_->is_number()) fail("must be a number");
  const double v = value_->get<double>();
  if (!std::isfinite(v)) fail("must be finite");
  return v;
}

double Node::positive() const {
  const double v = number();
  if (!(v > 0.0)) fail("must be positive");
  return v;
}

std::int64_t Node::integer() const {
  if (!value_->is_number_integer()) fail("must be an integer");
  return value_->get<std::int64_t>();
}

std::uint64_t Node::seed() const {
  if (!value_->is_number_unsigned() && !(value_->is_number_integer() && value_->get<std::int64_t>() >= 0))
    fail("must be a nonnegative integer");
  return value_->get<std::uint64_t>();
}

std::string Node::string() const {
  if (!value_->is_string()) fail("must be a string");
  return value_->get<std::string>();
}

bool Node::boolean() const {
  if (!value_->is_boolean()) fail("must be a boolean");
  return value_->get<bool>();
}

Vector Node::vector() const {
  if (!value_->is_array() || value_->empty()) fail("must be a nonempty array of numbers");
  Vector out(static_cast<Eigen::Index>(value_->size()));
  for (std::size_t i = 0; i < value_->size(); ++i)
    out[static_cast<Eigen::Index>(i)] = Node((*value_)[i], path_ + "[" + std::to_string(i) + "]").number();
  return out;
}

Matrix Node::matrix() const {
  if (!value_->is_array() || value_->empty()) fail("must be a nonempty array of rows");
  const std::size_t rows = value_->size();
  std::size_t cols = 0;
  Matrix out;
  for (std::size_t i = 0; i < rows; ++i) {
    const Vector row = Node((*value_)[i], path_ + "[" + std::to_string(i) + "]").vector();
    if (i == 0) {
      cols = static_cast<std::size_t>(row.size());
      out.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    } else if (static_cast<std::size_t>(row.size()) != cols) {
      fail("rows must have equal length");
    }
    out.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return out;
}

std::vector<int> Node::integers() const {
  if (!value_->is_array() || value_->empty()) fail("must be a nonempty array of integers");
  std::vector<int> out;
  for (std::size_t i = 0; i < value_->size(); ++i) {
    const auto v = Node((*value_)[i], path_ + "[" + std::to_string(i) + "]").integer();
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) fail("integer out of range");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", "invalid JSON at byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

LossSpec parse_loss(Node node) {
  const std::string kind = node.at("kind").string();
  LossSpec out;
  if (kind == "quadratic") {
    out = LossSpec::quadratic();
  } else if (kind == "huber") {
    double k = 1.345;
    if (auto n = node.find("k")) k = n->positive();
    out = LossSpec::huber(k);
  } else if (kind == "quantile") {
    double alpha = 0.5;
    if (auto n = node.find("alpha")) {
      alpha = n->number();
      if (!(alpha > 0.0 && alpha < 1.0)) n->fail("alpha must lie in (0,1)");
    }
    out = LossSpec::quantile(alpha);
  } else {
    node.fail("kind must be one of quadratic, huber, quantile");
  }
  node.reject_unknown();
  return out;
}

NoiseSpec parse_noise(Node node, const LossSpec& loss) {
  const std::string kind = node.at("kind").string();
  NoiseSpec out;
  if (kind == "gaussian") {
    double sigma = 1.0;
    if (auto n = node.find("sigma")) sigma = n->positive();
    out = NoiseSpec::gaussian(sigma);
  } else if (kind == "student_t") {
    const double df = node.at("df").positive();
    double scale = 1.0;
    if (auto n = node.find("scale")) scale = n->positive();
    out = NoiseSpec::student_t(df, scale);
  } else {
    node.fail("kind must be one of gaussian, student_t");
  }
  const auto* quantile = std::get_if<QuantileLoss>(&loss.kind);
  auto shift = node.find("shift");
  if (shift && !shift->value().is_string()) {
    out.shift = shift->number();
  } else {
    if (shift && shift->string() != "auto") shift->fail("must be a number or \"auto\"");
    if (quantile) out = out.centered_at_quantile(quantile->alpha);
  }
  if (!quantile && out.kind == NoiseSpec::Kind::student_t && !(out.df > 2.0))
    node.fail("student_t noise needs df > 2 for quadratic and huber losses");
  node.reject_unknown();
  return out;
}

CovarianceMatrix parse_covariance(Node node, std::size_t p) {
  if (node.value().is_string()) {
    if (node.string() != "identity") node.fail("must be \"identity\" or a matrix");
    return CovarianceMatrix::identity(p);
  }
  const Matrix m = node.matrix();
  if (static_cast<std::size_t>(m.rows()) != p || static_cast<std::size_t>(m.cols()) != p)
    node.fail("must be " + std::to_string(p) + "x" + std::to_string(p));
  try {
    return CovarianceMatrix(m);
  } catch (const std::invalid_argument& e) {
    node.fail(e.what());
  }
}

ModelSpec parse_model(Node node) {
  ModelSpec model;
  model.beta0 = node.at("beta0").vector();
  const std::size_t p = model.dimension();
  if (auto c = node.find("covariance")) {
    model.covariance = parse_covariance(*c, p);
  } else {
    model.covariance = CovarianceMatrix::identity(p);
  }
  if (auto l = node.find("loss")) model.loss = parse_loss(*l);
  if (auto n = node.find("noise")) {
    model.noise = parse_noise(*n, model.loss);
  } else if (const auto* q = std::get_if<QuantileLoss>(&model.loss.kind)) {
    model.noise = NoiseSpec::gaussian(1.0).centered_at_quantile(q->alpha);
  }
  node.reject_unknown();
  return model;
}

LambdaRule parse_lambda(Node node, std::size_t p, const ModelSpec* model) {
  if (node.value().is_array()) {
    const Vector values = node.vector();
    if (static_cast<std::size_t>(values.size()) != p) node.fail("must have length " + std::to_string(p));
    try {
      return LambdaRule{LambdaVector(values)};
    } catch (const std::invalid_argument& e) {
      std::string_view msg = e.what();
      if (msg.starts_with("lambda: ")) msg.remove_prefix(8);
      node.fail(std::string(msg));
    }
  }
  Node bhq = node.at("bhq");
  node.reject_unknown();
  BhqRule rule;
  Node q = bhq.at("q");
  rule.q = q.number();
  if (!(rule.q > 0.0 && rule.q < 1.0)) q.fail("q must lie in (0,1)");
  if (auto s = bhq.find("scale")) {
    if (s->value().is_string()) {
      if (s->string() != "sqrt_delta") s->fail("must be a positive number or \"sqrt_delta\"");
      if (!model) s->fail("\"sqrt_delta\" needs a model");
    } else {
      rule.scale = s->positive();
    }
  } else if (!model) {
    rule.scale = 1.0;
  }
  bhq.reject_unknown();
  LambdaRule out{rule};
  if (model) {
    try {
      out.resolve(*model);
    } catch (const std::exception& e) {
      node.fail(e.what());
    }
  } else {
    bhq_lambdas(p, rule.q, *rule.scale);
  }
  return out;
}

LambdaVector lambda_values(const LambdaRule& rule, std::size_t p) {
  if (const auto* v = std::get_if<LambdaVector>(&rule.rule)) return *v;
  const BhqRule& bhq = std::get<BhqRule>(rule.rule);
  return bhq_lambdas(p, bhq.q, bhq.scale.value_or(1.0));
}

SolverOptions parse_solver(Node node) {
  SolverOptions out;
  if (auto n = node.find("max_iterations")) {
    const auto v = n->integer();
    if (v <= 0 || v > std::numeric_limits<int>::max()) n->fail("must be a positive integer");
    out.max_iterations = static_cast<int>(v);
  }
  if (auto n = node.find("kkt_tolerance")) out.kkt_tolerance = n->positive();
  if (auto n = node.find("intermediate_tolerance")) out.intermediate_tolerance = n->positive();
  if (auto n = node.find("step_rule")) {
    const std::string rule = n->string();
    if (rule == "fixed_lipschitz") {
      out.step_rule = StepRule::fixed_lipschitz;
    } else if (rule == "backtracking") {
      out.step_rule = StepRule::backtracking;
    } else {
      n->fail("must be \"fixed_lipschitz\" or \"backtracking\"");
    }
  }
  if (auto n = node.find("accelerate")) out.accelerate = n->boolean();
  if (auto n = node.find("smoothing_schedule")) {
    const Vector v = n->vector();
    out.smoothing_schedule.assign(v.data(), v.data() + v.size());
  }
  try {
    out.validate();
  } catch (const std::invalid_argument& e) {
    node.fail(e.what());
  }
  node.reject_unknown();
  return out;
}

ExperimentConfig parse_experiment(Node node) {
  ExperimentConfig out;
  out.model = parse_model(node.at("model"));
  const std::size_t p = out.model.dimension();
  Node n = node.at("n");
  const auto n_value = n.integer();
  if (n_value < static_cast<std::int64_t>(p)) n.fail("must be an integer >= p = " + std::to_string(p));
  out.n = static_cast<std::size_t>(n_value);
  Node reps = node.at("replications");
  if (reps.integer() < 1) reps.fail("must be a positive integer");
  out.replications = static_cast<std::size_t>(reps.integer());
  out.seed = node.at("seed").seed();
  out.lambda = parse_lambda(node.at("lambda"), p, &out.model);
  if (auto s = node.find("solver")) out.solver = parse_solver(*s);
  node.reject_unknown();
  return out;
}

ProxRequest parse_prox(Node node) {
  Node lambda_node = node.at("lambda");
  const Vector input = node.at("input").vector();
  const auto p = static_cast<std::size_t>(input.size());
  ProxRequest out{lambda_values(parse_lambda(lambda_node, p, nullptr), p), std::nullopt, input, 1.0};
  if (auto a = node.find("anchor")) {
    out.anchor = a->vector();
    if (static_cast<std::size_t>(out.anchor->size()) != p) a->fail("must have length " + std::to_string(p));
  }
  if (auto s = node.find("step")) out.step = s->positive();
  node.reject_unknown();
  return out;
}

ExperimentConfig parse_experiment_config(std::string_view text) {
  const json doc = parse_json(text);
  return parse_experiment(Node(doc, ""));
}

ModelSpec parse_model_spec(std::string_view text) {
  const json doc = parse_json(text);
  return parse_model(Node(doc, ""));
}

ProxRequest parse_prox_request(std::string_view text) {
  const json doc = parse_json(text);
  return parse_prox(Node(doc, ""));
}

}  // namespace slope::cli
