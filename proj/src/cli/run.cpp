#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <unistd.h>

#include "CLI11.hpp"
#include "json_config.hpp"
#include "slope/geometry.hpp"

namespace slope::cli {

namespace {

constexpr std::pair<Command, std::string_view> kCommands[] = {
    {Command::solve, "solve"},
    {Command::prox, "prox"},
    {Command::pattern, "pattern"},
    {Command::simulate_fdr, "simulate-fdr"},
    {Command::simulate_pattern, "simulate-pattern"},
    {Command::limiting, "limiting"},
    {Command::recovery, "recovery"},
    {Command::attainability, "attainability"},
    {Command::hausdorff_check, "hausdorff-check"},
};

std::string format_number(double v) {
  char buf[32];
  if (v == 0.0) v = 0.0;
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json vector_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

struct Outcome {
  Table table;
  json metrics = json::object();
  std::optional<std::uint64_t> seed;
  /// Replaces the usual "command seed metric" line on standard output.
  std::optional<std::string> stdout_line;
  std::string headline;
};

std::string render_csv(const Table& table) {
  std::string out;
  const auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out += ',';
      out += csv_field(fields[i]);
    }
    out += '\n';
  };
  line(table.header);
  for (const auto& row : table.rows) line(row);
  return out;
}

json table_json(const Table& table) {
  json rows = json::array();
  for (const auto& row : table.rows) {
    json obj = json::object();
    for (std::size_t i = 0; i < row.size(); ++i) obj[table.header[i]] = row[i];
    rows.push_back(std::move(obj));
  }
  return rows;
}

void distribution_rows(Table& table, const std::string& name, const PatternDistribution& dist) {
  for (const auto& [patt, count] : dist.counts())
    table.rows.push_back({name, patt.to_string(), std::to_string(count), format_number(dist.frequency(patt))});
}

void fdr_metrics(json& metrics, const FdrReport& fdr) {
  metrics["fdr"] = fdr.fdr_estimate;
  metrics["se"] = fdr.standard_error;
  metrics["power"] = fdr.power_estimate;
  metrics["replications"] = fdr.replications;
  metrics["failures"] = fdr.failures;
}

bool uses_seed(Command command) {
  switch (command) {
    case Command::simulate_fdr:
    case Command::simulate_pattern:
    case Command::limiting:
    case Command::recovery:
    case Command::attainability: return true;
    default: return false;
  }
}

std::size_t take_count(Node node) {
  const auto v = node.integer();
  if (v < 1) node.fail("must be a positive integer");
  return static_cast<std::size_t>(v);
}

Outcome run_solve(Node node) {
  const Matrix x = node.at("x").matrix();
  Node y_node = node.at("y");
  const Vector y = y_node.vector();
  if (y.size() != x.rows()) y_node.fail("must have one entry per row of x");
  const auto p = static_cast<std::size_t>(x.cols());
  const LambdaVector lambda = lambda_values(parse_lambda(node.at("lambda"), p, nullptr), p);
  LossSpec loss = LossSpec::quadratic();
  if (auto l = node.find("loss")) loss = parse_loss(*l);
  SolverOptions opts;
  if (auto s = node.find("solver")) opts = parse_solver(*s);
  node.reject_unknown();
  const SolveResult fit = solve_slope(x, y, lambda, loss, opts);
  const SlopePattern patt = pattern(fit.solution);
  Outcome out;
  out.table.header = {"index", "estimate", "pattern"};
  for (std::size_t i = 0; i < p; ++i)
    out.table.rows.push_back({std::to_string(i), format_number(fit.solution[static_cast<Eigen::Index>(i)]),
                              std::to_string(patt[i])});
  out.metrics["solution"] = vector_json(fit.solution);
  out.metrics["pattern"] = patt.to_string();
  out.metrics["iterations"] = fit.iterations;
  out.metrics["kkt_residual"] = fit.kkt_residual;
  out.headline = "pattern=" + patt.to_string();
  return out;
}

Outcome run_prox(Node node) {
  const ProxRequest request = parse_prox(node);
  const Vector result = prox(request);
  Outcome out;
  out.table.header = {"index", "value"};
  for (Eigen::Index i = 0; i < result.size(); ++i)
    out.table.rows.push_back({std::to_string(i), format_number(result[i])});
  out.metrics["result"] = vector_json(result);
  out.metrics["pattern"] = pattern(result).to_string();
  out.headline = "pattern=" + pattern(result).to_string();
  return out;
}

Outcome run_pattern(Node node) {
  const Vector v = node.at("vector").vector();
  node.reject_unknown();
  const SlopePattern patt = pattern(v);
  Outcome out;
  out.table.header = {"index", "entry"};
  for (std::size_t i = 0; i < patt.size(); ++i) out.table.rows.push_back({std::to_string(i), std::to_string(patt[i])});
  out.metrics["pattern"] = patt.to_string();
  out.stdout_line = patt.to_string();
  return out;
}

Outcome run_simulate_fdr(Node node, const RunManifest& manifest) {
  ExperimentConfig config = parse_experiment(node);
  config.threads = manifest.threads;
  const FiniteSampleReport report = run_finite_sample(config);
  Outcome out;
  out.seed = config.seed;
  out.table.header = {"rep", "V", "R", "fdr_contrib"};
  for (const auto& rec : report.records) {
    if (rec.failed) continue;
    out.table.rows.push_back({std::to_string(rec.index), std::to_string(rec.false_discoveries),
                              std::to_string(rec.discoveries), format_number(rec.fdr_contribution)});
  }
  fdr_metrics(out.metrics, report.fdr);
  if (const auto* bhq = std::get_if<BhqRule>(&config.lambda.rule)) {
    const auto nulls = (config.model.beta0.array() == 0.0).count();
    out.metrics["q_times_p0_over_p"] = bhq->q * static_cast<double>(nulls) / static_cast<double>(config.model.dimension());
  }
  out.metrics["lambda"] = vector_json(config.lambda.resolve(config.model).values());
  out.headline = "fdr=" + format_number(report.fdr.fdr_estimate);
  return out;
}

Outcome run_simulate_pattern(Node node, const RunManifest& manifest) {
  ExperimentConfig config = parse_experiment(node);
  config.threads = manifest.threads;
  const FiniteSampleReport finite = run_finite_sample(config);
  LimitingOptions options;
  options.replications = config.replications;
  options.seed = splitmix64(config.seed);
  options.solver = config.solver;
  options.threads = config.threads;
  const LimitingReport limit = run_limiting(config.model, config.lambda.resolve(config.model), options);
  Outcome out;
  out.seed = config.seed;
  out.table.header = {"distribution", "pattern", "count", "frequency"};
  distribution_rows(out.table, "estimate", finite.patterns);
  distribution_rows(out.table, "rescaled", finite.rescaled_patterns);
  distribution_rows(out.table, "limit", limit.patterns);
  const double tv = compare_distributions(finite.rescaled_patterns, limit.patterns);
  out.metrics["tv_rescaled_vs_limit"] = tv;
  out.metrics["tv_noise"] = comparison_noise(finite.rescaled_patterns, limit.patterns);
  fdr_metrics(out.metrics, finite.fdr);
  out.headline = "tv=" + format_number(tv);
  return out;
}

Outcome run_limiting_command(Node node, const RunManifest& manifest) {
  const ModelSpec model = parse_model(node.at("model"));
  const LambdaVector lambda = parse_lambda(node.at("lambda"), model.dimension(), &model).resolve(model);
  LimitingOptions options;
  options.replications = take_count(node.at("replications"));
  options.seed = node.at("seed").seed();
  if (auto s = node.find("solver")) options.solver = parse_solver(*s);
  options.threads = manifest.threads;
  node.reject_unknown();
  const LimitingReport report = run_limiting(model, lambda, options);
  Outcome out;
  out.seed = options.seed;
  out.table.header = {"distribution", "pattern", "count", "frequency"};
  distribution_rows(out.table, "u", report.patterns);
  distribution_rows(out.table, "limiting", report.limiting_patterns);
  fdr_metrics(out.metrics, report.fdr);
  out.headline = "fdr=" + format_number(report.fdr.fdr_estimate);
  return out;
}

struct SmallModel {
  Vector beta0;
  LambdaVector lambda;
  CovarianceMatrix covariance;
  double sigma;
  std::size_t replications;
  std::uint64_t seed;
};

SmallModel parse_small_model(Node& node) {
  const Vector beta0 = node.at("beta0").vector();
  const auto p = static_cast<std::size_t>(beta0.size());
  const LambdaVector lambda = lambda_values(parse_lambda(node.at("lambda"), p, nullptr), p);
  CovarianceMatrix c = CovarianceMatrix::identity(p);
  if (auto n = node.find("covariance")) c = parse_covariance(*n, p);
  double sigma = 1.0;
  if (auto n = node.find("sigma")) sigma = n->positive();
  const std::size_t reps = take_count(node.at("replications"));
  const std::uint64_t seed = node.at("seed").seed();
  node.reject_unknown();
  return {beta0, lambda, c, sigma, reps, seed};
}

Outcome run_recovery(Node node) {
  const SmallModel m = parse_small_model(node);
  const Estimate est = recovery_probability(m.lambda, m.beta0, m.covariance, m.sigma, m.replications, m.seed);
  Outcome out;
  out.seed = m.seed;
  out.table.header = {"estimate", "standard_error"};
  out.table.rows.push_back({format_number(est.value), format_number(est.standard_error)});
  out.metrics["probability"] = est.value;
  out.metrics["se"] = est.standard_error;
  out.headline = "probability=" + format_number(est.value);
  return out;
}

Outcome run_attainability(Node node, const RunManifest& manifest) {
  const SmallModel m = parse_small_model(node);
  const auto entries = attainability_sweep(m.lambda, m.beta0, m.covariance, m.sigma, m.replications, m.seed,
                                           manifest.threads);
  Outcome out;
  out.seed = m.seed;
  out.table.header = {"pattern", "count", "frequency", "attainable"};
  long mismatches = 0;
  for (const auto& e : entries) {
    out.table.rows.push_back(
        {e.pattern.to_string(), std::to_string(e.count), format_number(e.frequency), e.attainable ? "true" : "false"});
    mismatches += (e.count > 0) != e.attainable;
  }
  out.metrics["mismatches"] = mismatches;
  out.metrics["consistent"] = mismatches == 0;
  out.headline = "mismatches=" + std::to_string(mismatches);
  return out;
}

Outcome run_hausdorff(Node node) {
  Node lambda_node = node.at("lambda");
  Node pattern_node = node.at("pattern");
  const SlopePattern patt = [&] {
    try {
      return SlopePattern(pattern_node.integers());
    } catch (const std::invalid_argument& e) {
      pattern_node.fail(e.what());
    }
  }();
  const LambdaVector lambda = lambda_values(parse_lambda(lambda_node, patt.size(), nullptr), patt.size());
  Node n_node = node.at("n");
  const std::vector<int> ns = n_node.integers();
  for (int n : ns)
    if (n < 1) n_node.fail("entries must be positive");
  node.reject_unknown();
  const VertexPolytope limit = subdiff_vertices(SubdifferentialSpec(lambda, patt));
  Outcome out;
  out.table.header = {"n", "distance", "bound"};
  bool decreasing = true;
  bool bounded = true;
  double previous = std::numeric_limits<double>::infinity();
  for (int n : ns) {
    const Vector shift = Vector::Constant(static_cast<Eigen::Index>(patt.size()), 1.0 / n);
    const LambdaVector lambda_n(lambda.values() + shift);
    const double d = hausdorff_distance(subdiff_vertices(SubdifferentialSpec(lambda_n, patt)), limit);
    const double bound = shift.norm();
    decreasing = decreasing && d < previous;
    bounded = bounded && d <= bound + 1e-9;
    previous = d;
    out.table.rows.push_back({std::to_string(n), format_number(d), format_number(bound)});
  }
  out.metrics["strictly_decreasing"] = decreasing;
  out.metrics["within_bound"] = bounded;
  out.headline = std::string("decreasing=") + (decreasing ? "true" : "false");
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

std::optional<Command> parse_command(std::string_view name) {
  for (const auto& [command, text] : kCommands)
    if (text == name) return command;
  return std::nullopt;
}

std::string command_name(Command command) {
  for (const auto& [c, text] : kCommands)
    if (c == command) return std::string(text);
  return "unknown";
}

std::string csv_field(std::string_view value) {
  if (value.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(value);
  std::string out = "\"";
  for (char ch : value) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

void write_atomically(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << contents;
    out.flush();
    if (!out) {
      std::error_code ignored;
      std::filesystem::remove(tmp, ignored);
      throw IoError("failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into place at " + path.string());
  }
}

int run(const RunManifest& manifest, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  try {
    if (manifest.config_path.empty() || manifest.output_path.empty())
      throw ConfigError("", "both --config and --out are required");
    json doc = parse_json(read_file(manifest.config_path));
    if (manifest.seed && doc.is_object() && uses_seed(manifest.command)) doc["seed"] = *manifest.seed;
    Node node(doc, "");
    Outcome outcome;
    switch (manifest.command) {
      case Command::solve: outcome = run_solve(node); break;
      case Command::prox: outcome = run_prox(node); break;
      case Command::pattern: outcome = run_pattern(node); break;
      case Command::simulate_fdr: outcome = run_simulate_fdr(node, manifest); break;
      case Command::simulate_pattern: outcome = run_simulate_pattern(node, manifest); break;
      case Command::limiting: outcome = run_limiting_command(node, manifest); break;
      case Command::recovery: outcome = run_recovery(node); break;
      case Command::attainability: outcome = run_attainability(node, manifest); break;
      case Command::hausdorff_check: outcome = run_hausdorff(node); break;
    }
    json summary = {
        {"command", command_name(manifest.command)},
        {"seed", outcome.seed ? json(*outcome.seed) : json(nullptr)},
        {"config", doc},
        {"metrics", outcome.metrics},
        {"runtime_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()},
    };
    if (manifest.format == Format::csv) {
      write_atomically(manifest.output_path, render_csv(outcome.table));
      std::filesystem::path sidecar = manifest.output_path;
      sidecar += ".summary.json";
      write_atomically(sidecar, summary.dump(2) + "\n");
    } else {
      summary["rows"] = table_json(outcome.table);
      write_atomically(manifest.output_path, summary.dump(2) + "\n");
    }
    if (outcome.stdout_line) {
      out << *outcome.stdout_line << "\n";
    } else {
      out << command_name(manifest.command) << " seed=" << (outcome.seed ? std::to_string(*outcome.seed) : "none");
      if (!outcome.headline.empty()) out << " " << outcome.headline;
      out << "\n";
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ConvergenceError& e) {
    err << "solver error: " << e.what() << "\n";
    return kExitSolver;
  } catch (const ExperimentAborted& e) {
    err << "solver error: " << e.what() << "\n";
    return kExitSolver;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitSolver;
  }
}

int main(int argc, char** argv) {
  CLI::App app{"SLOPE pattern toolkit"};
  app.require_subcommand(1, 1);
  std::string config;
  std::string output;
  std::string format = "csv";
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  for (const auto& [command, name] : kCommands) {
    CLI::App* sub = app.add_subcommand(std::string(name));
    sub->add_option("--config", config, "JSON configuration file")->required();
    sub->add_option("--out", output, "output path")->required();
    sub->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--seed", seed, "override the configured seed");
    sub->add_option("--threads", threads, "worker threads (0 = all cores)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  RunManifest manifest;
  manifest.command = *parse_command(app.get_subcommands().front()->get_name());
  manifest.config_path = config;
  manifest.output_path = output;
  manifest.format = format == "json" ? Format::json : Format::csv;
  manifest.seed = seed;
  if (threads) {
    manifest.threads = *threads;
  } else if (const char* env = std::getenv("SLOPE_THREADS")) {
    try {
      manifest.threads = static_cast<unsigned>(std::stoul(env));
    } catch (const std::exception&) {
      std::cerr << "config error: SLOPE_THREADS must be a nonnegative integer\n";
      return kExitConfig;
    }
  }
  return run(manifest, std::cout, std::cerr);
}

}  // namespace slope::cli
