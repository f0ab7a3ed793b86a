#include "olar/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "olar/error.hpp"
#include "olar/label_oracle.hpp"

namespace olar::cli {
namespace {

using json = nlohmann::ordered_json;

std::string fmt17(double v) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, r.ptr);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    fail(ErrorCode::InvalidArgument, "config key " + key + ": not a number: " + v);
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    fail(ErrorCode::InvalidArgument, "config key " + key + ": not a non-negative integer: " + v);
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(ErrorCode::InvalidArgument, "config key " + key + ": expected true or false");
}

std::vector<double> as_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

json ledger_json(const QueryLedger& l) {
  return {{"total", l.total()},
          {"S", l.per_stage(LedgerStage::S)},
          {"S1", l.per_stage(LedgerStage::S1)},
          {"S2", l.per_stage(LedgerStage::S2)},
          {"S3", l.per_stage(LedgerStage::S3)}};
}

json config_json(const PipelineConfig& c) {
  json j{{"p", c.p},
         {"epsilon", c.epsilon},
         {"delta", c.delta},
         {"weight_mode", to_string(c.weight_mode)},
         {"tree_eta", c.tree_eta},
         {"tree_refresh", c.tree_refresh},
         {"boost_runs", c.boost_runs},
         {"s3_copies", c.s3_copies},
         {"intermediate", c.intermediate},
         {"seed", c.seed}};
  return j;
}

// optional seed override from the environment
std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("OLAR_SEED");
  if (!s || !*s) return std::nullopt;
  return to_uint("OLAR_SEED", s);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, sep);)
    if (!trim(item).empty()) out.push_back(trim(item));
  return out;
}

int cmd_gen(const SyntheticSpec& spec, const std::string& out_dir, std::ostream& out) {
  const SyntheticData data = gen_synthetic(spec);
  write_synthetic(out_dir, spec, data);
  out << json{{"out", out_dir}, {"n", spec.n}, {"d", spec.d}, {"inflated", data.inflated.size()}}.dump() << "\n";
  return kOk;
}

struct RunArgs {
  std::string data;
  std::string mode = "guarantee";
  std::size_t budget = 0;
  std::string method = "active-online";
  std::string dump_sketch;
  std::string config;
};

int cmd_run(PipelineConfig cfg, const RunArgs& args, std::ostream& out) {
  const std::string path = resolve_data_path(args.data);
  OpenedStream opened = open_stream(path);
  json j;
  j["config"] = config_json(cfg);
  j["mode"] = args.mode;
  Vector x;
  if (args.mode == "guarantee") {
    cfg.validate();
    const PipelineResult r = run_pipeline(*opened.stream, *opened.oracle, cfg);
    x = r.x;
    j["queries"] = r.ledger.total();
    j["ledger"] = ledger_json(r.ledger);
    j["samples"] = {{"S", r.samples.s}, {"S1", r.samples.s1}, {"S2", r.samples.s2}, {"S3", r.samples.s3}};
    j["betas"] = {{"beta", r.betas.beta}, {"beta1", r.betas.beta1}, {"beta2", r.betas.beta2}, {"beta3", r.betas.beta3}};
    j["rows"] = r.rows;
    j["init_rows"] = r.init_rows;
    j["peak_stored_rows"] = r.peak_stored_rows;
    j["chosen_run"] = r.chosen_run;
    j["wall_seconds"] = r.wall_seconds;
    if (!args.dump_sketch.empty()) {
      std::ofstream dump(args.dump_sketch, std::ios::trunc);
      if (!dump) fail(ErrorCode::Io, "cannot write " + args.dump_sketch);
      bool header = true;
      for (const auto& [name, sk] : r.sketches) {
        write_sketch_csv(dump, name, sk, header);
        header = false;
      }
    }
  } else {
    BudgetResult r;
    const auto t0 = std::chrono::steady_clock::now();
    if (args.method == "active-online") {
      r = budgeted_active(*opened.stream, *opened.oracle, args.budget, cfg.p, cfg.seed);
    } else if (args.method == "uniform") {
      r = uniform_baseline(*opened.stream, *opened.oracle, args.budget, cfg.p, cfg.seed);
    } else {
      r = offline_lewis_reference(*opened.stream, *opened.oracle, args.budget, cfg.p, cfg.seed);
    }
    x = r.x;
    j["method"] = args.method;
    j["budget"] = args.budget;
    j["queries"] = r.queries;
    j["forced_skips"] = r.forced_skips;
    j["ledger"] = ledger_json(r.ledger);
    j["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  // evaluation only, after the algorithm is done with the oracle
  const Dataset full = load_dataset(path);
  j["objective"] = objective(full.a, full.b, cfg.p, x);
  j["x"] = as_std(x);
  out << j.dump(2) << "\n";
  return kOk;
}

}  // namespace

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidProbability:
      return kUsage;
    case ErrorCode::DimensionMismatch:
    case ErrorCode::BadHeader:
    case ErrorCode::UnexpectedEof:
    case ErrorCode::RaggedRow:
    case ErrorCode::NonFiniteEntry:
    case ErrorCode::MissingColumn:
    case ErrorCode::NonNumeric:
    case ErrorCode::Io:
    case ErrorCode::InvalidShape:
      return kData;
    default:
      return kNumeric;
  }
}

void SweepSpec::validate() const {
  if (methods.empty()) fail(ErrorCode::InvalidArgument, "no methods");
  for (const std::string& m : methods)
    if (m != "active-online" && m != "uniform" && m != "offline")
      fail(ErrorCode::InvalidArgument, "unknown method " + m);
  if (trials < 1) fail(ErrorCode::InvalidArgument, "trials must be at least 1");
  if (!std::is_sorted(budgets.begin(), budgets.end())) fail(ErrorCode::InvalidArgument, "budgets must be ascending");
  if (!(p >= 1.0 && p <= 2.0)) fail(ErrorCode::InvalidArgument, "p must lie in [1, 2]");
}

std::uint64_t trial_seed(std::uint64_t master, int trial) {
  return splitmix64(master ^ splitmix64(static_cast<std::uint64_t>(trial) + 0x5eedULL));
}

std::string resolve_data_path(const std::string& path) {
  namespace fs = std::filesystem;
  if (fs::is_directory(path)) return (fs::path(path) / "stream.olar").string();
  if (!fs::exists(path)) fail(ErrorCode::Io, "dataset not found: " + path);
  return path;
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec) {
  spec.validate();
  const std::string path = resolve_data_path(spec.data);
  const Dataset data = load_dataset(path);
  const std::size_t n = static_cast<std::size_t>(data.a.rows());
  std::vector<std::size_t> budgets = spec.budgets;
  if (budgets.empty())
    for (int pct : {8, 10, 12, 14}) budgets.push_back(n * static_cast<std::size_t>(pct) / 100);
  const double opt = solve(data.a, data.b, spec.p).objective;
  const double b_norm = lp_norm(data.b, spec.p);
  const std::vector<double> labels = as_std(data.b);

  const std::size_t nb = budgets.size(), nm = spec.methods.size();
  std::vector<SweepRow> rows(nm * nb * static_cast<std::size_t>(spec.trials));
#pragma omp parallel for schedule(dynamic)
  for (int trial = 0; trial < spec.trials; ++trial) {
    const std::uint64_t seed = trial_seed(spec.seed, trial);
    MemoryStream stream(data.a);
    std::optional<std::vector<double>> weights;
    for (std::size_t m = 0; m < nm; ++m) {
      for (std::size_t k = 0; k < nb; ++k) {
        SweepRow& row = rows[(m * nb + k) * static_cast<std::size_t>(spec.trials) + static_cast<std::size_t>(trial)];
        row.method = spec.methods[m];
        row.budget = budgets[k];
        row.trial = trial;
        row.seed = seed;
        try {
          VectorLabelOracle oracle(labels);
          BudgetResult r;
          if (row.method == "active-online") {
            if (!weights) weights = stream_online_weights(stream, spec.p, seed, spec.exact_weights);
            r = budgeted_active(stream, oracle, row.budget, spec.p, seed, *weights);
          } else if (row.method == "uniform") {
            r = uniform_baseline(stream, oracle, row.budget, spec.p, seed);
          } else {
            r = offline_lewis_reference(stream, oracle, row.budget, spec.p, seed);
          }
          row.queries_used = r.queries;
          row.relative_error = relative_error(objective(data.a, data.b, spec.p, r.x), opt, b_norm);
        } catch (const Error& e) {
          row.relative_error = std::numeric_limits<double>::quiet_NaN();
          row.status = to_string(e.code());
        }
      }
    }
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "method,budget,trial,relative_error,queries_used,seed,status\n";
  for (const SweepRow& r : rows)
    out << r.method << "," << r.budget << "," << r.trial << "," << fmt17(r.relative_error) << "," << r.queries_used
        << "," << r.seed << "," << r.status << "\n";
  out << "# aggregate\n";
  out << "method,budget,trials,mean,std\n";
  std::vector<std::pair<std::string, std::size_t>> order;
  std::map<std::pair<std::string, std::size_t>, std::vector<double>> groups;
  for (const SweepRow& r : rows) {
    const auto key = std::make_pair(r.method, r.budget);
    if (!groups.count(key)) order.push_back(key);
    auto& g = groups[key];
    if (r.status == "ok") g.push_back(r.relative_error);
  }
  for (const auto& key : order) {
    const std::vector<double>& v = groups[key];
    double mean = 0.0, var = 0.0;
    for (double e : v) mean += e;
    if (!v.empty()) mean /= static_cast<double>(v.size());
    for (double e : v) var += (e - mean) * (e - mean);
    const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
    out << key.first << "," << key.second << "," << v.size() << "," << fmt17(v.empty() ? NAN : mean) << ","
        << fmt17(sd) << "\n";
  }
}

void apply_config_file(const std::string& path, PipelineConfig& cfg) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open config " + path);
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::InvalidArgument, path + ":" + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string v = trim(line.substr(eq + 1));
    if (key == "p") cfg.p = to_double(key, v);
    else if (key == "epsilon") cfg.epsilon = to_double(key, v);
    else if (key == "delta") cfg.delta = to_double(key, v);
    else if (key == "n_declared") cfg.n_declared = to_uint(key, v);
    else if (key == "beta") cfg.beta = to_double(key, v);
    else if (key == "beta1") cfg.beta1 = to_double(key, v);
    else if (key == "beta2") cfg.beta2 = to_double(key, v);
    else if (key == "beta3") cfg.beta3 = to_double(key, v);
    else if (key == "theta.beta") cfg.theta.beta = to_double(key, v);
    else if (key == "theta.beta_floor") cfg.theta.beta_floor = to_double(key, v);
    else if (key == "theta.beta1") cfg.theta.beta1 = to_double(key, v);
    else if (key == "theta.beta3") cfg.theta.beta3 = to_double(key, v);
    else if (key == "theta.beta_p1") cfg.theta.beta_p1 = to_double(key, v);
    else if (key == "theta.tree_beta") cfg.theta.tree_beta = to_double(key, v);
    else if (key == "weight_mode") cfg.weight_mode = parse_weight_mode(v);
    else if (key == "tree_eta") cfg.tree_eta = to_double(key, v);
    else if (key == "tree_refresh") cfg.tree_refresh = to_uint(key, v);
    else if (key == "boost_runs") cfg.boost_runs = static_cast<int>(to_uint(key, v));
    else if (key == "s3_copies") cfg.s3_copies = static_cast<int>(to_uint(key, v));
    else if (key == "seed") cfg.seed = to_uint(key, v);
    else if (key == "intermediate") cfg.intermediate = to_bool(key, v);
    else if (key == "solver.tol") cfg.solver.tol = to_double(key, v);
    else if (key == "solver.max_iter") cfg.solver.max_iter = static_cast<int>(to_uint(key, v));
    else fail(ErrorCode::InvalidArgument, path + ":" + std::to_string(lineno) + ": unknown key " + key);
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"online active lp regression"};
  app.require_subcommand(1);

  SyntheticSpec gen;
  std::string gen_out;
  std::optional<std::size_t> inflate;
  CLI::App* g = app.add_subcommand("gen", "write a synthetic dataset");
  g->add_option("--n", gen.n, "rows")->required();
  g->add_option("--d", gen.d, "columns")->required();
  g->add_option("--p", gen.p, "norm, sets the inflation factor n^{1/p}");
  g->add_option("--noise", gen.noise_std, "label noise std");
  g->add_option("--seed", gen.seed);
  g->add_option("--inflate", inflate, "number of inflated rows (default d)");
  g->add_option("--out", gen_out, "output directory")->required();

  PipelineConfig cfg;
  RunArgs ra;
  std::string weight_mode = "compression-tree";
  CLI::App* r = app.add_subcommand("run", "run one pipeline or baseline and print JSON");
  r->add_option("--data", ra.data, "stream file or gen directory")->required();
  r->add_option("--p", cfg.p);
  r->add_option("--epsilon", cfg.epsilon);
  r->add_option("--delta", cfg.delta);
  r->add_option("--mode", ra.mode)->check(CLI::IsMember({"guarantee", "budget"}));
  r->add_option("--budget", ra.budget, "label budget for --mode budget");
  r->add_option("--method", ra.method, "budget mode method")
      ->check(CLI::IsMember({"active-online", "uniform", "offline"}));
  r->add_option("--weight-mode", weight_mode)
      ->check(CLI::IsMember({"exact-oracle", "compression-tree", "leverage-fast", "exact", "tree", "fast"}));
  r->add_option("--boost", cfg.boost_runs);
  r->add_option("--s3-copies", cfg.s3_copies);
  r->add_flag("--intermediate", cfg.intermediate, "general p: solve after every sampled row");
  r->add_option("--seed", cfg.seed);
  r->add_option("--config", ra.config, "key=value file; flags given on the command line win");
  r->add_option("--dump-sketch", ra.dump_sketch, "write the final sketches as CSV");

  SweepSpec sw;
  std::string methods = "active-online,uniform";
  std::string budgets;
  std::string sweep_out;
  CLI::App* s = app.add_subcommand("sweep", "budget sweep, CSV report");
  s->add_option("--data", sw.data)->required();
  s->add_option("--p", sw.p);
  s->add_option("--methods", methods, "comma list of active-online, uniform, offline");
  s->add_option("--budgets", budgets, "comma list; default 8,10,12,14 percent of n");
  s->add_option("--trials", sw.trials);
  s->add_option("--seed", sw.seed);
  s->add_flag("--exact-weights", sw.exact_weights);
  s->add_option("--out", sweep_out, "CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << e.what() << "\n";
    return kUsage;
  }

  try {
    const std::optional<std::uint64_t> es = env_seed();
    if (*g) {
      if (inflate) gen.inflate_count = *inflate;
      if (es) gen.seed = *es;
      return cmd_gen(gen, gen_out, out);
    }
    if (*r) {
      if (!ra.config.empty()) {
        PipelineConfig file_cfg;
        apply_config_file(ra.config, file_cfg);
        // command-line values override the file
        auto given = [&](const char* name) { return r->count(name) > 0; };
        if (!given("--p")) cfg.p = file_cfg.p;
        if (!given("--epsilon")) cfg.epsilon = file_cfg.epsilon;
        if (!given("--delta")) cfg.delta = file_cfg.delta;
        if (!given("--boost")) cfg.boost_runs = file_cfg.boost_runs;
        if (!given("--s3-copies")) cfg.s3_copies = file_cfg.s3_copies;
        if (!given("--seed")) cfg.seed = file_cfg.seed;
        if (!given("--intermediate")) cfg.intermediate = file_cfg.intermediate;
        if (!given("--weight-mode")) weight_mode = to_string(file_cfg.weight_mode);
        cfg.n_declared = file_cfg.n_declared;
        cfg.beta = file_cfg.beta;
        cfg.beta1 = file_cfg.beta1;
        cfg.beta2 = file_cfg.beta2;
        cfg.beta3 = file_cfg.beta3;
        cfg.theta = file_cfg.theta;
        cfg.tree_eta = file_cfg.tree_eta;
        cfg.tree_refresh = file_cfg.tree_refresh;
        cfg.solver = file_cfg.solver;
      }
      cfg.weight_mode = parse_weight_mode(weight_mode);
      if (es) cfg.seed = *es;
      if (ra.mode == "budget" && !r->count("--budget")) {
        err << "--mode budget needs --budget\n";
        return kUsage;
      }
      return cmd_run(cfg, ra, out);
    }
    sw.methods = split(methods, ',');
    for (const std::string& b : split(budgets, ',')) sw.budgets.push_back(to_uint("--budgets", b));
    if (es) sw.seed = *es;
    const std::vector<SweepRow> rows = run_sweep(sw);
    if (sweep_out.empty()) {
      write_sweep_csv(out, rows);
    } else {
      std::ofstream f(sweep_out, std::ios::trunc);
      if (!f) fail(ErrorCode::Io, "cannot write " + sweep_out);
      write_sweep_csv(f, rows);
    }
    return kOk;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << e.what() << "\n";
    return kNumeric;
  }
}

}  // namespace olar::cli
