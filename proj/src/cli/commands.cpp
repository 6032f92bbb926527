#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "mir/checkpoint.hpp"
#include "mir/cli.hpp"
#include "mir/errors.hpp"
#include "mir/gradcheck.hpp"
#include "mir/metrics.hpp"
#include "mir/model.hpp"
#include "mir/properties.hpp"
#include "mir/synth.hpp"
#include "mir/train.hpp"

namespace mir {

namespace {

using nlohmann::json;

std::shared_ptr<spdlog::logger> make_logger() {
  auto logger = spdlog::stderr_color_mt("mir");
  logger->set_pattern("[%l] %v");
  const char* env = std::getenv("MIR_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") {
    logger->set_level(spdlog::level::err);
  } else if (level == "info") {
    logger->set_level(spdlog::level::info);
  } else if (level == "debug") {
    logger->set_level(spdlog::level::debug);
  } else {
    throw ValidationError("MIR_LOG must be error, info or debug, got '" + level + "'");
  }
  return logger;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw RuntimeFailure("failed writing '" + path + "'");
}

// Writes to `path`, or stdout when empty.
void emit(const std::string& path, const json& j) {
  if (path.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    write_text(path, j.dump(2) + "\n");
  }
}

std::string sidecar_path(const std::string& data_path) { return data_path + ".truth.json"; }

bool file_exists(const std::string& path) { return std::ifstream(path).good(); }

// Schema lookup order: explicit schema file, config "schema" field, generator sidecar of the data.
FeatureSchema resolve_schema(const std::string& schema_path, const json& config, const std::string& data_path) {
  try {
    if (!schema_path.empty()) {
      const json j = read_json_file(schema_path);
      return (j.contains("schema") ? j.at("schema") : j).get<FeatureSchema>();
    }
    if (config.contains("schema")) return config.at("schema").get<FeatureSchema>();
    if (!data_path.empty() && file_exists(sidecar_path(data_path))) {
      return read_json_file(sidecar_path(data_path)).at("schema").get<FeatureSchema>();
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("schema: ") + e.what());
  }
  throw ValidationError("no feature schema: add \"schema\" to the config or pass --schema");
}

Dataset load_data(const std::string& path, const FeatureSchema& schema) {
  if (!file_exists(path)) throw ValidationError("cannot open data file '" + path + "'");
  return load_jsonl(path, schema);
}

// Desk configuration used by gradcheck and permtest when no config is given.
ModelConfig desk_config() {
  ModelConfig c;
  c.schema = SynthConfig{}.schema();
  c.n_max = 6;
  c.m_max = 8;
  return c;
}

struct GenerateArgs {
  std::string config, out;
  std::optional<std::uint64_t> seed;
};

int cmd_generate(const GenerateArgs& a, spdlog::logger& log) {
  SynthConfig cfg;
  try {
    cfg = read_json_file(a.config).get<SynthConfig>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("generator config: ") + e.what());
  }
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();
  const SynthResult res = synth_generate(cfg);
  std::ostringstream body;
  write_jsonl(res.data, body);
  write_text(a.out, body.str());
  json truth = truth_to_json(res.truth);
  truth["generator"] = cfg;
  write_text(sidecar_path(a.out), truth.dump(2) + "\n");
  log.info("wrote {} lists to {} (truth: {})", res.data.size(), a.out, sidecar_path(a.out));
  return exit_ok;
}

struct TrainArgs {
  std::string data, config, out, schema, trace;
  std::vector<std::string> ablate;
  std::optional<std::size_t> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr;
  std::string mode;
};

int cmd_train(const TrainArgs& a, spdlog::logger& log) {
  const json raw = read_json_file(a.config);
  ModelConfig cfg;
  cfg.schema = resolve_schema(a.schema, raw, a.data);
  merge_json(raw, cfg);
  if (!a.schema.empty()) cfg.schema = resolve_schema(a.schema, json::object(), "");
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.seed) cfg.seed = *a.seed;
  if (a.lr) cfg.learning_rate = *a.lr;
  if (!a.mode.empty()) cfg.mode = parse_mode(a.mode);
  for (const std::string& code : a.ablate) cfg.apply_ablation(code);
  cfg.validate();

  const Dataset data = load_data(a.data, cfg.schema);
  log.debug("resolved config {}", json(cfg).dump());
  log.info("training on {} lists, {} epochs", data.size(), cfg.epochs);
  const TrainResult res = train(data, cfg, [&](const EpochRecord& r) {
    log.info("epoch {} mean loss {:.6f}", r.epoch, r.mean_loss);
  });
  save_checkpoint(res.params, cfg, a.out);
  const std::string trace_path = a.trace.empty() ? a.out + ".trace.json" : a.trace;
  write_text(trace_path, trace_to_json(res.trace, cfg).dump(2) + "\n");
  log.info("checkpoint {} trace {}", a.out, trace_path);
  return exit_ok;
}

struct EvaluateArgs {
  std::string data, ckpt, out, propensity = "log", truth;
  std::vector<std::size_t> ks = {5, 10};
  std::size_t category_field = 0;
  double p_min = 0.05, smoothing = 1.0;
};

int cmd_evaluate(const EvaluateArgs& a, spdlog::logger& log) {
  const Checkpoint ck = load_checkpoint(a.ckpt);
  const Dataset data = load_data(a.data, ck.config.schema);
  PropensityTable prop;
  if (a.propensity == "log") {
    prop = estimate_propensity(data, a.category_field, a.p_min, a.smoothing);
  } else {
    const std::string path = a.truth.empty() ? sidecar_path(a.data) : a.truth;
    const json truth = read_json_file(path);
    if (!truth.contains("propensity")) throw ValidationError(path + " has no \"propensity\" field");
    prop = PropensityTable::from_marginal(truth.at("propensity").get<std::vector<double>>(), a.p_min);
  }
  const EvalReport report = evaluate_model(data, ck.params, ck.config, prop, a.ks, a.category_field);
  log.info("evaluated {} lists ({} with clicks)", report.lists_evaluated, report.lists_with_clicks);
  emit(a.out, report_to_json(report));
  return exit_ok;
}

struct RerankArgs {
  std::string data, ckpt, out;
};

int cmd_rerank(const RerankArgs& a, spdlog::logger& log) {
  const Checkpoint ck = load_checkpoint(a.ckpt);
  const Dataset data = load_data(a.data, ck.config.schema);
  std::ostringstream body;
  for (const RankingInstance& inst : data) {
    const std::vector<double> s = score(inst, ck.params, ck.config);
    std::vector<std::int64_t> ids;
    for (const ItemRecord& c : inst.candidates) ids.push_back(c.item_id);
    json ordered_ids = json::array(), ordered_scores = json::array();
    for (std::size_t i : rank_by_scores(s, ids)) {
      ordered_ids.push_back(ids[i]);
      ordered_scores.push_back(s[i]);
    }
    body << json{{"user_id", inst.user_id}, {"item_ids", ordered_ids}, {"scores", ordered_scores}}.dump() << '\n';
  }
  if (a.out.empty()) {
    std::cout << body.str();
  } else {
    write_text(a.out, body.str());
  }
  log.info("reranked {} lists", data.size());
  return exit_ok;
}

struct GradcheckArgs {
  std::string config, out;
  std::uint64_t seed = 0;
  std::size_t n = 6, m = 8;
  double step = 1e-5, tol = 1e-4;
};

int cmd_gradcheck(const GradcheckArgs& a, spdlog::logger& log) {
  ModelConfig cfg = desk_config();
  cfg.n_max = a.n;
  cfg.m_max = a.m;
  if (!a.config.empty()) merge_json(read_json_file(a.config), cfg);
  cfg.seed = a.seed;
  cfg.validate();
  if (a.n == 0 || a.n > cfg.n_max || a.m > cfg.m_max) throw ValidationError("gradcheck: need 1 <= n <= n_max, m <= m_max");

  std::mt19937_64 rng(a.seed);
  // A full instance plus a padded one so that masking paths are differentiated too.
  std::vector<PaddedInstance> instances = {pad_for(random_instance(cfg.schema, a.n, a.m, rng, 1), cfg)};
  if (a.n > 1 && a.m > 1) instances.push_back(pad_for(random_instance(cfg.schema, a.n - 1, a.m - 1, rng, 2), cfg));
  const Objective objective = [&](ParameterBinding& b) {
    Var total = instance_loss(b, cfg, instances[0]);
    for (std::size_t i = 1; i < instances.size(); ++i) total = add(total, instance_loss(b, cfg, instances[i]));
    return total;
  };
  const auto start = std::chrono::steady_clock::now();
  const GradCheckReport rep = finite_diff_check(objective, init_parameters(cfg), a.step, a.tol);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  json params = json::array();
  for (const ParameterCheck& p : rep.parameters) {
    log.debug("{}: {} entries, relative error {:.3e}", p.name, p.entries_checked, p.relative_error);
    params.push_back({{"name", p.name},
                      {"entries", p.entries_checked},
                      {"relative_error", p.relative_error},
                      {"passed", p.passed}});
  }
  json out = {{"passed", rep.passed},        {"worst_relative_error", rep.worst_relative_error},
              {"tolerance", rep.tolerance},  {"step", rep.step},
              {"seconds", seconds},          {"parameters", params}};
  if (!rep.error.empty()) out["error"] = rep.error;
  emit(a.out, out);
  log.info("gradcheck worst relative error {:.3e} in {:.1f}s", rep.worst_relative_error, seconds);
  return rep.passed ? exit_ok : exit_check_failed;
}

struct PermtestArgs {
  std::string ckpt, config, mode, out;
  std::size_t instances = 50, trials = 20;
  std::uint64_t seed = 0;
  double tol = 1e-9;
  bool details = false;
};

int cmd_permtest(const PermtestArgs& a, spdlog::logger& log) {
  ModelConfig cfg;
  ModelParameters params;
  if (!a.ckpt.empty()) {
    Checkpoint ck = load_checkpoint(a.ckpt);
    if (!a.mode.empty() && parse_mode(a.mode) != ck.config.mode) {
      throw ValidationError("checkpoint was trained in " + to_string(ck.config.mode) + " mode, --mode asks for " +
                            a.mode);
    }
    cfg = ck.config;
    params = std::move(ck.params);
  } else {
    cfg = desk_config();
    cfg.n_max = 10;
    cfg.m_max = 15;
    if (!a.config.empty()) merge_json(read_json_file(a.config), cfg);
    if (!a.mode.empty()) cfg.mode = parse_mode(a.mode);
    cfg.seed = a.seed;
    cfg.validate();
    params = init_parameters(cfg);
  }
  log.debug("permtest config {}", json(cfg).dump());
  std::mt19937_64 rng(a.seed);
  Dataset instances;
  for (std::size_t i = 0; i < a.instances; ++i) {
    const std::size_t n = cfg.mode == AttentionMode::literal
                              ? cfg.n_max
                              : std::uniform_int_distribution<std::size_t>(1, cfg.n_max)(rng);
    const std::size_t m = std::uniform_int_distribution<std::size_t>(0, cfg.m_max)(rng);
    instances.push_back(random_instance(cfg.schema, n, m, rng, static_cast<std::int64_t>(i + 1)));
  }
  const InvarianceReport rep = check_invariance(params, cfg, instances, a.trials, a.seed + 1, a.tol);
  emit(a.out, invariance_to_json(rep, a.details));
  log.info("{} mode: max deviation {:.3e} over {} trials", rep.mode, rep.max_deviation, rep.trials.size());
  if (cfg.mode == AttentionMode::literal) return exit_ok;
  return rep.passed ? exit_ok : exit_check_failed;
}

struct InspectArgs {
  std::string ckpt, data, out;
  std::size_t index = 0, category_field = 0;
};

int cmd_inspect(const InspectArgs& a, spdlog::logger&) {
  const Checkpoint ck = load_checkpoint(a.ckpt);
  const Dataset data = load_data(a.data, ck.config.schema);
  if (a.index >= data.size()) {
    throw ValidationError("--index " + std::to_string(a.index) + " out of range (" + std::to_string(data.size()) +
                          " lists)");
  }
  json out = inspect_json(data[a.index], ck.params, ck.config, a.category_field);
  out["index"] = a.index;
  emit(a.out, out);
  return exit_ok;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Multi-level interaction reranking: data generation, training, evaluation and checks"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic click log and its ground-truth sidecar");
  g->add_option("--config", gen.config, "Generator config JSON")->required();
  g->add_option("--out", gen.out, "Output JSONL; the sidecar goes to <out>.truth.json")->required();
  g->add_option("--seed", gen.seed, "Overrides the config seed");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model and write a checkpoint plus a loss trace");
  t->add_option("--data", tr.data, "Training JSONL")->required();
  t->add_option("--config", tr.config, "Model config JSON")->required();
  t->add_option("--out", tr.out, "Checkpoint path")->required();
  t->add_option("--ablate", tr.ablate, "Disable a component: fi, ii, dcy, set or lst (repeatable)")
      ->check(CLI::IsMember({"fi", "ii", "dcy", "set", "lst"}));
  t->add_option("--schema", tr.schema, "JSON file with the feature schema (or a generator sidecar)");
  t->add_option("--trace", tr.trace, "Trace JSON path (default <out>.trace.json)");
  t->add_option("--epochs", tr.epochs, "Overrides config epochs");
  t->add_option("--seed", tr.seed, "Overrides config seed");
  t->add_option("--lr", tr.lr, "Overrides config learning_rate");
  t->add_option("--mode", tr.mode, "Attention mode")->check(CLI::IsMember({"literal", "equivariant"}));

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Rerank a log with a checkpoint and report MAP, NDCG, deNDCG, Utility");
  e->add_option("--data", ev.data, "Evaluation JSONL")->required();
  e->add_option("--ckpt", ev.ckpt, "Checkpoint")->required();
  e->add_option("--k", ev.ks, "Cutoffs, comma separated")->delimiter(',')->capture_default_str();
  e->add_option("--out", ev.out, "Report path (default stdout)");
  e->add_option("--propensity", ev.propensity, "log: estimate from the data; truth: generator sidecar")
      ->check(CLI::IsMember({"log", "truth"}))
      ->capture_default_str();
  e->add_option("--truth", ev.truth, "Sidecar path for --propensity truth (default <data>.truth.json)");
  e->add_option("--category-field", ev.category_field, "Item field used as the propensity category")
      ->capture_default_str();
  e->add_option("--p-min", ev.p_min, "Propensity clip floor")->capture_default_str();
  e->add_option("--smoothing", ev.smoothing, "Additive click smoothing")->capture_default_str();

  RerankArgs rr;
  auto* r = app.add_subcommand("rerank", "Write reranked item ids and scores as JSONL");
  r->add_option("--data", rr.data, "Input JSONL")->required();
  r->add_option("--ckpt", rr.ckpt, "Checkpoint")->required();
  r->add_option("--out", rr.out, "Output JSONL (default stdout)");

  GradcheckArgs gc;
  auto* gcmd = app.add_subcommand("gradcheck", "Compare analytic gradients with central differences");
  gcmd->add_option("--config", gc.config, "Model config JSON (default desk config)");
  gcmd->add_option("--seed", gc.seed, "Seed for parameters and the random instances")->capture_default_str();
  gcmd->add_option("--n", gc.n, "Candidates per instance")->capture_default_str();
  gcmd->add_option("--m", gc.m, "History length")->capture_default_str();
  gcmd->add_option("--step", gc.step, "Finite-difference step")->capture_default_str();
  gcmd->add_option("--tol", gc.tol, "Relative error tolerance")->capture_default_str();
  gcmd->add_option("--out", gc.out, "Report path (default stdout)");

  PermtestArgs pt;
  auto* p = app.add_subcommand("permtest", "Check that shuffling candidates leaves the reranked list unchanged");
  p->add_option("--ckpt", pt.ckpt, "Checkpoint (default: random parameters)");
  p->add_option("--config", pt.config, "Model config JSON when no checkpoint is given");
  p->add_option("--mode", pt.mode, "Attention mode")->check(CLI::IsMember({"literal", "equivariant"}));
  p->add_option("--instances", pt.instances, "Random instances")->capture_default_str();
  p->add_option("--trials", pt.trials, "Permutations per instance")->capture_default_str();
  p->add_option("--seed", pt.seed, "Seed")->capture_default_str();
  p->add_option("--tol", pt.tol, "Score tolerance")->capture_default_str();
  p->add_flag("--details", pt.details, "Include every trial in the report");
  p->add_option("--out", pt.out, "Report path (default stdout)");

  InspectArgs in;
  auto* i = app.add_subcommand("inspect", "Dump affinity, decay and attention matrices of one list");
  i->add_option("--ckpt", in.ckpt, "Checkpoint")->required();
  i->add_option("--data", in.data, "Input JSONL")->required();
  i->add_option("--index", in.index, "Zero-based list index")->capture_default_str();
  i->add_option("--category-field", in.category_field, "Item field shown as the category")->capture_default_str();
  i->add_option("--out", in.out, "Output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? exit_ok : exit_validation;
  }

  std::shared_ptr<spdlog::logger> log;
  try {
    log = spdlog::get("mir");
    if (!log) log = make_logger();
    if (*g) return cmd_generate(gen, *log);
    if (*t) return cmd_train(tr, *log);
    if (*e) return cmd_evaluate(ev, *log);
    if (*r) return cmd_rerank(rr, *log);
    if (*gcmd) return cmd_gradcheck(gc, *log);
    if (*p) return cmd_permtest(pt, *log);
    if (*i) return cmd_inspect(in, *log);
  } catch (const ValidationError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return exit_validation;
  } catch (const ShapeError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return exit_validation;
  } catch (const RuntimeFailure& err) {
    std::cerr << "error: " << err.what() << '\n';
    return exit_runtime;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return exit_runtime;
  }
  return exit_validation;
}

}  // namespace mir
