// cycleik command-line tool: dataset generation, training, solving,
// evaluation and benchmarking.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cycleik/cycleik.hpp"
#include "cycleik/version.hpp"

namespace {

using namespace cycleik;
using json = nlohmann::json;
namespace fs = std::filesystem;

/// Flat JSON object as a CLI11 config file: {"epochs": 5, "lr": 0.001}.
/// Keys apply to the selected subcommand. Values given on the command line
/// take precedence.
class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(const CLI::App* root) : root_(root) {}

  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    json j = json::object();
    for (const CLI::Option* opt : app->get_options({})) {
      if (!opt->get_configurable() || opt->get_lnames().empty()) continue;
      if (opt->count() > 0)
        j[opt->get_lnames().front()] = opt->results().size() == 1 ? json(opt->results().front()) : json(opt->results());
      else if (default_also && !opt->get_default_str().empty())
        j[opt->get_lnames().front()] = opt->get_default_str();
    }
    return j.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : j.items()) {
      CLI::ConfigItem item;
      item.name = key;
      for (const CLI::App* sub : root_->get_subcommands()) item.parents.push_back(sub->get_name());
      auto push = [&](const json& v) {
        if (v.is_string())
          item.inputs.push_back(v.get<std::string>());
        else if (v.is_boolean())
          item.inputs.push_back(v.get<bool>() ? "true" : "false");
        else
          item.inputs.push_back(v.dump());
      };
      if (value.is_array())
        for (const auto& v : value) push(v);
      else
        push(value);
      items.push_back(std::move(item));
    }
    return items;
  }

 private:
  const CLI::App* root_;
};

std::vector<double> parse_numbers(const std::string& text, std::size_t expected, const std::string& what) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw Error(what + ": '" + tok + "' is not a number");
    }
  }
  if (v.size() != expected)
    throw Error(what + " needs " + std::to_string(expected) + " comma-separated numbers, got " +
                std::to_string(v.size()));
  return v;
}

/// Parses px,py,pz,qx,qy,qz,qw. Quaternions within 1e-6 of unit norm are
/// renormalized; anything further off is rejected.
Pose parse_pose(const std::string& text) {
  const auto v = parse_numbers(text, 7, "--pose");
  const Quaternion q{v[3], v[4], v[5], v[6]};
  const double dev = std::abs(q.norm() - 1.0);
  if (!(dev <= 1e-6))
    throw Error("--pose quaternion norm " + std::to_string(q.norm()) + " is not within 1e-6 of 1");
  if (dev > 1e-12) std::cerr << "cycleik: warning: pose quaternion renormalized (norm deviation " << dev << ")\n";
  return {{v[0], v[1], v[2]}, q.normalized()};
}

WorkspaceBounds parse_bounds(const std::string& text, const KinematicChain& chain) {
  if (text == "small") return WorkspaceBounds::small_workspace();
  if (text == "full") return WorkspaceBounds::full_workspace();
  if (text == "auto") return reach_bounds(chain);
  const auto v = parse_numbers(text, 6, "--bounds");
  WorkspaceBounds b{{v[0], v[1], v[2]}, {v[3], v[4], v[5]}};
  b.validate();
  return b;
}

json bounds_json(const WorkspaceBounds& b) {
  return {{"min", {b.min.x(), b.min.y(), b.min.z()}}, {"max", {b.max.x(), b.max.y(), b.max.z()}}};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

/// Run record written next to every artifact. The config digest covers the
/// effective settings, so reruns can be checked against it.
void write_manifest(const fs::path& path, const std::string& command, const json& config,
                    const std::string& chain_digest, const json& seeds,
                    std::chrono::steady_clock::time_point started) {
  const json m = {{"command", command},
                  {"config", config},
                  {"config_digest", hex64(fnv1a64(config.dump()))},
                  {"chain_hash", chain_digest},
                  {"rng_seeds", seeds},
                  {"tool_version", kVersion},
                  {"wall_time_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count()}};
  write_text(path, m.dump(2) + "\n");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create directory '" + dir.string() + "': " + ec.message());
}

GoalSet goal_set(const KinematicChain& chain, double pos_w, double rot_w, double zero_w) {
  GoalSet g = GoalSet::cartesian_only(pos_w, rot_w);
  if (chain.dof() > 6 && zero_w > 0.0) {
    JointGoal z;
    z.weight = zero_w;
    for (int i = 6; i < chain.dof(); ++i) z.joint_indices.push_back(i);
    g.joint.push_back(z);
  }
  g.validate(chain.dof());
  return g;
}

struct GoalOptions {
  double position = 1.0;
  double rotation = 0.5;
  double zero = 0.05;

  void add(CLI::App* app) {
    app->add_option("--position-weight", position, "Weight of the position MAE goal")->capture_default_str();
    app->add_option("--rotation-weight", rotation, "Weight of the rotation MAE goal (0 disables)")
        ->capture_default_str();
    app->add_option("--zero-weight", zero, "Zero-controller weight on joints 6.. of chains with more than 6 joints")
        ->capture_default_str();
  }
  json to_json() const { return {{"position_weight", position}, {"rotation_weight", rotation}, {"zero_weight", zero}}; }
};

struct GaOptions {
  int population = 256;
  int generations = 100;
  std::optional<double> timeout_ms;
  double seed_fraction = 0.5;

  void add(CLI::App* app) {
    app->add_option("--population", population, "GA population size")->capture_default_str();
    app->add_option("--generations", generations, "GA generation budget")->capture_default_str();
    app->add_option("--timeout-ms", timeout_ms, "GA wall-clock budget per solve (checked each generation)");
    app->add_option("--seed-fraction", seed_fraction, "Share of the GA population seeded by the network")
        ->capture_default_str();
  }
  GaConfig config(std::uint64_t seed) const {
    GaConfig c;
    c.population = population;
    c.generations = generations;
    c.timeout_ms = timeout_ms;
    c.seed_fraction = seed_fraction;
    c.rng_seed = seed;
    c.validate();
    return c;
  }
  json to_json() const {
    return {{"population", population},
            {"generations", generations},
            {"seed_fraction", seed_fraction},
            {"timeout_ms", timeout_ms ? json(*timeout_ms) : json(nullptr)}};
  }
};

// ---------------------------------------------------------------- gen-data

struct GenDataOptions {
  std::string chain, out, bounds = "auto";
  std::int64_t count = 55500;
  std::uint64_t seed = 0;
  int workers = 1;
  double test_frac = 0.10, val_frac = 0.01;
};

void run_gen_data(const GenDataOptions& o) {
  const auto started = std::chrono::steady_clock::now();
  const KinematicChain chain = load_chain(o.chain);
  const WorkspaceBounds bounds = parse_bounds(o.bounds, chain);
  const auto records = generate(chain, bounds, o.count, o.seed, {}, o.workers);
  const auto parts = split(records, o.test_frac, o.val_frac, o.seed);
  const fs::path dir(o.out);
  ensure_dir(dir);
  write_dataset(parts.train, make_meta(chain, bounds, parts.train, o.seed), (dir / "train.csv").string());
  write_dataset(parts.test, make_meta(chain, bounds, parts.test, o.seed), (dir / "test.csv").string());
  write_dataset(parts.val, make_meta(chain, bounds, parts.val, o.seed), (dir / "val.csv").string());
  const json cfg = {{"chain", o.chain},         {"bounds", bounds_json(bounds)}, {"count", o.count},
                    {"test_frac", o.test_frac}, {"val_frac", o.val_frac},        {"workers", o.workers}};
  write_manifest(dir / "run_manifest.json", "gen-data", cfg, chain_hash(chain), {{"dataset", o.seed}}, started);
  std::cout << "wrote " << parts.train.size() << " train / " << parts.test.size() << " test / " << parts.val.size()
            << " val records to " << dir.string() << "\n";
}

// ------------------------------------------------------------------- train

struct TrainOptions {
  std::string chain, train, val, out, preset = "desk", workspace = "small";
  double width = 0.1;
  std::optional<int> epochs, batch, restarts;
  std::optional<double> lr, grad_clip, variance_weight;
  std::uint64_t seed = 0;
  int workers = 1;
  GoalOptions goals;
};

void run_train(ModelKind kind, const TrainOptions& o) {
  const auto started = std::chrono::steady_clock::now();
  const KinematicChain chain = load_chain(o.chain);
  const Dataset train = read_dataset(o.train, &chain);
  const Dataset val = read_dataset(o.val, &chain);
  const Workspace ws = workspace_from_string(o.workspace);

  TrainConfig cfg;
  if (o.preset == "desk")
    cfg = desk_train_config(kind, ws);
  else if (o.preset == "full-scale")
    cfg = full_scale_train_config(kind, ws);
  else
    throw Error("unknown preset '" + o.preset + "' (expected desk or full-scale)");
  if (o.epochs) cfg.epochs = *o.epochs;
  if (o.batch) cfg.batch_size = *o.batch;
  if (o.restarts) cfg.restarts = *o.restarts;
  if (o.lr) cfg.lr0 = *o.lr;
  if (o.grad_clip) cfg.grad_clip = *o.grad_clip;
  if (o.variance_weight) cfg.variance_weight = *o.variance_weight;
  cfg.rng_seed = o.seed;
  cfg.validate();
  const GoalSet goals = goal_set(chain, o.goals.position, o.goals.rotation, o.goals.zero);

  IkModel model;
  model.kind = kind;
  model.seed = o.seed;
  model.normalizer = Normalizer::from(chain, train.meta.bounds);
  if (kind == ModelKind::Mlp) {
    model.net = mlp_preset(ws, chain.dof(), o.width, o.seed);
  } else {
    auto [net, noise_dim] = gan_preset(ws, chain.dof(), o.width, o.seed);
    model.net = std::move(net);
    model.noise_dim = noise_dim;
  }
  cfg.noise_dim = model.noise_dim;

  const fs::path out(o.out);
  if (out.has_parent_path()) ensure_dir(out.parent_path());
  const json run_cfg = {{"chain", o.chain},
                        {"train", o.train},
                        {"val", o.val},
                        {"preset", o.preset},
                        {"workspace", o.workspace},
                        {"width_factor", o.width},
                        {"layer_sizes", model.net.layer_sizes()},
                        {"train_config", train_config_to_json(cfg)},
                        {"goals", goals_to_json(goals)},
                        {"workers", o.workers}};
  auto emit = [&](const TrainReport& r) {
    write_text(out.string() + ".report.json", report_to_json(r, false).dump(2) + "\n");
    write_text(out.string() + ".metrics.csv", report_metrics_csv(r));
    write_manifest(out.string() + ".manifest.json", kind == ModelKind::Mlp ? "train-mlp" : "train-gan", run_cfg,
                   chain_hash(chain), {{"init", o.seed}, {"train", o.seed}}, started);
  };
  TrainReport report;
  try {
    report = kind == ModelKind::Mlp ? train_mlp(chain, train.records, val.records, model, cfg, goals)
                                    : train_gan(chain, train.records, val.records, model, cfg, goals);
  } catch (const TrainingFailed& e) {
    emit(e.report());
    throw;
  }
  save_model(model, out.string());
  emit(report);
  std::cout << "best epoch " << report.best_epoch << ", validation position error " << report.best_val_pos_mm
            << " mm; model written to " << out.string() << "\n";
}

// ------------------------------------------------------------------- solve

struct SolveOptions {
  std::string chain, model, pose, pipeline = "neural", out, format = "json";
  int samples = 500;
  int refine_iters = 50;
  std::uint64_t seed = 0;
  GaOptions ga;
  GoalOptions goals;
};

void run_solve(const SolveOptions& o) {
  const KinematicChain chain = load_chain(o.chain);
  const IkModel model = load_model(o.model);
  const Pose target = parse_pose(o.pose);
  const Pipeline pipeline = pipeline_from_string(o.pipeline);
  HybridConfig hc;
  hc.ga = o.ga.config(o.seed);
  hc.samples = o.samples;
  hc.refine_iters = o.refine_iters;
  hc.noise_seed = o.seed;
  const GoalSet goals = goal_set(chain, o.goals.position, o.goals.rotation, o.goals.zero);

  const auto t0 = std::chrono::steady_clock::now();
  SolutionBatch sols = hybrid_solve(chain, target, goals, model, pipeline, hc);
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  sols.sort_by_cost();

  std::ostringstream text;
  if (o.format == "csv") {
    for (int i = 0; i < chain.dof(); ++i) text << 'j' << i << ',';
    text << "pos_err_mm,rot_err_deg,cost\n";
    char buf[32];
    for (std::size_t s = 0; s < sols.size(); ++s) {
      for (int i = 0; i < chain.dof(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g,", sols.configs[s][i]);
        text << buf;
      }
      std::snprintf(buf, sizeof(buf), "%.17g,", sols.pos_err_mm[s]);
      text << buf;
      std::snprintf(buf, sizeof(buf), "%.17g,", sols.rot_err_deg[s]);
      text << buf;
      std::snprintf(buf, sizeof(buf), "%.17g\n", sols.cost[s]);
      text << buf;
    }
  } else if (o.format == "json") {
    json doc = {{"target", std::vector<double>(target.vector().data(), target.vector().data() + 7)},
                {"pipeline", to_string(pipeline)},
                {"model_kind", to_string(model.kind)},
                {"goals", goals_to_json(goals)},
                {"solve_time_ms", ms},
                {"solutions", json::array()}};
    for (std::size_t s = 0; s < sols.size(); ++s)
      doc["solutions"].push_back(
          {{"config", std::vector<double>(sols.configs[s].data(), sols.configs[s].data() + sols.configs[s].size())},
           {"pos_err_mm", sols.pos_err_mm[s]},
           {"rot_err_deg", sols.rot_err_deg[s]},
           {"cost", sols.cost[s]}});
    text << doc.dump(2) << '\n';
  } else {
    throw Error("unknown format '" + o.format + "' (expected json or csv)");
  }
  if (o.out.empty())
    std::cout << text.str();
  else
    write_text(o.out, text.str());
}

// -------------------------------------------------------------------- eval

struct EvalOptions {
  std::string chain, model, test, pipeline = "neural", out;
  int samples = 500;
  int refine_iters = 50;
  std::optional<std::size_t> limit;
  std::uint64_t seed = 0;
  bool success_on_best = false;
  bool time = false;
  double pos_mm = 10.0, rot_deg = 20.0;
  GaOptions ga;
  GoalOptions goals;
};

void run_eval(const EvalOptions& o) {
  const auto started = std::chrono::steady_clock::now();
  const KinematicChain chain = load_chain(o.chain);
  Dataset test = read_dataset(o.test, &chain);
  if (o.limit && *o.limit < test.records.size()) test.records.resize(*o.limit);
  std::vector<Pose> poses;
  for (const auto& r : test.records) poses.push_back(r.pose);
  const GoalSet goals = goal_set(chain, o.goals.position, o.goals.rotation, o.goals.zero);
  const SuccessThresholds thr{o.pos_mm, o.rot_deg};

  EvalReport report;
  json seeds = {{"noise", o.seed}};
  if (o.pipeline == "dataset-oracle") {
    // Returns the stored configuration of each test record; checks plumbing.
    std::size_t next = 0;
    auto solver = [&](const Pose& p) {
      return evaluate_solutions(chain, p, goals, {test.records.at(next++).config});
    };
    report = evaluate_single(chain, solver, poses, thr, o.time);
  } else {
    if (o.model.empty()) throw Error("--model is required for pipeline '" + o.pipeline + "'");
    const IkModel model = load_model(o.model);
    const Pipeline pipeline = pipeline_from_string(o.pipeline);
    if (model.dof() != chain.dof()) throw Error("model dof does not match chain dof");
    if (pipeline == Pipeline::NeuralOnly && model.kind == ModelKind::Gan) {
      report = evaluate_multi(chain, model, poses, o.samples, o.seed, thr, o.success_on_best, o.time);
    } else {
      HybridConfig hc;
      hc.ga = o.ga.config(o.seed);
      hc.samples = o.samples;
      hc.refine_iters = o.refine_iters;
      hc.noise_seed = o.seed;
      seeds["ga"] = o.seed;
      auto solver = [&](const Pose& p) { return hybrid_solve(chain, p, goals, model, pipeline, hc); };
      report = evaluate_single(chain, solver, poses, thr, o.time);
    }
  }

  const fs::path dir(o.out);
  ensure_dir(dir);
  json summary = report_summary(report);
  summary["pipeline"] = o.pipeline;
  summary["thresholds"] = {{"position_mm", thr.pos_mm}, {"orientation_deg", thr.rot_deg}};
  write_text(dir / "rows.csv", report_rows_csv(report));
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  const json cfg = {{"chain", o.chain},
                    {"model", o.model},
                    {"test", o.test},
                    {"pipeline", o.pipeline},
                    {"samples", o.samples},
                    {"limit", o.limit ? json(*o.limit) : json(nullptr)},
                    {"success_on_best", o.success_on_best},
                    {"ga", o.ga.to_json()},
                    {"goals", goals_to_json(goals)}};
  write_manifest(dir / "run_manifest.json", "eval", cfg, chain_hash(chain), seeds, started);
  std::cout << summary.dump(2) << "\n";
}

// ------------------------------------------------------------------- bench

struct BenchOptions {
  std::string chain, model, test, pipeline = "neural", out;
  std::size_t poses = 100;
  int repetitions = 5;
  int samples = 500;
  std::uint64_t seed = 0;
  GaOptions ga;
};

void run_bench(const BenchOptions& o) {
  const auto started = std::chrono::steady_clock::now();
  const KinematicChain chain = load_chain(o.chain);
  const IkModel model = load_model(o.model);
  Dataset test = read_dataset(o.test, &chain);
  if (o.poses < test.records.size()) test.records.resize(o.poses);
  std::vector<Pose> poses;
  for (const auto& r : test.records) poses.push_back(r.pose);
  const Pipeline pipeline = pipeline_from_string(o.pipeline);
  HybridConfig hc;
  hc.ga = o.ga.config(o.seed);
  hc.samples = o.samples;
  hc.noise_seed = o.seed;
  const GoalSet goals = GoalSet::defaults(chain);

  std::function<void(const Pose&)> fn;
  if (pipeline == Pipeline::NeuralOnly)
    fn = [&](const Pose& p) { (void)neural_solutions(model, p, hc.samples, hc.noise_seed); };
  else
    fn = [&](const Pose& p) { (void)hybrid_solve(chain, p, goals, model, pipeline, hc); };
  const TimingStats t = bench_runtime(fn, poses, o.repetitions);
  const json doc = {{"pipeline", to_string(pipeline)},
                    {"model_kind", to_string(model.kind)},
                    {"samples_per_pose", model.kind == ModelKind::Gan ? o.samples : 1},
                    {"timed_solves", t.samples},
                    {"median_ms", t.median_ms},
                    {"p95_ms", t.p95_ms},
                    {"mean_ms", t.mean_ms}};
  if (!o.out.empty()) {
    const fs::path out(o.out);
    if (out.has_parent_path()) ensure_dir(out.parent_path());
    write_text(out, doc.dump(2) + "\n");
    const json cfg = {{"chain", o.chain},   {"model", o.model},      {"test", o.test},
                      {"pipeline", o.pipeline}, {"poses", poses.size()}, {"repetitions", o.repetitions},
                      {"samples", o.samples}, {"ga", o.ga.to_json()}, {"workers", 1}};
    write_manifest(out.string() + ".manifest.json", "bench", cfg, chain_hash(chain), {{"noise", o.seed}}, started);
  }
  std::cout << doc.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CycleIK neuro-genetic inverse kinematics"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  // The config option lives on the root (CLI11 only reads it there); fallthrough
  // lets it follow the subcommand name.
  app.config_formatter(std::make_shared<JsonConfig>(&app));
  app.set_config("--config", "", "JSON object of option values for the subcommand; flags take precedence");
  auto with_config = [](CLI::App* sub) { sub->fallthrough(); };

  GenDataOptions gen;
  auto* g = app.add_subcommand("gen-data", "Sample a dataset and write train/test/val splits");
  with_config(g);
  g->add_option("--chain", gen.chain, "Chain definition file")->required();
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--count", gen.count, "Total records before splitting");
  g->add_option("--bounds", gen.bounds, "small, full, auto (reachable box) or xmin,ymin,zmin,xmax,ymax,zmax");
  g->add_option("--seed", gen.seed, "RNG seed");
  g->add_option("--workers", gen.workers, "Sampling threads (output does not depend on it)");
  g->add_option("--test-frac", gen.test_frac, "Test split fraction");
  g->add_option("--val-frac", gen.val_frac, "Validation split fraction");

  TrainOptions train;
  auto add_train = [&](const char* name, const char* help) {
    auto* t = app.add_subcommand(name, help);
    with_config(t);
    t->add_option("--chain", train.chain, "Chain definition file")->required();
    t->add_option("--train", train.train, "Training split (CSV with .meta.json sidecar)")->required();
    t->add_option("--val", train.val, "Validation split")->required();
    t->add_option("--out", train.out, "Model file to write")->required();
    t->add_option("--preset", train.preset, "desk or full-scale training settings");
    t->add_option("--workspace", train.workspace, "Layout preset: small or full");
    t->add_option("--width", train.width, "Layer width factor (1 = full-scale layout)");
    t->add_option("--epochs", train.epochs, "Epochs");
    t->add_option("--batch", train.batch, "Batch size");
    t->add_option("--lr", train.lr, "Initial learning rate (decays linearly)");
    t->add_option("--grad-clip", train.grad_clip, "Gradient-norm clip");
    t->add_option("--restarts", train.restarts, "Restarts after divergence");
    t->add_option("--seed", train.seed, "Initialization and shuffling seed");
    t->add_option("--workers", train.workers, "Accepted for symmetry; training runs on one thread");
    train.goals.add(t);
    return t;
  };
  auto* tm = add_train("train-mlp", "Train the single-solution network");
  auto* tg = add_train("train-gan", "Train the noise-conditioned multi-solution network");
  tg->add_option("--variance-weight", train.variance_weight, "Weight of the nullspace variance loss");

  SolveOptions solve;
  auto* s = app.add_subcommand("solve", "Solve one target pose");
  with_config(s);
  s->add_option("--chain", solve.chain, "Chain definition file")->required();
  s->add_option("--model", solve.model, "Model file")->required();
  s->add_option("--pose", solve.pose, "Target px,py,pz,qx,qy,qz,qw")->required();
  s->add_option("--pipeline", solve.pipeline, "neural, neural-ga or neural-ga-refine");
  s->add_option("--samples", solve.samples, "Generator draws per pose");
  s->add_option("--refine-iters", solve.refine_iters, "Least-squares refinement iterations");
  s->add_option("--seed", solve.seed, "Noise and GA seed");
  s->add_option("--format", solve.format, "json or csv");
  s->add_option("--out", solve.out, "Output file (default stdout)");
  solve.ga.timeout_ms = 50.0;
  solve.ga.add(s);
  solve.goals.add(s);

  EvalOptions ev;
  auto* e = app.add_subcommand("eval", "Evaluate a model or pipeline on a test split");
  with_config(e);
  e->add_option("--chain", ev.chain, "Chain definition file")->required();
  e->add_option("--test", ev.test, "Test split")->required();
  e->add_option("--model", ev.model, "Model file");
  e->add_option("--pipeline", ev.pipeline, "neural, neural-ga, neural-ga-refine or dataset-oracle");
  e->add_option("--out", ev.out, "Output directory")->required();
  e->add_option("--samples", ev.samples, "Generator draws per pose");
  e->add_option("--refine-iters", ev.refine_iters, "Least-squares refinement iterations");
  e->add_option("--limit", ev.limit, "Evaluate only the first N poses");
  e->add_option("--seed", ev.seed, "Noise and GA seed");
  e->add_flag("--success-on-best", ev.success_on_best, "Judge generator success on the best draw, not the mean");
  e->add_flag("--time", ev.time, "Record mean solve time (makes the summary run-dependent)");
  e->add_option("--success-pos-mm", ev.pos_mm, "Position success threshold");
  e->add_option("--success-rot-deg", ev.rot_deg, "Orientation success threshold");
  ev.ga.add(e);
  ev.goals.add(e);

  BenchOptions bench;
  auto* b = app.add_subcommand("bench", "Time solves on test poses");
  with_config(b);
  b->add_option("--chain", bench.chain, "Chain definition file")->required();
  b->add_option("--model", bench.model, "Model file")->required();
  b->add_option("--test", bench.test, "Test split supplying the poses")->required();
  b->add_option("--pipeline", bench.pipeline, "neural, neural-ga or neural-ga-refine");
  b->add_option("--poses", bench.poses, "Number of poses");
  b->add_option("--repetitions", bench.repetitions, "Timed passes over the poses (>= 3)");
  b->add_option("--samples", bench.samples, "Generator draws per pose");
  b->add_option("--seed", bench.seed, "Noise and GA seed");
  b->add_option("--out", bench.out, "Write the timing summary here");
  bench.ga.add(b);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  }

  try {
    if (*g) run_gen_data(gen);
    if (*tm) run_train(ModelKind::Mlp, train);
    if (*tg) run_train(ModelKind::Gan, train);
    if (*s) run_solve(solve);
    if (*e) run_eval(ev);
    if (*b) run_bench(bench);
  } catch (const std::exception& ex) {
    std::string msg = ex.what();
    for (char& c : msg)
      if (c == '\n') c = ' ';
    std::cerr << "cycleik: error: " << msg << "\n";
    return 1;
  }
  return 0;
}
