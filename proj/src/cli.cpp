#include "evoagent/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"

#include "evoagent/error.hpp"
#include "evoagent/evolution.hpp"
#include "evoagent/executor.hpp"
#include "evoagent/harness.hpp"
#include "evoagent/remote_reasoner.hpp"
#include "evoagent/scripted_reasoner.hpp"
#include "evoagent/sim_env.hpp"
#include "evoagent/trajectory.hpp"

namespace evoagent {

namespace fs = std::filesystem;
using nlohmann::json;

std::unique_ptr<ReasonerBackend> make_backend(const std::string& spec,
                                              const std::optional<fs::path>& transcript) {
  if (spec.starts_with("scripted:")) {
    return std::make_unique<ScriptedBackend>(ScriptedBackend::from_file(spec.substr(9)));
  }
  if (spec.starts_with("replay:")) return std::make_unique<ReplayBackend>(spec.substr(7));
  if (spec == "remote") {
    auto cfg = remote_config_from_env();
    cfg.transcript = transcript;
    return std::make_unique<RemoteBackend>(std::move(cfg));
  }
  throw Error(Errc::invalid_argument,
              "reasoner must be scripted:FIXTURE, remote, or replay:TRANSCRIPT (got \"" + spec + "\")");
}

fs::path graph_file(const fs::path& store_dir) { return store_dir / "graph.graph.jsonl"; }

GraphStore open_store(const fs::path& store_dir, std::shared_ptr<Clock> clock) {
  if (fs::exists(graph_file(store_dir))) return GraphStore::load(graph_file(store_dir), std::move(clock));
  return GraphStore(std::move(clock));
}

std::int64_t latest_timestamp(const GraphStore& store) {
  std::int64_t latest = 0;
  for (const auto& [id, p] : store.pages()) latest = std::max({latest, p.created_at, p.updated_at});
  return latest;
}

namespace {

void write_json(const fs::path& file, const json& doc) {
  fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write " + file.string());
  out << doc.dump(2) << "\n";
}

std::string next_trajectory_id(const fs::path& dir) {
  std::size_t n = 1;
  if (fs::is_directory(dir)) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.path().filename().string().ends_with(".traj.jsonl")) ++n;
    }
  }
  for (;; ++n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "run-%04zu", n);
    if (!fs::exists(trajectory_path(dir, buf))) return buf;
  }
}

std::string calls_line(const TaskReport& r) {
  std::ostringstream out;
  bool first = true;
  for (auto kind : kRequestKinds) {
    if (!r.calls(kind)) continue;
    out << (first ? "" : ", ") << to_string(kind) << " " << r.calls(kind);
    first = false;
  }
  return first ? "no reasoner calls" : out.str();
}

struct Options {
  std::string app, task, store, space = "basic", reasoner, transcript, faults, id, trajectory;
  std::string suite, out, a, b, file, action;
  std::size_t max_steps = 25, min_len = 2, min_support = 0, max_new = 1;
  std::int64_t repeats = -1;
  std::uint64_t seed = 0;
  bool cross = false, no_gate = false, no_auto_evolve = false;
};

// Scripted and replayed reasoners run on simulated time; a live endpoint runs on the wall clock.
struct Session {
  std::shared_ptr<Clock> clock;
  std::unique_ptr<ReasonerBackend> backend;
  std::unique_ptr<SimulatedLatencyBackend> timed;
  std::unique_ptr<Reasoner> reasoner;
};

Session open_session(const Options& opt, std::int64_t start_ms) {
  Session s;
  std::optional<fs::path> transcript;
  if (!opt.transcript.empty()) transcript = opt.transcript;
  s.backend = make_backend(opt.reasoner, transcript);
  if (opt.reasoner == "remote") {
    s.clock = std::make_shared<SystemClock>();
    s.reasoner = std::make_unique<Reasoner>(*s.backend);
  } else {
    s.clock = std::make_shared<ManualClock>(start_ms);
    LatencyModel model;
    model.seed = opt.seed;
    s.timed = std::make_unique<SimulatedLatencyBackend>(*s.backend, *s.clock, model);
    s.reasoner = std::make_unique<Reasoner>(*s.timed);
  }
  return s;
}

std::int64_t stored_start(const fs::path& store_dir) {
  if (!fs::exists(graph_file(store_dir))) return 0;
  return latest_timestamp(GraphStore::load(graph_file(store_dir), std::make_shared<ManualClock>()));
}

int cmd_run(const Options& o, std::ostream& out) {
  const fs::path store_dir = o.store;
  const auto variant = parse_space_variant(o.space);
  if (!variant) throw Error(Errc::invalid_argument, "--space must be basic or evolved");
  auto session = open_session(o, stored_start(store_dir));
  auto store = open_store(store_dir, session.clock);
  std::vector<Fault> faults;
  if (!o.faults.empty()) faults = load_faults(o.faults);
  SimDevice device(load_app(o.app), std::move(faults), session.clock);

  const auto traj_dir = store_dir / "trajectories";
  ExecutorConfig cfg;
  cfg.max_steps = o.max_steps;
  cfg.trajectory_id = o.id.empty() ? next_trajectory_id(traj_dir) : o.id;
  const auto space = *variant == SpaceVariant::evolved ? action_space_from_store(store) : ActionSpace{};

  auto run = run_task(o.task, device, *session.reasoner, store, space, cfg);
  store.save(graph_file(store_dir));
  persist(run.trajectory, traj_dir);
  write_json(store_dir / "reports" / (run.trajectory.id + ".json"), to_json_value(run.report));

  const auto& r = run.report;
  out << "task \"" << r.task << "\": " << to_string(r.status) << " after " << r.steps_executed
      << " step(s), " << r.shortcut_invocations << " shortcut invocation(s)\n"
      << "reasoner: " << calls_line(r) << "; tokens " << r.usage_total.total() << "\n";
  for (const auto& e : r.fallback_events) out << "fallback at step " << e.step_index << ": " << e.reason << "\n";
  if (!r.detail.empty()) out << "detail: " << r.detail << "\n";
  out << "trajectory " << run.trajectory.id << "\n";
  return r.status == TrajectoryStatus::success ? kExitSuccess : kExitTaskFailure;
}

int cmd_annotate(const Options& o, std::ostream& out) {
  const fs::path store_dir = o.store;
  auto session = open_session(o, stored_start(store_dir));
  auto store = open_store(store_dir, session.clock);
  const auto traj = load_trajectory(store_dir / "trajectories", o.trajectory);
  const auto report = annotate(traj, *session.reasoner, store);
  store.save(graph_file(store_dir));
  write_json(store_dir / "annotations" / (traj.id + ".json"), to_json_value(report));
  out << "annotated " << traj.id << ": " << report.describe_calls << " triple description(s), "
      << report.merge_calls << " page merge(s), tokens " << report.usage.total() << "\n";
  for (const auto& p : report.pages) {
    if (p.included_existing) out << "page " << p.node.value << " merged with its earlier description\n";
  }
  return kExitSuccess;
}

int cmd_evolve(const Options& o, std::ostream& out) {
  const fs::path store_dir = o.store;
  auto session = open_session(o, stored_start(store_dir));
  auto store = open_store(store_dir, session.clock);
  const auto traj_dir = store_dir / "trajectories";
  const auto traj = load_trajectory(traj_dir, o.trajectory);
  EvolutionConfig cfg;
  cfg.min_len = o.min_len;
  if (o.min_support > 0) cfg.min_support = o.min_support;
  cfg.max_new_shortcuts = o.max_new;
  cfg.cross_trajectory = o.cross;
  cfg.gate = !o.no_gate;
  const auto history = cfg.cross_trajectory ? load_all_trajectories(traj_dir) : std::vector<Trajectory>{};

  const auto report = evolve(traj.task, traj, *session.reasoner, store, action_space_from_store(store), cfg, history);
  store.save(graph_file(store_dir));
  write_json(store_dir / "evolution" / (traj.id + ".json"), to_json_value(report));
  out << "evolve " << traj.id << ": " << report.outcome << ", " << report.candidates.size()
      << " candidate(s), " << report.created.size() << " shortcut(s) created\n";
  for (auto id : report.created) {
    const auto& node = store.shortcut(id);
    out << "created shortcut " << id.value << " \"" << node.name << "\" with "
        << store.shortcut_steps(id).size() << " steps\n";
  }
  for (const auto& s : report.skipped) out << s.reason << "\n";
  out << "action space: " << report.space.size() << " actions (" << report.space.high_level().size()
      << " high-level)\n";
  return kExitSuccess;
}

int cmd_bench(const Options& o, std::ostream& out) {
  auto suite = load_suite(o.suite);
  if (!o.app.empty()) suite.app = o.app;
  if (suite.app.empty()) throw Error(Errc::invalid_argument, "no app: pass --app or set it in the suite");
  auto spec = o.reasoner;
  if (spec.empty()) {
    if (suite.fixtures.empty()) throw Error(Errc::invalid_argument, "no reasoner: pass --reasoner or set fixtures in the suite");
    spec = "scripted:" + suite.fixtures.string();
  }
  std::optional<fs::path> transcript;
  if (!o.transcript.empty()) transcript = o.transcript;
  auto backend = make_backend(spec, transcript);

  SuiteConfig cfg;
  const auto variant = parse_space_variant(o.space);
  if (!variant) throw Error(Errc::invalid_argument, "--space must be basic or evolved");
  cfg.space = *variant;
  if (o.repeats >= 0) {
    if (o.repeats == 0) throw ValidationError({"repeats must be at least 1"});
    cfg.repeats = static_cast<std::size_t>(o.repeats);
  }
  cfg.seed = o.seed;
  cfg.auto_evolve = !o.no_auto_evolve;
  if (!o.faults.empty()) cfg.faults = load_faults(o.faults);

  std::optional<GraphStore> initial;
  if (!o.store.empty()) {
    initial.emplace(open_store(o.store, std::make_shared<ManualClock>()));
  }
  const auto run = run_suite(suite, load_app(suite.app), *backend, cfg, initial ? &*initial : nullptr);
  write_suite_outputs(run, o.out);
  out << summary_table(run.summary);
  return kExitSuccess;
}

MetricsSummary read_summary(const fs::path& dir) {
  std::ifstream in(dir / "summary.json", std::ios::binary);
  if (!in) throw Error(Errc::io, "no summary.json in " + dir.string());
  try {
    return summary_from_json(json::parse(in));
  } catch (const json::parse_error& ex) {
    throw Error(Errc::parse, (dir / "summary.json").string() + ": " + ex.what());
  }
}

int cmd_compare(const Options& o, std::ostream& out) {
  const auto c = compare_runs(read_summary(o.a), read_summary(o.b));
  if (!o.out.empty()) write_json(o.out, c);
  out << comparison_table(c);
  return kExitSuccess;
}

int cmd_graph(const Options& o, std::ostream& out) {
  const fs::path store_dir = o.store;
  const fs::path file = o.file;
  if (o.action == "export") {
    const auto store = open_store(store_dir, std::make_shared<ManualClock>());
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream f(file, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(Errc::io, "cannot write " + file.string());
    f << store.export_graph();
    out << "exported " << store.pages().size() << " pages, " << store.elements().size() << " elements, "
        << store.shortcuts().size() << " shortcuts to " << file.string() << "\n";
  } else {
    const auto store = GraphStore::load(file, std::make_shared<ManualClock>());
    fs::create_directories(store_dir);
    store.save(graph_file(store_dir));
    out << "imported " << store.pages().size() << " pages, " << store.elements().size() << " elements, "
        << store.shortcuts().size() << " shortcuts into " << store_dir.string() << "\n";
  }
  return kExitSuccess;
}

bool usage_error(Errc code) {
  switch (code) {
    case Errc::invalid_argument:
    case Errc::validation:
    case Errc::parse:
    case Errc::unknown_id:
    case Errc::malformed_record:
    case Errc::referential_integrity:
    case Errc::suite_mismatch:
    case Errc::io:
      return true;
    default:
      return false;
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Self-evolving GUI agent: run tasks, learn shortcuts, benchmark"};
  app.name("agent");
  app.require_subcommand(1);

  Options o;
  auto* run = app.add_subcommand("run", "Run one task on the simulator");
  run->add_option("--app", o.app, "App model (.app.json)")->required();
  run->add_option("--task", o.task, "Task text")->required();
  run->add_option("--store", o.store, "Store directory")->required();
  run->add_option("--space", o.space, "basic or evolved");
  run->add_option("--reasoner", o.reasoner, "scripted:FIXTURE, remote, or replay:TRANSCRIPT")->required();
  run->add_option("--transcript", o.transcript, "Append remote exchanges to this file");
  run->add_option("--max-steps", o.max_steps, "Step cap")->check(CLI::PositiveNumber);
  run->add_option("--seed", o.seed, "Seed for simulated latency");
  run->add_option("--faults", o.faults, "Fault plan file or inline JSON");
  run->add_option("--id", o.id, "Trajectory id (default run-NNNN)");

  auto* ann = app.add_subcommand("annotate", "Describe pages and elements seen in a trajectory");
  ann->add_option("--store", o.store)->required();
  ann->add_option("--trajectory", o.trajectory)->required();
  ann->add_option("--reasoner", o.reasoner)->required();
  ann->add_option("--transcript", o.transcript);
  ann->add_option("--seed", o.seed);

  auto* evo = app.add_subcommand("evolve", "Learn shortcuts from a trajectory");
  evo->add_option("--store", o.store)->required();
  evo->add_option("--trajectory", o.trajectory)->required();
  evo->add_option("--reasoner", o.reasoner)->required();
  evo->add_option("--transcript", o.transcript);
  evo->add_option("--seed", o.seed);
  evo->add_option("--min-len", o.min_len)->check(CLI::Range(2, 1000));
  evo->add_option("--min-support", o.min_support, "Default 1, or 2 with --cross-trajectory");
  evo->add_option("--max-new", o.max_new);
  evo->add_flag("--cross-trajectory", o.cross, "Also mine stored successful runs of the same task");
  evo->add_flag("--no-gate", o.no_gate, "Skip the judge_repetitive gate");

  auto* bench = app.add_subcommand("bench", "Run a benchmark suite");
  bench->add_option("--app", o.app, "Overrides the suite's app");
  bench->add_option("--suite", o.suite)->required();
  bench->add_option("--repeats", o.repeats, "Overrides the suite's repeats");
  bench->add_option("--out", o.out)->required();
  bench->add_option("--space", o.space);
  bench->add_option("--reasoner", o.reasoner, "Default: scripted with the suite's fixtures");
  bench->add_option("--transcript", o.transcript);
  bench->add_option("--seed", o.seed);
  bench->add_option("--store", o.store, "Seed memory (and, with --no-auto-evolve, the evolved space)");
  bench->add_option("--faults", o.faults);
  bench->add_flag("--no-auto-evolve", o.no_auto_evolve);

  auto* cmp = app.add_subcommand("compare", "Compare two bench outputs");
  cmp->add_option("--a", o.a)->required();
  cmp->add_option("--b", o.b)->required();
  cmp->add_option("--out", o.out, "Write the comparison JSON here");

  auto* graph = app.add_subcommand("graph", "Export or import the memory graph");
  graph->require_subcommand(1);
  auto* gexp = graph->add_subcommand("export", "Write the store's graph dump");
  auto* gimp = graph->add_subcommand("import", "Replace the store's graph with a dump");
  for (auto* g : {gexp, gimp}) {
    g->add_option("--store", o.store)->required();
    g->add_option("--file", o.file)->required();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitSuccess : kExitUsage;
  }

  o.action = gexp->parsed() ? "export" : "import";
  try {
    if (run->parsed()) return cmd_run(o, out);
    if (ann->parsed()) return cmd_annotate(o, out);
    if (evo->parsed()) return cmd_evolve(o, out);
    if (bench->parsed()) return cmd_bench(o, out);
    if (cmp->parsed()) return cmd_compare(o, out);
    return cmd_graph(o, out);
  } catch (const ValidationError& ex) {
    err << "error: " << ex.what() << "\n";
    for (const auto& p : ex.problems()) err << "  " << p << "\n";
    return kExitUsage;
  } catch (const Error& ex) {
    err << "error (" << to_string(ex.code()) << "): " << ex.what() << "\n";
    return usage_error(ex.code()) ? kExitUsage : kExitInternal;
  } catch (const std::exception& ex) {
    err << "internal error: " << ex.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace evoagent
