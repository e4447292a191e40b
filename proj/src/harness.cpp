#include "evoagent/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "evoagent/error.hpp"
#include "evoagent/serialization.hpp"

namespace evoagent {

using nlohmann::json;

BenchmarkSuite parse_suite(const json& doc, const std::filesystem::path& base_dir) {
  BenchmarkSuite s;
  std::vector<std::string> problems;
  try {
    s.name = doc.value("name", "suite");
    if (auto it = doc.find("app"); it != doc.end()) s.app = base_dir / it->get<std::string>();
    if (auto it = doc.find("fixtures"); it != doc.end()) s.fixtures = base_dir / it->get<std::string>();
    const auto repeats = doc.value("repeats", std::int64_t{5});
    if (repeats < 1) {
      problems.push_back("repeats must be at least 1");
    } else {
      s.repeats = static_cast<std::size_t>(repeats);
    }
    const auto& tasks = doc.at("tasks");
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      const auto& t = tasks[i];
      SuiteTask task;
      task.task = t.at("task").get<std::string>();
      if (task.task.empty()) problems.push_back("task " + std::to_string(i) + " has empty text");
      const auto expected = t.value("expected_status", std::string("success"));
      if (auto st = parse_trajectory_status(expected)) {
        task.expected_status = *st;
      } else {
        problems.push_back("task " + std::to_string(i) + " has unknown expected_status \"" + expected + "\"");
      }
      if (auto gt = t.find("ground_truth_steps"); gt != t.end() && !gt->is_null()) {
        task.ground_truth_steps = gt->get<std::size_t>();
      }
      s.tasks.push_back(std::move(task));
    }
    if (s.tasks.empty()) problems.push_back("suite has no tasks");
  } catch (const json::exception& ex) {
    problems.push_back(std::string("malformed suite: ") + ex.what());
  }
  if (!problems.empty()) throw ValidationError(std::move(problems));
  return s;
}

BenchmarkSuite load_suite(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot read " + file.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& ex) {
    throw Error(Errc::parse, file.string() + ": " + ex.what());
  }
  return parse_suite(doc, file.parent_path());
}

std::string_view to_string(SpaceVariant v) { return v == SpaceVariant::basic ? "basic" : "evolved"; }

std::optional<SpaceVariant> parse_space_variant(std::string_view name) {
  if (name == "basic") return SpaceVariant::basic;
  if (name == "evolved") return SpaceVariant::evolved;
  return std::nullopt;
}

std::string length_class(std::optional<std::size_t> gt) {
  if (!gt) return "unclassed";
  if (*gt <= 5) return "short";
  if (*gt <= 10) return "medium";
  return "long";
}

MetricsSummary summarize(const BenchmarkSuite& suite, const std::vector<TaskReport>& reports,
                         std::size_t repeats) {
  MetricsSummary s;
  s.suite = suite.name;
  s.repeats = repeats;
  std::size_t total_runs = 0, total_ok = 0, ok_steps = 0;
  double sum_task_time = 0, sum_step_time = 0, sum_tokens = 0;
  for (std::size_t t = 0; t < suite.tasks.size(); ++t) {
    TaskMetrics m;
    m.task = suite.tasks[t].task;
    m.ground_truth_steps = suite.tasks[t].ground_truth_steps;
    std::size_t steps = 0;
    double task_time = 0, step_time = 0, tokens = 0, shortcuts = 0;
    std::map<RequestKind, double> calls;
    for (const auto& r : reports) {
      if (r.task != m.task) continue;
      ++m.runs;
      m.total_usage += r.usage_total;
      m.fallback_events += r.fallback_events.size();
      if (r.status == suite.tasks[t].expected_status) ++m.as_expected;
      for (const auto& [kind, n] : r.reasoner_calls_by_kind) s.calls[kind] += n;
      if (r.status != TrajectoryStatus::success) continue;
      ++m.successes;
      steps += r.steps_executed;
      task_time += static_cast<double>(r.wall_time_ms);
      for (auto st : r.step_times_ms) step_time += static_cast<double>(st);
      tokens += static_cast<double>(r.usage_total.total());
      shortcuts += static_cast<double>(r.shortcut_invocations);
      for (const auto& [kind, n] : r.reasoner_calls_by_kind) calls[kind] += static_cast<double>(n);
    }
    if (m.runs > 0) m.success_rate = static_cast<double>(m.successes) / static_cast<double>(m.runs);
    if (m.successes > 0) {
      const auto k = static_cast<double>(m.successes);
      m.avg_steps = static_cast<double>(steps) / k;
      m.avg_task_time_ms = task_time / k;
      m.avg_step_time_ms = steps ? step_time / static_cast<double>(steps) : 0.0;
      m.avg_tokens = tokens / k;
      m.avg_shortcut_invocations = shortcuts / k;
      for (auto kind : kRequestKinds) m.avg_calls[kind] = calls[kind] / k;
    }
    total_runs += m.runs;
    total_ok += m.successes;
    ok_steps += steps;
    sum_task_time += task_time;
    sum_step_time += step_time;
    sum_tokens += tokens;
    s.total_usage += m.total_usage;
    s.tasks.push_back(std::move(m));
  }
  if (total_runs > 0) s.success_rate = static_cast<double>(total_ok) / static_cast<double>(total_runs);
  if (total_ok > 0) {
    const auto k = static_cast<double>(total_ok);
    s.avg_steps = static_cast<double>(ok_steps) / k;
    s.avg_task_time_ms = sum_task_time / k;
    s.avg_step_time_ms = ok_steps ? sum_step_time / static_cast<double>(ok_steps) : 0.0;
    s.avg_tokens = sum_tokens / k;
  }
  return s;
}

namespace {

json calls_json(const std::map<RequestKind, double>& calls) {
  json out = json::object();
  for (auto kind : kRequestKinds) {
    auto it = calls.find(kind);
    out[std::string(to_string(kind))] = it == calls.end() ? 0.0 : it->second;
  }
  return out;
}

}  // namespace

json to_json_value(const MetricsSummary& s) {
  json tasks = json::array();
  for (const auto& m : s.tasks) {
    tasks.push_back(json{{"task", m.task},
                         {"ground_truth_steps", m.ground_truth_steps ? json(*m.ground_truth_steps) : json(nullptr)},
                         {"length_class", length_class(m.ground_truth_steps)},
                         {"runs", m.runs},
                         {"successes", m.successes},
                         {"as_expected", m.as_expected},
                         {"success_rate", m.success_rate},
                         {"avg_steps", m.avg_steps},
                         {"avg_task_time_ms", m.avg_task_time_ms},
                         {"avg_step_time_ms", m.avg_step_time_ms},
                         {"avg_tokens", m.avg_tokens},
                         {"avg_shortcut_invocations", m.avg_shortcut_invocations},
                         {"avg_calls", calls_json(m.avg_calls)},
                         {"fallback_events", m.fallback_events},
                         {"total_usage", m.total_usage}});
  }
  json calls = json::object();
  for (auto kind : kRequestKinds) {
    auto it = s.calls.find(kind);
    calls[std::string(to_string(kind))] = it == s.calls.end() ? 0 : it->second;
  }
  return json{{"suite", s.suite},
              {"space", s.space},
              {"repeats", s.repeats},
              {"seed", s.seed},
              {"time_source", "simulated"},
              {"tasks", tasks},
              {"success_rate", s.success_rate},
              {"avg_steps", s.avg_steps},
              {"avg_task_time_ms", s.avg_task_time_ms},
              {"avg_step_time_ms", s.avg_step_time_ms},
              {"avg_tokens", s.avg_tokens},
              {"total_usage", s.total_usage},
              {"preparation_usage", s.preparation_usage},
              {"calls", calls}};
}

MetricsSummary summary_from_json(const json& j) {
  try {
    MetricsSummary s;
    s.suite = j.at("suite").get<std::string>();
    s.space = j.at("space").get<std::string>();
    s.repeats = j.at("repeats").get<std::size_t>();
    s.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& t : j.at("tasks")) {
      TaskMetrics m;
      m.task = t.at("task").get<std::string>();
      if (!t.at("ground_truth_steps").is_null()) m.ground_truth_steps = t.at("ground_truth_steps").get<std::size_t>();
      m.runs = t.at("runs").get<std::size_t>();
      m.successes = t.at("successes").get<std::size_t>();
      m.as_expected = t.at("as_expected").get<std::size_t>();
      m.success_rate = t.at("success_rate").get<double>();
      m.avg_steps = t.at("avg_steps").get<double>();
      m.avg_task_time_ms = t.at("avg_task_time_ms").get<double>();
      m.avg_step_time_ms = t.at("avg_step_time_ms").get<double>();
      m.avg_tokens = t.at("avg_tokens").get<double>();
      m.avg_shortcut_invocations = t.at("avg_shortcut_invocations").get<double>();
      for (const auto& [name, v] : t.at("avg_calls").items()) {
        if (auto kind = parse_request_kind(name)) m.avg_calls[*kind] = v.get<double>();
      }
      m.fallback_events = t.at("fallback_events").get<std::size_t>();
      m.total_usage = t.at("total_usage").get<ReasonerUsage>();
      s.tasks.push_back(std::move(m));
    }
    s.success_rate = j.at("success_rate").get<double>();
    s.avg_steps = j.at("avg_steps").get<double>();
    s.avg_task_time_ms = j.at("avg_task_time_ms").get<double>();
    s.avg_step_time_ms = j.at("avg_step_time_ms").get<double>();
    s.avg_tokens = j.at("avg_tokens").get<double>();
    s.total_usage = j.at("total_usage").get<ReasonerUsage>();
    s.preparation_usage = j.at("preparation_usage").get<ReasonerUsage>();
    for (const auto& [name, v] : j.at("calls").items()) {
      if (auto kind = parse_request_kind(name); kind && v.get<std::size_t>() > 0) s.calls[*kind] = v.get<std::size_t>();
    }
    return s;
  } catch (const json::exception& ex) {
    throw Error(Errc::parse, std::string("malformed summary: ") + ex.what());
  }
}

SuiteRun run_suite(const BenchmarkSuite& suite, const AppModel& app, ReasonerBackend& backend,
                   const SuiteConfig& config, const GraphStore* initial) {
  const auto repeats = config.repeats.value_or(suite.repeats);
  if (repeats < 1) throw ValidationError({"repeats must be at least 1"});

  auto clock = std::make_shared<ManualClock>(0);
  SimulatedLatencyBackend timed(backend, *clock, {config.latency.base_ms, config.latency.per_token_ms,
                                                  config.latency.jitter, config.seed});
  Reasoner reasoner(timed);
  GraphStore store = initial ? GraphStore::import_graph(initial->export_graph(), clock) : GraphStore(clock);
  SimDevice device(app, config.faults, clock, config.device_latency);

  SuiteRun run{{}, {}, {}, {}, {}, GraphStore(clock)};
  auto executor_for = [&](const SuiteTask& t, std::string id) {
    ExecutorConfig ec = config.executor;
    if (t.ground_truth_steps) ec.max_steps = std::max<std::size_t>(1, 2 * *t.ground_truth_steps);
    ec.trajectory_id = std::move(id);
    return ec;
  };
  auto tag = [](std::size_t t) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "t%02zu", t + 1);
    return std::string(buf);
  };

  ActionSpace space;
  if (config.space == SpaceVariant::evolved) {
    if (config.auto_evolve) {
      std::vector<Trajectory> history;
      for (std::size_t t = 0; t < suite.tasks.size(); ++t) {
        const auto& task = suite.tasks[t];
        device.reset();
        auto prep = run_task(task.task, device, reasoner, store, ActionSpace{},
                             executor_for(task, tag(t) + "-prep"));
        run.summary.preparation_usage += prep.report.usage_total;
        if (prep.trajectory.status == TrajectoryStatus::success) {
          auto notes = annotate(prep.trajectory, reasoner, store);
          run.summary.preparation_usage += notes.usage;
          run.annotations.push_back(std::move(notes));
        }
        auto evo = evolve(task.task, prep.trajectory, reasoner, store, space, config.evolution, history);
        run.summary.preparation_usage += evo.usage;
        space = evo.space;
        run.evolutions.push_back(std::move(evo));
        history.push_back(prep.trajectory);
        run.trajectories.push_back(std::move(prep.trajectory));
      }
    } else {
      space = action_space_from_store(store);
    }
  }

  for (std::size_t t = 0; t < suite.tasks.size(); ++t) {
    const auto& task = suite.tasks[t];
    for (std::size_t r = 0; r < repeats; ++r) {
      device.reset();
      auto result = run_task(task.task, device, reasoner, store, space,
                             executor_for(task, tag(t) + "-" + std::string(to_string(config.space)) +
                                                    "-r" + std::to_string(r + 1)));
      run.reports.push_back(std::move(result.report));
      run.trajectories.push_back(std::move(result.trajectory));
    }
  }

  auto preparation = run.summary.preparation_usage;
  run.summary = summarize(suite, run.reports, repeats);
  run.summary.preparation_usage = preparation;
  run.summary.space = std::string(to_string(config.space));
  run.summary.seed = config.seed;
  run.store = std::move(store);
  return run;
}

namespace {

void write_text(const std::filesystem::path& file, const std::string& text) {
  std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write " + file.string());
  out << text;
}

}  // namespace

void write_suite_outputs(const SuiteRun& run, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_text(out_dir / "summary.json", to_json_value(run.summary).dump(2) + "\n");
  for (const auto& t : run.trajectories) {
    write_text(out_dir / "trajectories" / (t.id + ".traj.jsonl"), dump_trajectory(t));
  }
  for (std::size_t i = 0; i < run.reports.size(); ++i) {
    const auto& id = run.trajectories[run.trajectories.size() - run.reports.size() + i].id;
    write_text(out_dir / "reports" / (id + ".json"), to_json_value(run.reports[i]).dump(2) + "\n");
  }
  for (const auto& a : run.annotations) {
    write_text(out_dir / "annotations" / (a.trajectory_id + ".json"), to_json_value(a).dump(2) + "\n");
  }
  for (const auto& e : run.evolutions) {
    write_text(out_dir / "evolution" / (e.trajectory_id + ".json"), to_json_value(e).dump(2) + "\n");
  }
  write_text(out_dir / "store.graph.jsonl", run.store.export_graph());
}

namespace {

std::string fmt(double v, int precision = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace

std::string summary_table(const MetricsSummary& s) {
  std::ostringstream out;
  out << "suite " << s.suite << " | space " << s.space << " | repeats " << s.repeats << " | seed "
      << s.seed << " | times simulated\n";
  out << pad("task", 28) << pad("SR", 7) << pad("steps", 8) << pad("plan", 7) << pad("check", 7)
      << pad("tokens", 10) << pad("task ms", 11) << "fallbacks\n";
  for (const auto& m : s.tasks) {
    auto avg = [&](RequestKind k) {
      auto it = m.avg_calls.find(k);
      return it == m.avg_calls.end() ? 0.0 : it->second;
    };
    out << pad(m.task.size() > 26 ? m.task.substr(0, 26) : m.task, 28) << pad(fmt(m.success_rate), 7)
        << pad(fmt(m.avg_steps), 8) << pad(fmt(avg(RequestKind::plan_next)), 7)
        << pad(fmt(avg(RequestKind::check_applicable)), 7) << pad(fmt(m.avg_tokens, 1), 10)
        << pad(fmt(m.avg_task_time_ms, 1), 11) << m.fallback_events << "\n";
  }
  out << pad("overall", 28) << pad(fmt(s.success_rate), 7) << pad(fmt(s.avg_steps), 8)
      << pad("", 14) << pad(fmt(s.avg_tokens, 1), 10) << pad(fmt(s.avg_task_time_ms, 1), 11) << "\n";
  out << "tokens: evaluation " << s.total_usage.total() << ", preparation "
      << s.preparation_usage.total() << "\n";
  return out.str();
}

json compare_runs(const MetricsSummary& a, const MetricsSummary& b) {
  auto names = [](const MetricsSummary& s) {
    std::vector<std::string> out;
    for (const auto& m : s.tasks) out.push_back(m.task);
    return out;
  };
  if (a.suite != b.suite || names(a) != names(b)) {
    throw Error(Errc::suite_mismatch, "summaries cover different suites (\"" + a.suite + "\" vs \"" +
                                          b.suite + "\")");
  }

  json tasks = json::array();
  std::vector<double> time_a, time_b, steps_a, steps_b, tokens_a, tokens_b;
  std::map<std::string, std::vector<std::size_t>> classes;
  for (std::size_t i = 0; i < a.tasks.size(); ++i) {
    const auto& x = a.tasks[i];
    const auto& y = b.tasks[i];
    const bool joint = x.successes > 0 && y.successes > 0;
    tasks.push_back(json{{"task", x.task},
                         {"length_class", length_class(x.ground_truth_steps)},
                         {"jointly_successful", joint},
                         {"success_rate", json{{"a", x.success_rate}, {"b", y.success_rate}}},
                         {"avg_steps", json{{"a", x.avg_steps}, {"b", y.avg_steps}, {"delta", y.avg_steps - x.avg_steps}}},
                         {"avg_tokens", json{{"a", x.avg_tokens}, {"b", y.avg_tokens}, {"delta", y.avg_tokens - x.avg_tokens}}},
                         {"avg_task_time_ms", json{{"a", x.avg_task_time_ms}, {"b", y.avg_task_time_ms},
                                                   {"delta", y.avg_task_time_ms - x.avg_task_time_ms}}}});
    if (!joint) continue;
    time_a.push_back(x.avg_task_time_ms);
    time_b.push_back(y.avg_task_time_ms);
    steps_a.push_back(x.avg_steps);
    steps_b.push_back(y.avg_steps);
    tokens_a.push_back(x.avg_tokens);
    tokens_b.push_back(y.avg_tokens);
    classes[length_class(x.ground_truth_steps)].push_back(i);
  }

  // H1: b is lower than a, tested as mean(b - a) < 0.
  auto test = [](const std::vector<double>& xa, const std::vector<double>& xb) -> json {
    try {
      const auto r = paired_t_test(xb, xa);
      return json{{"mean_diff", r.mean_diff}, {"t", r.t}, {"df", r.df}, {"one_tailed_p", r.one_tailed_p}};
    } catch (const Error& ex) {
      if (ex.code() == Errc::zero_variance) return json{{"result", "no difference"}};
      if (ex.code() == Errc::invalid_argument) return json{{"result", "too few jointly successful tasks"}};
      throw;
    }
  };

  json by_class = json::object();
  for (const auto& [name, idx] : classes) {
    double sa = 0, sb = 0, ta = 0, tb = 0;
    for (auto i : idx) {
      sa += a.tasks[i].avg_steps;
      sb += b.tasks[i].avg_steps;
      ta += a.tasks[i].avg_task_time_ms;
      tb += b.tasks[i].avg_task_time_ms;
    }
    const auto n = static_cast<double>(idx.size());
    by_class[name] = json{{"tasks", idx.size()},
                          {"avg_steps", json{{"a", sa / n}, {"b", sb / n}}},
                          {"avg_task_time_ms", json{{"a", ta / n}, {"b", tb / n}}}};
  }

  return json{{"suite", a.suite},
              {"a", json{{"space", a.space}, {"success_rate", a.success_rate}, {"avg_steps", a.avg_steps},
                         {"avg_tokens", a.avg_tokens}, {"avg_task_time_ms", a.avg_task_time_ms},
                         {"avg_step_time_ms", a.avg_step_time_ms}}},
              {"b", json{{"space", b.space}, {"success_rate", b.success_rate}, {"avg_steps", b.avg_steps},
                         {"avg_tokens", b.avg_tokens}, {"avg_task_time_ms", b.avg_task_time_ms},
                         {"avg_step_time_ms", b.avg_step_time_ms}}},
              {"tasks", tasks},
              {"jointly_successful", time_a.size()},
              {"t_tests", json{{"task_time_ms", test(time_a, time_b)},
                               {"steps", test(steps_a, steps_b)},
                               {"tokens", test(tokens_a, tokens_b)}}},
              {"length_classes", by_class}};
}

std::string comparison_table(const json& c) {
  std::ostringstream out;
  out << "suite " << c.at("suite").get<std::string>() << ": a=" << c.at("a").at("space").get<std::string>()
      << " b=" << c.at("b").at("space").get<std::string>() << "\n";
  out << pad("task", 28) << pad("steps a", 9) << pad("steps b", 9) << pad("tokens a", 10)
      << pad("tokens b", 10) << pad("ms a", 10) << "ms b\n";
  for (const auto& t : c.at("tasks")) {
    auto name = t.at("task").get<std::string>();
    if (name.size() > 26) name.resize(26);
    out << pad(name, 28) << pad(fmt(t.at("avg_steps").at("a").get<double>()), 9)
        << pad(fmt(t.at("avg_steps").at("b").get<double>()), 9)
        << pad(fmt(t.at("avg_tokens").at("a").get<double>(), 1), 10)
        << pad(fmt(t.at("avg_tokens").at("b").get<double>(), 1), 10)
        << pad(fmt(t.at("avg_task_time_ms").at("a").get<double>(), 1), 10)
        << fmt(t.at("avg_task_time_ms").at("b").get<double>(), 1)
        << (t.at("jointly_successful").get<bool>() ? "" : "  (not jointly successful)") << "\n";
  }
  for (const auto& [metric, r] : c.at("t_tests").items()) {
    out << "paired t-test on " << metric << " (b < a): ";
    if (r.contains("result")) {
      out << r.at("result").get<std::string>() << "\n";
    } else {
      out << "t=" << fmt(r.at("t").get<double>(), 3) << " df=" << fmt(r.at("df").get<double>(), 0)
          << " p=" << fmt(r.at("one_tailed_p").get<double>(), 4) << "\n";
    }
  }
  for (const auto& [name, g] : c.at("length_classes").items()) {
    out << name << ": " << g.at("tasks").get<std::size_t>() << " task(s), steps "
        << fmt(g.at("avg_steps").at("a").get<double>()) << " -> " << fmt(g.at("avg_steps").at("b").get<double>())
        << "\n";
  }
  return out.str();
}

}  // namespace evoagent
