#include "evoagent/executor.hpp"

#include <algorithm>

#include "evoagent/error.hpp"
#include "evoagent/serialization.hpp"

namespace evoagent {

using nlohmann::json;

ExecutionTemplate make_template(const HighLevelAction& hla, const Bindings& bindings,
                                const GraphStore& store) {
  ExecutionTemplate tmpl;
  tmpl.shortcut = hla.id;
  tmpl.steps = hla.steps;
  tmpl.invocations = instantiate(hla, bindings);
  for (const auto& step : hla.steps) {
    const auto targets = store.leads_to(step.element);
    if (targets.size() == 1) {
      tmpl.expected_targets.push_back(store.page(targets.front()).fingerprint);
    } else {
      tmpl.expected_targets.push_back(std::nullopt);
    }
  }
  return tmpl;
}

namespace {

ActionInvocation retarget(ActionInvocation inv, std::size_t index) {
  if (inv.target) inv.target = DetectedIndex{index};
  return inv;
}

}  // namespace

TemplateResult execute_template(const ExecutionTemplate& tmpl, Device& device, GraphStore& store,
                                const ScreenObservation& obs, PageId page,
                                const ExecutorConfig& config) {
  TemplateResult result;
  result.final_observation = obs;
  result.final_page = page;
  if (tmpl.invocations.size() != tmpl.steps.size()) {
    throw Error(Errc::invalid_argument, "template has a different number of invocations and steps");
  }
  if (tmpl.steps.empty()) return result;

  auto where = locate_element(obs, store, tmpl.steps.front().element, config.match_threshold);
  if (!where) {
    result.abort = TemplateAbort{0, "element unresolved"};
    return result;
  }
  for (std::size_t i = 0; i < tmpl.steps.size(); ++i) {
    const auto performed = retarget(tmpl.invocations[i], *where);
    const auto outcome = device.perform(performed);
    if (!outcome.ok) {
      result.abort = TemplateAbort{i, "device error: " + outcome.reason};
      return result;
    }
    auto next_obs = device.observe();
    const PageId next_page = store.upsert_page(next_obs, config.page_threshold);

    TemplateStep step;
    step.performed = performed;
    step.element = tmpl.steps[i].element;
    step.pre_page = result.final_page;
    step.post_page = next_page;
    const auto& expected = tmpl.expected_targets[i];
    step.verified = !expected || fingerprint_similarity(page_fingerprint(next_obs), *expected) >=
                                     config.page_threshold;
    if (step.verified) store.link_leads_to(step.element, next_page);
    step.finished_at = store.clock().now_ms();
    result.steps.push_back(step);
    result.final_observation = std::move(next_obs);
    result.final_page = next_page;

    if (i + 1 < tmpl.steps.size()) {
      where = locate_element(result.final_observation, store, tmpl.steps[i + 1].element,
                             config.match_threshold);
      if (!where) {
        result.abort = TemplateAbort{i + 1, "element unresolved"};
        return result;
      }
    }
    if (!step.verified) {
      result.abort = TemplateAbort{i + 1, "unexpected page"};
      return result;
    }
  }
  return result;
}

std::vector<ShortcutCandidate> prioritize(std::vector<ShortcutCandidate> candidates) {
  std::sort(candidates.begin(), candidates.end(),
            [](const ShortcutCandidate& a, const ShortcutCandidate& b) {
              if (a.order != b.order) return a.order < b.order;
              if (a.length != b.length) return a.length > b.length;
              return a.shortcut > b.shortcut;
            });
  return candidates;
}

std::size_t TaskReport::calls(RequestKind kind) const {
  auto it = reasoner_calls_by_kind.find(kind);
  return it == reasoner_calls_by_kind.end() ? 0 : it->second;
}

json to_json_value(const TaskReport& r) {
  json calls = json::object();
  for (auto kind : kRequestKinds) calls[std::string(to_string(kind))] = r.calls(kind);
  json events = json::array();
  for (const auto& e : r.fallback_events) {
    events.push_back(json{{"step_index", e.step_index}, {"reason", e.reason}});
  }
  return json{{"task", r.task},
              {"status", to_string(r.status)},
              {"steps_executed", r.steps_executed},
              {"reasoner_calls_by_kind", calls},
              {"usage_total", r.usage_total},
              {"unattributed_usage", r.unattributed_usage},
              {"wall_time_ms", r.wall_time_ms},
              {"step_times_ms", r.step_times_ms},
              {"shortcut_invocations", r.shortcut_invocations},
              {"fallback_events", events},
              {"detail", r.detail}};
}

TaskReport task_report_from_json(const json& j) {
  TaskReport r;
  r.task = j.at("task").get<std::string>();
  auto status = parse_trajectory_status(j.at("status").get<std::string>());
  if (!status) throw Error(Errc::parse, "unknown task status");
  r.status = *status;
  r.steps_executed = j.at("steps_executed").get<std::size_t>();
  for (const auto& [name, count] : j.at("reasoner_calls_by_kind").items()) {
    auto kind = parse_request_kind(name);
    if (!kind) throw Error(Errc::parse, "unknown request kind \"" + name + "\"");
    if (count.get<std::size_t>() > 0) r.reasoner_calls_by_kind[*kind] = count.get<std::size_t>();
  }
  r.usage_total = j.at("usage_total").get<ReasonerUsage>();
  r.unattributed_usage = j.at("unattributed_usage").get<ReasonerUsage>();
  r.wall_time_ms = j.at("wall_time_ms").get<std::int64_t>();
  r.step_times_ms = j.at("step_times_ms").get<std::vector<std::int64_t>>();
  r.shortcut_invocations = j.at("shortcut_invocations").get<std::size_t>();
  for (const auto& e : j.at("fallback_events")) {
    r.fallback_events.push_back({e.at("step_index").get<std::size_t>(), e.at("reason").get<std::string>()});
  }
  r.detail = j.value("detail", "");
  return r;
}

namespace {

// Mutable state of one run_task call.
class Run {
 public:
  Run(const std::string& task, Device& device, Reasoner& reasoner, GraphStore& store,
      const ActionSpace& space, const ExecutorConfig& config)
      : task_(task), device_(device), reasoner_(reasoner), store_(store), space_(space),
        config_(config), clock_(store.clock()) {}

  TaskRun go();

 private:
  void record(Step step, std::optional<std::int64_t> finished_at = std::nullopt);
  HistoryEntry history_entry(const ActionInvocation& inv, const ScreenObservation& on) const;
  std::vector<HistoryEntry> recent_history() const;
  std::optional<ShortcutCandidate> pick_shortcut() const;
  // True when the shortcut completed the task; fell_back is set when a basic step must follow.
  bool try_shortcut(const ShortcutCandidate& cand, bool& fell_back);
  // Returns false when the loop should stop.
  bool basic_step();
  void fallback(std::string reason) { report_.fallback_events.push_back({traj_.steps.size(), std::move(reason)}); }
  void finish(TrajectoryStatus status, std::string detail = {}) {
    traj_.status = status;
    report_.detail = std::move(detail);
    done_ = true;
  }

  const std::string& task_;
  Device& device_;
  Reasoner& reasoner_;
  GraphStore& store_;
  const ActionSpace& space_;
  const ExecutorConfig& config_;
  Clock& clock_;

  TaskReport report_;
  Trajectory traj_;
  ScreenObservation obs_;
  PageId page_;
  std::vector<HistoryEntry> history_;
  ReasonerUsage pending_;
  std::int64_t mark_ = 0;
  std::size_t failures_ = 0;
  bool done_ = false;
};

void Run::record(Step step, std::optional<std::int64_t> finished_at) {
  const auto now = finished_at.value_or(clock_.now_ms());
  step.wall_time_ms = now - mark_;
  mark_ = now;
  step.usage = pending_;
  pending_ = {};
  report_.step_times_ms.push_back(step.wall_time_ms);
  traj_.steps.push_back(std::move(step));
}

HistoryEntry Run::history_entry(const ActionInvocation& inv, const ScreenObservation& on) const {
  HistoryEntry h;
  h.kind = inv.kind;
  h.text = inv.text_payload;
  if (inv.target) {
    if (const auto* idx = std::get_if<DetectedIndex>(&*inv.target); idx && idx->value < on.elements.size()) {
      h.descriptor = on.elements[idx->value].visual_descriptor;
    }
  }
  return h;
}

std::vector<HistoryEntry> Run::recent_history() const {
  const auto n = std::min(config_.history_window, history_.size());
  return {history_.end() - static_cast<std::ptrdiff_t>(n), history_.end()};
}

std::optional<ShortcutCandidate> Run::pick_shortcut() const {
  const auto budget = config_.max_steps - traj_.steps.size();
  std::map<ShortcutId, ShortcutCandidate> found;
  for (const auto& m : match_elements(obs_, store_, config_.match_threshold)) {
    for (const auto& member : store_.shortcuts_for_element(m.element)) {
      const auto* hla = space_.find(member.shortcut);
      if (!hla || hla->steps.size() > budget) continue;
      ShortcutCandidate c{member.shortcut, member.order, hla->steps.size()};
      auto [it, fresh] = found.try_emplace(member.shortcut, c);
      if (!fresh && c.order < it->second.order) it->second = c;
    }
  }
  std::vector<ShortcutCandidate> list;
  for (const auto& [id, c] : found) list.push_back(c);
  // Only a shortcut whose first step is on screen can start here.
  for (const auto& c : prioritize(std::move(list))) {
    if (c.order == 1) return c;
  }
  return std::nullopt;
}

bool Run::try_shortcut(const ShortcutCandidate& cand, bool& fell_back) {
  const auto& hla = *space_.find(cand.shortcut);
  ShortcutContext ctx{hla, {}, {}};
  for (const auto& s : hla.steps) {
    const auto& el = store_.element(s.element);
    ctx.step_descriptors.push_back(el.visual_descriptor);
    ctx.step_descriptions.push_back(el.description);
  }
  auto verdict = reasoner_.check_applicable(task_, ctx, obs_);
  pending_ += verdict.usage;
  if (!verdict.value.applicable) {
    fallback("shortcut " + to_string(hla.id) + " not applicable: " + verdict.value.reason);
    fell_back = true;
    return false;
  }
  ExecutionTemplate tmpl;
  try {
    tmpl = make_template(hla, verdict.value.bindings, store_);
  } catch (const Error& ex) {
    fallback("shortcut " + to_string(hla.id) + " not instantiable: " + ex.what());
    fell_back = true;
    return false;
  }

  ++report_.shortcut_invocations;
  auto result = execute_template(tmpl, device_, store_, obs_, page_, config_);
  for (std::size_t i = 0; i < result.steps.size(); ++i) {
    const auto& ts = result.steps[i];
    history_.push_back({ts.performed.kind, store_.element(ts.element).visual_descriptor,
                        ts.performed.text_payload});
    Step step;
    step.pre_page = ts.pre_page;
    step.invocation = ts.performed;
    step.acted_element = ts.element;
    step.post_page = ts.post_page;
    step.origin = ShortcutOrigin{hla.id, static_cast<int>(i + 1)};
    record(std::move(step), ts.finished_at);
  }
  obs_ = std::move(result.final_observation);
  page_ = result.final_page;
  if (result.abort) {
    fallback("shortcut " + to_string(hla.id) + " aborted at step " +
             std::to_string(result.abort->step_index) + ": " + result.abort->reason);
    fell_back = true;
    return false;
  }
  return verdict.value.completes_task;
}

bool Run::basic_step() {
  Reasoned<PlanDecision> plan;
  try {
    plan = reasoner_.plan_next(task_, obs_, recent_history());
  } catch (const Error& ex) {
    if (ex.code() != Errc::parse) throw;
    fallback(std::string("unusable plan: ") + ex.what());
    if (++failures_ > config_.max_action_retries) {
      finish(TrajectoryStatus::fail, "reasoner kept returning unusable plans");
      return false;
    }
    return true;
  }
  pending_ += plan.usage;
  if (const auto* fin = std::get_if<PlanFinish>(&plan.value)) {
    finish(TrajectoryStatus::success, fin->summary);
    return false;
  }
  if (const auto* fail = std::get_if<PlanFail>(&plan.value)) {
    finish(TrajectoryStatus::fail, fail->reason);
    return false;
  }
  const auto& act = std::get<PlanAct>(plan.value);
  const auto& inv = act.invocation;

  std::optional<ElementId> acted;
  if (inv.target) {
    const auto idx = std::get<DetectedIndex>(*inv.target).value;
    Interaction interaction{inv.kind, json::object()};
    if (inv.kind == BasicActionKind::text) interaction.default_params["text"] = *inv.text_payload;
    if (inv.swipe_params) interaction.default_params["swipe"] = *inv.swipe_params;
    acted = store_.add_element(page_, obs_.elements.at(idx), interaction);
  }

  const auto outcome = device_.perform(inv);
  if (!outcome.ok) {
    fallback("device error: " + outcome.reason);
    if (++failures_ > config_.max_action_retries) {
      finish(TrajectoryStatus::fail, "device action failed: " + outcome.reason);
      return false;
    }
    obs_ = device_.observe();
    page_ = store_.upsert_page(obs_, config_.page_threshold);
    return true;
  }
  failures_ = 0;
  history_.push_back(history_entry(inv, obs_));

  auto next_obs = device_.observe();
  const auto next_page = store_.upsert_page(next_obs, config_.page_threshold);
  if (acted) store_.link_leads_to(*acted, next_page);
  Step step;
  step.pre_page = page_;
  step.invocation = inv;
  step.acted_element = acted;
  step.post_page = next_page;
  step.origin = BasicOrigin{};
  record(std::move(step));
  obs_ = std::move(next_obs);
  page_ = next_page;

  if (act.completes_task) {
    finish(TrajectoryStatus::success);
    return false;
  }
  return true;
}

TaskRun Run::go() {
  if (config_.max_steps == 0) throw Error(Errc::invalid_argument, "max_steps must be at least 1");
  const auto calls_before = reasoner_.calls_by_kind();
  const auto started = clock_.now_ms();
  mark_ = started;
  traj_.id = config_.trajectory_id;
  traj_.task = task_;
  traj_.started_at = started;
  report_.task = task_;

  obs_ = device_.observe();
  page_ = store_.upsert_page(obs_, config_.page_threshold);

  while (!done_) {
    if (traj_.steps.size() >= config_.max_steps) {
      finish(TrajectoryStatus::aborted, "step cap of " + std::to_string(config_.max_steps) + " reached");
      break;
    }
    if (!space_.high_level().empty()) {
      if (auto cand = pick_shortcut()) {
        bool fell_back = false;
        if (try_shortcut(*cand, fell_back)) {
          finish(TrajectoryStatus::success);
          break;
        }
        if (!fell_back) continue;
        if (traj_.steps.size() >= config_.max_steps) continue;
      }
    }
    if (!basic_step()) break;
  }

  if (pending_ != ReasonerUsage{}) {
    if (traj_.steps.empty()) {
      report_.unattributed_usage = pending_;
    } else {
      traj_.steps.back().usage += pending_;
    }
    pending_ = {};
  }

  report_.status = traj_.status;
  report_.steps_executed = traj_.steps.size();
  for (const auto& s : traj_.steps) report_.usage_total += s.usage;
  report_.usage_total += report_.unattributed_usage;
  for (const auto& [kind, count] : reasoner_.calls_by_kind()) {
    auto before = calls_before.find(kind);
    const auto delta = count - (before == calls_before.end() ? 0 : before->second);
    if (delta > 0) report_.reasoner_calls_by_kind[kind] = delta;
  }
  report_.wall_time_ms = clock_.now_ms() - started;
  return {std::move(report_), std::move(traj_)};
}

}  // namespace

TaskRun run_task(const std::string& task, Device& device, Reasoner& reasoner, GraphStore& store,
                 const ActionSpace& space, const ExecutorConfig& config) {
  Run run(task, device, reasoner, store, space, config);
  return run.go();
}

}  // namespace evoagent
