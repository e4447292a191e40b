#include "evoagent/trajectory.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "evoagent/error.hpp"
#include "evoagent/serialization.hpp"

namespace evoagent {

using nlohmann::json;

std::string_view to_string(TrajectoryStatus status) {
  switch (status) {
    case TrajectoryStatus::success: return "success";
    case TrajectoryStatus::fail: return "fail";
    case TrajectoryStatus::aborted: return "aborted";
  }
  return "fail";
}

std::optional<TrajectoryStatus> parse_trajectory_status(std::string_view name) {
  for (auto s : {TrajectoryStatus::success, TrajectoryStatus::fail, TrajectoryStatus::aborted}) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

void check_chain(const Trajectory& traj) {
  for (std::size_t i = 1; i < traj.steps.size(); ++i) {
    if (traj.steps[i].pre_page != traj.steps[i - 1].post_page) {
      throw Error(Errc::broken_chain, "step " + std::to_string(i) + " starts on page " +
                                          to_string(traj.steps[i].pre_page) + " but step " +
                                          std::to_string(i - 1) + " ended on page " +
                                          to_string(traj.steps[i - 1].post_page));
    }
  }
}

std::vector<Triple> decompose(const Trajectory& traj) {
  check_chain(traj);
  std::vector<Triple> out;
  for (std::size_t i = 0; i < traj.steps.size(); ++i) {
    const auto& s = traj.steps[i];
    if (!s.acted_element) continue;
    out.push_back({s.pre_page, *s.acted_element, s.invocation.kind, s.post_page, i});
  }
  return out;
}

namespace {

PageContext page_context(const GraphStore& store, PageId id) {
  const auto& p = store.page(id);
  return {id, p.element_records, p.description};
}

}  // namespace

AnnotationReport annotate(const Trajectory& traj, Reasoner& reasoner, GraphStore& store) {
  const auto triples = decompose(traj);
  AnnotationReport report;
  report.trajectory_id = traj.id;

  // Pages in order of first appearance, each with the descriptions generated for it.
  std::vector<PageId> page_order;
  std::map<PageId, std::vector<std::string>> collected;
  auto collect = [&](PageId p, std::string text) {
    auto [it, fresh] = collected.try_emplace(p);
    if (fresh) page_order.push_back(p);
    it->second.push_back(std::move(text));
  };
  std::vector<ElementId> element_order;
  std::map<ElementId, NodeAnnotation> element_notes;

  for (const auto& t : triples) {
    const auto& el = store.element(t.element);
    const auto& step = traj.steps[t.step_index];
    TripleContext ctx;
    ctx.source = page_context(store, t.source);
    ctx.element = t.element;
    ctx.element_descriptor = el.visual_descriptor;
    ctx.element_ocr = el.ocr_text;
    ctx.action = t.action;
    ctx.action_text = step.invocation.text_payload;
    ctx.target = page_context(store, t.target);
    for (const auto& rec : store.page(t.source).element_records) {
      if (rec.visual_descriptor == el.visual_descriptor) {
        ctx.element_role = rec.role_hint;
        break;
      }
    }

    auto described = reasoner.describe_triple(traj.task, ctx);
    ++report.describe_calls;
    report.usage += described.usage;

    auto [it, fresh] = element_notes.try_emplace(t.element);
    if (fresh) {
      element_order.push_back(t.element);
      it->second.node = as_node(t.element);
      it->second.before = el.description;
    }
    ++it->second.inputs;
    store.set_element_description(t.element, described.value.element);
    it->second.after = described.value.element;

    collect(t.source, std::move(described.value.source_page));
    collect(t.target, std::move(described.value.target_page));
  }

  for (PageId p : page_order) {
    NodeAnnotation note;
    note.node = as_node(p);
    note.before = store.page(p).description;
    auto inputs = collected[p];
    if (!note.before.empty()) {
      inputs.insert(inputs.begin(), note.before);
      note.included_existing = true;
    }
    note.inputs = inputs.size();
    auto merged = reasoner.merge_page_descriptions(inputs, traj.task, p);
    ++report.merge_calls;
    report.usage += merged.usage;
    store.set_page_description(p, merged.value);
    note.after = std::move(merged.value);
    report.pages.push_back(std::move(note));
  }
  for (ElementId e : element_order) report.elements.push_back(element_notes[e]);
  return report;
}

json to_json_value(const AnnotationReport& report) {
  auto notes = [](const std::vector<NodeAnnotation>& list) {
    json out = json::array();
    for (const auto& n : list) {
      out.push_back(json{{"node", n.node.value},
                         {"before", n.before},
                         {"after", n.after},
                         {"inputs", n.inputs},
                         {"included_existing", n.included_existing}});
    }
    return out;
  };
  return json{{"trajectory", report.trajectory_id},
              {"describe_calls", report.describe_calls},
              {"merge_calls", report.merge_calls},
              {"pages", notes(report.pages)},
              {"elements", notes(report.elements)},
              {"usage", report.usage}};
}

namespace {

json step_record(const Step& s, std::size_t index) {
  json origin;
  if (const auto* sc = std::get_if<ShortcutOrigin>(&s.origin)) {
    origin = json{{"kind", "shortcut"}, {"shortcut", sc->shortcut.value}, {"order", sc->order}};
  } else {
    origin = json{{"kind", "basic"}};
  }
  return json{{"record", "step"},
              {"index", index},
              {"pre_page", s.pre_page.value},
              {"invocation", s.invocation},
              {"acted_element", s.acted_element ? json(s.acted_element->value) : json(nullptr)},
              {"post_page", s.post_page.value},
              {"wall_time_ms", s.wall_time_ms},
              {"usage", s.usage},
              {"origin", origin}};
}

Step step_from_record(const json& j) {
  Step s;
  s.pre_page = PageId{j.at("pre_page").get<std::uint64_t>()};
  s.invocation = j.at("invocation").get<ActionInvocation>();
  if (!j.at("acted_element").is_null()) {
    s.acted_element = ElementId{j.at("acted_element").get<std::uint64_t>()};
  }
  s.post_page = PageId{j.at("post_page").get<std::uint64_t>()};
  s.wall_time_ms = j.at("wall_time_ms").get<std::int64_t>();
  s.usage = j.at("usage").get<ReasonerUsage>();
  const auto& origin = j.at("origin");
  const auto kind = origin.at("kind").get<std::string>();
  if (kind == "shortcut") {
    s.origin = ShortcutOrigin{ShortcutId{origin.at("shortcut").get<std::uint64_t>()},
                              origin.at("order").get<int>()};
  } else if (kind == "basic") {
    s.origin = BasicOrigin{};
  } else {
    throw Error(Errc::malformed_record, "unknown origin \"" + kind + "\"");
  }
  return s;
}

}  // namespace

std::string dump_trajectory(const Trajectory& traj) {
  std::string out = canonical_dump(json{{"record", "header"},
                                        {"id", traj.id},
                                        {"task", traj.task},
                                        {"status", to_string(traj.status)},
                                        {"started_at", traj.started_at},
                                        {"step_count", traj.steps.size()}});
  out += '\n';
  for (std::size_t i = 0; i < traj.steps.size(); ++i) {
    out += canonical_dump(step_record(traj.steps[i], i));
    out += '\n';
  }
  return out;
}

Trajectory parse_trajectory(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  std::size_t expected_steps = 0;
  bool have_header = false;
  Trajectory traj;
  auto fail = [&](const std::string& why) -> void {
    throw Error(Errc::malformed_record, "line " + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& ex) {
      fail(ex.what());
    }
    try {
      const auto kind = rec.at("record").get<std::string>();
      if (kind == "header") {
        if (have_header) fail("second header record");
        have_header = true;
        traj.id = rec.at("id").get<std::string>();
        traj.task = rec.at("task").get<std::string>();
        auto status = parse_trajectory_status(rec.at("status").get<std::string>());
        if (!status) fail("unknown status");
        traj.status = *status;
        traj.started_at = rec.at("started_at").get<std::int64_t>();
        expected_steps = rec.at("step_count").get<std::size_t>();
      } else if (kind == "step") {
        if (!have_header) fail("step before header");
        if (rec.at("index").get<std::size_t>() != traj.steps.size()) fail("step index out of sequence");
        traj.steps.push_back(step_from_record(rec));
      } else {
        fail("unknown record \"" + kind + "\"");
      }
    } catch (const Error&) {
      throw;
    } catch (const std::exception& ex) {
      fail(ex.what());
    }
  }
  ++line_no;
  if (!have_header) fail("missing header record");
  if (traj.steps.size() != expected_steps) {
    fail("expected " + std::to_string(expected_steps) + " steps, found " +
         std::to_string(traj.steps.size()) + " (truncated log)");
  }
  return traj;
}

std::filesystem::path trajectory_path(const std::filesystem::path& dir, const std::string& id) {
  return dir / (id + ".traj.jsonl");
}

void persist(const Trajectory& traj, const std::filesystem::path& dir) {
  if (traj.id.empty() || traj.id.find_first_of("/\\") != std::string::npos) {
    throw Error(Errc::invalid_argument, "trajectory id must be a plain file name: \"" + traj.id + "\"");
  }
  std::filesystem::create_directories(dir);
  std::ofstream out(trajectory_path(dir, traj.id), std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write " + trajectory_path(dir, traj.id).string());
  out << dump_trajectory(traj);
}

Trajectory load_trajectory(const std::filesystem::path& dir, const std::string& id) {
  const auto file = trajectory_path(dir, id);
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(Errc::unknown_id, "no trajectory \"" + id + "\" in " + dir.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_trajectory(buf.str());
  } catch (const Error& ex) {
    throw Error(ex.code(), file.string() + ": " + ex.what());
  }
}

std::vector<Trajectory> load_all_trajectories(const std::filesystem::path& dir) {
  std::vector<std::string> ids;
  if (std::filesystem::is_directory(dir)) {
    constexpr std::string_view suffix = ".traj.jsonl";
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      const auto name = entry.path().filename().string();
      if (name.size() > suffix.size() && name.ends_with(suffix)) {
        ids.push_back(name.substr(0, name.size() - suffix.size()));
      }
    }
  }
  std::sort(ids.begin(), ids.end());
  std::vector<Trajectory> out;
  for (const auto& id : ids) out.push_back(load_trajectory(dir, id));
  return out;
}

}  // namespace evoagent
