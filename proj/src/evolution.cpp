#include "evoagent/evolution.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "evoagent/error.hpp"

namespace evoagent {

using nlohmann::json;

namespace {

// A maximal run of element-acting steps inside one trajectory.
struct Segment {
  std::size_t trajectory = 0;
  std::vector<PatternStep> tokens;
  std::vector<std::size_t> step_index;
};

std::vector<Segment> segments_of(const std::vector<Trajectory>& trajectories) {
  std::vector<Segment> out;
  for (std::size_t t = 0; t < trajectories.size(); ++t) {
    Segment cur{t, {}, {}};
    const auto& steps = trajectories[t].steps;
    for (std::size_t i = 0; i <= steps.size(); ++i) {
      if (i < steps.size() && steps[i].acted_element) {
        cur.tokens.push_back({*steps[i].acted_element, steps[i].invocation.kind});
        cur.step_index.push_back(i);
        continue;
      }
      if (!cur.tokens.empty()) out.push_back(std::move(cur));
      cur = Segment{t, {}, {}};
    }
  }
  return out;
}

struct Position {
  std::size_t segment;
  std::size_t offset;
};

bool matches_at(const Segment& seg, std::size_t at, const std::vector<PatternStep>& pattern) {
  return at + pattern.size() <= seg.tokens.size() &&
         std::equal(pattern.begin(), pattern.end(), seg.tokens.begin() + static_cast<std::ptrdiff_t>(at));
}

// Greedy left-to-right, skipping past each accepted occurrence.
std::vector<Position> greedy_occurrences(const std::vector<Segment>& segs,
                                         const std::vector<PatternStep>& pattern) {
  std::vector<Position> out;
  for (std::size_t s = 0; s < segs.size(); ++s) {
    std::size_t i = 0;
    while (i + pattern.size() <= segs[s].tokens.size()) {
      if (matches_at(segs[s], i, pattern)) {
        out.push_back({s, i});
        i += pattern.size();
      } else {
        ++i;
      }
    }
  }
  return out;
}

}  // namespace

std::vector<PatternCandidate> mine_patterns(const std::vector<Trajectory>& trajectories,
                                            std::size_t min_len, std::size_t min_support) {
  min_len = std::max<std::size_t>(min_len, 1);
  min_support = std::max<std::size_t>(min_support, 1);
  const auto segs = segments_of(trajectories);

  // Every distinct substring, with all of its (possibly overlapping) positions.
  std::map<std::vector<PatternStep>, std::vector<Position>> positions;
  for (std::size_t s = 0; s < segs.size(); ++s) {
    const auto& tok = segs[s].tokens;
    for (std::size_t i = 0; i < tok.size(); ++i) {
      for (std::size_t len = min_len; i + len <= tok.size(); ++len) {
        positions[{tok.begin() + static_cast<std::ptrdiff_t>(i),
                   tok.begin() + static_cast<std::ptrdiff_t>(i + len)}]
            .push_back({s, i});
      }
    }
  }

  struct Ranked {
    PatternCandidate candidate;
    std::pair<std::size_t, std::size_t> first;  // (trajectory order, step index)
  };
  std::vector<Ranked> kept;
  for (const auto& [pattern, where] : positions) {
    const auto greedy = greedy_occurrences(segs, pattern);
    if (greedy.size() < min_support) continue;

    // Any extension keeping the same support must sit next to one of the pattern's positions,
    // so only those neighbours need checking.
    std::set<PatternStep> left, right;
    for (const auto& p : where) {
      const auto& tok = segs[p.segment].tokens;
      if (p.offset > 0) left.insert(tok[p.offset - 1]);
      if (p.offset + pattern.size() < tok.size()) right.insert(tok[p.offset + pattern.size()]);
    }
    bool maximal = true;
    for (const auto& a : left) {
      std::vector<PatternStep> ext{a};
      ext.insert(ext.end(), pattern.begin(), pattern.end());
      if (greedy_occurrences(segs, ext).size() == greedy.size()) {
        maximal = false;
        break;
      }
    }
    for (auto it = right.begin(); maximal && it != right.end(); ++it) {
      auto ext = pattern;
      ext.push_back(*it);
      if (greedy_occurrences(segs, ext).size() == greedy.size()) maximal = false;
    }
    if (!maximal) continue;

    Ranked r;
    r.candidate.steps = pattern;
    r.candidate.support = greedy.size();
    for (const auto& p : greedy) {
      const auto& seg = segs[p.segment];
      r.candidate.occurrences.push_back({trajectories[seg.trajectory].id, seg.step_index[p.offset]});
    }
    const auto& first = segs[greedy.front().segment];
    r.first = {first.trajectory, first.step_index[greedy.front().offset]};
    kept.push_back(std::move(r));
  }

  std::sort(kept.begin(), kept.end(), [](const Ranked& a, const Ranked& b) {
    if (a.candidate.support != b.candidate.support) return a.candidate.support > b.candidate.support;
    if (a.candidate.steps.size() != b.candidate.steps.size()) {
      return a.candidate.steps.size() > b.candidate.steps.size();
    }
    if (a.first != b.first) return a.first < b.first;
    return a.candidate.steps < b.candidate.steps;
  });
  std::vector<PatternCandidate> out;
  out.reserve(kept.size());
  for (auto& r : kept) out.push_back(std::move(r.candidate));
  return out;
}

namespace {

SliceStep slice_step(const GraphStore& store, const Step& step) {
  const auto& el = store.element(*step.acted_element);
  SliceStep s;
  s.element = el.id;
  s.descriptor = el.visual_descriptor;
  s.kind = step.invocation.kind;
  s.text = step.invocation.text_payload;
  s.swipe = step.invocation.swipe_params;
  s.element_description = el.description;
  s.page_description = store.page(step.pre_page).description;
  return s;
}

std::optional<ShortcutId> existing_shortcut(const GraphStore& store,
                                            const std::vector<PatternStep>& pattern) {
  for (const auto& [id, node] : store.shortcuts()) {
    const auto steps = store.shortcut_steps(id);
    if (steps.size() != pattern.size()) continue;
    bool same = true;
    for (std::size_t i = 0; same && i < steps.size(); ++i) {
      same = steps[i].element == pattern[i].element && steps[i].kind == pattern[i].kind;
    }
    if (same) return id;
  }
  return std::nullopt;
}

}  // namespace

EvolutionReport evolve(const std::string& task, const Trajectory& trajectory, Reasoner& reasoner,
                       GraphStore& store, const ActionSpace& space, const EvolutionConfig& config,
                       const std::vector<Trajectory>& history) {
  EvolutionReport report;
  report.trajectory_id = trajectory.id;
  report.space = space;
  if (trajectory.status != TrajectoryStatus::success) {
    report.outcome = "skipped: trajectory not successful";
    return report;
  }

  std::vector<Trajectory> pool{trajectory};
  if (config.cross_trajectory) {
    for (const auto& t : history) {
      if (t.id != trajectory.id && t.task == task && t.status == TrajectoryStatus::success) {
        pool.push_back(t);
      }
    }
  }

  if (config.gate) {
    std::vector<SliceStep> all;
    for (const auto& s : trajectory.steps) {
      if (s.acted_element) all.push_back(slice_step(store, s));
    }
    auto judged = reasoner.judge_repetitive(task, all);
    report.usage += judged.usage;
    if (!judged.value) {
      report.outcome = "gated";
      return report;
    }
  }

  report.candidates = mine_patterns(pool, config.min_len, config.effective_min_support());
  std::map<std::string, const Trajectory*> by_id;
  for (const auto& t : pool) by_id.emplace(t.id, &t);

  const auto limit = std::min(config.max_new_shortcuts, report.candidates.size());
  for (std::size_t c = 0; c < limit; ++c) {
    const auto& cand = report.candidates[c];
    if (existing_shortcut(store, cand.steps)) {
      report.skipped.push_back({cand.steps, "skipped: duplicate"});
      continue;
    }
    try {
      const auto& occ = cand.occurrences.front();
      const auto& source = *by_id.at(occ.trajectory_id);
      std::vector<SliceStep> slice;
      for (std::size_t i = 0; i < cand.steps.size(); ++i) {
        slice.push_back(slice_step(store, source.steps[occ.start + i]));
      }
      auto draft = reasoner.synthesize_shortcut(task, slice);
      report.usage += draft.usage;

      ShortcutSpec spec;
      spec.name = draft.value.name;
      spec.description = draft.value.description;
      spec.applicability = draft.value.applicability;
      for (std::size_t i = 0; i < slice.size(); ++i) {
        HighLevelStep step;
        step.element = slice[i].element;
        step.kind = slice[i].kind;
        step.param_template = draft.value.templates[i];
        step.swipe_params = slice[i].swipe;
        spec.steps.push_back(std::move(step));
      }
      std::set<std::string> sources;
      for (const auto& o : cand.occurrences) sources.insert(o.trajectory_id);
      spec.source_trajectory_ids.assign(sources.begin(), sources.end());

      const auto made = store.create_shortcut(spec);
      if (!made.created) {
        report.skipped.push_back({cand.steps, "skipped: duplicate"});
        continue;
      }
      report.created.push_back(made.id);
      report.space = expand(report.space, store.high_level_action(made.id));
    } catch (const Error& ex) {
      report.skipped.push_back({cand.steps, std::string("skipped: ") + ex.what()});
    }
  }
  report.outcome = "evolved";
  return report;
}

json to_json_value(const EvolutionReport& report) {
  auto steps_json = [](const std::vector<PatternStep>& steps) {
    json out = json::array();
    for (const auto& s : steps) out.push_back(json{{"element", s.element.value}, {"kind", to_string(s.kind)}});
    return out;
  };
  json candidates = json::array();
  for (const auto& c : report.candidates) {
    json occ = json::array();
    for (const auto& o : c.occurrences) occ.push_back(json{{"trajectory", o.trajectory_id}, {"start", o.start}});
    candidates.push_back(json{{"steps", steps_json(c.steps)}, {"support", c.support}, {"occurrences", occ}});
  }
  json created = json::array();
  for (auto id : report.created) created.push_back(id.value);
  json skipped = json::array();
  for (const auto& s : report.skipped) skipped.push_back(json{{"steps", steps_json(s.steps)}, {"reason", s.reason}});
  json space = json::array();
  for (const auto& [id, hla] : report.space.high_level()) {
    space.push_back(json{{"id", id.value}, {"name", hla.name}, {"steps", hla.steps.size()}});
  }
  return json{{"trajectory", report.trajectory_id},
              {"outcome", report.outcome},
              {"candidates", candidates},
              {"created", created},
              {"skipped", skipped},
              {"high_level_actions", space},
              {"usage", report.usage}};
}

}  // namespace evoagent
