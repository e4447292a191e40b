#include "evoagent/memory_graph.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <tuple>

#include "evoagent/error.hpp"
#include "evoagent/serialization.hpp"

namespace evoagent {

using nlohmann::json;

std::string_view to_string(EdgeKind kind) {
  switch (kind) {
    case EdgeKind::has_element: return "HAS_ELEMENT";
    case EdgeKind::composed_of: return "COMPOSED_OF";
    case EdgeKind::leads_to: return "LEADS_TO";
  }
  return "?";
}

namespace {

std::optional<EdgeKind> parse_edge_kind(std::string_view name) {
  for (auto k : {EdgeKind::has_element, EdgeKind::composed_of, EdgeKind::leads_to}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

std::string describe_edge(const Edge& e) {
  std::string out = std::string(to_string(e.kind)) + " " + to_string(e.src) + "->" +
                    to_string(e.dst);
  if (e.attrs) out += " (order " + std::to_string(e.attrs->order) + ")";
  return out;
}

}  // namespace

bool EdgeOrder::operator()(const Edge& a, const Edge& b) const noexcept {
  return std::tuple(a.kind, a.src, a.dst, a.order()) < std::tuple(b.kind, b.src, b.dst, b.order());
}

GraphStore::GraphStore(std::shared_ptr<Clock> clock, std::shared_ptr<const Embedder> embedder)
    : clock_(std::move(clock)), embedder_(std::move(embedder)) {
  if (!clock_ || !embedder_) throw Error(Errc::invalid_argument, "store needs a clock and embedder");
}

PageId GraphStore::upsert_page(const ScreenObservation& obs, double sim_threshold) {
  const auto fp = page_fingerprint(obs);
  PageNode* best = nullptr;
  double best_sim = -1.0;
  for (auto& [id, page] : pages_) {
    const double sim = fingerprint_similarity(fp, page.fingerprint);
    if (sim >= sim_threshold && sim > best_sim) {
      best = &page;
      best_sim = sim;
    }
  }
  const auto now = clock_->now_ms();
  if (best) {
    best->updated_at = now;
    return best->id;
  }
  PageNode node;
  node.id = PageId{next_id()};
  node.element_records = obs.elements;
  node.screenshot_ref = obs.raster_ref;
  node.fingerprint = fp;
  node.created_at = now;
  node.updated_at = now;
  const auto id = node.id;
  pages_.emplace(id, std::move(node));
  return id;
}

ElementId GraphStore::add_element(PageId page, const DetectedElement& detected,
                                  Interaction interaction, double reuse_threshold) {
  if (!pages_.contains(page)) {
    throw Error(Errc::unknown_page, "unknown page " + to_string(page));
  }
  const auto emb = quantize(embedder_->embed(detected.visual_descriptor));

  std::optional<ElementId> reuse;
  double best = -2.0;
  for (auto id : elements_of(page)) {
    const double sim = cosine(index_.at(id), emb);
    if (sim >= reuse_threshold && sim > best) {
      reuse = id;
      best = sim;
    }
  }
  if (reuse) return *reuse;

  ElementNode node;
  node.id = ElementId{next_id()};
  node.visual_descriptor = detected.visual_descriptor;
  node.interaction = std::move(interaction);
  node.bbox = detected.bbox;
  node.ocr_text = detected.ocr_text;
  const auto id = node.id;
  elements_.emplace(id, std::move(node));
  index_.emplace(id, emb);
  edges_.insert(Edge{EdgeKind::has_element, as_node(page), as_node(id), std::nullopt});
  return id;
}

void GraphStore::link_leads_to(ElementId element, PageId page) {
  if (!elements_.contains(element)) {
    throw Error(Errc::unknown_node, "unknown element " + to_string(element));
  }
  if (!pages_.contains(page)) throw Error(Errc::unknown_node, "unknown page " + to_string(page));
  edges_.insert(Edge{EdgeKind::leads_to, as_node(element), as_node(page), std::nullopt});
}

CreateShortcutResult GraphStore::create_shortcut(const ShortcutSpec& spec) {
  if (spec.steps.empty()) throw Error(Errc::empty_steps, "shortcut spec has no steps");
  for (const auto& step : spec.steps) {
    if (!elements_.contains(step.element)) {
      throw Error(Errc::unknown_element, "shortcut references unknown element " +
                                             to_string(step.element));
    }
  }
  check_high_level_steps(spec.steps);

  for (const auto& [id, node] : shortcuts_) {
    const auto existing = shortcut_steps(id);
    const bool same = std::equal(existing.begin(), existing.end(), spec.steps.begin(),
                                 spec.steps.end(), [](const auto& a, const auto& b) {
                                   return a.element == b.element && a.kind == b.kind;
                                 });
    if (same) return {id, false};
  }

  ShortcutNode node;
  node.id = ShortcutId{next_id()};
  node.name = spec.name;
  node.description = spec.description;
  node.applicability = spec.applicability;
  node.source_trajectory_ids = spec.source_trajectory_ids;
  const auto id = node.id;
  shortcuts_.emplace(id, std::move(node));
  for (std::size_t i = 0; i < spec.steps.size(); ++i) {
    const auto& step = spec.steps[i];
    edges_.insert(Edge{EdgeKind::composed_of, as_node(id), as_node(step.element),
                       ComposedOfAttrs{static_cast<int>(i + 1), step.kind,
                                       step_action_params(step)}});
  }
  return {id, true};
}

std::vector<ShortcutMembership> GraphStore::shortcuts_for_element(ElementId element) const {
  if (!elements_.contains(element)) {
    throw Error(Errc::unknown_element, "unknown element " + to_string(element));
  }
  std::vector<ShortcutMembership> out;
  for (const auto& e : edges_) {
    if (e.kind == EdgeKind::composed_of && e.dst == as_node(element)) {
      out.push_back({ShortcutId{e.src.value}, e.order()});
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::tie(a.shortcut, a.order) < std::tie(b.shortcut, b.order);
  });
  return out;
}

std::vector<ElementSimilarity> GraphStore::nearest_elements(const Embedding& query, std::size_t k,
                                                            double min_sim) const {
  if (!query.is_unit()) {
    throw Error(Errc::non_normalized, "query embedding is not unit-norm");
  }
  std::vector<ElementSimilarity> hits;
  for (const auto& [id, emb] : index_) {
    const double sim = cosine(query, emb);
    if (sim >= min_sim) hits.push_back({id, sim});
  }
  std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.element < b.element;
  });
  if (hits.size() > k) hits.resize(k);
  return hits;
}

void GraphStore::remove_node(NodeId node) {
  const auto role = role_of(node);
  if (!role) throw Error(Errc::unknown_node, "unknown node " + to_string(node));

  if (*role == NodeRole::element) {
    std::vector<ShortcutId> dependents;
    for (const auto& m : shortcuts_for_element(ElementId{node.value})) {
      dependents.push_back(m.shortcut);
    }
    std::sort(dependents.begin(), dependents.end());
    dependents.erase(std::unique(dependents.begin(), dependents.end()), dependents.end());
    for (auto s : dependents) remove_node(as_node(s));
    elements_.erase(ElementId{node.value});
    index_.erase(ElementId{node.value});
  } else if (*role == NodeRole::page) {
    pages_.erase(PageId{node.value});
  } else {
    shortcuts_.erase(ShortcutId{node.value});
  }
  std::erase_if(edges_, [&](const Edge& e) { return e.src == node || e.dst == node; });
}

void GraphStore::set_page_description(PageId page, std::string description) {
  auto it = pages_.find(page);
  if (it == pages_.end()) throw Error(Errc::unknown_page, "unknown page " + to_string(page));
  it->second.description = std::move(description);
  it->second.updated_at = clock_->now_ms();
}

void GraphStore::set_element_description(ElementId element, std::string description) {
  auto it = elements_.find(element);
  if (it == elements_.end()) {
    throw Error(Errc::unknown_element, "unknown element " + to_string(element));
  }
  it->second.description = std::move(description);
}

const PageNode* GraphStore::find_page(PageId id) const {
  auto it = pages_.find(id);
  return it == pages_.end() ? nullptr : &it->second;
}

const ElementNode* GraphStore::find_element(ElementId id) const {
  auto it = elements_.find(id);
  return it == elements_.end() ? nullptr : &it->second;
}

const ShortcutNode* GraphStore::find_shortcut(ShortcutId id) const {
  auto it = shortcuts_.find(id);
  return it == shortcuts_.end() ? nullptr : &it->second;
}

const PageNode& GraphStore::page(PageId id) const {
  if (const auto* p = find_page(id)) return *p;
  throw Error(Errc::unknown_page, "unknown page " + to_string(id));
}

const ElementNode& GraphStore::element(ElementId id) const {
  if (const auto* e = find_element(id)) return *e;
  throw Error(Errc::unknown_element, "unknown element " + to_string(id));
}

const ShortcutNode& GraphStore::shortcut(ShortcutId id) const {
  if (const auto* s = find_shortcut(id)) return *s;
  throw Error(Errc::unknown_node, "unknown shortcut " + to_string(id));
}

const Embedding& GraphStore::embedding(ElementId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw Error(Errc::unknown_element, "no embedding for " + to_string(id));
  return it->second;
}

std::optional<NodeRole> GraphStore::role_of(NodeId id) const {
  if (pages_.contains(PageId{id.value})) return NodeRole::page;
  if (elements_.contains(ElementId{id.value})) return NodeRole::element;
  if (shortcuts_.contains(ShortcutId{id.value})) return NodeRole::shortcut;
  return std::nullopt;
}

std::vector<ElementId> GraphStore::elements_of(PageId page) const {
  std::vector<ElementId> out;
  const auto src = as_node(page);
  for (auto it = edges_.lower_bound(Edge{EdgeKind::has_element, src, NodeId{0}, std::nullopt});
       it != edges_.end() && it->kind == EdgeKind::has_element && it->src == src; ++it) {
    out.push_back(ElementId{it->dst.value});
  }
  return out;
}

std::vector<PageId> GraphStore::leads_to(ElementId element) const {
  std::vector<PageId> out;
  const auto src = as_node(element);
  for (auto it = edges_.lower_bound(Edge{EdgeKind::leads_to, src, NodeId{0}, std::nullopt});
       it != edges_.end() && it->kind == EdgeKind::leads_to && it->src == src; ++it) {
    out.push_back(PageId{it->dst.value});
  }
  return out;
}

std::vector<PageId> GraphStore::pages_containing(ElementId element) const {
  std::vector<PageId> out;
  for (const auto& e : edges_) {
    if (e.kind == EdgeKind::has_element && e.dst == as_node(element)) {
      out.push_back(PageId{e.src.value});
    }
  }
  return out;
}

std::vector<HighLevelStep> GraphStore::shortcut_steps(ShortcutId id) const {
  if (!shortcuts_.contains(id)) throw Error(Errc::unknown_node, "unknown shortcut " + to_string(id));
  std::vector<std::pair<int, HighLevelStep>> ordered;
  const auto src = as_node(id);
  for (auto it = edges_.lower_bound(Edge{EdgeKind::composed_of, src, NodeId{0}, std::nullopt});
       it != edges_.end() && it->kind == EdgeKind::composed_of && it->src == src; ++it) {
    HighLevelStep step;
    step.element = ElementId{it->dst.value};
    step.kind = it->attrs->atomic_action;
    apply_action_params(it->attrs->action_params, step);
    ordered.emplace_back(it->attrs->order, std::move(step));
  }
  std::sort(ordered.begin(), ordered.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<HighLevelStep> steps;
  steps.reserve(ordered.size());
  for (auto& [order, step] : ordered) steps.push_back(std::move(step));
  return steps;
}

HighLevelAction GraphStore::high_level_action(ShortcutId id) const {
  const auto& node = shortcut(id);
  HighLevelAction hla;
  hla.id = id;
  hla.name = node.name;
  hla.description = node.description;
  hla.applicability = node.applicability;
  hla.steps = shortcut_steps(id);
  hla.source_trajectory_ids = node.source_trajectory_ids;
  return hla;
}

std::vector<std::string> GraphStore::check_integrity() const {
  std::vector<std::string> problems;
  std::map<ShortcutId, std::vector<int>> orders;
  for (const auto& e : edges_) {
    const auto src = role_of(e.src);
    const auto dst = role_of(e.dst);
    bool ok = false;
    switch (e.kind) {
      case EdgeKind::has_element:
        ok = src == NodeRole::page && dst == NodeRole::element && !e.attrs;
        break;
      case EdgeKind::composed_of:
        ok = src == NodeRole::shortcut && dst == NodeRole::element && e.attrs;
        if (ok) orders[ShortcutId{e.src.value}].push_back(e.attrs->order);
        break;
      case EdgeKind::leads_to:
        ok = src == NodeRole::element && dst == NodeRole::page && !e.attrs;
        break;
    }
    if (!ok) problems.push_back("bad edge " + describe_edge(e));
  }
  for (const auto& [id, node] : shortcuts_) {
    auto it = orders.find(id);
    if (it == orders.end()) {
      problems.push_back("shortcut " + to_string(id) + " has no COMPOSED_OF edge");
      continue;
    }
    auto got = it->second;
    std::sort(got.begin(), got.end());
    for (std::size_t i = 0; i < got.size(); ++i) {
      if (got[i] != static_cast<int>(i + 1)) {
        problems.push_back("shortcut " + to_string(id) + " step orders are not 1..k");
        break;
      }
    }
  }
  for (const auto& [id, node] : elements_) {
    auto it = index_.find(id);
    if (it == index_.end()) {
      problems.push_back("element " + to_string(id) + " has no embedding");
    } else if (!it->second.is_unit()) {
      problems.push_back("element " + to_string(id) + " embedding is not unit-norm");
    }
    if (!node.bbox.valid()) problems.push_back("element " + to_string(id) + " bbox out of range");
  }
  for (const auto& [id, emb] : index_) {
    if (!elements_.contains(id)) problems.push_back("embedding for missing element " + to_string(id));
  }
  for (const auto& [id, page] : pages_) {
    if (page.fingerprint != fingerprint_of(page.element_records)) {
      problems.push_back("page " + to_string(id) + " fingerprint does not match its elements");
    }
  }
  return problems;
}

std::string GraphStore::export_graph() const {
  std::ostringstream out;
  auto line = [&](const json& j) { out << canonical_dump(j) << '\n'; };

  for (const auto& [id, p] : pages_) {
    line(json{{"rec", "page"},
              {"id", id.value},
              {"description", p.description},
              {"element_records", p.element_records},
              {"screenshot_ref", p.screenshot_ref},
              {"fingerprint", p.fingerprint},
              {"created_at", p.created_at},
              {"updated_at", p.updated_at}});
  }
  for (const auto& [id, e] : elements_) {
    line(json{{"rec", "element"},
              {"id", id.value},
              {"description", e.description},
              {"visual_descriptor", e.visual_descriptor},
              {"embedding_ref", e.embedding_ref().value},
              {"interaction",
               json{{"kind", to_string(e.interaction.kind)},
                    {"default_params", e.interaction.default_params}}},
              {"bbox", e.bbox},
              {"ocr_text", e.ocr_text}});
  }
  for (const auto& [id, s] : shortcuts_) {
    line(json{{"rec", "shortcut"},
              {"id", id.value},
              {"name", s.name},
              {"description", s.description},
              {"applicability", s.applicability},
              {"source_trajectory_ids", s.source_trajectory_ids}});
  }
  for (const auto& [id, emb] : index_) {
    line(json{{"rec", "embedding"},
              {"id", id.value},
              {"values", std::vector<double>(emb.values().begin(), emb.values().end())}});
  }
  for (const auto& e : edges_) {
    json j{{"rec", "edge"}, {"kind", to_string(e.kind)}, {"src", e.src.value}, {"dst", e.dst.value}};
    if (e.attrs) {
      j["attrs"] = json{{"order", e.attrs->order},
                        {"atomic_action", to_string(e.attrs->atomic_action)},
                        {"action_params", e.attrs->action_params}};
    }
    line(j);
  }
  return out.str();
}

GraphStore GraphStore::import_graph(std::string_view dump, std::shared_ptr<Clock> clock,
                                    std::shared_ptr<const Embedder> embedder) {
  GraphStore store(std::move(clock), std::move(embedder));
  std::uint64_t max_id = 0;
  std::size_t line_no = 0;
  std::vector<std::pair<std::size_t, Edge>> pending_edges;

  std::size_t pos = 0;
  while (pos < dump.size()) {
    auto end = dump.find('\n', pos);
    if (end == std::string_view::npos) end = dump.size();
    const auto text = dump.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (text.empty()) continue;

    const auto fail = [&](const std::string& why) {
      return Error(Errc::malformed_record, "line " + std::to_string(line_no) + ": " + why);
    };
    try {
      const auto j = json::parse(text);
      const auto rec = j.at("rec").get<std::string>();
      if (rec == "edge") {
        Edge e;
        const auto kind = parse_edge_kind(j.at("kind").get<std::string>());
        if (!kind) throw fail("unknown edge kind");
        e.kind = *kind;
        e.src = NodeId{j.at("src").get<std::uint64_t>()};
        e.dst = NodeId{j.at("dst").get<std::uint64_t>()};
        if (auto it = j.find("attrs"); it != j.end()) {
          e.attrs = ComposedOfAttrs{it->at("order").get<int>(),
                                    action_kind_from_json(it->at("atomic_action")),
                                    it->at("action_params")};
        }
        if ((e.kind == EdgeKind::composed_of) != e.attrs.has_value()) {
          throw fail("attrs belong on COMPOSED_OF edges only");
        }
        pending_edges.emplace_back(line_no, std::move(e));
        continue;
      }

      const auto id = j.at("id").get<std::uint64_t>();
      if (id == 0) throw fail("node id 0 is reserved");
      max_id = std::max(max_id, id);
      if (rec == "page") {
        PageNode p;
        p.id = PageId{id};
        p.description = j.at("description").get<std::string>();
        p.element_records = j.at("element_records").get<std::vector<DetectedElement>>();
        p.screenshot_ref = j.at("screenshot_ref").get<std::string>();
        p.fingerprint = j.at("fingerprint").get<Fingerprint>();
        p.created_at = j.at("created_at").get<std::int64_t>();
        p.updated_at = j.at("updated_at").get<std::int64_t>();
        if (p.fingerprint != fingerprint_of(p.element_records)) {
          throw fail("page fingerprint does not match its element records");
        }
        if (store.node_exists(as_node(p.id))) throw fail("duplicate node id");
        store.pages_.emplace(p.id, std::move(p));
      } else if (rec == "element") {
        ElementNode e;
        e.id = ElementId{id};
        e.description = j.at("description").get<std::string>();
        e.visual_descriptor = j.at("visual_descriptor").get<std::string>();
        const auto& inter = j.at("interaction");
        e.interaction.kind = action_kind_from_json(inter.at("kind"));
        e.interaction.default_params = inter.at("default_params");
        e.bbox = j.at("bbox").get<BBox>();
        e.ocr_text = j.at("ocr_text").get<std::string>();
        if (j.at("embedding_ref").get<std::uint64_t>() != id) throw fail("embedding_ref mismatch");
        if (store.node_exists(as_node(e.id))) throw fail("duplicate node id");
        store.elements_.emplace(e.id, std::move(e));
      } else if (rec == "shortcut") {
        ShortcutNode s;
        s.id = ShortcutId{id};
        s.name = j.at("name").get<std::string>();
        s.description = j.at("description").get<std::string>();
        s.applicability = j.at("applicability").get<std::string>();
        s.source_trajectory_ids = j.at("source_trajectory_ids").get<std::vector<std::string>>();
        if (store.node_exists(as_node(s.id))) throw fail("duplicate node id");
        store.shortcuts_.emplace(s.id, std::move(s));
      } else if (rec == "embedding") {
        Embedding emb(j.at("values").get<std::vector<double>>());
        if (!emb.is_unit()) throw fail("embedding is not unit-norm");
        if (!store.index_.emplace(ElementId{id}, std::move(emb)).second) {
          throw fail("duplicate embedding");
        }
      } else {
        throw fail("unknown record type \"" + rec + "\"");
      }
    } catch (const Error&) {
      throw;
    } catch (const std::exception& ex) {
      throw fail(ex.what());
    }
  }

  for (auto& [ln, e] : pending_edges) {
    if (!store.node_exists(e.src) || !store.node_exists(e.dst)) {
      throw Error(Errc::referential_integrity,
                  "line " + std::to_string(ln) + ": dangling edge " + describe_edge(e));
    }
    store.edges_.insert(std::move(e));
  }
  for (const auto& [id, emb] : store.index_) {
    if (!store.elements_.contains(id)) {
      throw Error(Errc::referential_integrity, "embedding for missing element " + to_string(id));
    }
  }
  if (auto problems = store.check_integrity(); !problems.empty()) {
    throw Error(Errc::referential_integrity, problems.front());
  }
  store.next_id_ = max_id + 1;
  return store;
}

void GraphStore::save(const std::filesystem::path& file) const {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write " + file.string());
  out << export_graph();
}

GraphStore GraphStore::load(const std::filesystem::path& file, std::shared_ptr<Clock> clock,
                            std::shared_ptr<const Embedder> embedder) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot read " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return import_graph(buf.str(), std::move(clock), std::move(embedder));
}

bool GraphStore::same_content(const GraphStore& other) const {
  return pages_ == other.pages_ && elements_ == other.elements_ &&
         shortcuts_ == other.shortcuts_ &&
         std::equal(edges_.begin(), edges_.end(), other.edges_.begin(), other.edges_.end()) &&
         index_ == other.index_;
}

ActionSpace action_space_from_store(const GraphStore& store) {
  ActionSpace space;
  for (const auto& [id, node] : store.shortcuts()) {
    space = expand(space, store.high_level_action(id));
  }
  return space;
}

}  // namespace evoagent
