#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "evoagent/action_space.hpp"
#include "evoagent/clock.hpp"
#include "evoagent/embedding.hpp"
#include "evoagent/ids.hpp"
#include "evoagent/observation.hpp"

namespace evoagent {

inline constexpr double kDefaultPageThreshold = 0.8;
inline constexpr double kDefaultElementReuseThreshold = 0.95;

struct PageNode {
  PageId id;
  std::string description;
  std::vector<DetectedElement> element_records;
  std::string screenshot_ref;
  Fingerprint fingerprint;
  std::int64_t created_at = 0;
  std::int64_t updated_at = 0;

  bool operator==(const PageNode&) const = default;
};

struct Interaction {
  BasicActionKind kind = BasicActionKind::tap;
  nlohmann::json default_params = nlohmann::json::object();

  bool operator==(const Interaction&) const = default;
};

// The embedding lives in the store's vector index under the element's own id.
struct ElementNode {
  ElementId id;
  std::string description;
  std::string visual_descriptor;
  Interaction interaction;
  BBox bbox;
  std::string ocr_text;

  ElementId embedding_ref() const noexcept { return id; }
  bool operator==(const ElementNode&) const = default;
};

struct ShortcutNode {
  ShortcutId id;
  std::string name;
  std::string description;
  std::string applicability;
  std::vector<std::string> source_trajectory_ids;

  bool operator==(const ShortcutNode&) const = default;
};

enum class EdgeKind { has_element, composed_of, leads_to };

std::string_view to_string(EdgeKind kind);

struct ComposedOfAttrs {
  int order = 1;
  BasicActionKind atomic_action = BasicActionKind::tap;
  nlohmann::json action_params = nlohmann::json::object();

  bool operator==(const ComposedOfAttrs&) const = default;
};

struct Edge {
  EdgeKind kind = EdgeKind::has_element;
  NodeId src;
  NodeId dst;
  std::optional<ComposedOfAttrs> attrs;  // COMPOSED_OF only

  int order() const noexcept { return attrs ? attrs->order : 0; }
  bool operator==(const Edge&) const = default;
};

// Canonical edge order: (kind, src, dst, order).
struct EdgeOrder {
  bool operator()(const Edge& a, const Edge& b) const noexcept;
};

struct ShortcutMembership {
  ShortcutId shortcut;
  int order = 1;

  bool operator==(const ShortcutMembership&) const = default;
};

struct ElementSimilarity {
  ElementId element;
  double similarity = 0.0;
};

struct CreateShortcutResult {
  ShortcutId id;
  bool created = false;
};

enum class NodeRole { page, element, shortcut };

// Chain-structured memory: page, element, and shortcut nodes, typed edges, and an exact
// vector index of element embeddings.
//
// Single writer, many readers. Mutating calls need exclusive access; const calls may run
// concurrently against an unchanging store. The store can move between threads.
class GraphStore {
 public:
  explicit GraphStore(std::shared_ptr<Clock> clock = std::make_shared<SystemClock>(),
                      std::shared_ptr<const Embedder> embedder =
                          std::make_shared<ReferenceEmbedder>());

  const Embedder& embedder() const noexcept { return *embedder_; }
  std::shared_ptr<const Embedder> embedder_ptr() const noexcept { return embedder_; }
  Clock& clock() const noexcept { return *clock_; }

  /// Returns the best existing page with fingerprint similarity >= sim_threshold (ties go to
  /// the lower id, updated_at refreshed), or a fresh page with an empty description.
  PageId upsert_page(const ScreenObservation& obs, double sim_threshold = kDefaultPageThreshold);

  /// Reuses an element already on the page when embedding cosine >= reuse_threshold.
  /// Throws Errc::unknown_page.
  ElementId add_element(PageId page, const DetectedElement& detected, Interaction interaction,
                        double reuse_threshold = kDefaultElementReuseThreshold);

  /// Idempotent. Throws Errc::unknown_node.
  void link_leads_to(ElementId element, PageId page);

  /// Identical (element, kind) step sequences dedupe to the existing shortcut.
  /// Throws Errc::empty_steps or Errc::unknown_element.
  CreateShortcutResult create_shortcut(const ShortcutSpec& spec);

  /// Sorted by (shortcut id, order). Throws Errc::unknown_element.
  std::vector<ShortcutMembership> shortcuts_for_element(ElementId element) const;

  /// Exact linear scan: similarity >= min_sim, descending, ties by ascending id, at most k.
  /// Throws Errc::non_normalized when the query is not unit-norm.
  std::vector<ElementSimilarity> nearest_elements(const Embedding& query, std::size_t k,
                                                  double min_sim) const;

  /// Removes a node with its incident edges. Removing an element also removes every
  /// shortcut composed of it. Throws Errc::unknown_node.
  void remove_node(NodeId node);

  void set_page_description(PageId page, std::string description);
  void set_element_description(ElementId element, std::string description);

  const PageNode* find_page(PageId id) const;
  const ElementNode* find_element(ElementId id) const;
  const ShortcutNode* find_shortcut(ShortcutId id) const;
  const PageNode& page(PageId id) const;
  const ElementNode& element(ElementId id) const;
  const ShortcutNode& shortcut(ShortcutId id) const;
  const Embedding& embedding(ElementId id) const;
  std::optional<NodeRole> role_of(NodeId id) const;

  const std::map<PageId, PageNode>& pages() const noexcept { return pages_; }
  const std::map<ElementId, ElementNode>& elements() const noexcept { return elements_; }
  const std::map<ShortcutId, ShortcutNode>& shortcuts() const noexcept { return shortcuts_; }
  const std::set<Edge, EdgeOrder>& edges() const noexcept { return edges_; }

  std::vector<ElementId> elements_of(PageId page) const;
  std::vector<PageId> leads_to(ElementId element) const;
  std::vector<PageId> pages_containing(ElementId element) const;
  /// Steps in COMPOSED_OF order. Throws Errc::unknown_node.
  std::vector<HighLevelStep> shortcut_steps(ShortcutId id) const;
  HighLevelAction high_level_action(ShortcutId id) const;

  /// Every integrity problem found by a full scan; empty means consistent.
  std::vector<std::string> check_integrity() const;

  /// One JSON record per line; nodes by (role, id), then embeddings, then edges.
  std::string export_graph() const;
  /// Throws Errc::malformed_record (with line number) or Errc::referential_integrity.
  static GraphStore import_graph(std::string_view dump,
                                 std::shared_ptr<Clock> clock = std::make_shared<SystemClock>(),
                                 std::shared_ptr<const Embedder> embedder =
                                     std::make_shared<ReferenceEmbedder>());

  void save(const std::filesystem::path& file) const;
  static GraphStore load(const std::filesystem::path& file,
                         std::shared_ptr<Clock> clock = std::make_shared<SystemClock>(),
                         std::shared_ptr<const Embedder> embedder =
                             std::make_shared<ReferenceEmbedder>());

  /// Same nodes, edges, and embeddings (clock and embedder ignored).
  bool same_content(const GraphStore& other) const;

 private:
  std::uint64_t next_id() { return next_id_++; }
  bool node_exists(NodeId id) const { return role_of(id).has_value(); }

  std::shared_ptr<Clock> clock_;
  std::shared_ptr<const Embedder> embedder_;
  std::map<PageId, PageNode> pages_;
  std::map<ElementId, ElementNode> elements_;
  std::map<ShortcutId, ShortcutNode> shortcuts_;
  std::set<Edge, EdgeOrder> edges_;
  std::map<ElementId, Embedding> index_;
  std::uint64_t next_id_ = 1;
};

/// The evolved action space stored in a graph: basic actions plus every shortcut node.
ActionSpace action_space_from_store(const GraphStore& store);

}  // namespace evoagent
