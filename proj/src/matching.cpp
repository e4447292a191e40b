#include "evoagent/matching.hpp"

#include "evoagent/error.hpp"

namespace evoagent {

std::vector<MatchResult> match_elements(const ScreenObservation& obs, const GraphStore& store,
                                        double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw Error(Errc::invalid_argument, "match threshold must lie in (0, 1]");
  }
  std::vector<MatchResult> out;
  if (store.elements().empty()) return out;
  for (std::size_t i = 0; i < obs.elements.size(); ++i) {
    const auto query = store.embedder().embed(obs.elements[i].visual_descriptor);
    const auto hits = store.nearest_elements(query, 1, threshold);
    if (!hits.empty()) out.push_back({i, hits.front().element, hits.front().similarity});
  }
  return out;
}

std::optional<std::size_t> locate_element(const ScreenObservation& obs, const GraphStore& store,
                                          ElementId element, double threshold) {
  const auto& target = store.embedding(element);
  std::optional<std::size_t> best;
  double best_sim = threshold;
  for (std::size_t i = 0; i < obs.elements.size(); ++i) {
    const double sim = cosine(store.embedder().embed(obs.elements[i].visual_descriptor), target);
    if (sim >= best_sim && (!best || sim > best_sim)) {
      best = i;
      best_sim = sim;
    }
  }
  return best;
}

}  // namespace evoagent
