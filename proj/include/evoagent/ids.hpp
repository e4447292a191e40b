#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>

namespace evoagent {

// All graph nodes draw from one monotonic counter; the tag only keeps roles apart at compile time.
template <class Tag>
struct Id {
  std::uint64_t value = 0;

  constexpr auto operator<=>(const Id&) const = default;
  explicit constexpr operator bool() const { return value != 0; }
};

struct NodeTag {};
struct PageTag {};
struct ElementTag {};
struct ShortcutTag {};

using NodeId = Id<NodeTag>;
using PageId = Id<PageTag>;
using ElementId = Id<ElementTag>;
using ShortcutId = Id<ShortcutTag>;

template <class Tag>
constexpr NodeId as_node(Id<Tag> id) {
  return NodeId{id.value};
}

template <class Tag>
std::string to_string(Id<Tag> id) {
  return std::to_string(id.value);
}

}  // namespace evoagent

template <class Tag>
struct std::hash<evoagent::Id<Tag>> {
  std::size_t operator()(evoagent::Id<Tag> id) const noexcept {
    return std::hash<std::uint64_t>{}(id.value);
  }
};
