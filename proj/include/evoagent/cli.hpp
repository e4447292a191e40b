#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>

#include "evoagent/clock.hpp"
#include "evoagent/memory_graph.hpp"
#include "evoagent/reasoner.hpp"

namespace evoagent {

inline constexpr int kExitSuccess = 0;
inline constexpr int kExitTaskFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitInternal = 3;

/// "scripted:FIXTURE", "remote" (environment configured), or "replay:TRANSCRIPT".
std::unique_ptr<ReasonerBackend> make_backend(const std::string& spec,
                                              const std::optional<std::filesystem::path>& transcript = {});

/// A store directory holds graph.graph.jsonl plus trajectories/, reports/, annotations/ and
/// evolution/. A missing graph file means an empty memory.
std::filesystem::path graph_file(const std::filesystem::path& store_dir);
GraphStore open_store(const std::filesystem::path& store_dir, std::shared_ptr<Clock> clock);
/// The latest timestamp in a store dump, so a resumed simulated clock never runs backwards.
std::int64_t latest_timestamp(const GraphStore& store);

/// Entry point of the `agent` tool; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace evoagent
