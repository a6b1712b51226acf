#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "taxi/graph.hpp"
#include "taxi/ids.hpp"

namespace taxi {

class DemandError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Request {
  RequestId id = 0;
  Vertex pickup{};
  Vertex dropoff{};
  Step entry_time = 0;
  std::optional<Step> picked_up_at;
  std::optional<AgentIndex> assigned_to;

  friend bool operator==(const Request&, const Request&) = default;
};

enum class LoadLevel { low, medium, high };

std::string_view to_string(LoadLevel level);
LoadLevel parse_load_level(std::string_view text);

/// Stationary demand: Poisson arrivals per step, independent categorical
/// pickup and dropoff locations (weights indexed by Vertex).
struct DemandModel {
  double arrival_rate = 0.0;
  std::vector<double> pickup_weights;
  std::vector<double> dropoff_weights;

  static DemandModel uniform(const RoadGraph& g, double rate);
  /// Throws DemandError when the model does not fit the graph.
  void validate(const RoadGraph& g) const;
};

/// A fixed map plus a fixed timed request sequence and the starting taxi
/// locations.
struct Scenario {
  std::string map_id;
  Step horizon = 0;
  LoadLevel load = LoadLevel::low;
  std::uint64_t seed = 0;
  std::vector<Vertex> initial_positions;
  std::vector<Request> requests;  // ascending (entry_time, id)

  std::size_t agents() const { return initial_positions.size(); }
  friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// Draws a scenario; fully determined by `seed`. Throws DemandError if no
/// valid (pickup, dropoff) pair is found within the rejection cap.
Scenario sample_scenario(const DemandModel& model, const World& world, Step horizon,
                         std::size_t agents, std::uint64_t seed, LoadLevel load = LoadLevel::low,
                         std::string map_id = {});

inline constexpr int kMaxPairAttempts = 1000;

/// Request of a sampled future, `offset` steps after the decision state.
struct FutureRequest {
  Step offset = 1;
  Vertex pickup{};
  Vertex dropoff{};

  friend bool operator==(const FutureRequest&, const FutureRequest&) = default;
};

using FutureStream = std::vector<FutureRequest>;  // ascending offset

/// Certainty-equivalent future sampler. The request count is frozen at
/// round(rate * t_h) and the pickup and dropoff multisets are drawn once per
/// family seed; each sample only re-randomises arrival timing and the
/// pickup/dropoff pairing.
class CeFutureSampler {
 public:
  CeFutureSampler(const DemandModel& model, const World& world, Step t_h, std::uint64_t family_seed);

  std::size_t count() const { return pickups_.size(); }
  Step horizon() const { return t_h_; }
  const std::vector<Vertex>& pickups() const { return pickups_; }
  const std::vector<Vertex>& dropoffs() const { return dropoffs_; }

  FutureStream sample(std::uint64_t sample_index) const;
  /// Samples 0..n-1, each from its own derived stream.
  std::vector<FutureStream> samples(std::size_t n) const;

 private:
  const World* world_;
  Step t_h_;
  std::uint64_t family_seed_;
  std::vector<Vertex> pickups_;
  std::vector<Vertex> dropoffs_;
};

inline CeFutureSampler ce_future_sampler(const DemandModel& model, const World& world, Step t_h,
                                         std::uint64_t seed) {
  return CeFutureSampler(model, world, t_h, seed);
}

std::string save_scenario(const Scenario& s, const RoadGraph& g);
/// Validates ids, ordering, horizon and request invariants. Throws ScenarioError.
Scenario load_scenario(std::string_view document, const World& world);
Scenario load_scenario_file(const std::string& path, const World& world);

}  // namespace taxi
