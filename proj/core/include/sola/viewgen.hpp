#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sola/encoder.hpp"
#include "sola/partition.hpp"

namespace sola {

/// Column order of the state matrix.
enum class Strategy { kNodeDrop = 0, kFeatureMask, kIntraEdge, kInterEdge, kSubgraphSwap };
inline constexpr int kNumStrategies = 5;

Strategy parse_strategy(const std::string& s);
std::string to_string(Strategy s);

/// One generated view of one graph. Node count is unchanged; dropped nodes
/// keep a zero feature row and zero readout weight. `edges` lists every
/// candidate edge (canonical, sorted, unique); forward weights are exactly 0
/// or 1 and a 0-weight candidate stays in the record so its head still
/// receives gradient.
struct AugmentedView {
  int num_nodes = 0;
  ad::Value features;          // N × d
  ad::Value features_soft;     // N × d, relaxed keep/mask weights
  ad::Value node_keep;         // N × 1, straight-through 0/1
  ad::Value node_keep_soft;    // N × 1
  std::vector<Edge> edges;
  ad::Value edge_weight;       // E × 1, straight-through 0/1
  ad::Value edge_weight_soft;  // E × 1
  ad::Value state;             // k × 5, straight-through one-hot
  ad::Value state_soft;        // k × 5
  std::vector<Strategy> sampled;  // argmax of each state row
  std::vector<Strategy> applied;  // after partner fallbacks
  std::vector<std::pair<int, int>> swap_pairs;
  std::vector<std::pair<int, int>> inter_pairs;  // (initiator, partner)
  std::vector<int> node_map;   // swap relabelling applied to cross edges

  /// Heads evaluated while building this view, indexed by Strategy (swap has
  /// no head; its slot records whether a swap happened).
  std::array<bool, kNumStrategies> head_used{};

  std::vector<Edge> surviving_edges() const;
  std::vector<double> edge_weight_values() const;
  /// Dense symmetric N × N adjacency with A_uv = weight of (u, v).
  ad::Value adjacency(bool soft = false) const;
  /// Forward values as a plain graph (surviving edges, current features).
  Graph to_graph(std::optional<int> label = std::nullopt) const;
};

/// Encoder input over several views: features stacked, each candidate edge
/// sent in both directions with its weight, readout weighted by node_keep.
EncoderInput views_to_input(std::span<const AugmentedView> views);

struct ViewGenConfig {
  double neg_ratio = 1.0;
  /// Fixed logit offset toward the identity decision of every binary head
  /// (keep node, keep feature, keep edge, reject non-edge). 0 leaves the
  /// learned logits as they are; log(4) starts at about 20% perturbation.
  double identity_prior = 0.0;
  GinConfig encoder;
};

struct GenerateOptions {
  double tau = 1.0;
  /// Every subgraph samples this strategy instead of drawing one.
  std::optional<Strategy> force_strategy;
  /// Every binary decision is the identity one: keep nodes, keep features,
  /// keep existing edges, reject negative candidates.
  bool identity_draws = false;
};

struct SubgraphImportance {
  int id = 0;
  int size = 0;
  double mean_keep = 0.0;
  std::array<double, kNumStrategies> strategy_probs{};
};

/// Selector, four learnable heads and the assembler. The generator's node and
/// subgraph embeddings come from its own GIN unless a shared encoder is given.
class ViewGenerator {
 public:
  ViewGenerator() = default;
  ViewGenerator(ad::ParameterStore& store, const std::string& prefix, const ViewGenConfig& config,
                Rng& rng, const GinEncoder* shared_encoder = nullptr);

  /// One view per batch graph; parts[i] partitions batch.graphs[i].
  std::vector<AugmentedView> generate(const Batch& batch, std::span<const Partition* const> parts,
                                      Rng& rng, const GenerateOptions& options = {}) const;
  AugmentedView generate(const Graph& g, const Partition& p, Rng& rng,
                         const GenerateOptions& options = {}) const;

  /// Noise-free selector and node-keep probabilities per subgraph.
  std::vector<SubgraphImportance> importance(const Graph& g, const Partition& p) const;

  const GinEncoder& encoder() const { return shared_ ? *shared_ : own_encoder_; }
  const nn::Linear& selector() const { return selector_; }
  const nn::Linear& drop_head() const { return drop_head_; }
  const nn::Linear& mask_head() const { return mask_head_; }
  const nn::Linear& intra_head() const { return intra_head_; }
  const nn::Linear& inter_head() const { return inter_head_; }
  const ViewGenConfig& config() const { return config_; }

 private:
  AugmentedView build_view(const Graph& g, const Partition& p, const ad::Value& h,
                           const ad::Value& hs, Rng& rng, const GenerateOptions& options) const;

  ViewGenConfig config_;
  GinEncoder own_encoder_;
  const GinEncoder* shared_ = nullptr;
  nn::Linear selector_, drop_head_, mask_head_, intra_head_, inter_head_;
};

/// Degree-rank node correspondence between two subgraphs: the i-th highest
/// degree node of `a` maps to the i-th of `b` (ties by node id), truncated to
/// the smaller size.
std::vector<std::pair<int, int>> swap_correspondence(const Graph& g, std::span<const int> a,
                                                     std::span<const int> b);

/// Uniform sample without replacement of `count` node pairs (u < v) from
/// `pool` that are not edges of g. Capped at the number available.
std::vector<Edge> sample_non_edges_within(const Graph& g, std::span<const int> nodes,
                                          std::size_t count, Rng& rng);
std::vector<Edge> sample_non_edges_between(const Graph& g, std::span<const int> a,
                                           std::span<const int> b, std::size_t count, Rng& rng);

nlohmann::json importance_to_json(std::span<const SubgraphImportance> items);

}  // namespace sola
