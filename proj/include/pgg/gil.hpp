#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pgg/demonstration.hpp"
#include "pgg/game.hpp"
#include "pgg/mdp.hpp"

namespace pgg {

/// Per-vertex input channels. kMembership is the one-hot (in set, not in set);
/// kMembershipCost appends the player's investment cost.
enum class FeatureSet { kMembership, kMembershipCost };

/// How the proto-action distance enters the softmax. kNearest uses -d so the
/// closest action is the most probable; kLiteral uses +d.
enum class DistanceSign { kNearest, kLiteral };

std::string_view to_string(FeatureSet features);
std::optional<FeatureSet> parse_feature_set(std::string_view text);

struct GnnConfig {
  int embed_dim = 64;
  int proto_dim = 64;
  int rounds = 3;
  double init_tau = 10.0;
  DistanceSign sign = DistanceSign::kNearest;
  FeatureSet features = FeatureSet::kMembership;

  int feature_dim() const { return features == FeatureSet::kMembership ? 2 : 3; }
  /// Rounds must lie in [3, 6]; dimensions and temperature must be positive.
  void validate() const;
};

/// Message-passing rounds searched during tuning.
inline const std::vector<int> kRoundsGrid = {3, 4, 5, 6};
inline const std::vector<double> kLearningRateGrid = {1e-2, 1e-3, 1e-4};

/// Weights of the structure2vec embedding and the proto-action head.
struct GnnParams {
  GnnConfig config;
  Eigen::MatrixXd feature_weights;   // embed x features
  Eigen::MatrixXd neighbor_weights;  // embed x embed
  Eigen::MatrixXd hidden_weights;    // proto x embed
  Eigen::MatrixXd proto_weights;     // embed x proto
  double log_tau = 0.0;

  static constexpr std::size_t kNumBlocks = 5;
  static constexpr std::array<std::string_view, kNumBlocks> kBlockNames = {
      "feature_weights", "neighbor_weights", "hidden_weights", "proto_weights", "log_tau"};

  double tau() const;
  std::array<std::span<double>, kNumBlocks> blocks();
  std::array<std::span<const double>, kNumBlocks> blocks() const;
  /// Same shapes, all zeros.
  GnnParams zeros_like() const;
  bool all_finite() const;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, tau = config.init_tau.
GnnParams init_params(const GnnConfig& config, std::uint64_t seed);

/// features x n matrix; column v is (1,0) if v is in the set, else (0,1)
/// (plus c_v for kMembershipCost).
Eigen::MatrixXd node_features(const MdpState& state, FeatureSet features = FeatureSet::kMembership);

struct Embedding {
  Eigen::MatrixXd nodes;  // embed x n
  Eigen::VectorXd state;  // sum of node columns
};

/// params.config.rounds rounds of mu_v <- relu(W_f x_v + W_n sum_{u~v} mu_u), mu^0 = 0.
Embedding s2v_embed(const Graph& graph, const Eigen::MatrixXd& features, const GnnParams& params);

/// Softmax over valid actions (ascending vertex order) of sign * ||mu_a - phi|| / tau.
std::vector<double> policy_probs(const MdpState& state, const GnnParams& params);

/// Cross-entropy of the policy against the visit distribution; probabilities
/// are floored at 1e-12 before the log.
double kl_loss(std::span<const double> visit_counts, std::span<const double> probs);
double kl_loss(std::span<const long> visit_counts, std::span<const double> probs);

double demonstration_loss(const Demonstration& demo, const GnnParams& params);
double batch_loss(std::span<const Demonstration> batch, const GnnParams& params);

struct LossGradient {
  double loss = 0.0;
  GnnParams gradient;
};

/// Mean loss over the batch and its gradient with respect to every parameter block.
LossGradient backward(std::span<const Demonstration> batch, const GnnParams& params);

/// Adaptive-moment optimizer with the usual default decay rates.
class Adam {
 public:
  Adam(const GnnParams& like, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
       double epsilon = 1e-8);
  void step(GnnParams& params, const GnnParams& gradient);

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  GnnParams m_, v_;
};

struct RolloutResult {
  std::vector<int> independent_set;
  double value = 0.0;
};

/// Greedy policy rollout; ties by lowest vertex.
RolloutResult greedy_rollout(const GameInstance& inst, const GnnParams& params,
                             Objective objective);

enum class TrainStrategy { kSeparate, kMixed, kCurriculum };
std::string_view to_string(TrainStrategy strategy);
std::optional<TrainStrategy> parse_train_strategy(std::string_view text);

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 5;
  int total_steps = 2000;
  int validate_every = 50;
  TrainStrategy strategy = TrainStrategy::kSeparate;
  int target_n = 15;
  std::uint64_t seed = 0;
  Objective objective = Objective::kSocialWelfare;
  GnnConfig gnn;

  void validate() const;
};

/// Demonstrations keyed by graph size.
using DemonstrationSets = std::map<int, std::vector<Demonstration>>;

struct TrainPhase {
  std::vector<int> sizes;  // datasets pooled during this phase
  int steps = 0;
};

/// Phases implied by the strategy: one phase over the target size (separate),
/// one over all sizes <= target (mixed), or one equal-length phase per size in
/// ascending order (curriculum). Throws ConfigError if a required set is empty.
std::vector<TrainPhase> training_schedule(const DemonstrationSets& datasets,
                                          const TrainConfig& config);

struct TrainResult {
  GnnParams best;
  GnnParams last;
  double best_score = 0.0;
  int best_step = 0;
  std::vector<std::pair<int, double>> curve;  // (step, validation score)
};

/// Mean greedy-rollout objective over the instances.
double validation_score(const GnnParams& params, std::span<const GameInstance> instances,
                        Objective objective);

TrainResult train(const DemonstrationSets& datasets, const TrainConfig& config,
                  std::span<const GameInstance> validation);

void save_model(const std::filesystem::path& path, const GnnParams& params);
/// Verifies the stored content hash.
GnnParams load_model(const std::filesystem::path& path);

}  // namespace pgg
