#include "pgg/gil.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include <json.hpp>

#include "pgg/errors.hpp"
#include "pgg/graphgen.hpp"
#include "pgg/rng.hpp"
#include "pgg/serialize.hpp"

namespace pgg {
namespace {

constexpr double kProbFloor = 1e-12;

using Eigen::MatrixXd;
using Eigen::VectorXd;

// out.col(v) = sum of in.col(u) over neighbors u of v.
void aggregate(const Graph& g, const MatrixXd& in, MatrixXd& out) {
  out.setZero(in.rows(), in.cols());
  for (int v = 0; v < g.num_vertices(); ++v) {
    for (int u : g.neighbors(v)) out.col(v) += in.col(u);
  }
}

// pre.col(v) = projected.col(v) + sum of messages.col(u) over neighbors u of v.
template <typename Matrix>
void combine(const Graph& g, const Matrix& projected, const Matrix& messages, Matrix& pre) {
  pre = projected;
  for (int v = 0; v < g.num_vertices(); ++v) {
    for (int u : g.neighbors(v)) pre.col(v) += messages.col(u);
  }
}
void feature_column(const MdpState& state, FeatureSet features, int v, bool in_set,
                    Eigen::Ref<VectorXd> x) {
  x.setZero();
  x(in_set ? 0 : 1) = 1.0;
  if (features == FeatureSet::kMembershipCost) x(2) = state.instance().costs[v];
}

// Activations of one state kept for the backward pass.
struct Forward {
  MatrixXd features;
  MatrixXd projected;               // W_f X
  std::vector<MatrixXd> pre;        // A_k
  std::vector<MatrixXd> post;       // H_k = relu(A_k)
  std::vector<MatrixXd> aggregated; // N_k = sum of neighbor H_{k-1}; empty for k = 1
  VectorXd mu_state, hidden_pre, hidden, phi;
  std::vector<int> actions;
  std::vector<double> distance, score, probs;
};

VectorXd column_sum(const MatrixXd& m) {
  VectorXd s = VectorXd::Zero(m.rows());
  for (Eigen::Index j = 0; j < m.cols(); ++j) s += m.col(j);
  return s;
}

void embed_into(const Graph& g, const GnnParams& p, Forward& f, bool keep_aggregates) {
  const int rounds = p.config.rounds;
  f.projected.noalias() = p.feature_weights * f.features;
  f.pre.assign(rounds, MatrixXd());
  f.post.assign(rounds, MatrixXd());
  f.aggregated.assign(rounds, MatrixXd());
  MatrixXd messages;
  for (int k = 0; k < rounds; ++k) {
    if (k == 0) {
      f.pre[0] = f.projected;
    } else {
      messages.noalias() = p.neighbor_weights * f.post[k - 1];
      combine(g, f.projected, messages, f.pre[k]);
      if (keep_aggregates) aggregate(g, f.post[k - 1], f.aggregated[k]);
    }
    f.post[k] = f.pre[k].cwiseMax(0.0);
  }
  f.mu_state = rounds == 0 ? VectorXd::Zero(p.config.embed_dim) : column_sum(f.post.back());
}

void softmax_into(const std::vector<double>& score, std::vector<double>& probs) {
  probs.resize(score.size());
  const double top = *std::max_element(score.begin(), score.end());
  double z = 0.0;
  for (std::size_t i = 0; i < score.size(); ++i) {
    probs[i] = std::exp(score[i] - top);
    z += probs[i];
  }
  for (double& q : probs) q /= z;
}

Forward forward(const MdpState& state, const GnnParams& p, bool keep_aggregates = false) {
  Forward f;
  f.actions = state.valid_actions();
  if (f.actions.empty()) throw ContractError("policy: no valid actions");
  f.features = node_features(state, p.config.features);
  if (f.features.rows() != p.feature_weights.cols()) {
    throw InputError("policy: feature width does not match parameters");
  }
  embed_into(state.instance().graph, p, f, keep_aggregates);
  f.hidden_pre = p.hidden_weights * f.mu_state;
  f.hidden = f.hidden_pre.cwiseMax(0.0);
  f.phi = p.proto_weights * f.hidden;
  const MatrixXd& emb = f.post.back();
  const double sign = p.config.sign == DistanceSign::kNearest ? -1.0 : 1.0;
  const double inv_tau = 1.0 / p.tau();
  f.distance.resize(f.actions.size());
  f.score.resize(f.actions.size());
  for (std::size_t i = 0; i < f.actions.size(); ++i) {
    f.distance[i] = (emb.col(f.actions[i]) - f.phi).norm();
    f.score[i] = sign * f.distance[i] * inv_tau;
  }
  softmax_into(f.score, f.probs);
  return f;
}

// Adds the gradient of the demonstration loss, scaled by `scale`, into `grad`.
double accumulate_gradient(const Demonstration& demo, const GnnParams& p, double scale,
                           GnnParams& grad) {
  const MdpState state = demo.state();
  Forward f = forward(state, p, true);
  const Graph& g = state.instance().graph;
  const std::size_t m = f.actions.size();
  const double total = static_cast<double>(demo.total_visits());

  double loss = 0.0;
  std::vector<double> dprob(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double w = static_cast<double>(demo.visit_counts[i]) / total;
    if (w == 0.0) continue;
    loss -= w * std::log(std::max(f.probs[i], kProbFloor));
    if (f.probs[i] >= kProbFloor) dprob[i] = -w / f.probs[i];
  }
  double inner = 0.0;
  for (std::size_t i = 0; i < m; ++i) inner += f.probs[i] * dprob[i];
  const double sign = p.config.sign == DistanceSign::kNearest ? -1.0 : 1.0;
  const double inv_tau = 1.0 / p.tau();

  const MatrixXd& emb = f.post.back();
  MatrixXd d_emb = MatrixXd::Zero(emb.rows(), emb.cols());
  VectorXd d_phi = VectorXd::Zero(f.phi.size());
  double d_log_tau = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double d_score = scale * f.probs[i] * (dprob[i] - inner);
    d_log_tau -= d_score * f.score[i];
    if (f.distance[i] <= 0.0) continue;
    const double d_dist = d_score * sign * inv_tau;
    const VectorXd dir = (emb.col(f.actions[i]) - f.phi) / f.distance[i];
    d_emb.col(f.actions[i]) += d_dist * dir;
    d_phi -= d_dist * dir;
  }
  grad.log_tau += d_log_tau;

  grad.proto_weights.noalias() += d_phi * f.hidden.transpose();
  VectorXd d_hidden = p.proto_weights.transpose() * d_phi;
  for (Eigen::Index i = 0; i < d_hidden.size(); ++i) {
    if (f.hidden_pre[i] <= 0.0) d_hidden[i] = 0.0;
  }
  grad.hidden_weights.noalias() += d_hidden * f.mu_state.transpose();
  const VectorXd d_mu = p.hidden_weights.transpose() * d_hidden;
  d_emb.colwise() += d_mu;

  MatrixXd d_post = std::move(d_emb);
  MatrixXd d_pre, d_agg;
  for (int k = p.config.rounds - 1; k >= 0; --k) {
    d_pre = d_post.cwiseProduct((f.pre[k].array() > 0.0).cast<double>().matrix());
    grad.feature_weights.noalias() += d_pre * f.features.transpose();
    if (k == 0) break;
    grad.neighbor_weights.noalias() += d_pre * f.aggregated[k].transpose();
    d_agg.noalias() = p.neighbor_weights.transpose() * d_pre;
    aggregate(g, d_agg, d_post);
  }
  return loss;
}

template <typename F>
void for_each_block(GnnParams& a, const GnnParams& b, F fn) {
  auto da = a.blocks();
  auto db = b.blocks();
  for (std::size_t k = 0; k < GnnParams::kNumBlocks; ++k) fn(k, da[k], db[k]);
}

}  // namespace

std::string_view to_string(FeatureSet features) {
  return features == FeatureSet::kMembership ? "membership" : "membership_cost";
}

std::optional<FeatureSet> parse_feature_set(std::string_view text) {
  if (text == "membership") return FeatureSet::kMembership;
  if (text == "membership_cost") return FeatureSet::kMembershipCost;
  return std::nullopt;
}

void GnnConfig::validate() const {
  if (rounds < 3 || rounds > 6) {
    throw ConfigError("gnn: message-passing rounds must be in [3, 6], got " +
                      std::to_string(rounds));
  }
  if (embed_dim < 1 || proto_dim < 1) throw ConfigError("gnn: dimensions must be positive");
  if (!(init_tau > 0.0)) throw ConfigError("gnn: initial temperature must be positive");
}

double GnnParams::tau() const { return std::exp(log_tau); }

std::array<std::span<double>, GnnParams::kNumBlocks> GnnParams::blocks() {
  return {std::span<double>(feature_weights.data(), feature_weights.size()),
          std::span<double>(neighbor_weights.data(), neighbor_weights.size()),
          std::span<double>(hidden_weights.data(), hidden_weights.size()),
          std::span<double>(proto_weights.data(), proto_weights.size()),
          std::span<double>(&log_tau, 1)};
}

std::array<std::span<const double>, GnnParams::kNumBlocks> GnnParams::blocks() const {
  return {std::span<const double>(feature_weights.data(), feature_weights.size()),
          std::span<const double>(neighbor_weights.data(), neighbor_weights.size()),
          std::span<const double>(hidden_weights.data(), hidden_weights.size()),
          std::span<const double>(proto_weights.data(), proto_weights.size()),
          std::span<const double>(&log_tau, 1)};
}

GnnParams GnnParams::zeros_like() const {
  GnnParams z;
  z.config = config;
  z.feature_weights = MatrixXd::Zero(feature_weights.rows(), feature_weights.cols());
  z.neighbor_weights = MatrixXd::Zero(neighbor_weights.rows(), neighbor_weights.cols());
  z.hidden_weights = MatrixXd::Zero(hidden_weights.rows(), hidden_weights.cols());
  z.proto_weights = MatrixXd::Zero(proto_weights.rows(), proto_weights.cols());
  z.log_tau = 0.0;
  return z;
}

bool GnnParams::all_finite() const {
  for (auto block : blocks()) {
    for (double x : block) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

GnnParams init_params(const GnnConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  auto uniform = [&](int rows, int cols) {
    const double s = 1.0 / std::sqrt(static_cast<double>(cols));
    MatrixXd m(rows, cols);
    // Row-major fill keeps the draw order independent of storage order.
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) m(r, c) = (2.0 * rng.uniform01() - 1.0) * s;
    }
    return m;
  };
  GnnParams p;
  p.config = config;
  p.feature_weights = uniform(config.embed_dim, config.feature_dim());
  p.neighbor_weights = uniform(config.embed_dim, config.embed_dim);
  p.hidden_weights = uniform(config.proto_dim, config.embed_dim);
  p.proto_weights = uniform(config.embed_dim, config.proto_dim);
  p.log_tau = std::log(config.init_tau);
  return p;
}

MatrixXd node_features(const MdpState& state, FeatureSet features) {
  const int n = state.instance().num_players();
  const int width = features == FeatureSet::kMembership ? 2 : 3;
  MatrixXd x = MatrixXd::Zero(width, n);
  for (int v = 0; v < n; ++v) x(1, v) = 1.0;
  for (int v : state.independent_set()) {
    x(0, v) = 1.0;
    x(1, v) = 0.0;
  }
  if (features == FeatureSet::kMembershipCost) {
    for (int v = 0; v < n; ++v) x(2, v) = state.instance().costs[v];
  }
  return x;
}

Embedding s2v_embed(const Graph& graph, const MatrixXd& features, const GnnParams& params) {
  if (features.cols() != graph.num_vertices() || features.rows() != params.feature_weights.cols()) {
    throw InputError("s2v: feature matrix shape does not match graph/parameters");
  }
  Forward f;
  f.features = features;
  embed_into(graph, params, f, false);
  Embedding e;
  e.nodes = f.post.empty() ? MatrixXd::Zero(params.config.embed_dim, graph.num_vertices())
                           : f.post.back();
  e.state = f.mu_state;
  return e;
}

std::vector<double> policy_probs(const MdpState& state, const GnnParams& params) {
  return forward(state, params).probs;
}

double kl_loss(std::span<const double> visit_counts, std::span<const double> probs) {
  if (visit_counts.size() != probs.size()) throw InputError("kl_loss: length mismatch");
  const double total = std::accumulate(visit_counts.begin(), visit_counts.end(), 0.0);
  if (!(total > 0.0)) throw InputError("kl_loss: visit counts sum to zero");
  double loss = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (visit_counts[i] == 0.0) continue;
    loss -= visit_counts[i] / total * std::log(std::max(probs[i], kProbFloor));
  }
  return loss;
}

double kl_loss(std::span<const long> visit_counts, std::span<const double> probs) {
  std::vector<double> counts(visit_counts.begin(), visit_counts.end());
  return kl_loss(std::span<const double>(counts), probs);
}

double demonstration_loss(const Demonstration& demo, const GnnParams& params) {
  return kl_loss(std::span<const long>(demo.visit_counts), policy_probs(demo.state(), params));
}

double batch_loss(std::span<const Demonstration> batch, const GnnParams& params) {
  if (batch.empty()) throw InputError("batch_loss: empty batch");
  double total = 0.0;
  for (const auto& d : batch) total += demonstration_loss(d, params);
  return total / static_cast<double>(batch.size());
}

LossGradient backward(std::span<const Demonstration> batch, const GnnParams& params) {
  if (batch.empty()) throw InputError("backward: empty batch");
  LossGradient out{0.0, params.zeros_like()};
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const auto& d : batch) {
    out.loss += scale * accumulate_gradient(d, params, scale, out.gradient);
  }
  return out;
}

Adam::Adam(const GnnParams& like, double learning_rate, double beta1, double beta2,
           double epsilon)
    : lr_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      eps_(epsilon),
      m_(like.zeros_like()),
      v_(like.zeros_like()) {}

void Adam::step(GnnParams& params, const GnnParams& gradient) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto pb = params.blocks();
  auto gb = gradient.blocks();
  auto mb = m_.blocks();
  auto vb = v_.blocks();
  for (std::size_t k = 0; k < GnnParams::kNumBlocks; ++k) {
    for (std::size_t i = 0; i < pb[k].size(); ++i) {
      const double g = gb[k][i];
      mb[k][i] = beta1_ * mb[k][i] + (1.0 - beta1_) * g;
      vb[k][i] = beta2_ * vb[k][i] + (1.0 - beta2_) * g * g;
      pb[k][i] -= lr_ * (mb[k][i] / c1) / (std::sqrt(vb[k][i] / c2) + eps_);
    }
  }
}

namespace {

using MatrixXf = Eigen::MatrixXf;
using VectorXf = Eigen::VectorXf;

// out = w * in, multiplying each distinct column of `in` once. Early rollout
// states have many vertices with identical embeddings.
void distinct_column_product(const MatrixXf& w, const MatrixXf& in, MatrixXf& out) {
  const auto rows = in.rows();
  std::unordered_map<std::uint64_t, std::vector<Eigen::Index>> seen;
  std::vector<Eigen::Index> source(in.cols());
  std::vector<Eigen::Index> unique;
  for (Eigen::Index j = 0; j < in.cols(); ++j) {
    std::uint64_t key = 0;
    for (Eigen::Index r = 0; r < rows; ++r) key = mix_seed(key, std::bit_cast<std::uint32_t>(in(r, j)));
    auto& bucket = seen[key];
    source[j] = -1;
    for (Eigen::Index c : bucket) {
      if (in.col(unique[c]) == in.col(j)) {
        source[j] = c;
        break;
      }
    }
    if (source[j] < 0) {
      source[j] = static_cast<Eigen::Index>(unique.size());
      bucket.push_back(source[j]);
      unique.push_back(j);
    }
  }
  MatrixXf packed(rows, static_cast<Eigen::Index>(unique.size()));
  for (std::size_t c = 0; c < unique.size(); ++c) packed.col(c) = in.col(unique[c]);
  const MatrixXf product = w * packed;
  out.resize(w.rows(), in.cols());
  for (Eigen::Index j = 0; j < in.cols(); ++j) out.col(j) = product.col(source[j]);
}

// Single-precision copy of the weights used for inference.
struct InferenceWeights {
  explicit InferenceWeights(const GnnParams& p)
      : feature(p.feature_weights.cast<float>()),
        neighbor(p.neighbor_weights.cast<float>()),
        hidden(p.hidden_weights.cast<float>()),
        proto(p.proto_weights.cast<float>()),
        features(p.config.features),
        rounds(p.config.rounds) {}

  MatrixXf feature, neighbor, hidden, proto;
  FeatureSet features;
  int rounds;
};

// Embedding of a rollout state that is updated in place when a vertex joins
// the set. Only x_v changes, so round k only touches columns within k-1 hops
// of v; pre-activations are patched with the change in each message.
class IncrementalEmbedding {
 public:
  IncrementalEmbedding(const MdpState& state, const InferenceWeights& w)
      : g_(state.instance().graph), w_(w), state_(state) {
    const auto rounds = static_cast<std::size_t>(w.rounds);
    x_ = node_features(state, w.features).cast<float>();
    projected_.noalias() = w.feature * x_;
    pre_.assign(rounds, MatrixXf());
    post_.assign(rounds, MatrixXf());
    messages_.assign(rounds, MatrixXf());
    for (std::size_t k = 0; k < rounds; ++k) {
      if (k == 0) {
        pre_[0] = projected_;
      } else {
        distinct_column_product(w.neighbor, post_[k - 1], messages_[k]);
        combine(g_, projected_, messages_[k], pre_[k]);
      }
      post_[k] = pre_[k].cwiseMax(0.0f);
    }
    mark_.assign(g_.num_vertices(), 0);
    delta_.resize(w.neighbor.rows());
    h_.resize(w.neighbor.rows());
  }

  const MatrixXf& nodes() const { return post_.back(); }
  VectorXf state_embedding() const { return post_.back().rowwise().sum(); }

  void add(int v) {
    const VectorXf old_projected = projected_.col(v);
    VectorXd x(x_.rows());
    feature_column(state_, w_.features, v, true, x);
    x_.col(v) = x.cast<float>();
    projected_.col(v).noalias() = w_.feature * x_.col(v);
    const VectorXf projected_delta = projected_.col(v) - old_projected;
    pre_[0].col(v) = projected_.col(v);
    changed_.clear();
    if (refresh_post(0, v)) changed_.push_back(v);
    for (std::size_t k = 1; k < pre_.size(); ++k) {
      touched_.assign(1, v);
      mark_[v] = 1;
      pre_[k].col(v) += projected_delta;
      for (int w : changed_) {
        delta_.noalias() = w_.neighbor * post_[k - 1].col(w);
        delta_ -= messages_[k].col(w);
        messages_[k].col(w) += delta_;
        for (int u : g_.neighbors(w)) {
          pre_[k].col(u) += delta_;
          if (!mark_[u]) {
            mark_[u] = 1;
            touched_.push_back(u);
          }
        }
      }
      changed_.clear();
      for (int u : touched_) {
        mark_[u] = 0;
        if (refresh_post(k, u)) changed_.push_back(u);
      }
    }
  }

 private:
  bool refresh_post(std::size_t k, int v) {
    h_ = pre_[k].col(v).cwiseMax(0.0f);
    if (h_ == post_[k].col(v)) return false;
    post_[k].col(v) = h_;
    return true;
  }

  const Graph& g_;
  const InferenceWeights& w_;
  const MdpState& state_;
  MatrixXf x_, projected_;
  std::vector<MatrixXf> pre_, post_, messages_;
  std::vector<char> mark_;
  std::vector<int> changed_, touched_;
  VectorXf delta_, h_;
};

// True when no two valid vertices are adjacent; every remaining valid vertex
// then joins the set whatever the order.
bool valid_vertices_independent(const MdpState& state) {
  const Graph& g = state.instance().graph;
  for (int v = 0; v < g.num_vertices(); ++v) {
    if (state.blocked(v)) continue;
    for (int u : g.neighbors(v)) {
      if (!state.blocked(u)) return false;
    }
  }
  return true;
}

}  // namespace

RolloutResult greedy_rollout(const GameInstance& inst, const GnnParams& params,
                             Objective objective) {
  MdpState state(inst);
  const InferenceWeights weights(params);
  std::optional<IncrementalEmbedding> embedding;
  // sign * squared distance ranks actions like sign * distance / tau.
  const float sign = params.config.sign == DistanceSign::kNearest ? -1.0f : 1.0f;
  while (!state.is_terminal()) {
    if (valid_vertices_independent(state)) {
      for (int v : state.valid_actions()) state.apply(v);
      break;
    }
    if (!embedding) embedding.emplace(state, weights);
    const VectorXf hidden = (weights.hidden * embedding->state_embedding()).cwiseMax(0.0f);
    const VectorXf phi = weights.proto * hidden;
    const MatrixXf& nodes = embedding->nodes();
    int pick = -1;
    float best = 0.0f;
    for (int v = 0; v < inst.num_players(); ++v) {
      if (state.blocked(v)) continue;
      const float score = sign * (nodes.col(v) - phi).squaredNorm();
      if (pick < 0 || score > best) {
        pick = v;
        best = score;
      }
    }
    state.apply(pick);
    embedding->add(pick);
  }
  RolloutResult r;
  r.independent_set.assign(state.independent_set().begin(), state.independent_set().end());
  r.value = terminal_value(state, objective);
  return r;
}

std::string_view to_string(TrainStrategy strategy) {
  switch (strategy) {
    case TrainStrategy::kSeparate: return "separate";
    case TrainStrategy::kMixed: return "mixed";
    case TrainStrategy::kCurriculum: return "curriculum";
  }
  return "?";
}

std::optional<TrainStrategy> parse_train_strategy(std::string_view text) {
  if (text == "separate") return TrainStrategy::kSeparate;
  if (text == "mixed") return TrainStrategy::kMixed;
  if (text == "curriculum") return TrainStrategy::kCurriculum;
  return std::nullopt;
}

void TrainConfig::validate() const {
  gnn.validate();
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning rate must be positive");
  if (batch_size < 1 || total_steps < 1 || validate_every < 1) {
    throw ConfigError("train: batch size, steps and validation interval must be positive");
  }
}

std::vector<TrainPhase> training_schedule(const DemonstrationSets& datasets,
                                          const TrainConfig& config) {
  auto target = datasets.find(config.target_n);
  if (target == datasets.end() || target->second.empty()) {
    throw ConfigError("train: no demonstrations for target size n=" +
                      std::to_string(config.target_n));
  }
  std::vector<int> sizes;
  for (const auto& [n, demos] : datasets) {
    if (n <= config.target_n && !demos.empty()) sizes.push_back(n);
  }
  switch (config.strategy) {
    case TrainStrategy::kSeparate:
      return {{{config.target_n}, config.total_steps}};
    case TrainStrategy::kMixed:
      return {{sizes, config.total_steps}};
    case TrainStrategy::kCurriculum: {
      std::vector<TrainPhase> phases;
      const int per = config.total_steps / static_cast<int>(sizes.size());
      for (std::size_t i = 0; i < sizes.size(); ++i) {
        const bool last = i + 1 == sizes.size();
        phases.push_back({{sizes[i]}, last ? config.total_steps - per * static_cast<int>(i) : per});
      }
      return phases;
    }
  }
  throw ConfigError("train: unknown strategy");
}

double validation_score(const GnnParams& params, std::span<const GameInstance> instances,
                        Objective objective) {
  if (instances.empty()) return 0.0;
  double total = 0.0;
  for (const auto& inst : instances) total += greedy_rollout(inst, params, objective).value;
  return total / static_cast<double>(instances.size());
}

TrainResult train(const DemonstrationSets& datasets, const TrainConfig& config,
                  std::span<const GameInstance> validation) {
  config.validate();
  const auto phases = training_schedule(datasets, config);
  Rng rng(config.seed);
  GnnParams params = init_params(config.gnn, mix_seed(config.seed, 0x5157));
  Adam adam(params, config.learning_rate);

  TrainResult result{params, params, -1.0, 0, {}};
  int step = 0;
  std::vector<Demonstration> batch;
  for (const TrainPhase& phase : phases) {
    std::vector<const Demonstration*> pool;
    for (int n : phase.sizes) {
      for (const auto& d : datasets.at(n)) pool.push_back(&d);
    }
    // Sampling without replacement inside an epoch, reshuffled per epoch.
    std::size_t cursor = pool.size();
    for (int s = 0; s < phase.steps; ++s) {
      batch.clear();
      for (int b = 0; b < config.batch_size; ++b) {
        if (cursor == pool.size()) {
          rng.shuffle(std::span<const Demonstration*>(pool));
          cursor = 0;
        }
        batch.push_back(*pool[cursor++]);
      }
      LossGradient lg = backward(batch, params);
      ++step;
      if (!std::isfinite(lg.loss) || !lg.gradient.all_finite()) {
        throw std::runtime_error("train: non-finite gradient in batch " + std::to_string(step));
      }
      adam.step(params, lg.gradient);
      if (step % config.validate_every == 0) {
        const double score = validation_score(params, validation, config.objective);
        result.curve.emplace_back(step, score);
        if (score > result.best_score) {
          result.best_score = score;
          result.best_step = step;
          result.best = params;
        }
      }
    }
  }
  result.last = params;
  if (result.curve.empty()) {
    result.best_score = validation_score(params, validation, config.objective);
    result.best_step = step;
    result.best = params;
  }
  return result;
}

namespace {

nlohmann::json matrix_json(const MatrixXd& m) {
  std::vector<double> data;
  data.reserve(m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw InputError("model: matrix data length does not match its shape");
  }
  MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[r * cols + c];
  }
  return m;
}

}  // namespace

void save_model(const std::filesystem::path& path, const GnnParams& params) {
  nlohmann::json j{
      {"format", "pgg-gil-model"},
      {"version", 1},
      {"embed_dim", params.config.embed_dim},
      {"proto_dim", params.config.proto_dim},
      {"rounds", params.config.rounds},
      {"init_tau", params.config.init_tau},
      {"sign", params.config.sign == DistanceSign::kNearest ? "nearest" : "literal"},
      {"features", std::string(to_string(params.config.features))},
      {"log_tau", params.log_tau},
      {"feature_weights", matrix_json(params.feature_weights)},
      {"neighbor_weights", matrix_json(params.neighbor_weights)},
      {"hidden_weights", matrix_json(params.hidden_weights)},
      {"proto_weights", matrix_json(params.proto_weights)}};
  j["hash"] = content_hash(j.dump());
  write_text_file(path, j.dump() + "\n");
}

GnnParams load_model(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  try {
    if (j.value("format", std::string{}) != "pgg-gil-model") {
      throw InputError("not a model file");
    }
    const std::string stored = j.at("hash").get<std::string>();
    nlohmann::json body = j;
    body.erase("hash");
    if (content_hash(body.dump()) != stored) throw InputError("content hash mismatch");
    GnnParams p;
    p.config.embed_dim = j.at("embed_dim").get<int>();
    p.config.proto_dim = j.at("proto_dim").get<int>();
    p.config.rounds = j.at("rounds").get<int>();
    p.config.init_tau = j.value("init_tau", 10.0);
    p.config.sign = j.at("sign").get<std::string>() == "literal" ? DistanceSign::kLiteral
                                                                 : DistanceSign::kNearest;
    auto features = parse_feature_set(j.at("features").get<std::string>());
    if (!features) throw InputError("unknown feature set");
    p.config.features = *features;
    p.config.validate();
    p.log_tau = j.at("log_tau").get<double>();
    p.feature_weights = matrix_from_json(j.at("feature_weights"));
    p.neighbor_weights = matrix_from_json(j.at("neighbor_weights"));
    p.hidden_weights = matrix_from_json(j.at("hidden_weights"));
    p.proto_weights = matrix_from_json(j.at("proto_weights"));
    const auto& c = p.config;
    if (p.feature_weights.rows() != c.embed_dim || p.feature_weights.cols() != c.feature_dim() ||
        p.neighbor_weights.rows() != c.embed_dim || p.neighbor_weights.cols() != c.embed_dim ||
        p.hidden_weights.rows() != c.proto_dim || p.hidden_weights.cols() != c.embed_dim ||
        p.proto_weights.rows() != c.embed_dim || p.proto_weights.cols() != c.proto_dim) {
      throw InputError("matrix shapes do not match the stored dimensions");
    }
    return p;
  } catch (const std::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace pgg
