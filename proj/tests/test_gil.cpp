#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>

#include "pgg/errors.hpp"
#include "pgg/gil.hpp"
#include "pgg/graphgen.hpp"
#include "pgg/serialize.hpp"
#include "pgg/uct.hpp"
#include "gradcheck.hpp"
#include "support.hpp"
#include "tempdir.hpp"

using namespace pgg;
using namespace pgg::test;

namespace {

GnnParams small_params(std::uint64_t seed, int rounds = 3, FeatureSet features = FeatureSet::kMembership) {
  GnnConfig cfg;
  cfg.embed_dim = 8;
  cfg.proto_dim = 6;
  cfg.rounds = rounds;
  cfg.features = features;
  return init_params(cfg, seed);
}

Demonstration demo(std::shared_ptr<const GameInstance> inst, std::vector<int> set,
                   std::vector<long> counts) {
  MdpState s(*inst);
  for (int v : set) s.apply(v);
  return {inst, std::move(set), s.valid_actions(), std::move(counts)};
}

// Replays the fast rollout and checks each committed action against the
// double-precision policy, allowing float-level near ties.
void check_rollout_against_policy(const GameInstance& inst, const GnnParams& params) {
  const auto fast = greedy_rollout(inst, params, Objective::kSocialWelfare);
  MdpState s(inst);
  for (std::size_t k = 0; k < fast.independent_set.size(); ++k) {
    const auto actions = s.valid_actions();
    bool independent = true;
    for (std::size_t i = 0; i < actions.size() && independent; ++i) {
      for (std::size_t j = i + 1; j < actions.size(); ++j) {
        if (inst.graph.has_edge(actions[i], actions[j])) {
          independent = false;
          break;
        }
      }
    }
    if (independent) {
      // Every remaining valid vertex ends in the set whatever the order.
      std::vector<int> rest(fast.independent_set.begin() + static_cast<long>(k), fast.independent_set.end());
      std::sort(rest.begin(), rest.end());
      CHECK(rest == actions);
      return;
    }
    const auto probs = policy_probs(s, params);
    const int chosen = fast.independent_set[k];
    const auto pos = std::find(actions.begin(), actions.end(), chosen) - actions.begin();
    REQUIRE(pos < static_cast<long>(actions.size()));
    const double top = *std::max_element(probs.begin(), probs.end());
    CHECK(probs[pos] >= top * (1.0 - 1e-4));
    s.apply(chosen);
  }
  CHECK(s.is_terminal());
}

}  // namespace

TEST_CASE("node features") {
  const auto p = path3({0.2, 0.9, 0.4});
  MdpState s(p);
  const auto x0 = node_features(s);
  CHECK(x0.rows() == 2);
  for (int v = 0; v < 3; ++v) {
    CHECK(x0(0, v) == 0.0);
    CHECK(x0(1, v) == 1.0);
  }
  s.apply(2);
  const auto x1 = node_features(s);
  CHECK(x1(0, 2) == 1.0);
  CHECK(x1(1, 2) == 0.0);
  CHECK((x1.colwise().sum().array() == 1.0).all());
  const auto xc = node_features(s, FeatureSet::kMembershipCost);
  CHECK(xc.rows() == 3);
  CHECK(xc(2, 1) == 0.9);
}

TEST_CASE("embedding without edges reduces to the node term") {
  const auto inst = make_instance(4, {});
  const auto params = small_params(1);
  MdpState s(inst);
  s.apply(1);
  const auto x = node_features(s);
  const auto emb = s2v_embed(inst.graph, x, params);
  const Eigen::MatrixXd expected = (params.feature_weights * x).cwiseMax(0.0);
  CHECK((emb.nodes - expected).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((emb.state - expected.rowwise().sum()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("embedding, probabilities and loss are permutation invariant") {
  Rng rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 6 + static_cast<int>(rng.uniform_index(10));
    const auto inst = random_instance(rng.next(), n);
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span<int>(perm));
    GameInstance moved = inst;
    moved.graph = inst.graph.relabeled(perm);
    for (int v = 0; v < n; ++v) moved.costs[perm[v]] = inst.costs[v];

    const auto params = small_params(trial, 3 + trial % 4, FeatureSet::kMembershipCost);
    MdpState a(inst), b(moved);
    const int first = static_cast<int>(rng.uniform_index(n));
    a.apply(first);
    b.apply(perm[first]);
    const auto ea = s2v_embed(inst.graph, node_features(a, FeatureSet::kMembershipCost), params);
    const auto eb = s2v_embed(moved.graph, node_features(b, FeatureSet::kMembershipCost), params);
    CHECK((ea.state - eb.state).cwiseAbs().maxCoeff() < 1e-9);
    if (a.is_terminal()) continue;
    const auto pa = policy_probs(a, params);
    const auto pb = policy_probs(b, params);
    const auto va = a.valid_actions();
    const auto vb = b.valid_actions();
    for (std::size_t i = 0; i < va.size(); ++i) {
      const auto j = std::find(vb.begin(), vb.end(), perm[va[i]]) - vb.begin();
      CHECK(pa[i] == doctest::Approx(pb[j]).epsilon(1e-9));
    }
    CHECK(greedy_rollout(inst, params, Objective::kFairness).value ==
          doctest::Approx(greedy_rollout(moved, params, Objective::kFairness).value).epsilon(1e-12));
  }
}

TEST_CASE("config validation bounds the rounds") {
  GnnConfig cfg;
  for (int k : {3, 4, 5, 6}) {
    cfg.rounds = k;
    CHECK_NOTHROW(cfg.validate());
  }
  for (int k : {0, 2, 7}) {
    cfg.rounds = k;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
}

TEST_CASE("policy probabilities") {
  const auto params = small_params(3);
  const auto pair = make_instance(2, {});
  const auto p2 = policy_probs(MdpState(pair), params);
  CHECK(p2[0] == doctest::Approx(0.5));
  CHECK(p2[1] == doctest::Approx(0.5));

  const auto line = path3();
  MdpState one(line);
  one.apply(0);
  CHECK(policy_probs(one, params) == std::vector<double>{1.0});

  auto hot = params;
  hot.log_tau = 60.0;
  const auto inst = random_instance(5, 12);
  const auto uniform = policy_probs(MdpState(inst), hot);
  for (double p : uniform) CHECK(p == doctest::Approx(1.0 / 12.0).epsilon(1e-9));

  MdpState done(line);
  done.apply(1);
  CHECK_THROWS_AS(policy_probs(done, params), ContractError);

  Rng rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const auto g = random_instance(rng.next(), 5 + static_cast<int>(rng.uniform_index(20)));
    const auto probs = policy_probs(MdpState(g), small_params(trial));
    CHECK(std::accumulate(probs.begin(), probs.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
    for (double p : probs) CHECK(p > 0.0);
  }
}

TEST_CASE("kl loss") {
  CHECK(kl_loss(std::vector<double>{3, 1}, std::vector<double>{0.75, 0.25}) ==
        doctest::Approx(0.75 * std::log(1 / 0.75) + 0.25 * std::log(4.0)));
  CHECK(kl_loss(std::vector<double>{3, 1}, std::vector<double>{0.75, 0.25}) == doctest::Approx(0.5623).epsilon(1e-4));
  CHECK(kl_loss(std::vector<long>{5, 0}, std::vector<double>{1 - 1e-12, 1e-12}) == doctest::Approx(0.0));
  CHECK(kl_loss(std::vector<long>{2, 2, 2}, std::vector<double>(3, 1.0 / 3.0)) == doctest::Approx(std::log(3.0)));
  CHECK(std::isfinite(kl_loss(std::vector<long>{1, 1}, std::vector<double>{1.0, 0.0})));

  // Gibbs: cross-entropy is at least the entropy, with equality at the empirical distribution.
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform_index(8));
    std::vector<double> counts(k), probs(k), empirical(k);
    double total = 0.0, z = 0.0;
    for (int i = 0; i < k; ++i) {
      counts[i] = static_cast<double>(rng.uniform_index(20));
      probs[i] = 0.01 + rng.uniform01();
      total += counts[i];
      z += probs[i];
    }
    if (total == 0.0) continue;
    double entropy = 0.0;
    for (int i = 0; i < k; ++i) {
      probs[i] /= z;
      empirical[i] = counts[i] / total;
      if (counts[i] > 0) entropy -= empirical[i] * std::log(empirical[i]);
    }
    CHECK(kl_loss(counts, probs) >= entropy - 1e-12);
    CHECK(kl_loss(counts, empirical) == doctest::Approx(entropy).epsilon(1e-12));
  }
}

TEST_CASE("analytic gradients match central differences") {
  Rng rng(101);
  for (int trial = 0; trial < 3; ++trial) {
    const auto features = trial == 2 ? FeatureSet::kMembershipCost : FeatureSet::kMembership;
    const auto batch = gradcheck_fixture(rng.next(), features);
    GnnParams params = small_params(trial, 3 + trial, features);
    params.log_tau = std::log(0.8);
    const auto errors = gradcheck(batch, params);
    for (std::size_t b = 0; b < GnnParams::kNumBlocks; ++b) {
      INFO("block " << GnnParams::kBlockNames[b]);
      CHECK(errors[b] < 1e-4);
    }
  }
}

TEST_CASE("gradient vanishes on a symmetric two-action fixture") {
  auto inst = std::make_shared<const GameInstance>(make_instance(2, {}));
  const std::vector<Demonstration> batch = {demo(inst, {}, {5, 5})};
  const auto params = small_params(2);
  const auto g = backward(batch, params);
  CHECK(g.loss == doctest::Approx(std::log(2.0)));
  CHECK(std::fabs(g.gradient.log_tau) < 1e-6);
}

TEST_CASE("duplicating a demonstration leaves the mean gradient unchanged") {
  auto inst = std::make_shared<const GameInstance>(random_instance(8, 8));
  MdpState s(*inst);
  const auto actions = s.valid_actions();
  std::vector<long> counts(actions.size());
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] = static_cast<long>(i % 3 + 1);
  const auto d = demo(inst, {}, counts);
  const auto params = small_params(4);
  const std::vector<Demonstration> one = {d}, two = {d, d};
  const auto g1 = backward(one, params);
  const auto g2 = backward(two, params);
  CHECK(g1.loss == doctest::Approx(g2.loss).epsilon(1e-14));
  for (std::size_t b = 0; b < GnnParams::kNumBlocks; ++b) {
    const auto x = g1.gradient.blocks()[b];
    const auto y = g2.gradient.blocks()[b];
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(x[i] == doctest::Approx(y[i]).epsilon(1e-12));
  }
}

TEST_CASE("training schedules") {
  auto inst15 = std::make_shared<const GameInstance>(random_instance(1, 15));
  auto inst25 = std::make_shared<const GameInstance>(random_instance(2, 25));
  DemonstrationSets sets;
  sets[15].push_back(demo(inst15, {}, std::vector<long>(15, 1)));
  TrainConfig cfg;
  cfg.target_n = 15;
  CHECK(training_schedule(sets, cfg).size() == 1);
  cfg.target_n = 25;
  CHECK_THROWS_AS(training_schedule(sets, cfg), ConfigError);

  sets[25].push_back(demo(inst25, {}, std::vector<long>(25, 1)));
  cfg.strategy = TrainStrategy::kCurriculum;
  const auto phases = training_schedule(sets, cfg);
  REQUIRE(phases.size() == 2);
  CHECK(phases[0].sizes == std::vector<int>{15});
  CHECK(phases[0].steps == 1000);
  CHECK(phases[1].sizes == std::vector<int>{25});
  CHECK(phases[1].steps == 1000);
  cfg.strategy = TrainStrategy::kMixed;
  const auto mixed = training_schedule(sets, cfg);
  REQUIRE(mixed.size() == 1);
  CHECK(mixed[0].sizes == std::vector<int>{15, 25});
  CHECK(mixed[0].steps == 2000);
}

TEST_CASE("training records one validation point per interval and keeps the best") {
  GraphModelConfig er;
  er.n = 10;
  const auto train_set = make_instance_set(er, CostSetting::kIdentical, Split::kTrain, 20, 4).instances;
  const auto eval = make_instance_set(er, CostSetting::kIdentical, Split::kEval, 10, 4).instances;
  DemonstrationSets sets;
  for (const auto& inst : train_set) {
    UctConfig u;
    auto r = plan_episode(inst, u, Objective::kSocialWelfare);
    sets[10].insert(sets[10].end(), r.demonstrations.begin(), r.demonstrations.end());
  }
  TrainConfig cfg;
  cfg.target_n = 10;
  cfg.total_steps = 200;
  cfg.validate_every = 50;
  cfg.gnn.embed_dim = 16;
  cfg.gnn.proto_dim = 16;
  const auto r = train(sets, cfg, eval);
  CHECK(r.curve.size() == 4);
  double best = 0.0;
  for (auto [step, score] : r.curve) best = std::max(best, score);
  CHECK(r.best_score == best);
  CHECK(validation_score(r.best, eval, Objective::kSocialWelfare) == doctest::Approx(best).epsilon(1e-12));

  cfg.total_steps = 100;
  const auto again = train(sets, cfg, eval);
  const auto once_more = train(sets, cfg, eval);
  CHECK(again.best_score == once_more.best_score);
  CHECK(again.best.feature_weights == once_more.best.feature_weights);
}

TEST_CASE("non-finite losses stop training with the batch named") {
  auto raw = random_instance(3, 6);
  raw.costs[0] = std::numeric_limits<double>::quiet_NaN();
  auto inst = std::make_shared<const GameInstance>(raw);
  DemonstrationSets sets;
  sets[6].push_back(demo(inst, {}, std::vector<long>(6, 1)));
  TrainConfig cfg;
  cfg.target_n = 6;
  cfg.total_steps = 5;
  cfg.gnn.features = FeatureSet::kMembershipCost;
  const auto eval = std::vector<GameInstance>{random_instance(4, 6)};
  try {
    train(sets, cfg, eval);
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("batch") != std::string::npos);
  }
}

TEST_CASE("greedy rollouts") {
  const auto params = small_params(7);
  CHECK(greedy_rollout(make_instance(1, {}), params, Objective::kSocialWelfare).independent_set ==
        std::vector<int>{0});
  Rng rng(55);
  for (int trial = 0; trial < 40; ++trial) {
    const auto inst = random_instance(rng.next(), 5 + static_cast<int>(rng.uniform_index(40)));
    GnnConfig cfg;
    cfg.rounds = 3 + trial % 4;
    cfg.features = trial % 2 ? FeatureSet::kMembershipCost : FeatureSet::kMembership;
    const auto p = init_params(cfg, trial);
    const auto r = greedy_rollout(inst, p, Objective::kSocialWelfare);
    CHECK(is_maximal_is(inst.graph, r.independent_set));
    CHECK(is_psne(inst, profile_from_set(inst.num_players(), r.independent_set)));
    CHECK(r.independent_set == greedy_rollout(inst, p, Objective::kSocialWelfare).independent_set);
    check_rollout_against_policy(inst, p);
  }
  // Parameters do not depend on graph size.
  GraphModelConfig ba;
  ba.model = GraphModel::kBarabasiAlbert;
  ba.n = 100;
  const auto big = make_instance(ba, CostSetting::kHeterogeneous, Split::kTest, 0, 1);
  const auto r = greedy_rollout(big, init_params(GnnConfig{}, 1), Objective::kFairness);
  CHECK(is_maximal_is(big.graph, r.independent_set));
}

TEST_CASE("model files round trip and detect corruption") {
  TempDir tmp("gil");
  const auto params = small_params(9, 5, FeatureSet::kMembershipCost);
  const auto path = tmp.path() / "model.json";
  save_model(path, params);
  const auto back = load_model(path);
  CHECK(back.feature_weights == params.feature_weights);
  CHECK(back.neighbor_weights == params.neighbor_weights);
  CHECK(back.hidden_weights == params.hidden_weights);
  CHECK(back.proto_weights == params.proto_weights);
  CHECK(back.log_tau == params.log_tau);
  CHECK(back.config.rounds == 5);
  CHECK(back.config.features == FeatureSet::kMembershipCost);

  std::string text = read_text_file(path);
  const auto pos = text.find("\"log_tau\"");
  REQUIRE(pos != std::string::npos);
  text.insert(pos, "\"extra\":1,");
  write_text_file(path, text);
  CHECK_THROWS_AS(load_model(path), IoError);
  CHECK_THROWS_AS(load_model(tmp.path() / "missing.json"), IoError);
}
