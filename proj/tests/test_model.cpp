#include <gtest/gtest.h>

#include <sstream>

#include "fixtures.hpp"
#include "flowtrack/model.hpp"

using namespace flowtrack;

namespace {

KltConnection klt_conn(Frame dt, double conf, double tiou) {
  KltConnection c;
  c.temporal_distance = dt;
  c.min_confidence = conf;
  c.translated_iou = tiou;
  c.shape.assign(5, Vec2{0, 0});
  return c;
}

LongConnection long_conn(Frame dt, double piou) {
  LongConnection c;
  c.temporal_distance = dt;
  c.predicted_iou = piou;
  return c;
}

bool same_parameters(const ScoringModel& a, const ScoringModel& b) {
  std::vector<double> va, vb;
  for_each_parameter_array(a, [&](auto m) { va.insert(va.end(), m.data(), m.data() + m.size()); });
  for_each_parameter_array(b, [&](auto m) { vb.insert(vb.end(), m.data(), m.data() + m.size()); });
  return va == vb;
}

}  // namespace

TEST(Mlp, TwoLayerOracle) {
  DenseLayer l1{Eigen::MatrixXd(2, 2), Eigen::VectorXd(2)};
  l1.weight << 1, -1, 0.5, 2;
  l1.bias << 0, -3;
  DenseLayer l2{Eigen::MatrixXd(1, 2), Eigen::VectorXd(1)};
  l2.weight << 2, 1;
  l2.bias << 0.25;
  const MlpBlock block({l1, l2});
  // h = relu([1-2, 0.5+4-3]) = [0, 1.5]; y = 0 + 1.5 + 0.25
  EXPECT_DOUBLE_EQ(block.forward_one(Eigen::Vector2d(1, 2))(0), 1.75);
  EXPECT_EQ(block.n_layers(), 1);
}

TEST(Mlp, IdentityBlock) {
  DenseLayer l{Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3)};
  const MlpBlock block({l, l});
  const Eigen::Vector3d x(0.5, 2.0, 7.0);
  EXPECT_EQ(block.forward_one(x), x);
}

TEST(Mlp, BatchedMatchesColumnwise) {
  Rng rng(3);
  MlpBlock block(4, 3, 8, 2);
  block.initialize(rng);
  Eigen::MatrixXd x(4, 6);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  const Eigen::MatrixXd y = block.forward(x);
  for (Eigen::Index c = 0; c < 6; ++c) EXPECT_LT((y.col(c) - block.forward_one(x.col(c))).norm(), 1e-12);
}

TEST(Mlp, ShapeMismatchThrows) {
  MlpBlock block(4, 1, 8, 2);
  EXPECT_THROW(block.forward(Eigen::MatrixXd::Zero(3, 2)), ShapeError);
  DenseLayer a{Eigen::MatrixXd::Zero(2, 3), Eigen::VectorXd::Zero(2)};
  DenseLayer b{Eigen::MatrixXd::Zero(1, 4), Eigen::VectorXd::Zero(1)};
  EXPECT_THROW(MlpBlock({a, b}), ShapeError);
}

TEST(Mlp, GlorotRangeAndZeroBias) {
  Rng rng(5);
  MlpBlock block(10, 2, 30, 1);
  block.initialize(rng);
  const double lim0 = std::sqrt(6.0 / 40.0);
  EXPECT_LE(block.layers()[0].weight.cwiseAbs().maxCoeff(), lim0);
  EXPECT_GT(block.layers()[0].weight.cwiseAbs().maxCoeff(), 0.5 * lim0);
  for (const auto& l : block.layers()) EXPECT_EQ(l.bias.norm(), 0.0);
  EXPECT_EQ(block.parameter_count(), std::size_t(10 * 30 + 30 + 30 * 30 + 30 + 30 + 1));
}

TEST(Model, DefaultArchitectureShapes) {
  const auto m = ScoringModel::initialized(Architecture{}, 1);
  EXPECT_NO_THROW(m.check());
  EXPECT_EQ(m.detect.n_layers(), 4);
  EXPECT_EQ(m.klt.n_layers(), 7);
  EXPECT_EQ(m.klt.input_width(), 13);
  EXPECT_EQ(m.klt.output_width(), 64);
  EXPECT_EQ(m.long_range.output_width(), 32);
  EXPECT_EQ(m.combine.input_width(), 98);
  EXPECT_EQ(m.combine.n_layers(), 4);
  EXPECT_EQ(m.s_entry, -1.0);
}

TEST(Model, SeedDeterminesWeights) {
  const auto a = ScoringModel::initialized(fixtures::tiny_architecture(), 7);
  const auto b = ScoringModel::initialized(fixtures::tiny_architecture(), 7);
  const auto c = ScoringModel::initialized(fixtures::tiny_architecture(), 8);
  EXPECT_TRUE(same_parameters(a, b));
  EXPECT_FALSE(same_parameters(a, c));
}

TEST(Model, CheckRejectsForeignBlock) {
  auto m = ScoringModel::initialized(fixtures::tiny_architecture(), 1);
  m.klt = MlpBlock(5, 1, 3, 3);
  EXPECT_THROW(m.check(), ShapeError);
}

TEST(Model, Encodings) {
  const FeatureScale scale{4.0, 100.0};
  KltConnection k = klt_conn(2, 0.3, 0.9);
  k.shape = {{0, 0}, {10, 20}, {20, -40}, {30, 0}, {50, 50}};
  const auto v = encode_klt(k, scale, 5);
  ASSERT_EQ(v.size(), 13);
  EXPECT_DOUBLE_EQ(v(0), 0.5);
  EXPECT_DOUBLE_EQ(v(1), 0.3);
  EXPECT_DOUBLE_EQ(v(2), 0.9);
  EXPECT_DOUBLE_EQ(v(7), 0.2);
  EXPECT_DOUBLE_EQ(v(8), -0.4);
  EXPECT_DOUBLE_EQ(v(12), 0.5);
  EXPECT_THROW(encode_klt(k, scale, 4), ShapeError);
  LongConnection l = long_conn(8, 0.4);
  l.pre_velocity = {5, -10};
  l.median_post_velocity = {1, 2};
  const auto w = encode_long(l, scale);
  EXPECT_EQ(w, (Eigen::VectorXd(6) << 2.0, 0.4, 0.05, -0.1, 0.01, 0.02).finished());
}

TEST(Model, HandModelScores) {
  const auto m = fixtures::hand_model();
  const FeatureScale scale{10.0, 1000.0};
  EXPECT_DOUBLE_EQ(f_detect(m, {0.75, 0.2, 0.1}), 5.0);
  EdgeFeatures e;
  e.klt = {klt_conn(1, 1, 0.8), klt_conn(1, 1, 0.6)};
  // klt mean = -0.1 + 0.7 = 0.6; no long; combine = 1.2 + 1.0 - 2.5
  EXPECT_NEAR(f_edge(m, e, scale), -0.3, 1e-12);
  e.long_range = {long_conn(2, 0.5)};
  // long = -0.2 + 0.5 = 0.3 -> +0.6 + 0.1
  EXPECT_NEAR(f_edge(m, e, scale), 0.4, 1e-12);
}

TEST(Model, EdgeScoreEmptyConnectionsThrows) {
  const auto m = fixtures::hand_model();
  EXPECT_THROW(f_edge(m, EdgeFeatures{}, FeatureScale{}), std::invalid_argument);
}

TEST(Model, PoolingInvariances) {
  const auto m = ScoringModel::initialized(fixtures::tiny_architecture(), 2);
  const FeatureScale scale;
  EdgeFeatures e;
  e.klt = {klt_conn(1, 0.9, 0.7), klt_conn(2, 0.5, 0.3), klt_conn(3, 0.2, 0.95)};
  e.long_range = {long_conn(4, 0.1), long_conn(6, 0.8)};
  const double base = f_edge(m, e, scale);
  EdgeFeatures perm = e;
  std::swap(perm.klt[0], perm.klt[2]);
  std::swap(perm.long_range[0], perm.long_range[1]);
  EXPECT_NEAR(f_edge(m, perm, scale), base, 1e-12);

  // duplicating every connection keeps the pooled features but doubles the counts
  EdgeFeatures dup = e;
  dup.klt.insert(dup.klt.end(), e.klt.begin(), e.klt.end());
  auto counts_only = m;
  for (int c = 0; c < m.arch.klt_features + m.arch.long_features; ++c) counts_only.combine.layers()[0].weight.col(c).setZero();
  EXPECT_NE(f_edge(counts_only, dup, scale), f_edge(counts_only, e, scale));
  auto pooled_only = m;
  pooled_only.combine.layers()[0].weight.rightCols(2).setZero();
  EXPECT_NEAR(f_edge(pooled_only, dup, scale), f_edge(pooled_only, e, scale), 1e-12);
}

TEST(Model, BatchMatchesSingle) {
  const auto m = ScoringModel::initialized(fixtures::tiny_architecture(), 4);
  const auto f = fixtures::crossing_graph();
  std::vector<const EdgeFeatures*> ptrs;
  for (const auto& e : f.graph.edges) ptrs.push_back(&e.features);
  const auto batched = edge_scores_chunked(m, ptrs, f.graph.scale(), 7);
  ASSERT_EQ(batched.size(), ptrs.size());
  for (std::size_t k = 0; k < ptrs.size(); ++k) EXPECT_NEAR(batched[k], f_edge(m, *ptrs[k], f.graph.scale()), 1e-12);
}

TEST(Model, CheckpointRoundTrip) {
  auto m = ScoringModel::initialized(fixtures::tiny_architecture(), 9);
  m.s_entry = -0.123456789;
  std::stringstream buf;
  save_model(buf, m);
  const auto back = load_model(buf);
  EXPECT_EQ(back.arch, m.arch);
  EXPECT_TRUE(same_parameters(m, back));

  const auto dir = fixtures::temp_dir("model");
  save_model_file(dir / "m.bin", m);
  EXPECT_TRUE(same_parameters(m, load_model_file(dir / "m.bin")));
}

TEST(Model, CheckpointCorruption) {
  std::stringstream junk("not a model at all");
  EXPECT_THROW(load_model(junk), std::runtime_error);
  std::stringstream buf;
  save_model(buf, ScoringModel::initialized(fixtures::tiny_architecture(), 1));
  std::string s = buf.str();
  std::stringstream truncated(s.substr(0, s.size() / 2));
  EXPECT_THROW(load_model(truncated), std::runtime_error);
  EXPECT_THROW(load_model_file("/nonexistent/m.bin"), std::runtime_error);
}

TEST(Model, GradientAlgebra) {
  const auto m = ScoringModel::initialized(fixtures::tiny_architecture(), 1);
  auto g = ParamGradient::zeros_like(m);
  g.s_entry = 1;
  g.combine.layers[0].bias(0) = 2;
  auto h = g;
  h += g;
  h *= 0.25;
  EXPECT_DOUBLE_EQ(h.s_entry, 0.5);
  EXPECT_DOUBLE_EQ(h.combine.layers[0].bias(0), 1.0);
  std::size_t n = 0;
  for_each_gradient_array(h, [&](auto a) { n += std::size_t(a.size()); });
  EXPECT_EQ(n, m.parameter_count());
}
