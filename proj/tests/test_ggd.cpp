#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "flowtrack/ggd.hpp"
#include "flowtrack/io.hpp"

using namespace flowtrack;
using fixtures::manual_graph;

namespace {

std::size_t count_kind(const std::vector<Ggd>& g, PerturbationKind k) {
  return std::size_t(std::count_if(g.begin(), g.end(), [&](const Ggd& x) { return x.kind == k; }));
}

std::vector<Ggd> of_kind(const std::vector<Ggd>& g, PerturbationKind k) {
  std::vector<Ggd> out;
  for (const auto& x : g)
    if (x.kind == k) out.push_back(x);
  return out;
}

std::uint32_t edge(const TrackingGraph& g, std::uint32_t a, std::uint32_t b) { return g.topology.find_edge(a, b).value(); }

Ggd strip(Ggd g) {
  g.kind.reset();
  g.site.clear();
  return g;
}

}  // namespace

TEST(Kinds, NamesRoundTrip) {
  for (std::size_t k = 0; k < kPerturbationKinds; ++k)
    EXPECT_EQ(kind_from_name(kind_name(PerturbationKind(k))), PerturbationKind(k));
  EXPECT_EQ(kind_name(PerturbationKind::DoubleSplitAndMerge), "DoubleSplitAndMerge");
  EXPECT_THROW(kind_from_name("Teleport"), std::invalid_argument);
}

TEST(Diff, IdenticalIsEmpty) {
  const auto f = fixtures::crossing_graph();
  EXPECT_TRUE(diff(f.graph.topology, f.truth, f.truth).empty());
}

TEST(Diff, ShapeMismatch) {
  const auto g = manual_graph({0, 1}, {{0, 1}});
  const auto x = FeasibleSolution::empty(g.topology);
  auto bad = x;
  bad.edge.push_back(0);
  EXPECT_THROW(diff(g.topology, x, bad), ContractViolation);
}

TEST(Diff, MergePair) {
  const auto g = manual_graph({0, 1}, {{0, 1}});
  const auto x_star = solution_from_chains(g.topology, {{0}, {1}});
  const auto x = solution_from_chains(g.topology, {{0, 1}});
  const auto d = diff(g.topology, x_star, x);
  EXPECT_EQ(d.minus_edges, (std::vector<std::uint32_t>{0}));
  EXPECT_TRUE(d.plus_edges.empty());
  EXPECT_TRUE(d.plus_vertices.empty() && d.minus_vertices.empty());
  EXPECT_EQ(d.entry_delta, 1);
  const auto ggds = enumerate_perturbations(g, x_star);
  ASSERT_EQ(count_kind(ggds, PerturbationKind::Merge), 1u);
  EXPECT_EQ(strip(of_kind(ggds, PerturbationKind::Merge)[0]), d);
}

TEST(Enumerate, IdSwitchPair) {
  // frame 0: A=0, C=1; frame 1: B=2, D=3
  const auto g = manual_graph({0, 0, 1, 1}, {{0, 2}, {0, 3}, {1, 2}, {1, 3}});
  const auto x_star = solution_from_chains(g.topology, {{0, 2}, {1, 3}});
  const auto ggds = enumerate_perturbations(g, x_star);
  const auto sw = of_kind(ggds, PerturbationKind::IdSwitch);
  ASSERT_EQ(sw.size(), 1u);
  EXPECT_EQ(sw[0].plus_edges, (std::vector<std::uint32_t>{edge(g, 0, 2), edge(g, 1, 3)}));
  EXPECT_EQ(sw[0].minus_edges, (std::vector<std::uint32_t>{edge(g, 0, 3), edge(g, 1, 2)}));
  EXPECT_EQ(sw[0].entry_delta, 0);
  EXPECT_EQ(sw[0].site, (std::vector<DetectionId>{1, 3, 2, 4}));
}

TEST(Enumerate, IdSwitchAtEveryAlignedPosition) {
  for (int m : {1, 2, 5}) {
    // two parallel tracks over m+1 frames, crossing edges between consecutive frames only
    std::vector<Frame> frames;
    for (int f = 0; f <= m; ++f) frames.insert(frames.end(), {Frame(f), Frame(f)});
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    std::vector<std::uint32_t> top, bottom;
    for (int f = 0; f <= m; ++f) {
      top.push_back(std::uint32_t(2 * f));
      bottom.push_back(std::uint32_t(2 * f + 1));
    }
    for (int f = 0; f < m; ++f)
      for (std::uint32_t a : {top[f], bottom[f]})
        for (std::uint32_t b : {top[f + 1], bottom[f + 1]}) edges.emplace_back(a, b);
    const auto g = manual_graph(frames, edges);
    const auto x_star = solution_from_chains(g.topology, {top, bottom});
    EXPECT_EQ(count_kind(enumerate_perturbations(g, x_star), PerturbationKind::IdSwitch), std::size_t(m));
  }
}

TEST(Enumerate, DetectionSkipOnThreeChain) {
  const auto g = manual_graph({0, 1, 2}, {{0, 1}, {1, 2}, {0, 2}});
  const auto x_star = solution_from_chains(g.topology, {{0, 1, 2}});
  const auto skips = of_kind(enumerate_perturbations(g, x_star), PerturbationKind::DetectionSkip);
  ASSERT_EQ(skips.size(), 1u);
  EXPECT_EQ(skips[0].site, (std::vector<DetectionId>{1, 2, 3}));
  EXPECT_EQ(skips[0].plus_vertices, (std::vector<std::uint32_t>{1}));
  EXPECT_EQ(skips[0].minus_edges, (std::vector<std::uint32_t>{edge(g, 0, 2)}));
  EXPECT_EQ(skips[0].entry_delta, 0);
  // no skip edge, no example
  const auto g2 = manual_graph({0, 1, 2}, {{0, 1}, {1, 2}});
  EXPECT_EQ(count_kind(enumerate_perturbations(g2, solution_from_chains(g2.topology, {{0, 1, 2}})),
                       PerturbationKind::DetectionSkip),
            0u);
}

TEST(Enumerate, FalsePositiveBetweenTrueDetections) {
  // A (frame 0) -> B (frame 2) in x*, F at frame 1 unused
  const auto g = manual_graph({0, 1, 2}, {{0, 1}, {1, 2}, {0, 2}});
  const auto x_star = solution_from_chains(g.topology, {{0, 2}});
  const auto ggds = enumerate_perturbations(g, x_star);
  const auto fp = of_kind(ggds, PerturbationKind::FalsePositive);
  ASSERT_EQ(fp.size(), 1u);
  EXPECT_EQ(fp[0].minus_vertices, (std::vector<std::uint32_t>{1}));
  EXPECT_EQ(fp[0].plus_edges, (std::vector<std::uint32_t>{edge(g, 0, 2)}));
  EXPECT_EQ(fp[0].minus_edges.size(), 2u);
  EXPECT_TRUE(fp[0].plus_vertices.empty());
  EXPECT_EQ(fp[0].entry_delta, 0);
  EXPECT_EQ(count_kind(ggds, PerturbationKind::SplitToFalsePositive), 1u);
  EXPECT_EQ(count_kind(ggds, PerturbationKind::SplitFromFalsePositive), 1u);
}

TEST(Enumerate, UnchainableFalsePositiveStandsAlone) {
  const auto g = manual_graph({0, 1, 2}, {{0, 2}});
  const auto fp = of_kind(enumerate_perturbations(g, solution_from_chains(g.topology, {{0, 2}})),
                          PerturbationKind::FalsePositive);
  ASSERT_EQ(fp.size(), 1u);
  EXPECT_EQ(fp[0].minus_vertices, (std::vector<std::uint32_t>{1}));
  EXPECT_TRUE(fp[0].plus_edges.empty() && fp[0].minus_edges.empty());
  EXPECT_EQ(fp[0].entry_delta, -1);
}

TEST(Enumerate, InfeasibleTruthThrows) {
  const auto g = manual_graph({0, 1}, {{0, 1}});
  auto x = FeasibleSolution::empty(g.topology);
  x.vertex[0] = 1;
  EXPECT_THROW(enumerate_deltas(g, x), ContractViolation);
}

TEST(Enumerate, EveryDeltaFeasibleAndMatchesDiff) {
  const auto f = fixtures::crossing_graph();
  const auto deltas = enumerate_deltas(f.graph, f.truth);
  const auto ggds = enumerate_perturbations(f.graph, f.truth);
  ASSERT_EQ(deltas.size(), ggds.size());
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    const auto x = apply_delta(f.truth, deltas[i].delta);
    ASSERT_TRUE(check_feasible(f.graph.topology, x)) << kind_name(deltas[i].kind);
    EXPECT_NE(x, f.truth);
    EXPECT_EQ(strip(ggds[i]), diff(f.graph.topology, f.truth, x)) << i;
    EXPECT_EQ(ggds[i].kind, deltas[i].kind);
    std::set<std::uint32_t> pv(ggds[i].plus_vertices.begin(), ggds[i].plus_vertices.end());
    for (auto v : ggds[i].minus_vertices) EXPECT_FALSE(pv.count(v));
    std::set<std::uint32_t> pe(ggds[i].plus_edges.begin(), ggds[i].plus_edges.end());
    for (auto e : ggds[i].minus_edges) EXPECT_FALSE(pe.count(e));
  }
}

TEST(Enumerate, SortedAndDeterministic) {
  const auto f = fixtures::crossing_graph();
  const auto a = enumerate_perturbations(f.graph, f.truth);
  const auto b = enumerate_perturbations(f.graph, f.truth);
  EXPECT_EQ(a, b);
  for (std::size_t i = 1; i < a.size(); ++i)
    EXPECT_LE(std::make_pair(*a[i - 1].kind, a[i - 1].site), std::make_pair(*a[i].kind, a[i].site));
}

TEST(Enumerate, CoverageOnCrossingFixture) {
  const auto f = fixtures::crossing_graph();
  auto ggds = enumerate_perturbations(f.graph, f.truth);
  const auto sub = subtrack_examples(f.graph, f.truth, 2);
  ggds.insert(ggds.end(), sub.begin(), sub.end());
  const auto stats = dataset_stats(ggds);
  for (std::size_t k = 0; k < kPerturbationKinds; ++k) EXPECT_GT(stats[k], 0u) << kind_name(PerturbationKind(k));
  // recount by hand-derived totals for this fixture
  const std::array<std::size_t, kPerturbationKinds> expected = {3, 26, 1, 2, 91, 22, 4, 4, 1, 1, 3, 8, 4, 14, 14};
  EXPECT_EQ(stats, expected);
}

TEST(Stats, EmptyAndSmall) {
  const auto zero = dataset_stats({});
  for (auto c : zero) EXPECT_EQ(c, 0u);
  std::vector<Ggd> g(6);
  g[0].kind = g[1].kind = PerturbationKind::Split;
  g[2].kind = PerturbationKind::Merge;
  g[3].kind = g[4].kind = g[5].kind = PerturbationKind::ProperTrack;
  const auto s = dataset_stats(g);
  EXPECT_EQ(s[std::size_t(PerturbationKind::Split)], 2u);
  EXPECT_EQ(s[std::size_t(PerturbationKind::Merge)], 1u);
  EXPECT_EQ(s[std::size_t(PerturbationKind::ProperTrack)], 3u);
}

TEST(GroundTruth, EmptyGt) {
  const auto f = fixtures::crossing_graph();
  const auto gt = ground_truth_solution(f.graph, std::span<const GroundTruthTrack>());
  EXPECT_EQ(gt.solution, FeasibleSolution::empty(f.graph.topology));
  EXPECT_EQ(gt.splits, 0u);
}

TEST(GroundTruth, CleanChain) {
  const auto g = manual_graph({0, 1, 2, 3}, {{0, 1}, {1, 2}, {2, 3}});
  const std::vector<GroundTruthTrack> gt = {{7, {1, 2, 3, 4}}};
  const auto s = ground_truth_solution(g, gt);
  EXPECT_EQ(s.solution.n_tracks(), 1u);
  EXPECT_EQ(s.solution.first, (std::vector<std::uint8_t>{1, 0, 0, 0}));
  EXPECT_EQ(s.solution.last, (std::vector<std::uint8_t>{0, 0, 0, 1}));
  EXPECT_TRUE(s.events.empty());
}

TEST(GroundTruth, MissingDetectionBridgedBySkipEdge) {
  const auto g = manual_graph({0, 1, 3}, {{0, 1}, {1, 2}});
  // gt lists a detection (id 99) that never made it into the graph
  const std::vector<GroundTruthTrack> gt = {{1, {1, 2, 99, 3}}};
  const auto s = ground_truth_solution(g, gt);
  EXPECT_EQ(s.solution.n_tracks(), 1u);
  EXPECT_EQ(s.splits, 0u);
  EXPECT_EQ(s.events.size(), 1u);
  EXPECT_EQ(solution_chains(g.topology, s.solution), (std::vector<std::vector<std::uint32_t>>{{0, 1, 2}}));
  EXPECT_EQ(s.solution.edge[edge(g, 1, 2)], 1);
}

TEST(GroundTruth, MissingEdgeSplits) {
  const auto g = manual_graph({0, 1, 2}, {{0, 1}});
  const std::vector<GroundTruthTrack> gt = {{1, {1, 2, 3}}};
  const auto s = ground_truth_solution(g, gt);
  EXPECT_EQ(s.splits, 1u);
  EXPECT_EQ(s.solution.n_tracks(), 2u);
  EXPECT_FALSE(s.events.empty());
  EXPECT_TRUE(check_feasible(g.topology, s.solution));
}

TEST(GroundTruth, BoxMatchingAgreesWithIdentity) {
  const auto f = fixtures::crossing_graph();
  // undetected gt frames may sit on a false positive; keep the detected ones only
  auto boxes = f.scenario.gt_boxes;
  for (auto& t : boxes) std::erase_if(t.entries, [](const TrackEntry& e) { return e.detection == kNoDetection; });
  const auto by_box = ground_truth_solution(f.graph, boxes, 0.5);
  EXPECT_EQ(by_box.solution, f.truth);
  // with every gt box, the false positives lying on B's path get absorbed into its track
  const auto all = ground_truth_solution(f.graph, f.scenario.gt_boxes, 0.5);
  EXPECT_EQ(all.solution.n_tracks(), f.truth.n_tracks());
  EXPECT_GT(std::count(all.solution.vertex.begin(), all.solution.vertex.end(), 1),
            std::count(f.truth.vertex.begin(), f.truth.vertex.end(), 1));
  EXPECT_THROW(ground_truth_solution(f.graph, f.scenario.gt_boxes, 0.0), std::invalid_argument);
}

TEST(Subtracks, Counts) {
  std::vector<Frame> frames;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (std::uint32_t k = 0; k < 6; ++k) frames.push_back(Frame(k));
  for (std::uint32_t k = 0; k + 1 < 6; ++k) edges.emplace_back(k, k + 1);
  const auto g = manual_graph(frames, edges);
  const auto x = solution_from_chains(g.topology, {{0, 1, 2, 3, 4, 5}});
  const auto s3 = subtrack_examples(g, x, 3);
  EXPECT_EQ(count_kind(s3, PerturbationKind::TooShortTrack), 2u);
  EXPECT_EQ(count_kind(s3, PerturbationKind::ProperTrack), 2u);
  // odd length: the half rounds up
  const auto ts = of_kind(s3, PerturbationKind::TooShortTrack);
  EXPECT_EQ(ts[0].minus_vertices, (std::vector<std::uint32_t>{0, 1}));
  EXPECT_EQ(ts[0].minus_edges.size(), 1u);
  const auto pt = of_kind(s3, PerturbationKind::ProperTrack);
  EXPECT_EQ(pt[1].plus_vertices, (std::vector<std::uint32_t>{3, 4, 5}));
  EXPECT_EQ(pt[1].plus_edges.size(), 2u);
  EXPECT_EQ(pt[1].entry_delta, 1);
  EXPECT_TRUE(subtrack_examples(g, x, 7).empty());
  EXPECT_THROW(subtrack_examples(g, x, 0), std::invalid_argument);
}

TEST(Subtracks, MinlenTwo) {
  const auto g = manual_graph({0, 1, 2, 3}, {{0, 1}, {1, 2}, {2, 3}});
  const auto x = solution_from_chains(g.topology, {{0, 1, 2, 3}});
  const auto s = subtrack_examples(g, x, 2);
  ASSERT_EQ(s.size(), 4u);
  for (const auto& t : of_kind(s, PerturbationKind::TooShortTrack)) {
    EXPECT_EQ(t.minus_vertices.size(), 1u);
    EXPECT_TRUE(t.minus_edges.empty() && t.plus_vertices.empty() && t.plus_edges.empty());
    EXPECT_EQ(t.entry_delta, -1);
  }
}

TEST(Dataset, FromGraphKeepsFeatures) {
  const auto f = fixtures::crossing_graph();
  const auto ggds = enumerate_perturbations(f.graph, f.truth);
  const auto ds = GgdDataset::from_graph(f.graph, ggds);
  ASSERT_EQ(ds.size(), ggds.size());
  EXPECT_EQ(ds.pool->scale, f.graph.scale());
  for (std::size_t i = 0; i < ggds.size(); ++i) {
    EXPECT_EQ(ds.items[i].kind, ggds[i].kind);
    EXPECT_EQ(ds.items[i].entry_delta, ggds[i].entry_delta);
    ASSERT_EQ(ds.items[i].plus_edges.size(), ggds[i].plus_edges.size());
    for (std::size_t j = 0; j < ggds[i].plus_edges.size(); ++j)
      EXPECT_EQ(ds.pool->edges[ds.items[i].plus_edges[j]], f.graph.edges[ggds[i].plus_edges[j]].features);
    for (std::size_t j = 0; j < ggds[i].minus_vertices.size(); ++j)
      EXPECT_EQ(ds.pool->vertices[ds.items[i].minus_vertices[j]], f.graph.vertices[ggds[i].minus_vertices[j]].features);
  }
  EXPECT_LE(ds.pool->edges.size(), f.graph.edges.size());
}

TEST(Dataset, ConcatAndSelect) {
  const auto f = fixtures::crossing_graph();
  const auto a = GgdDataset::from_graph(f.graph, enumerate_perturbations(f.graph, f.truth));
  const auto b = GgdDataset::from_graph(f.graph, subtrack_examples(f.graph, f.truth, 2));
  const std::vector<GgdDataset> parts = {a, b};
  const auto c = GgdDataset::concat(parts);
  EXPECT_EQ(c.size(), a.size() + b.size());
  const auto& last = c.items.back();
  for (std::size_t j = 0; j < last.plus_edges.size(); ++j)
    EXPECT_EQ(c.pool->edges[last.plus_edges[j]], b.pool->edges[b.items.back().plus_edges[j]]);
  const std::vector<std::size_t> pick = {3, 0};
  const auto s = c.select(pick);
  EXPECT_EQ(s.size(), 2u);
  EXPECT_EQ(s.items[0], c.items[3]);
  EXPECT_EQ(s.pool, c.pool);

  auto g2 = f.graph;
  g2.params.fps = 30;
  const auto other = GgdDataset::from_graph(g2, subtrack_examples(g2, f.truth, 2));
  const std::vector<GgdDataset> mixed = {a, other};
  EXPECT_THROW(GgdDataset::concat(mixed), std::invalid_argument);
}

TEST(Dataset, FileRoundTrip) {
  const auto f = fixtures::crossing_graph();
  auto ggds = enumerate_perturbations(f.graph, f.truth);
  const auto sub = subtrack_examples(f.graph, f.truth, 2);
  ggds.insert(ggds.end(), sub.begin(), sub.end());
  const auto ds = GgdDataset::from_graph(f.graph, ggds);
  std::stringstream buf;
  write_ggds(buf, ds);
  const auto back = read_ggds(buf);
  EXPECT_EQ(back.items, ds.items);
  EXPECT_EQ(back.pool->vertices, ds.pool->vertices);
  EXPECT_EQ(back.pool->edges, ds.pool->edges);
  EXPECT_EQ(back.pool->scale, ds.pool->scale);
  const auto dir = fixtures::temp_dir("ggd");
  write_ggds_file(dir / "a.jsonl", ds);
  EXPECT_EQ(read_ggds_file(dir / "a.jsonl").items, ds.items);
}

TEST(Dataset, CorruptFiles) {
  std::stringstream empty;
  EXPECT_THROW(read_ggds(empty), ParseError);
  std::stringstream wrong(R"({"format":"something-else","version":1})" "\n");
  EXPECT_THROW(read_ggds(wrong), ParseError);
  const auto f = fixtures::crossing_graph();
  std::stringstream buf;
  write_ggds(buf, GgdDataset::from_graph(f.graph, enumerate_perturbations(f.graph, f.truth)));
  const auto text = buf.str();
  std::stringstream truncated(text.substr(0, text.rfind('\n', text.size() - 2) + 1));
  EXPECT_THROW(read_ggds(truncated), ParseError);
  std::stringstream garbage(text + "{not json\n");
  EXPECT_THROW(read_ggds(garbage), ParseError);
  EXPECT_THROW(read_ggds_file("/nonexistent/x.jsonl"), std::runtime_error);
}

TEST(Manifest, RoundTrip) {
  const auto dir = fixtures::temp_dir("manifest");
  const SplitManifest m{{"seq1.jsonl", "seq2.jsonl"}, {"seq3.jsonl"}};
  write_manifest(dir / "split.json", m);
  const auto back = read_manifest(dir / "split.json");
  EXPECT_EQ(back.train, m.train);
  EXPECT_EQ(back.validation, m.validation);
  std::ofstream(dir / "bad.json") << "[1,2";
  EXPECT_THROW(read_manifest(dir / "bad.json"), std::exception);
}
