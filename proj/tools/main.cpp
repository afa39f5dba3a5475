#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "flowtrack/config.hpp"
#include "flowtrack/ggd.hpp"
#include "flowtrack/io.hpp"
#include "flowtrack/metrics.hpp"
#include "flowtrack/pipeline.hpp"
#include "flowtrack/scoring.hpp"
#include "flowtrack/synth.hpp"
#include "flowtrack/trainer.hpp"

using namespace flowtrack;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::optional<int> fps;
  RunConfig run;

  void load() {
    if (!config.empty()) run = load_config(config);
    if (fps) {
      run.graph = GraphParams::for_fps(*fps, run.graph.image_diagonal);
      run.architecture.n_linpkt = run.graph.n_linpkt;
    }
  }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--fps", c.fps, "frame rate; re-derives the graph parameters");
}

GgdDataset load_ggds(const std::vector<std::string>& files) {
  std::vector<GgdDataset> parts;
  for (const auto& f : files) parts.push_back(read_ggds_file(f));
  return GgdDataset::concat(parts);
}

GgdDataset sequence_ggds(const Dataset& data, const RunConfig& run, std::ostream& log) {
  const auto graph = build_graph(data.detections, data.point_tracks, run.graph);
  const auto gt = ground_truth_solution(graph, *data.ground_truth);
  for (const auto& e : gt.events) log << "gt: " << e << '\n';
  auto ggds = enumerate_perturbations(graph, gt.solution);
  const auto sub = subtrack_examples(graph, gt.solution, run.n_minlen);
  ggds.insert(ggds.end(), sub.begin(), sub.end());
  const auto stats = dataset_stats(ggds);
  log << graph.vertices.size() << " vertices, " << graph.edges.size() << " edges, " << ggds.size() << " GGDs\n";
  for (std::size_t k = 0; k < kPerturbationKinds; ++k)
    log << "  " << std::left << std::setw(24) << kind_name(PerturbationKind(k)) << stats[k] << '\n';
  return GgdDataset::from_graph(graph, ggds);
}

void write_json_tracks(const fs::path& out, const std::vector<OutputTrack>& tracks, bool csv) {
  if (csv) {
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot write " + out.string());
    write_mot_csv(f, tracks);
  } else {
    write_tracks_file(out, tracks);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flowtrack: min-cost-flow multi-object tracking with learned edge and detection scores"};
  app.require_subcommand(1);

  // synth
  Common synth_c;
  std::string synth_out;
  std::optional<std::uint64_t> synth_seed;
  bool synth_crossing = false;
  auto* synth = app.add_subcommand("synth", "write a synthetic scenario (detections, klt, gt)");
  add_common(synth, synth_c);
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--seed", synth_seed, "scenario seed");
  synth->add_flag("--crossing", synth_crossing, "write the small crossing fixture instead");

  // build-graphs
  Common bg_c;
  std::string bg_det, bg_klt, bg_out;
  auto* bg = app.add_subcommand("build-graphs", "build the tracking graph and dump it as JSON lines");
  add_common(bg, bg_c);
  bg->add_option("--detections", bg_det)->required()->check(CLI::ExistingFile);
  bg->add_option("--klt", bg_klt)->required()->check(CLI::ExistingFile);
  bg->add_option("--out", bg_out)->required();

  // gen-ggds
  Common gg_c;
  std::string gg_det, gg_klt, gg_gt, gg_out;
  auto* gg = app.add_subcommand("gen-ggds", "enumerate graph differences for one annotated sequence");
  add_common(gg, gg_c);
  gg->add_option("--detections", gg_det)->required()->check(CLI::ExistingFile);
  gg->add_option("--klt", gg_klt)->required()->check(CLI::ExistingFile);
  gg->add_option("--gt", gg_gt, "ground truth (detection ids per track)")->required()->check(CLI::ExistingFile);
  gg->add_option("--out", gg_out)->required();

  // train
  Common tr_c;
  std::vector<std::string> tr_ggds, tr_val;
  std::string tr_manifest, tr_out, tr_report, tr_init;
  std::optional<int> tr_epochs, tr_patience;
  std::optional<std::uint64_t> tr_seed;
  auto* tr = app.add_subcommand("train", "train a scoring model on GGD files");
  add_common(tr, tr_c);
  tr->add_option("--ggds", tr_ggds, "training GGD files");
  tr->add_option("--val", tr_val, "validation GGD files");
  tr->add_option("--manifest", tr_manifest, "split manifest listing train and validation files");
  tr->add_option("--out", tr_out, "checkpoint of the best epoch")->required();
  tr->add_option("--report", tr_report, "JSON training report");
  tr->add_option("--init", tr_init, "start from this checkpoint");
  tr->add_option("--epochs", tr_epochs);
  tr->add_option("--patience", tr_patience, "0 disables early stopping");
  tr->add_option("--seed", tr_seed);

  // track
  Common tk_c;
  std::string tk_det, tk_klt, tk_model, tk_out;
  std::optional<Frame> tk_chunk, tk_overlap;
  bool tk_csv = false, tk_no_interp = false;
  auto* tk = app.add_subcommand("track", "track a sequence with a trained model");
  add_common(tk, tk_c);
  tk->add_option("--detections", tk_det)->required()->check(CLI::ExistingFile);
  tk->add_option("--klt", tk_klt)->required()->check(CLI::ExistingFile);
  tk->add_option("--model", tk_model)->required()->check(CLI::ExistingFile);
  tk->add_option("--out", tk_out)->required();
  tk->add_option("--chunk", tk_chunk);
  tk->add_option("--overlap", tk_overlap);
  tk->add_flag("--mot-csv", tk_csv, "write MOTChallenge CSV instead of JSON lines");
  tk->add_flag("--no-interpolation", tk_no_interp);

  // eval
  Common ev_c;
  std::string ev_gt, ev_hyp, ev_summary;
  std::optional<double> ev_iou;
  auto* ev = app.add_subcommand("eval", "CLEAR-MOT and identity metrics");
  add_common(ev, ev_c);
  ev->add_option("--gt", ev_gt, "ground-truth boxes as tracks")->required()->check(CLI::ExistingFile);
  ev->add_option("--hyp", ev_hyp, "tracker output")->required()->check(CLI::ExistingFile);
  ev->add_option("--iou", ev_iou);
  ev->add_option("--summary", ev_summary, "JSON summary file");

  // study-subsample
  Common ss_c;
  std::vector<std::string> ss_ggds, ss_val;
  std::string ss_det, ss_klt, ss_gt_boxes, ss_out;
  std::vector<double> ss_fractions = {1.0, 0.1, 0.01};
  int ss_repeats = 3;
  int ss_patience = 3;
  int ss_max_epochs = 1000;
  auto* ss = app.add_subcommand("study-subsample", "train on GGD subsamples and track a test sequence");
  add_common(ss, ss_c);
  ss->add_option("--ggds", ss_ggds)->required();
  ss->add_option("--val", ss_val)->required();
  ss->add_option("--detections", ss_det)->required()->check(CLI::ExistingFile);
  ss->add_option("--klt", ss_klt)->required()->check(CLI::ExistingFile);
  ss->add_option("--gt-boxes", ss_gt_boxes)->required()->check(CLI::ExistingFile);
  ss->add_option("--fractions", ss_fractions);
  ss->add_option("--repeats", ss_repeats, "seeds per fraction below 1");
  ss->add_option("--patience", ss_patience, "early stopping patience of every run");
  ss->add_option("--max-epochs", ss_max_epochs, "epoch cap; small samples need many epochs");
  ss->add_option("--out", ss_out, "JSON lines with one record per run");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      synth_c.load();
      auto sc = synth_c.run.scenario;
      if (synth_seed) sc.seed = *synth_seed;
      const auto s = synth_crossing ? crossing_fixture() : generate_scenario(sc);
      fs::create_directories(synth_out);
      write_scenario(synth_out, s);
      std::cout << s.detections.size() << " detections, " << s.point_tracks.size() << " point tracks, "
                << s.gt.size() << " objects -> " << synth_out << '\n';
    } else if (bg->parsed()) {
      bg_c.load();
      const auto data = read_dataset(bg_det, bg_klt);
      const auto graph = build_graph(data.detections, data.point_tracks, bg_c.run.graph);
      std::ofstream out(bg_out);
      if (!out) throw std::runtime_error("cannot write " + bg_out);
      dump_graph(out, graph);
      std::cout << graph.vertices.size() << " vertices, " << graph.edges.size() << " edges\n";
    } else if (gg->parsed()) {
      gg_c.load();
      const auto data = read_dataset(gg_det, gg_klt, gg_gt);
      write_ggds_file(gg_out, sequence_ggds(data, gg_c.run, std::cout));
    } else if (tr->parsed()) {
      tr_c.load();
      auto cfg = tr_c.run.train;
      if (tr_epochs) cfg.max_epochs = *tr_epochs;
      if (tr_patience) cfg.patience = *tr_patience;
      if (tr_seed) cfg.seed = *tr_seed;
      cfg.progress = &std::cout;
      cfg.validate();
      if (!tr_manifest.empty()) {
        const auto m = read_manifest(tr_manifest);
        const auto base = fs::path(tr_manifest).parent_path();
        for (const auto& f : m.train) tr_ggds.push_back((base / f).string());
        for (const auto& f : m.validation) tr_val.push_back((base / f).string());
      }
      if (tr_ggds.empty() || tr_val.empty()) throw std::invalid_argument("need training and validation GGD files");
      const auto train_set = load_ggds(tr_ggds);
      const auto val_set = load_ggds(tr_val);
      if (train_set.pool->n_linpkt != tr_c.run.architecture.n_linpkt)
        throw std::invalid_argument("GGD files were built with a different n_linpkt");
      const auto init = tr_init.empty() ? ScoringModel::initialized(tr_c.run.architecture, tr_c.run.model_seed)
                                        : load_model_file(tr_init);
      std::cout << train_set.size() << " training and " << val_set.size() << " validation GGDs, "
                << init.parameter_count() << " parameters\n";
      const auto [model, report] = train(init, train_set, val_set, cfg);
      save_model_file(tr_out, model);
      if (!tr_report.empty()) write_report_file(tr_report, report);
      std::cout << "best epoch " << report.best_epoch << ", validation accuracy " << report.best_accuracy << '\n';
    } else if (tk->parsed()) {
      tk_c.load();
      const auto model = load_model_file(tk_model);
      if (model.arch.n_linpkt != tk_c.run.graph.n_linpkt)
        throw std::invalid_argument("model n_linpkt does not match the graph parameters");
      const auto data = read_dataset(tk_det, tk_klt);
      const auto plan = plan_for(data.detections, tk_chunk.value_or(tk_c.run.chunk_length),
                                 tk_overlap.value_or(tk_c.run.overlap));
      TrackingOptions opt;
      opt.interpolate = !tk_no_interp;
      const auto t0 = std::chrono::steady_clock::now();
      const auto tracks = track_sequence(data.detections, data.point_tracks, model, tk_c.run.graph, plan, opt);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      write_json_tracks(tk_out, tracks, tk_csv);
      std::cout << tracks.size() << " tracks from " << plan.windows.size() << " chunks in " << secs << " s\n";
    } else if (ev->parsed()) {
      ev_c.load();
      const auto gt = read_tracks_file(ev_gt);
      const auto hyp = read_tracks_file(ev_hyp);
      const auto r = evaluate(gt, hyp, ev_iou.value_or(ev_c.run.iou_threshold));
      print_report(std::cout, r);
      if (!ev_summary.empty()) {
        std::ofstream out(ev_summary);
        if (!out) throw std::runtime_error("cannot write " + ev_summary);
        write_summary(out, r);
      }
    } else if (ss->parsed()) {
      ss_c.load();
      auto cfg = ss_c.run.train;
      cfg.patience = ss_patience;
      cfg.max_epochs = ss_max_epochs;
      cfg.validate();
      const auto train_set = load_ggds(ss_ggds);
      const auto val_set = load_ggds(ss_val);
      const auto data = read_dataset(ss_det, ss_klt);
      const auto gt = read_tracks_file(ss_gt_boxes);
      const auto plan = plan_for(data.detections, ss_c.run.chunk_length, ss_c.run.overlap);
      std::ofstream out;
      if (!ss_out.empty()) {
        out.open(ss_out);
        if (!out) throw std::runtime_error("cannot write " + ss_out);
      }
      for (double fraction : ss_fractions) {
        const int runs = fraction >= 1.0 ? 1 : ss_repeats;
        for (int r = 0; r < runs; ++r) {
          const auto seed = std::uint64_t(r + 1);
          const auto part = subsample(train_set, fraction, seed);
          if (part.empty()) {
            std::cout << "fraction " << fraction << ": sample is empty, skipped\n";
            continue;
          }
          auto run_cfg = cfg;
          run_cfg.seed = seed;
          const auto init = ScoringModel::initialized(ss_c.run.architecture, ss_c.run.model_seed + seed - 1);
          const auto [model, report] = train(init, part, val_set, run_cfg);
          const auto tracks = track_sequence(data.detections, data.point_tracks, model, ss_c.run.graph, plan);
          const auto m = evaluate(gt, tracks, ss_c.run.iou_threshold);
          std::cout << "fraction " << fraction << " seed " << seed << ": " << part.size() << " GGDs, "
                    << report.epochs.size() << " epochs, val acc " << report.best_accuracy << ", MOTA " << m.mota
                    << ", IDF1 " << m.idf1 << '\n';
          if (out) {
            out << "{\"fraction\":" << fraction << ",\"seed\":" << seed << ",\"ggds\":" << part.size()
                << ",\"epochs\":" << report.epochs.size() << ",\"best_epoch\":" << report.best_epoch
                << ",\"validation_accuracy\":" << report.best_accuracy << ",\"mota\":" << m.mota
                << ",\"idf1\":" << m.idf1 << "}\n";
          }
        }
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
