#include "flowtrack/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "flowtrack/io.hpp"

namespace flowtrack {
namespace {

using nlohmann::json;

// Reads known keys from one object and rejects the rest.
class Section {
 public:
  Section(const json& root, const std::string& name) : name_(name) {
    if (root.contains(name)) {
      if (!root.at(name).is_object()) throw std::invalid_argument("'" + name + "' must be an object");
      obj_ = &root.at(name);
    }
  }
  template <typename T>
  void get(const char* key, T& value) {
    seen_.insert(key);
    if (obj_ && obj_->contains(key)) value = obj_->at(key).get<T>();
  }
  void finish() const {
    if (!obj_) return;
    for (const auto& [k, v] : obj_->items())
      if (!seen_.contains(k)) throw std::invalid_argument("unknown key '" + name_ + "." + k + "'");
  }

 private:
  std::string name_;
  const json* obj_ = nullptr;
  std::set<std::string> seen_;
};

json to_json(const RunConfig& c) {
  const auto& g = c.graph;
  const auto& a = c.architecture;
  const auto& t = c.train;
  const auto& s = c.scenario;
  return {
      {"graph",
       {{"r_neighbours", g.r_neighbours}, {"t_max", g.t_max}, {"n_velest", g.n_velest}, {"n_project", g.n_project},
        {"n_linpkt", g.n_linpkt}, {"fps", g.fps}, {"image_diagonal", g.image_diagonal}}},
      {"architecture",
       {{"det_layers", a.det_layers}, {"det_features", a.det_features}, {"klt_layers", a.klt_layers},
        {"klt_features", a.klt_features}, {"long_layers", a.long_layers}, {"long_features", a.long_features},
        {"combine_layers", a.combine_layers}, {"combine_features", a.combine_features}}},
      {"train",
       {{"learning_rate", t.learning_rate}, {"beta1", t.beta1}, {"beta2", t.beta2}, {"epsilon", t.epsilon},
        {"batch_size", t.batch_size}, {"max_epochs", t.max_epochs}, {"patience", t.patience}, {"seed", t.seed},
        {"deterministic", t.deterministic}}},
      {"scenario",
       {{"n_objects", s.n_objects}, {"n_frames", s.n_frames}, {"image_width", s.image_width},
        {"image_height", s.image_height}, {"fps", s.fps}, {"min_speed", s.min_speed}, {"max_speed", s.max_speed},
        {"min_box_width", s.min_box_width}, {"max_box_width", s.max_box_width}, {"min_aspect", s.min_aspect},
        {"size_rate_sigma", s.size_rate_sigma}, {"size_rate_time", s.size_rate_time},
        {"max_aspect", s.max_aspect}, {"min_lifetime", s.min_lifetime}, {"max_lifetime", s.max_lifetime},
        {"miss_rate", s.miss_rate}, {"false_positives_per_frame", s.false_positives_per_frame},
        {"jitter_sigma", s.jitter_sigma}, {"jitter_time", s.jitter_time}, {"min_true_confidence", s.min_true_confidence},
        {"max_false_confidence", s.max_false_confidence}, {"klt_per_object", s.klt_per_object},
        {"klt_lifetime_mean", s.klt_lifetime_mean}, {"klt_noise", s.klt_noise}, {"jump_rate", s.jump_rate},
        {"jump_iou", s.jump_iou}, {"seed", s.seed}}},
      {"tracking", {{"chunk_length", c.chunk_length}, {"overlap", c.overlap}, {"iou_threshold", c.iou_threshold}}},
      {"ggd", {{"n_minlen", c.n_minlen}, {"validation_fraction", c.validation_fraction}}},
      {"model_seed", c.model_seed},
  };
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& source) {
  RunConfig c;
  try {
    const auto root = json::parse(text);
    if (!root.is_object()) throw std::invalid_argument("config must be a JSON object");
    static const std::set<std::string> top = {"graph", "architecture", "train", "scenario", "tracking", "ggd",
                                              "model_seed"};
    for (const auto& [k, v] : root.items())
      if (!top.contains(k)) throw std::invalid_argument("unknown key '" + k + "'");

    // fps drives the derived graph defaults; explicit keys still override them.
    if (root.contains("graph") && root["graph"].contains("fps")) {
      const double diag = root["graph"].value("image_diagonal", c.graph.image_diagonal);
      c.graph = GraphParams::for_fps(root["graph"]["fps"].get<int>(), diag);
    }
    Section g(root, "graph");
    g.get("r_neighbours", c.graph.r_neighbours);
    g.get("t_max", c.graph.t_max);
    g.get("n_velest", c.graph.n_velest);
    g.get("n_project", c.graph.n_project);
    g.get("n_linpkt", c.graph.n_linpkt);
    g.get("fps", c.graph.fps);
    g.get("image_diagonal", c.graph.image_diagonal);
    g.finish();

    Section a(root, "architecture");
    a.get("det_layers", c.architecture.det_layers);
    a.get("det_features", c.architecture.det_features);
    a.get("klt_layers", c.architecture.klt_layers);
    a.get("klt_features", c.architecture.klt_features);
    a.get("long_layers", c.architecture.long_layers);
    a.get("long_features", c.architecture.long_features);
    a.get("combine_layers", c.architecture.combine_layers);
    a.get("combine_features", c.architecture.combine_features);
    a.finish();
    c.architecture.n_linpkt = c.graph.n_linpkt;

    Section t(root, "train");
    t.get("learning_rate", c.train.learning_rate);
    t.get("beta1", c.train.beta1);
    t.get("beta2", c.train.beta2);
    t.get("epsilon", c.train.epsilon);
    t.get("batch_size", c.train.batch_size);
    t.get("max_epochs", c.train.max_epochs);
    t.get("patience", c.train.patience);
    t.get("seed", c.train.seed);
    t.get("deterministic", c.train.deterministic);
    t.finish();

    Section s(root, "scenario");
    auto& sc = c.scenario;
    s.get("n_objects", sc.n_objects);
    s.get("n_frames", sc.n_frames);
    s.get("image_width", sc.image_width);
    s.get("image_height", sc.image_height);
    s.get("fps", sc.fps);
    s.get("min_speed", sc.min_speed);
    s.get("max_speed", sc.max_speed);
    s.get("min_box_width", sc.min_box_width);
    s.get("max_box_width", sc.max_box_width);
    s.get("min_aspect", sc.min_aspect);
    s.get("size_rate_sigma", sc.size_rate_sigma);
    s.get("size_rate_time", sc.size_rate_time);
    s.get("max_aspect", sc.max_aspect);
    s.get("min_lifetime", sc.min_lifetime);
    s.get("max_lifetime", sc.max_lifetime);
    s.get("miss_rate", sc.miss_rate);
    s.get("false_positives_per_frame", sc.false_positives_per_frame);
    s.get("jitter_sigma", sc.jitter_sigma);
    s.get("jitter_time", sc.jitter_time);
    s.get("min_true_confidence", sc.min_true_confidence);
    s.get("max_false_confidence", sc.max_false_confidence);
    s.get("klt_per_object", sc.klt_per_object);
    s.get("klt_lifetime_mean", sc.klt_lifetime_mean);
    s.get("klt_noise", sc.klt_noise);
    s.get("jump_rate", sc.jump_rate);
    s.get("jump_iou", sc.jump_iou);
    s.get("seed", sc.seed);
    s.finish();

    Section k(root, "tracking");
    k.get("chunk_length", c.chunk_length);
    k.get("overlap", c.overlap);
    k.get("iou_threshold", c.iou_threshold);
    k.finish();

    Section d(root, "ggd");
    d.get("n_minlen", c.n_minlen);
    d.get("validation_fraction", c.validation_fraction);
    d.finish();

    if (root.contains("model_seed")) c.model_seed = root["model_seed"].get<std::uint64_t>();

    c.graph.validate();
    for (int v : {c.architecture.det_layers, c.architecture.klt_layers, c.architecture.long_layers,
                  c.architecture.combine_layers})
      if (v < 0) throw std::invalid_argument("layer counts must be >= 0");
    for (int v : {c.architecture.det_features, c.architecture.klt_features, c.architecture.long_features,
                  c.architecture.combine_features})
      if (v < 1) throw std::invalid_argument("feature widths must be >= 1");
    c.train.validate();
    c.scenario.validate();
    if (c.overlap < 0 || c.chunk_length <= c.overlap) throw std::invalid_argument("need chunk_length > overlap >= 0");
    if (!(c.iou_threshold > 0 && c.iou_threshold <= 1)) throw std::invalid_argument("iou_threshold must be in (0,1]");
    if (c.n_minlen < 1) throw std::invalid_argument("n_minlen must be >= 1");
    if (!(c.validation_fraction >= 0 && c.validation_fraction < 1))
      throw std::invalid_argument("validation_fraction must be in [0,1)");
  } catch (const json::exception& e) {
    throw ParseError(source, 0, e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(source, 0, e.what());
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string dump_config(const RunConfig& config) { return to_json(config).dump(2); }

}  // namespace flowtrack
