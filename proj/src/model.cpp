#include "flowtrack/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

namespace flowtrack {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little-endian");

constexpr char kMagic[8] = {'F', 'T', 'R', 'K', 'M', 'D', 'L', '\0'};
constexpr std::uint32_t kVersion = 1;

void check_block(const MlpBlock& block, int in, int layers, int out, const char* name) {
  if (block.empty() || block.input_width() != in || block.output_width() != out || block.n_layers() != layers) {
    throw ShapeError(std::string(name) + " block does not match the architecture");
  }
}

template <typename T>
void put(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("truncated model checkpoint");
  return value;
}

void put_block(std::ostream& out, const MlpBlock& block) {
  put<std::uint32_t>(out, std::uint32_t(block.layers().size()));
  for (const auto& l : block.layers()) {
    put<std::uint32_t>(out, std::uint32_t(l.weight.rows()));
    put<std::uint32_t>(out, std::uint32_t(l.weight.cols()));
    out.write(reinterpret_cast<const char*>(l.weight.data()), std::streamsize(sizeof(double) * l.weight.size()));
    out.write(reinterpret_cast<const char*>(l.bias.data()), std::streamsize(sizeof(double) * l.bias.size()));
  }
}

MlpBlock get_block(std::istream& in) {
  const auto n = get<std::uint32_t>(in);
  if (n == 0 || n > 1024) throw std::runtime_error("corrupt model checkpoint");
  std::vector<DenseLayer> layers;
  for (std::uint32_t l = 0; l < n; ++l) {
    const auto rows = get<std::uint32_t>(in);
    const auto cols = get<std::uint32_t>(in);
    DenseLayer layer{Eigen::MatrixXd(rows, cols), Eigen::VectorXd(rows)};
    in.read(reinterpret_cast<char*>(layer.weight.data()), std::streamsize(sizeof(double) * layer.weight.size()));
    in.read(reinterpret_cast<char*>(layer.bias.data()), std::streamsize(sizeof(double) * layer.bias.size()));
    if (!in) throw std::runtime_error("truncated model checkpoint");
    layers.push_back(std::move(layer));
  }
  return MlpBlock(std::move(layers));
}

void add_into(MlpGradient& a, const MlpGradient& b) {
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    a.layers[l].weight += b.layers[l].weight;
    a.layers[l].bias += b.layers[l].bias;
  }
}

void scale_by(MlpGradient& a, double f) {
  for (auto& l : a.layers) {
    l.weight *= f;
    l.bias *= f;
  }
}

}  // namespace

ScoringModel ScoringModel::zeros(const Architecture& arch, double s_entry) {
  ScoringModel m;
  m.arch = arch;
  m.s_entry = s_entry;
  m.detect = MlpBlock(Architecture::kDetectionInputs, arch.det_layers, arch.det_features, 1);
  m.klt = MlpBlock(arch.klt_inputs(), arch.klt_layers, arch.klt_features, arch.klt_features);
  m.long_range = MlpBlock(Architecture::kLongInputs, arch.long_layers, arch.long_features, arch.long_features);
  m.combine = MlpBlock(arch.combine_inputs(), arch.combine_layers, arch.combine_features, 1);
  return m;
}

ScoringModel ScoringModel::initialized(const Architecture& arch, std::uint64_t seed) {
  ScoringModel m = zeros(arch, -1.0);
  Rng rng(seed);
  m.detect.initialize(rng);
  m.klt.initialize(rng);
  m.long_range.initialize(rng);
  m.combine.initialize(rng);
  return m;
}

std::size_t ScoringModel::parameter_count() const {
  return 1 + detect.parameter_count() + klt.parameter_count() + long_range.parameter_count() +
         combine.parameter_count();
}

void ScoringModel::check() const {
  check_block(detect, Architecture::kDetectionInputs, arch.det_layers, 1, "detect");
  check_block(klt, arch.klt_inputs(), arch.klt_layers, arch.klt_features, "klt");
  check_block(long_range, Architecture::kLongInputs, arch.long_layers, arch.long_features, "long");
  check_block(combine, arch.combine_inputs(), arch.combine_layers, 1, "combine");
}

ParamGradient ParamGradient::zeros_like(const ScoringModel& model) {
  ParamGradient g;
  g.detect = model.detect.zero_gradient();
  g.klt = model.klt.zero_gradient();
  g.long_range = model.long_range.zero_gradient();
  g.combine = model.combine.zero_gradient();
  return g;
}

ParamGradient& ParamGradient::operator+=(const ParamGradient& other) {
  s_entry += other.s_entry;
  add_into(detect, other.detect);
  add_into(klt, other.klt);
  add_into(long_range, other.long_range);
  add_into(combine, other.combine);
  return *this;
}

ParamGradient& ParamGradient::operator*=(double factor) {
  s_entry *= factor;
  scale_by(detect, factor);
  scale_by(klt, factor);
  scale_by(long_range, factor);
  scale_by(combine, factor);
  return *this;
}

Eigen::Vector3d encode_detection(const DetectionFeatures& f) { return {f.confidence, f.max_iou, f.max_ioa}; }

Eigen::VectorXd encode_klt(const KltConnection& c, const FeatureScale& scale, int n_linpkt) {
  if (int(c.shape.size()) != n_linpkt) {
    throw ShapeError("KLT shape has " + std::to_string(c.shape.size()) + " points, model expects " +
                     std::to_string(n_linpkt));
  }
  Eigen::VectorXd v(3 + 2 * n_linpkt);
  v(0) = double(c.temporal_distance) / scale.fps;
  v(1) = c.min_confidence;
  v(2) = c.translated_iou;
  for (int s = 0; s < n_linpkt; ++s) {
    v(3 + 2 * s) = c.shape[std::size_t(s)].x / scale.diagonal;
    v(4 + 2 * s) = c.shape[std::size_t(s)].y / scale.diagonal;
  }
  return v;
}

Eigen::VectorXd encode_long(const LongConnection& c, const FeatureScale& scale) {
  Eigen::VectorXd v(Architecture::kLongInputs);
  v << double(c.temporal_distance) / scale.fps, c.predicted_iou, c.pre_velocity.x / scale.diagonal,
      c.pre_velocity.y / scale.diagonal, c.median_post_velocity.x / scale.diagonal,
      c.median_post_velocity.y / scale.diagonal;
  return v;
}

double f_detect(const ScoringModel& model, const DetectionFeatures& features) {
  return model.detect.forward_one(encode_detection(features))(0);
}

double f_edge(const ScoringModel& model, const EdgeFeatures& edge, const FeatureScale& scale) {
  if (edge.klt.empty() && edge.long_range.empty()) {
    throw std::invalid_argument("edge score needs at least one KLT or long connection");
  }
  const EdgeFeatures* ptr = &edge;
  const auto batch = EdgeBatch::pack(std::span<const EdgeFeatures* const>(&ptr, 1), scale, model.arch);
  return edge_scores(model, batch)(0);
}

EdgeBatch EdgeBatch::pack(std::span<const EdgeFeatures* const> edges, const FeatureScale& scale,
                          const Architecture& arch) {
  EdgeBatch b;
  b.klt_offsets.assign(1, 0);
  b.long_offsets.assign(1, 0);
  for (const auto* e : edges) {
    if (e->klt.empty() && e->long_range.empty()) {
      throw std::invalid_argument("edge score needs at least one KLT or long connection");
    }
    b.klt_offsets.push_back(b.klt_offsets.back() + e->klt.size());
    b.long_offsets.push_back(b.long_offsets.back() + e->long_range.size());
  }
  b.klt_inputs.resize(arch.klt_inputs(), Eigen::Index(b.klt_offsets.back()));
  b.long_inputs.resize(Architecture::kLongInputs, Eigen::Index(b.long_offsets.back()));
  for (std::size_t e = 0; e < edges.size(); ++e) {
    for (std::size_t j = 0; j < edges[e]->klt.size(); ++j)
      b.klt_inputs.col(Eigen::Index(b.klt_offsets[e] + j)) = encode_klt(edges[e]->klt[j], scale, arch.n_linpkt);
    for (std::size_t j = 0; j < edges[e]->long_range.size(); ++j)
      b.long_inputs.col(Eigen::Index(b.long_offsets[e] + j)) = encode_long(edges[e]->long_range[j], scale);
  }
  return b;
}

Eigen::VectorXd edge_scores(const ScoringModel& model, const EdgeBatch& batch, EdgeTape* tape) {
  const auto& arch = model.arch;
  const std::size_t n = batch.size();
  Eigen::MatrixXd combine_in = Eigen::MatrixXd::Zero(arch.combine_inputs(), Eigen::Index(n));

  if (batch.klt_inputs.cols() > 0) {
    const Eigen::MatrixXd out = model.klt.forward(batch.klt_inputs, tape ? &tape->klt : nullptr);
    for (std::size_t e = 0; e < n; ++e) {
      const auto count = batch.klt_offsets[e + 1] - batch.klt_offsets[e];
      if (count == 0) continue;
      combine_in.col(Eigen::Index(e)).head(arch.klt_features) =
          out.middleCols(Eigen::Index(batch.klt_offsets[e]), Eigen::Index(count)).rowwise().sum() / double(count);
    }
  }
  if (batch.long_inputs.cols() > 0) {
    const Eigen::MatrixXd out = model.long_range.forward(batch.long_inputs, tape ? &tape->long_range : nullptr);
    for (std::size_t e = 0; e < n; ++e) {
      const auto count = batch.long_offsets[e + 1] - batch.long_offsets[e];
      if (count == 0) continue;
      combine_in.col(Eigen::Index(e)).segment(arch.klt_features, arch.long_features) =
          out.middleCols(Eigen::Index(batch.long_offsets[e]), Eigen::Index(count)).rowwise().sum() /
          double(count);
    }
  }
  for (std::size_t e = 0; e < n; ++e) {
    combine_in(arch.klt_features + arch.long_features, Eigen::Index(e)) =
        double(batch.klt_offsets[e + 1] - batch.klt_offsets[e]);
    combine_in(arch.klt_features + arch.long_features + 1, Eigen::Index(e)) =
        double(batch.long_offsets[e + 1] - batch.long_offsets[e]);
  }
  return model.combine.forward(combine_in, tape ? &tape->combine : nullptr).row(0).transpose();
}

void edge_backward(const ScoringModel& model, const EdgeBatch& batch, const EdgeTape& tape,
                   const Eigen::VectorXd& upstream, ParamGradient& grad) {
  const auto& arch = model.arch;
  const std::size_t n = batch.size();
  const Eigen::MatrixXd d_in = model.combine.backward(tape.combine, upstream.transpose(), grad.combine, true);

  if (batch.klt_inputs.cols() > 0) {
    Eigen::MatrixXd d_out(arch.klt_features, batch.klt_inputs.cols());
    for (std::size_t e = 0; e < n; ++e) {
      const auto count = batch.klt_offsets[e + 1] - batch.klt_offsets[e];
      if (count == 0) continue;
      const Eigen::VectorXd share = d_in.col(Eigen::Index(e)).head(arch.klt_features) / double(count);
      for (auto j = batch.klt_offsets[e]; j < batch.klt_offsets[e + 1]; ++j) d_out.col(Eigen::Index(j)) = share;
    }
    model.klt.backward(tape.klt, std::move(d_out), grad.klt, false);
  }
  if (batch.long_inputs.cols() > 0) {
    Eigen::MatrixXd d_out(arch.long_features, batch.long_inputs.cols());
    for (std::size_t e = 0; e < n; ++e) {
      const auto count = batch.long_offsets[e + 1] - batch.long_offsets[e];
      if (count == 0) continue;
      const Eigen::VectorXd share = d_in.col(Eigen::Index(e)).segment(arch.klt_features, arch.long_features) /
                                    double(count);
      for (auto j = batch.long_offsets[e]; j < batch.long_offsets[e + 1]; ++j) d_out.col(Eigen::Index(j)) = share;
    }
    model.long_range.backward(tape.long_range, std::move(d_out), grad.long_range, false);
  }
}

Eigen::MatrixXd pack_detections(std::span<const DetectionFeatures* const> vertices) {
  Eigen::MatrixXd x(Architecture::kDetectionInputs, Eigen::Index(vertices.size()));
  for (std::size_t k = 0; k < vertices.size(); ++k) x.col(Eigen::Index(k)) = encode_detection(*vertices[k]);
  return x;
}

Eigen::VectorXd detect_scores(const ScoringModel& model, const Eigen::MatrixXd& inputs, MlpTape* tape) {
  if (inputs.cols() == 0) return {};
  return model.detect.forward(inputs, tape).row(0).transpose();
}

void detect_backward(const ScoringModel& model, const MlpTape& tape, const Eigen::VectorXd& upstream,
                     ParamGradient& grad) {
  if (upstream.size() == 0) return;
  model.detect.backward(tape, upstream.transpose(), grad.detect, false);
}

std::vector<double> edge_scores_chunked(const ScoringModel& model, std::span<const EdgeFeatures* const> edges,
                                        const FeatureScale& scale, std::size_t slice) {
  std::vector<double> out;
  out.reserve(edges.size());
  for (std::size_t begin = 0; begin < edges.size(); begin += slice) {
    const auto part = edges.subspan(begin, std::min(slice, edges.size() - begin));
    const auto scores = edge_scores(model, EdgeBatch::pack(part, scale, model.arch));
    out.insert(out.end(), scores.data(), scores.data() + scores.size());
  }
  return out;
}

void save_model(std::ostream& out, const ScoringModel& model) {
  model.check();
  out.write(kMagic, sizeof(kMagic));
  put(out, kVersion);
  const auto& a = model.arch;
  for (int v : {a.det_layers, a.det_features, a.klt_layers, a.klt_features, a.long_layers, a.long_features,
                a.combine_layers, a.combine_features, a.n_linpkt}) {
    put<std::int32_t>(out, v);
  }
  put(out, model.s_entry);
  for (const auto* block : {&model.detect, &model.klt, &model.long_range, &model.combine}) put_block(out, *block);
}

ScoringModel load_model(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0) throw std::runtime_error("not a model checkpoint");
  const auto version = get<std::uint32_t>(in);
  if (version != kVersion) throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  ScoringModel m;
  auto& a = m.arch;
  for (int* v : {&a.det_layers, &a.det_features, &a.klt_layers, &a.klt_features, &a.long_layers, &a.long_features,
                 &a.combine_layers, &a.combine_features, &a.n_linpkt}) {
    *v = get<std::int32_t>(in);
  }
  m.s_entry = get<double>(in);
  m.detect = get_block(in);
  m.klt = get_block(in);
  m.long_range = get_block(in);
  m.combine = get_block(in);
  m.check();
  return m;
}

void save_model_file(const std::filesystem::path& path, const ScoringModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  save_model(out, model);
}

ScoringModel load_model_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return load_model(in);
}

}  // namespace flowtrack
