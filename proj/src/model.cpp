// Copyright 2026 The visrssi Authors
// SPDX-License-Identifier: Apache-2.0

#include "visrssi/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "visrssi/errors.hpp"
#include "visrssi/physics.hpp"
#include "visrssi/rng.hpp"

namespace visrssi {
namespace {

constexpr std::array<std::size_t, 5> kImageChannelsPerBlock = {kImageChannels, 8, 16, 32, 64};
constexpr std::size_t kBBoxMlpHidden = 128;
constexpr std::size_t kBBoxCnnChannels1 = 32;
constexpr std::size_t kBBoxCnnChannels2 = 128;
constexpr std::size_t kHeadHidden = 64;

void expect_shape(const Tensor& t, const Shape& tail, const char* what) {
  if (t.rank() == tail.size() + 1 && std::equal(tail.begin(), tail.end(), t.shape().begin() + 1)) return;
  std::string want = "[N";
  for (std::size_t d : tail) want += "x" + std::to_string(d);
  throw ShapeMismatch(std::string(what) + ": expected " + want + "], got " + shape_string(t.shape()));
}

}  // namespace

std::string to_string(BBoxEncoderKind kind) { return kind == BBoxEncoderKind::kMlp ? "mlp" : "cnn"; }

BBoxEncoderKind parse_bbox_encoder(const std::string& text) {
  if (text == "mlp") return BBoxEncoderKind::kMlp;
  if (text == "cnn") return BBoxEncoderKind::kCnn;
  throw Error("unknown bbox encoder '" + text + "' (expected mlp or cnn)");
}

void ModelConfig::validate() const {
  if (max_bbox != kMaxBBox) throw ConfigMismatch("max_bbox must be " + std::to_string(kMaxBBox));
  if (image_embedding_dim == 0 || position_embedding_dim == 0 || bbox_embedding_dim == 0)
    throw ConfigMismatch("embedding widths must be positive");
}

std::string ModelConfig::to_text() const {
  std::ostringstream os;
  os << "bbox_encoder=" << to_string(bbox_encoder) << "\n"
     << "image_embedding_dim=" << image_embedding_dim << "\n"
     << "position_embedding_dim=" << position_embedding_dim << "\n"
     << "bbox_embedding_dim=" << bbox_embedding_dim << "\n"
     << "max_bbox=" << max_bbox << "\n";
  return os.str();
}

ModelConfig ModelConfig::from_text(const std::string& text) {
  ModelConfig cfg;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("model config line without '=': " + line);
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "bbox_encoder") cfg.bbox_encoder = parse_bbox_encoder(val);
    else if (key == "image_embedding_dim") cfg.image_embedding_dim = std::stoul(val);
    else if (key == "position_embedding_dim") cfg.position_embedding_dim = std::stoul(val);
    else if (key == "bbox_embedding_dim") cfg.bbox_embedding_dim = std::stoul(val);
    else if (key == "max_bbox") cfg.max_bbox = std::stoul(val);
    else throw FormatError("unknown model config key: " + key);
  }
  cfg.validate();
  return cfg;
}

Model::Model(ModelConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string name = std::string(kImageEncoderPrefix) + "conv" + std::to_string(i);
    const std::size_t w = add_conv2d(name, kImageChannelsPerBlock[i], kImageChannelsPerBlock[i + 1], 3);
    image_convs_[i] = {w, w + 1};
  }
  auto linear_block = [this](const std::string& name, std::size_t in, std::size_t out) {
    const std::size_t w = add_linear(name, in, out);
    return Block{w, w + 1};
  };
  image_fc_ = linear_block("image_encoder.fc", kImageChannelsPerBlock.back(), config_.image_embedding_dim);
  pos_fc_ = linear_block("pos_fc", 2, config_.position_embedding_dim);
  if (config_.bbox_encoder == BBoxEncoderKind::kMlp) {
    bbox_fc1_ = linear_block("bbox_encoder.fc1", config_.max_bbox * kBBoxFields, kBBoxMlpHidden);
    bbox_fc2_ = linear_block("bbox_encoder.fc2", kBBoxMlpHidden, config_.bbox_embedding_dim);
  } else {
    // Conv1d with k=1 stores the same [out,in] matrix as a linear layer.
    bbox_conv1_ = linear_block("bbox_encoder.conv1", kBBoxFields, kBBoxCnnChannels1);
    bbox_conv2_ = linear_block("bbox_encoder.conv2", kBBoxCnnChannels1, kBBoxCnnChannels2);
    bbox_fc_ = linear_block("bbox_encoder.fc", kBBoxCnnChannels2, config_.bbox_embedding_dim);
  }
  pl_fc1_ = linear_block("pl_head.fc1", config_.pl_head_input(), kHeadHidden);
  pl_fc2_ = linear_block("pl_head.fc2", kHeadHidden, 1);
  sh_fc1_ = linear_block("sh_head.fc1", config_.sh_head_input(), kHeadHidden);
  sh_fc2_ = linear_block("sh_head.fc2", kHeadHidden, 1);
  pl_out_ = linear_block("pl_head.denorm", 1, 1);
  sh_out_ = linear_block("sh_head.denorm", 1, 1);

  // uniform(+-1/sqrt(fan_in)) weights, zero biases
  Rng rng(derive_seed(seed, 0x1d17));
  for (auto& p : params_) {
    if (p.value.rank() < 2) continue;
    const double fan_in = static_cast<double>(p.value.size() / p.value.dim(0));
    const double bound = 1.0 / std::sqrt(fan_in);
    for (double& v : p.value.values()) v = rng.uniform(-bound, bound);
  }
  set_target_scaling(TargetScaling{});
  for (const Block& b : {pl_out_, sh_out_}) {
    params_[b.weight].frozen = true;
    params_[b.bias].frozen = true;
  }
}

void Model::set_target_scaling(const TargetScaling& t) {
  if (!(t.pl_std > 0.0 && t.sh_std > 0.0 && std::isfinite(t.pl_mean) && std::isfinite(t.sh_mean)))
    throw Error("target scaling needs finite means and positive deviations");
  params_[pl_out_.weight].value[0] = t.pl_std;
  params_[pl_out_.bias].value[0] = t.pl_mean;
  params_[sh_out_.weight].value[0] = t.sh_std;
  params_[sh_out_.bias].value[0] = t.sh_mean;
}

TargetScaling Model::target_scaling() const {
  return {params_[pl_out_.bias].value[0], params_[pl_out_.weight].value[0], params_[sh_out_.bias].value[0],
          params_[sh_out_.weight].value[0]};
}

std::size_t Model::add_linear(const std::string& name, std::size_t in, std::size_t out) {
  const std::size_t w = params_.add(name + ".weight", Shape{out, in});
  params_.add(name + ".bias", Shape{out});
  return w;
}

std::size_t Model::add_conv2d(const std::string& name, std::size_t in, std::size_t out, std::size_t k) {
  const std::size_t w = params_.add(name + ".weight", Shape{out, in, k, k});
  params_.add(name + ".bias", Shape{out});
  return w;
}

Model::Var Model::bind(Graph& g, std::size_t index) { return g.param(params_[index]); }

Model::Var Model::dense(Graph& g, Var x, std::size_t weight, std::size_t bias) {
  return g.linear(x, bind(g, weight), bind(g, bias));
}

Model::Var Model::image_encode(Graph& g, Var images) {
  const Tensor& x = g.value(images);
  if (x.rank() != 4 || x.dim(1) != kImageChannels || x.dim(2) == 0 || x.dim(3) == 0)
    throw ShapeMismatch("image_encode: expected [Nx3xHxW], got " + shape_string(x.shape()));
  Var h = images;
  for (const Block& b : image_convs_) h = g.relu(g.conv2d(h, bind(g, b.weight), bind(g, b.bias), 2, 1));
  h = g.global_avg_pool2d(h);
  return dense(g, h, image_fc_.weight, image_fc_.bias);
}

Model::Var Model::position_encode(Graph& g, Var positions) {
  expect_shape(g.value(positions), {2}, "position_encode");
  return g.relu(dense(g, positions, pos_fc_.weight, pos_fc_.bias));
}

Model::Var Model::bbox_encode(Graph& g, Var bboxes) {
  return config_.bbox_encoder == BBoxEncoderKind::kMlp ? bbox_encode_mlp(g, bboxes) : bbox_encode_cnn(g, bboxes);
}

Model::Var Model::bbox_encode_mlp(Graph& g, Var bboxes) {
  if (config_.bbox_encoder != BBoxEncoderKind::kMlp) throw ConfigMismatch("model was built with the CNN bbox encoder");
  const Tensor& b = g.value(bboxes);
  expect_shape(b, {config_.max_bbox, kBBoxFields}, "bbox_encode_mlp");
  Var flat = g.reshape(bboxes, Shape{b.dim(0), config_.max_bbox * kBBoxFields});
  Var h = g.relu(dense(g, flat, bbox_fc1_.weight, bbox_fc1_.bias));
  return dense(g, h, bbox_fc2_.weight, bbox_fc2_.bias);
}

Model::Var Model::bbox_encode_cnn(Graph& g, Var bboxes) {
  if (config_.bbox_encoder != BBoxEncoderKind::kCnn) throw ConfigMismatch("model was built with the MLP bbox encoder");
  expect_shape(g.value(bboxes), {config_.max_bbox, kBBoxFields}, "bbox_encode_cnn");
  // [N, slots, fields] -> [N, fields (channels), slots (length)]
  Var x = g.transpose_last2(bboxes);
  Var h = g.relu(g.conv1d_k1(x, bind(g, bbox_conv1_.weight), bind(g, bbox_conv1_.bias)));
  h = g.relu(g.conv1d_k1(h, bind(g, bbox_conv2_.weight), bind(g, bbox_conv2_.bias)));
  h = g.adaptive_avg_pool1d(h);
  return dense(g, h, bbox_fc_.weight, bbox_fc_.bias);
}

Model::Var Model::pl_head(Graph& g, Var image_embedding, Var position_embedding) {
  const Var parts[] = {image_embedding, position_embedding};
  Var x = g.concat(parts);
  if (g.value(x).dim(1) != config_.pl_head_input()) throw ShapeMismatch("pl_head: wrong fused width");
  Var h = g.relu(dense(g, x, pl_fc1_.weight, pl_fc1_.bias));
  Var y = dense(g, dense(g, h, pl_fc2_.weight, pl_fc2_.bias), pl_out_.weight, pl_out_.bias);
  return g.reshape(y, Shape{g.value(y).dim(0)});
}

Model::Var Model::sh_head(Graph& g, Var bbox_embedding, Var image_embedding, Var position_embedding) {
  const Var parts[] = {bbox_embedding, image_embedding, position_embedding};
  Var x = g.concat(parts);
  if (g.value(x).dim(1) != config_.sh_head_input()) throw ShapeMismatch("sh_head: wrong fused width");
  Var h = g.relu(dense(g, x, sh_fc1_.weight, sh_fc1_.bias));
  Var y = dense(g, dense(g, h, sh_fc2_.weight, sh_fc2_.bias), sh_out_.weight, sh_out_.bias);
  return g.reshape(y, Shape{g.value(y).dim(0)});
}

Model::Heads Model::forward(Graph& g, Var images, Var positions, Var bboxes) {
  return forward_from_embedding(g, image_encode(g, images), positions, bboxes);
}

Model::Heads Model::forward_from_embedding(Graph& g, Var image_embedding, Var positions, Var bboxes) {
  const std::size_t n = g.value(image_embedding).dim(0);
  if (g.value(positions).dim(0) != n || g.value(bboxes).dim(0) != n)
    throw ShapeMismatch("forward: batch sizes differ across inputs");
  Var pos = position_encode(g, positions);
  Var box = bbox_encode(g, bboxes);
  return {pl_head(g, image_embedding, pos), sh_head(g, box, image_embedding, pos)};
}

Tensor Model::embed_images(const Tensor& images) const {
  Graph g(false);
  auto* self = const_cast<Model*>(this);  // grad-disabled graphs never write to parameters
  return g.value(self->image_encode(g, g.input(images)));
}

namespace {

std::vector<Prediction> collect(const Graph& g, const Model::Heads& heads) {
  const Tensor& pl = g.value(heads.pl);
  const Tensor& sh = g.value(heads.sh);
  std::vector<Prediction> out(pl.size());
  for (std::size_t i = 0; i < pl.size(); ++i) out[i] = {pl[i], sh[i], compose_rssi(pl[i], sh[i])};
  return out;
}

}  // namespace

std::vector<Prediction> Model::predict_batch(const Tensor& images, const Tensor& positions,
                                             const Tensor& bboxes) const {
  Graph g(false);
  auto* self = const_cast<Model*>(this);
  return collect(g, self->forward(g, g.input(images), g.input(positions), g.input(bboxes)));
}

std::vector<Prediction> Model::predict_from_embeddings(const Tensor& image_embeddings, const Tensor& positions,
                                                       const Tensor& bboxes) const {
  Graph g(false);
  auto* self = const_cast<Model*>(this);
  return collect(g, self->forward_from_embedding(g, g.input(image_embeddings), g.input(positions), g.input(bboxes)));
}

Prediction Model::predict(const ImageInput& image, const PositionInput& position, const BBoxTensor& bboxes) const {
  return predict_batch(stack_images({&image}), stack_positions({position}), stack_bboxes({&bboxes})).front();
}

void Model::set_image_encoder_frozen(bool frozen) { params_.set_frozen(kImageEncoderPrefix, frozen); }

bool Model::image_encoder_frozen() const { return params_[image_convs_[0].weight].frozen; }

std::vector<LayerSpec> Model::layer_specs() const {
  using K = LayerSpec::Kind;
  std::vector<LayerSpec> s;
  for (std::size_t i = 0; i < 4; ++i) {
    s.push_back({"image_encoder", K::kConv2d, kImageChannelsPerBlock[i], kImageChannelsPerBlock[i + 1], true});
    s.push_back({"image_encoder", K::kReLU, kImageChannelsPerBlock[i + 1], kImageChannelsPerBlock[i + 1], false});
  }
  s.push_back({"image_encoder", K::kGlobalAvgPool2d, 64, 64, false});
  s.push_back({"image_encoder", K::kLinear, 64, config_.image_embedding_dim, true});
  s.push_back({"pos_fc", K::kLinear, 2, config_.position_embedding_dim, true});
  s.push_back({"pos_fc", K::kReLU, config_.position_embedding_dim, config_.position_embedding_dim, false});
  const std::size_t mb = config_.max_bbox;
  if (config_.bbox_encoder == BBoxEncoderKind::kMlp) {
    s.push_back({"bbox_encoder", K::kLinear, mb * kBBoxFields, kBBoxMlpHidden, true});
    s.push_back({"bbox_encoder", K::kReLU, kBBoxMlpHidden, kBBoxMlpHidden, false});
    s.push_back({"bbox_encoder", K::kLinear, kBBoxMlpHidden, config_.bbox_embedding_dim, true});
  } else {
    // conv1d rows report channel counts; the kernel is shared over the max_bbox slots
    s.push_back({"bbox_encoder", K::kConv1dK1, kBBoxFields, kBBoxCnnChannels1, true});
    s.push_back({"bbox_encoder", K::kReLU, kBBoxCnnChannels1, kBBoxCnnChannels1, false});
    s.push_back({"bbox_encoder", K::kConv1dK1, kBBoxCnnChannels1, kBBoxCnnChannels2, true});
    s.push_back({"bbox_encoder", K::kReLU, kBBoxCnnChannels2, kBBoxCnnChannels2, false});
    s.push_back({"bbox_encoder", K::kAdaptiveAvgPool1d, kBBoxCnnChannels2 * mb, kBBoxCnnChannels2, false});
    s.push_back({"bbox_encoder", K::kLinear, kBBoxCnnChannels2, config_.bbox_embedding_dim, true});
  }
  s.push_back({"pl_head", K::kConcat, config_.pl_head_input(), config_.pl_head_input(), false});
  s.push_back({"pl_head", K::kLinear, config_.pl_head_input(), kHeadHidden, true});
  s.push_back({"pl_head", K::kReLU, kHeadHidden, kHeadHidden, false});
  s.push_back({"pl_head", K::kLinear, kHeadHidden, 1, true});
  s.push_back({"pl_head.denorm", K::kLinear, 1, 1, true});
  s.push_back({"sh_head", K::kConcat, config_.sh_head_input(), config_.sh_head_input(), false});
  s.push_back({"sh_head", K::kLinear, config_.sh_head_input(), kHeadHidden, true});
  s.push_back({"sh_head", K::kReLU, kHeadHidden, kHeadHidden, false});
  s.push_back({"sh_head", K::kLinear, kHeadHidden, 1, true});
  s.push_back({"sh_head.denorm", K::kLinear, 1, 1, true});
  return s;
}

Tensor stack_images(const std::vector<const ImageInput*>& images) {
  const std::size_t per = kImageChannels * kImageSize * kImageSize;
  Tensor out(Shape{images.size(), kImageChannels, kImageSize, kImageSize});
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i]->pixels.size() != per) throw ShapeMismatch("image input must be [3,224,224]");
    std::copy_n(images[i]->pixels.data(), per, out.data() + i * per);
  }
  return out;
}

Tensor stack_positions(const std::vector<PositionInput>& positions) {
  Tensor out(Shape{positions.size(), 2});
  for (std::size_t i = 0; i < positions.size(); ++i) {
    out[2 * i] = positions[i].dx;
    out[2 * i + 1] = positions[i].dy;
  }
  return out;
}

Tensor stack_bboxes(const std::vector<const BBoxTensor*>& bboxes) {
  const std::size_t per = kMaxBBox * kBBoxFields;
  Tensor out(Shape{bboxes.size(), kMaxBBox, kBBoxFields});
  for (std::size_t i = 0; i < bboxes.size(); ++i) std::copy_n(bboxes[i]->values.data(), per, out.data() + i * per);
  return out;
}

}  // namespace visrssi
