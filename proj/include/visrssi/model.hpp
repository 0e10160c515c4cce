// Copyright 2026 The visrssi Authors
// SPDX-License-Identifier: Apache-2.0
//
// Decomposed RSSI predictor. Three encoders (image, relative position,
// bounding boxes) feed two heads: the path-loss head sees image and position
// embeddings, the shadow-fading head sees all three. RSSI is never regressed;
// it is recomposed as -PL + SH.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "visrssi/autodiff.hpp"

namespace visrssi {

inline constexpr std::size_t kMaxBBox = 10;
inline constexpr std::size_t kBBoxFields = 5;  // class_id, x_center, y_center, width, height
inline constexpr std::size_t kImageSize = 224;
inline constexpr std::size_t kImageChannels = 3;

/// Fixed-size box table. Row 0 holds the transmitter; unused rows are zero.
struct BBoxTensor {
  std::array<double, kMaxBBox * kBBoxFields> values{};

  double* row(std::size_t slot) { return values.data() + slot * kBBoxFields; }
  const double* row(std::size_t slot) const { return values.data() + slot * kBBoxFields; }
  friend bool operator==(const BBoxTensor&, const BBoxTensor&) = default;
};

/// Min-max normalized Tx-Rx displacement.
struct PositionInput {
  double dx = 0.0;
  double dy = 0.0;
};

/// Channel-normalized image, shape [3, 224, 224].
struct ImageInput {
  Tensor pixels{Shape{kImageChannels, kImageSize, kImageSize}};
};

enum class BBoxEncoderKind { kMlp, kCnn };

std::string to_string(BBoxEncoderKind kind);
BBoxEncoderKind parse_bbox_encoder(const std::string& text);

struct ModelConfig {
  BBoxEncoderKind bbox_encoder = BBoxEncoderKind::kMlp;
  std::size_t image_embedding_dim = 128;
  std::size_t position_embedding_dim = 32;
  std::size_t bbox_embedding_dim = 64;
  std::size_t max_bbox = kMaxBBox;

  std::size_t pl_head_input() const { return image_embedding_dim + position_embedding_dim; }
  std::size_t sh_head_input() const { return bbox_embedding_dim + image_embedding_dim + position_embedding_dim; }

  void validate() const;
  /// `key=value` lines.
  std::string to_text() const;
  static ModelConfig from_text(const std::string& text);
};

struct Prediction {
  double pl = 0.0;
  double sh = 0.0;
  double rssi = 0.0;
};

/// One row of the architecture table.
/// Fixed affine map from head output to dB: y = mean + std * z.
struct TargetScaling {
  double pl_mean = 0.0;
  double pl_std = 1.0;
  double sh_mean = 0.0;
  double sh_std = 1.0;
};

struct LayerSpec {
  enum class Kind { kLinear, kReLU, kConv1dK1, kAdaptiveAvgPool1d, kConcat, kConv2d, kGlobalAvgPool2d };
  std::string module;
  Kind kind;
  std::size_t in_dim;
  std::size_t out_dim;
  bool has_bias;
};

class Model {
 public:
  using Var = Graph::Var;

  struct Heads {
    Var pl;  ///< [N]
    Var sh;  ///< [N]
  };

  explicit Model(ModelConfig config = {}, std::uint64_t seed = 0);

  const ModelConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  // Sub-networks. Batched inputs: images [N,3,H,W] (224x224 from the dataset;
  // any size works since the encoder ends in a global pool), positions [N,2],
  // bboxes [N,max_bbox,5].
  Var image_encode(Graph& g, Var images);
  Var position_encode(Graph& g, Var positions);
  Var bbox_encode(Graph& g, Var bboxes);
  Var bbox_encode_mlp(Graph& g, Var bboxes);
  Var bbox_encode_cnn(Graph& g, Var bboxes);
  Var pl_head(Graph& g, Var image_embedding, Var position_embedding);
  Var sh_head(Graph& g, Var bbox_embedding, Var image_embedding, Var position_embedding);

  Heads forward(Graph& g, Var images, Var positions, Var bboxes);
  /// Same as forward() with the image encoder output supplied directly.
  Heads forward_from_embedding(Graph& g, Var image_embedding, Var positions, Var bboxes);

  /// Forward-only image embeddings, [N,image_embedding_dim].
  Tensor embed_images(const Tensor& images) const;

  /// Forward-only predictions; `images` may be null-sized when `image_embeddings` is given.
  std::vector<Prediction> predict_batch(const Tensor& images, const Tensor& positions, const Tensor& bboxes) const;
  std::vector<Prediction> predict_from_embeddings(const Tensor& image_embeddings, const Tensor& positions,
                                                  const Tensor& bboxes) const;
  Prediction predict(const ImageInput& image, const PositionInput& position, const BBoxTensor& bboxes) const;

  /// Stored as permanently frozen parameters, so checkpoints carry it.
  void set_target_scaling(const TargetScaling& scaling);
  TargetScaling target_scaling() const;

  void set_image_encoder_frozen(bool frozen);
  bool image_encoder_frozen() const;

  std::size_t parameter_count() const { return params_.scalar_count(false); }
  std::size_t trainable_parameter_count() const { return params_.scalar_count(true); }

  std::vector<LayerSpec> layer_specs() const;

  static constexpr const char* kImageEncoderPrefix = "image_encoder.";

 private:
  Var bind(Graph& g, std::size_t index);
  Var dense(Graph& g, Var x, std::size_t weight, std::size_t bias);
  std::size_t add_linear(const std::string& name, std::size_t in, std::size_t out);
  std::size_t add_conv2d(const std::string& name, std::size_t in, std::size_t out, std::size_t k);

  ModelConfig config_;
  ParameterSet params_;

  struct Block {
    std::size_t weight;
    std::size_t bias;
  };
  std::array<Block, 4> image_convs_{};
  Block image_fc_{};
  Block pos_fc_{};
  Block bbox_fc1_{}, bbox_fc2_{};               // MLP variant
  Block bbox_conv1_{}, bbox_conv2_{}, bbox_fc_{};  // CNN variant
  Block pl_fc1_{}, pl_fc2_{};
  Block sh_fc1_{}, sh_fc2_{};
  Block pl_out_{}, sh_out_{};
};

/// Stacks inputs into batched tensors.
Tensor stack_images(const std::vector<const ImageInput*>& images);
Tensor stack_positions(const std::vector<PositionInput>& positions);
Tensor stack_bboxes(const std::vector<const BBoxTensor*>& bboxes);

}  // namespace visrssi
