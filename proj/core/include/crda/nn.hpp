#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "crda/rng.hpp"
#include "crda/tensor.hpp"

namespace crda {

enum class Role { kTeacher, kStudent, kReference, kDiscriminator };

std::string_view role_name(Role role);
std::optional<Role> parse_role(std::string_view name);

// Layer kinds. Parameterised layers own their tensors.

/// 3x3 convolution, stride 1, zero padding 1. weight: out x in x 3 x 3.
struct Conv3x3 {
  std::size_t in_channels;
  std::size_t out_channels;
  Tensor weight;
  Tensor bias;
};

/// y = x W^T + b. weight: out x in.
struct AffineFull {
  std::size_t in_features;
  std::size_t out_features;
  Tensor weight;
  Tensor bias;
};

struct ReLU {};
/// 2x2 max pooling, stride 2. Ties go to the first element in row-major order.
struct MaxPool2 {};
struct GlobalAvgPool {};
/// Row-wise x / ||x||. A zero row maps to the constant unit vector.
struct L2Normalize {};
/// Fixed scalar multiplier with no parameters.
struct Gain {
  double factor;
};

using Layer = std::variant<Conv3x3, AffineFull, ReLU, MaxPool2, GlobalAvgPool, L2Normalize, Gain>;

Conv3x3 make_conv3x3(std::size_t in, std::size_t out, Rng& init);
AffineFull make_affine(std::size_t in, std::size_t out, Rng& init);

/// Ordered stack of layers over per-sample input shape `input_shape`.
/// Batches carry a leading N dimension.
class Network {
 public:
  Network() = default;
  Network(Shape input_shape, std::vector<Layer> layers);

  const Shape& input_shape() const { return input_shape_; }
  const Shape& output_shape() const { return shapes_.back(); }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  /// When `activations` is non-null it receives the input followed by
  /// every layer output.
  Tensor forward(const Tensor& x, std::vector<Tensor>* activations = nullptr) const;

  /// Reverse pass over saved activations. Parameter gradients are added
  /// into `param_grads` (same order as parameters()). Returns the gradient
  /// w.r.t. the network input, or an empty tensor when not wanted.
  Tensor backward(const std::vector<Tensor>& activations, Tensor grad_out, std::span<Tensor> param_grads,
                  bool want_input_grad) const;

  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
  std::string signature() const;

 private:
  Shape input_shape_;
  std::vector<Layer> layers_;
  std::vector<Shape> shapes_;  // per-sample shape after each layer; shapes_[0] = input
};

/// Saved state of one forward pass, consumed by Model::backward.
struct ForwardPass {
  std::vector<Tensor> feature_acts;
  std::vector<Tensor> classifier_acts;
  std::uint64_t arch_hash = 0;

  bool valid() const { return !feature_acts.empty(); }
  const Tensor& input() const { return feature_acts.front(); }
  const Tensor& features() const { return feature_acts.back(); }
  const Tensor& logits() const;
};

/// Per-parameter gradients in Model::parameters() order, plus the optional
/// gradient w.r.t. the input batch.
struct Gradients {
  std::vector<Tensor> params;
  std::optional<Tensor> input;

  void accumulate(const Gradients& other);
  void scale(double factor);
  bool all_finite() const;
};

/// m = f ∘ c: a feature extractor followed by a classifier head.
class Model {
 public:
  Model() = default;
  Model(Network features, Network classifier, Role role);

  /// conv(3->8) relu pool conv(8->16) relu pool gap affine(16->D) l2norm | affine(D->S)
  static Model reference_architecture(std::size_t classes, Rng& init, Shape input = {3, 32, 32},
                                      std::size_t feature_dim = 64);
  /// affine(D->hidden) relu | affine(hidden->1); outputs a domain logit.
  static Model discriminator(std::size_t feature_dim, std::size_t hidden, Rng& init);

  Tensor forward_features(const Tensor& x) const;
  Tensor forward_logits(const Tensor& x) const;
  ForwardPass forward(const Tensor& x, bool with_logits = true) const;

  /// Gradients of a scalar loss given dL/dfeatures and/or dL/dlogits.
  /// Throws std::logic_error if `pass` did not come from a forward call on
  /// this architecture.
  Gradients backward(const ForwardPass& pass, const Tensor* grad_features, const Tensor* grad_logits,
                     bool want_input_grad) const;

  Gradients zero_gradients() const;

  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
  std::size_t parameter_count() const;

  std::uint64_t architecture_hash() const;
  /// FNV-1a over the raw bits of every parameter.
  std::uint64_t parameter_hash() const;

  Role role() const { return role_; }
  void set_role(Role role) { role_ = role; }
  std::size_t feature_dim() const { return features_.output_shape().front(); }
  std::size_t output_dim() const { return classifier_.output_shape().front(); }
  const Shape& input_shape() const { return features_.input_shape(); }

  Network& feature_network() { return features_; }
  const Network& feature_network() const { return features_; }
  Network& classifier_network() { return classifier_; }
  const Network& classifier_network() const { return classifier_; }

 private:
  Network features_;
  Network classifier_;
  Role role_ = Role::kReference;
};

/// Index of the largest entry; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> row);
std::vector<std::size_t> predict(const Model& model, const Tensor& batch);

/// Classical momentum SGD: v = mu v + g + wd theta; theta -= lr v.
class Sgd {
 public:
  Sgd(double lr, double momentum, double weight_decay);
  void step(Model& model, const Gradients& grads);
  double lr() const { return lr_; }

 private:
  double lr_, momentum_, weight_decay_;
  std::vector<Tensor> velocity_;
};

// Checkpoint: "CKPT" | u64 architecture hash | role string (u32 length +
// bytes) | u32 blob count | per blob: u64 element count + float64 values.
void save_ckpt(const Model& model, const std::filesystem::path& path);
/// Loads parameters into `model`; the file's role tag is returned and the
/// model keeps its own role.
Role load_ckpt(Model& model, const std::filesystem::path& path);

}  // namespace crda
