#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mid/core/rng.hpp"
#include "mid/model/layers.hpp"
#include "mid/model/tensor.hpp"

namespace mid::nn {

/// Architecture identity and hyperparameters.
///
/// "unet": three scales (width, 2*width, 4*width) joined by stride-2
/// convolutions and 2x2 transposed convolutions, skip connections by channel
/// concatenation, and a 1x1 head that predicts the clean image directly.
/// "convstack": `depth` 3x3 convolutions at constant width, no resampling.
/// A convstack of depth 1 is a single linear convolution.
struct ArchitectureSpec {
  std::string id = "unet";
  int channels = 3;
  int width = 16;
  int depth = 3;

  [[nodiscard]] nlohmann::json to_json() const;
  static ArchitectureSpec from_json(const nlohmann::json& j);
  friend bool operator==(const ArchitectureSpec&, const ArchitectureSpec&) = default;
};

template <typename T>
struct ParamView {
  std::string name;
  std::span<T> value;
  std::span<T> grad;
  int fan_in = 1;
  bool is_bias = false;
};

template <typename T>
class Network {
 public:
  virtual ~Network() = default;

  [[nodiscard]] virtual const ArchitectureSpec& spec() const = 0;
  /// Spatial dims of inputs must be multiples of this.
  [[nodiscard]] virtual int downsample_factor() const = 0;

  /// Inference pass. Does not touch internal state; safe to call concurrently.
  [[nodiscard]] virtual Tensor4<T> forward(const Tensor4<T>& x) const = 0;
  /// Training pass; records what backward() needs.
  virtual Tensor4<T> forward_train(const Tensor4<T>& x) = 0;
  /// Accumulates parameter gradients for the last forward_train and returns
  /// the gradient with respect to its input.
  virtual Tensor4<T> backward(const Tensor4<T>& grad_out) = 0;

  virtual std::vector<ParamView<T>> parameters() = 0;
  [[nodiscard]] virtual std::unique_ptr<Network> clone() const = 0;

  [[nodiscard]] std::vector<ParamView<const T>> parameters() const;
  [[nodiscard]] std::size_t parameter_count() const;
  void zero_grad();
};

template <typename T>
std::unique_ptr<Network<T>> make_network(const ArchitectureSpec& spec);

/// He-normal weights, zero biases.
template <typename T>
void initialize_parameters(Network<T>& net, RngStream& rng);

/// FNV-1a over the raw parameter bytes in declaration order.
template <typename T>
std::uint64_t parameter_hash(const Network<T>& net);

/// Copy parameters between networks of the same architecture (any scalar).
template <typename Dst, typename Src>
void copy_parameters(Network<Dst>& dst, const Network<Src>& src);

}  // namespace mid::nn
