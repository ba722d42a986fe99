#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>

#include "json.hpp"
#include "mid/core/denoiser_interface.hpp"
#include "mid/model/network.hpp"

namespace mid {

/// Trained (or trainable) image-to-image network plus the metadata needed to
/// reproduce it. Output shape always equals input shape.
class Denoiser final : public ImageDenoiser {
 public:
  explicit Denoiser(std::unique_ptr<nn::Network<float>> net, int round_index = 0,
                    nlohmann::json train_config = nlohmann::json::object(), std::uint64_t init_hash = 0);

  /// Fresh network with He-initialized parameters.
  static Denoiser create(const nn::ArchitectureSpec& arch, RngStream& init_rng, int round_index = 0);

  Denoiser(const Denoiser& other);
  Denoiser& operator=(const Denoiser& other);
  Denoiser(Denoiser&&) noexcept = default;
  Denoiser& operator=(Denoiser&&) noexcept = default;
  ~Denoiser() override = default;

  /// Single forward pass on an already-masked input. Throws InvalidArgument
  /// if the spatial dims are not multiples of downsample_factor().
  [[nodiscard]] ImageTensor denoise(const ImageTensor& masked) const override;
  [[nodiscard]] int downsample_factor() const override { return net_->downsample_factor(); }

  [[nodiscard]] const nn::ArchitectureSpec& architecture() const { return net_->spec(); }
  [[nodiscard]] std::size_t parameter_count() const { return net_->parameter_count(); }
  [[nodiscard]] int round_index() const { return round_index_; }
  [[nodiscard]] const nlohmann::json& train_config() const { return train_config_; }
  /// Hash of the parameters right after initialization (before training).
  [[nodiscard]] std::uint64_t init_hash() const { return init_hash_; }

  [[nodiscard]] nn::Network<float>& network() { return *net_; }
  [[nodiscard]] const nn::Network<float>& network() const { return *net_; }

  void set_metadata(int round_index, nlohmann::json train_config, std::uint64_t init_hash);

  /// Checkpoint container: 8-byte magic "MIDCKPT1", little-endian u64 header
  /// length, JSON header (architecture, round, train config, parameter
  /// table), then every parameter array as little-endian float32.
  void save(const std::filesystem::path& path) const;
  static Denoiser load(const std::filesystem::path& path);

 private:
  std::unique_ptr<nn::Network<float>> net_;
  int round_index_ = 0;
  nlohmann::json train_config_;
  std::uint64_t init_hash_ = 0;
};

/// One deterministic forward pass; the caller applies the mask.
ImageTensor denoise_once(const Denoiser& model, const ImageTensor& masked_input);

}  // namespace mid
