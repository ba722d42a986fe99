#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mid/core/image.hpp"

namespace mid {

/// Where a bank entry came from.
struct PatchProvenance {
  std::string id;
  std::string source_id;       // "awgn" for round-0 draws
  std::uint64_t mask_seed = 0;  // key of the RngStream that drew the mask (or the AWGN draw)
  double mask_ratio = 0.0;
  int round = 0;

  friend bool operator==(const PatchProvenance&, const PatchProvenance&) = default;
};

/// Immutable set of noise samples used to corrupt clean images in one round.
///
/// Round 0 holds AWGN draws; round k >= 1 holds residuals of real noisy images
/// against the round k-1 denoiser. Residuals are stored as whole images and
/// cropped at draw time.
class NoiseBank {
 public:
  NoiseBank(int round_index, int patch_size, std::vector<ImageTensor> patches,
            std::vector<PatchProvenance> manifest, nlohmann::json config = nlohmann::json::object());

  [[nodiscard]] int round_index() const { return round_index_; }
  [[nodiscard]] int patch_size() const { return patch_size_; }
  [[nodiscard]] int channels() const { return patches_.front().channels(); }
  [[nodiscard]] std::size_t size() const { return patches_.size(); }
  [[nodiscard]] const ImageTensor& patch(std::size_t i) const { return patches_.at(i); }
  [[nodiscard]] const std::vector<ImageTensor>& patches() const { return patches_; }
  [[nodiscard]] const PatchProvenance& provenance(std::size_t i) const { return manifest_.at(i); }
  [[nodiscard]] const std::vector<PatchProvenance>& manifest() const { return manifest_; }
  /// Extraction settings and lineage (e.g. the checkpoint that produced it).
  [[nodiscard]] const nlohmann::json& config() const { return config_; }

  /// Writes `manifest.json` plus one little-endian float32 file per patch.
  /// The directory is created if needed; existing bank files are replaced.
  void save(const std::filesystem::path& dir) const;
  static NoiseBank load(const std::filesystem::path& dir);

 private:
  int round_index_;
  int patch_size_;
  std::vector<ImageTensor> patches_;
  std::vector<PatchProvenance> manifest_;
  nlohmann::json config_;
};

/// Raw little-endian float32 array I/O (row-major, channel-last).
void write_f32_file(const std::filesystem::path& path, std::span<const float> values);
std::vector<float> read_f32_file(const std::filesystem::path& path, std::size_t expected_count);

}  // namespace mid
