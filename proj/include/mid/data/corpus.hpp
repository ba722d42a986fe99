#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "mid/core/denoiser_interface.hpp"
#include "mid/core/error.hpp"

namespace mid {

enum class CorpusRole { Clean, Noisy, PairedGroundTruth };

std::string to_string(CorpusRole role);
CorpusRole corpus_role_from_string(const std::string& s);

/// Scenes with unique ids and a common channel count.
struct ImageCorpus {
  CorpusRole role = CorpusRole::Clean;
  std::vector<Scene> scenes;
  nlohmann::json provenance = nlohmann::json::object();

  [[nodiscard]] std::size_t size() const { return scenes.size(); }
  [[nodiscard]] int channels() const;
  [[nodiscard]] std::vector<std::string> ids() const;
  [[nodiscard]] std::vector<ImageTensor> images() const;
  /// Throws InvalidArgument on duplicate ids or mixed channel counts.
  void validate() const;
};

/// Load failure carrying one message per offending file.
class CorpusLoadError : public IoError {
 public:
  explicit CorpusLoadError(std::vector<std::string> errors);
  std::vector<std::string> errors;
};

/// Every *.png in `directory` (non-recursive), lexicographic by file name,
/// scene id = file stem. Fails as a whole if any file is unreadable or the
/// channel counts differ.
ImageCorpus load_corpus(const std::filesystem::path& directory, CorpusRole role);

/// Writes <id>.png for every scene and `manifest.json` with scene id, file,
/// role and the pixel_sha256 of the image as it reads back from disk.
void save_corpus(const ImageCorpus& corpus, const std::filesystem::path& directory, int bit_depth = 8);

/// Lowercase hex SHA-256 of the image's float32 little-endian pixel bytes.
std::string pixel_sha256(const ImageTensor& image);

}  // namespace mid
