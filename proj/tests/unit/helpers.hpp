#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "mid/core/image.hpp"
#include "mid/core/rng.hpp"

namespace mid::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(std::filesystem::temp_directory_path() / ("mid-unit-" + name)) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline ImageTensor uniform_image(int h, int w, int c, std::uint64_t seed) {
  RngStream rng(seed, "unit-image");
  ImageTensor img(h, w, c);
  for (float& v : img.data()) v = static_cast<float>(rng.uniform());
  return img;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace mid::test
