#include "mid/data/corpus.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "mid/data/png_io.hpp"

namespace mid {

std::string to_string(CorpusRole role) {
  switch (role) {
    case CorpusRole::Clean:
      return "clean";
    case CorpusRole::Noisy:
      return "noisy";
    case CorpusRole::PairedGroundTruth:
      return "paired-ground-truth";
  }
  return "unknown";
}

CorpusRole corpus_role_from_string(const std::string& s) {
  if (s == "clean") return CorpusRole::Clean;
  if (s == "noisy") return CorpusRole::Noisy;
  if (s == "paired-ground-truth") return CorpusRole::PairedGroundTruth;
  throw InvalidArgument("unknown corpus role '" + s + "'");
}

int ImageCorpus::channels() const {
  if (scenes.empty()) throw InvalidArgument("ImageCorpus: empty corpus has no channel count");
  return scenes.front().image.channels();
}

std::vector<std::string> ImageCorpus::ids() const {
  std::vector<std::string> out;
  out.reserve(scenes.size());
  for (const auto& s : scenes) out.push_back(s.id);
  return out;
}

std::vector<ImageTensor> ImageCorpus::images() const {
  std::vector<ImageTensor> out;
  out.reserve(scenes.size());
  for (const auto& s : scenes) out.push_back(s.image);
  return out;
}

void ImageCorpus::validate() const {
  std::set<std::string> seen;
  for (const auto& s : scenes) {
    if (!seen.insert(s.id).second) throw InvalidArgument("ImageCorpus: duplicate scene id '" + s.id + "'");
    if (s.image.channels() != scenes.front().image.channels()) {
      throw InvalidArgument("ImageCorpus: scene '" + s.id + "' has a different channel count");
    }
  }
}

namespace {

std::string join_errors(const std::vector<std::string>& errors) {
  std::string msg = "failed to load corpus:";
  for (const auto& e : errors) msg += "\n  - " + e;
  return msg;
}

}  // namespace

CorpusLoadError::CorpusLoadError(std::vector<std::string> errs)
    : IoError(join_errors(errs)), errors(std::move(errs)) {}

ImageCorpus load_corpus(const std::filesystem::path& directory, CorpusRole role) {
  if (!std::filesystem::is_directory(directory)) {
    throw CorpusLoadError({directory.string() + ": not a directory"});
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(directory)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") files.push_back(entry.path());
  }
  if (files.empty()) throw CorpusLoadError({directory.string() + ": empty corpus (no PNG files)"});
  std::sort(files.begin(), files.end(),
            [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });

  ImageCorpus corpus;
  corpus.role = role;
  std::vector<std::string> errors;
  for (const auto& f : files) {
    try {
      corpus.scenes.push_back({f.stem().string(), read_png(f)});
    } catch (const std::exception& e) {
      errors.push_back(f.filename().string() + ": " + e.what());
    }
  }
  if (errors.empty() && !corpus.scenes.empty()) {
    const int c = corpus.scenes.front().image.channels();
    for (const auto& s : corpus.scenes) {
      if (s.image.channels() != c) {
        errors.push_back(s.id + ": has " + std::to_string(s.image.channels()) + " channels, expected " +
                         std::to_string(c));
      }
    }
  }
  if (!errors.empty()) throw CorpusLoadError(std::move(errors));
  corpus.provenance = {{"source", directory.string()}, {"files", files.size()}};
  return corpus;
}

std::string pixel_sha256(const ImageTensor& image) {
  std::vector<unsigned char> bytes;
  bytes.reserve(image.size() * 4);
  for (float f : image.data()) {
    const auto bits = std::bit_cast<std::uint32_t>(f);
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<unsigned char>(bits >> (8 * i)));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw InternalError("sha256 failed");
  }
  std::ostringstream os;
  for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

void save_corpus(const ImageCorpus& corpus, const std::filesystem::path& directory, int bit_depth) {
  corpus.validate();
  std::filesystem::create_directories(directory);
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& s : corpus.scenes) {
    const std::string file = s.id + ".png";
    write_png(directory / file, s.image, bit_depth);
    entries.push_back({{"scene_id", s.id},
                       {"file", file},
                       {"role", to_string(corpus.role)},
                       {"sha256", pixel_sha256(quantize(s.image, bit_depth))}});
  }
  std::ofstream out(directory / "manifest.json", std::ios::trunc);
  if (!out) throw IoError("cannot write corpus manifest in " + directory.string());
  out << nlohmann::json{{"role", to_string(corpus.role)}, {"bit_depth", bit_depth}, {"scenes", entries}}.dump(2)
      << '\n';
}

}  // namespace mid
