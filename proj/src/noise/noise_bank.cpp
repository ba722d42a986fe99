#include "mid/noise/noise_bank.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "mid/core/error.hpp"

namespace mid {

namespace {

constexpr const char* kManifestName = "manifest.json";
constexpr const char* kFormat = "mid-noise-bank";
constexpr int kVersion = 1;

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return (v >> 24) | ((v >> 8) & 0xFF00u) | ((v << 8) & 0xFF0000u) | (v << 24);
  }
}

std::string patch_file_name(std::size_t i) {
  std::ostringstream os;
  os << "patch_" << std::setw(6) << std::setfill('0') << i << ".f32";
  return os.str();
}

}  // namespace

void write_f32_file(const std::filesystem::path& path, std::span<const float> values) {
  std::vector<std::uint32_t> words(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) words[i] = to_le(std::bit_cast<std::uint32_t>(values[i]));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(words.data()),
            static_cast<std::streamsize>(words.size() * sizeof(std::uint32_t)));
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<float> read_f32_file(const std::filesystem::path& path, std::size_t expected_count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != expected_count * sizeof(float)) {
    throw IoError(path.string() + ": expected " + std::to_string(expected_count * sizeof(float)) +
                  " bytes, found " + std::to_string(bytes));
  }
  in.seekg(0);
  std::vector<std::uint32_t> words(expected_count);
  in.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw IoError("failed reading " + path.string());
  std::vector<float> out(expected_count);
  for (std::size_t i = 0; i < expected_count; ++i) out[i] = std::bit_cast<float>(to_le(words[i]));
  return out;
}

NoiseBank::NoiseBank(int round_index, int patch_size, std::vector<ImageTensor> patches,
                     std::vector<PatchProvenance> manifest, nlohmann::json config)
    : round_index_(round_index), patch_size_(patch_size), patches_(std::move(patches)),
      manifest_(std::move(manifest)), config_(std::move(config)) {
  if (round_index_ < 0) throw InvalidArgument("NoiseBank: round_index must be >= 0");
  if (patches_.empty()) throw InvalidArgument("NoiseBank: bank must contain at least one patch");
  if (manifest_.size() != patches_.size()) throw InvalidArgument("NoiseBank: manifest size mismatch");
  const int c = patches_.front().channels();
  for (const auto& p : patches_) {
    if (p.channels() != c) throw InvalidArgument("NoiseBank: patches differ in channel count");
    if (p.height() < patch_size_ || p.width() < patch_size_) {
      throw InvalidArgument("NoiseBank: patch smaller than the declared patch_size");
    }
  }
}

void NoiseBank::save(const std::filesystem::path& dir) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t i = 0; i < patches_.size(); ++i) {
    const auto& p = patches_[i];
    const auto& m = manifest_[i];
    const std::string file = patch_file_name(i);
    write_f32_file(dir / file, p.data());
    entries.push_back({{"id", m.id},
                       {"source", m.source_id},
                       {"mask_seed", m.mask_seed},
                       {"mask_ratio", m.mask_ratio},
                       {"round", m.round},
                       {"height", p.height()},
                       {"width", p.width()},
                       {"channels", p.channels()},
                       {"file", file}});
  }
  const nlohmann::json manifest = {{"format", kFormat},       {"version", kVersion},
                                   {"round_index", round_index_}, {"patch_size", patch_size_},
                                   {"config", config_},       {"patches", entries}};
  std::ofstream out(dir / kManifestName, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
  if (!out) throw IoError("failed writing manifest in " + dir.string());
}

NoiseBank NoiseBank::load(const std::filesystem::path& dir) {
  std::ifstream in(dir / kManifestName);
  if (!in) throw IoError("no noise-bank manifest in " + dir.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed noise-bank manifest in " + dir.string() + ": " + e.what());
  }
  if (manifest.value("format", "") != kFormat) throw IoError(dir.string() + " is not a noise bank");
  if (manifest.value("version", 0) != kVersion) throw IoError("unsupported noise-bank version");

  std::vector<ImageTensor> patches;
  std::vector<PatchProvenance> provenance;
  for (const auto& e : manifest.at("patches")) {
    const int h = e.at("height").get<int>();
    const int w = e.at("width").get<int>();
    const int c = e.at("channels").get<int>();
    auto values = read_f32_file(dir / e.at("file").get<std::string>(),
                                static_cast<std::size_t>(h) * w * c);
    patches.emplace_back(h, w, c, std::move(values));
    provenance.push_back({e.at("id").get<std::string>(), e.at("source").get<std::string>(),
                          e.at("mask_seed").get<std::uint64_t>(), e.at("mask_ratio").get<double>(),
                          e.at("round").get<int>()});
  }
  return {manifest.at("round_index").get<int>(), manifest.at("patch_size").get<int>(),
          std::move(patches), std::move(provenance), manifest.at("config")};
}

}  // namespace mid
