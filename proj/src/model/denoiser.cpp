#include "mid/model/denoiser.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "mid/core/error.hpp"

namespace mid {

namespace {

constexpr std::array<char, 8> kMagic = {'M', 'I', 'D', 'C', 'K', 'P', 'T', '1'};

void write_u64_le(std::ostream& out, std::uint64_t v) {
  std::array<unsigned char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b.data()), 8);
}

std::uint64_t read_u64_le(std::istream& in) {
  std::array<unsigned char, 8> b{};
  in.read(reinterpret_cast<char*>(b.data()), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_floats_le(std::ostream& out, std::span<const float> values) {
  for (float f : values) {
    const auto bits = std::bit_cast<std::uint32_t>(f);
    std::array<unsigned char, 4> b{};
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(b.data()), 4);
  }
}

void read_floats_le(std::istream& in, std::span<float> values) {
  std::vector<unsigned char> raw(values.size() * 4);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  for (std::size_t k = 0; k < values.size(); ++k) {
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(raw[k * 4 + i]) << (8 * i);
    values[k] = std::bit_cast<float>(bits);
  }
}

}  // namespace

Denoiser::Denoiser(std::unique_ptr<nn::Network<float>> net, int round_index,
                   nlohmann::json train_config, std::uint64_t init_hash)
    : net_(std::move(net)), round_index_(round_index), train_config_(std::move(train_config)),
      init_hash_(init_hash) {
  if (!net_) throw InvalidArgument("Denoiser: null network");
}

Denoiser Denoiser::create(const nn::ArchitectureSpec& arch, RngStream& init_rng, int round_index) {
  auto net = nn::make_network<float>(arch);
  nn::initialize_parameters(*net, init_rng);
  const auto hash = nn::parameter_hash(*net);
  return Denoiser(std::move(net), round_index, nlohmann::json::object(), hash);
}

Denoiser::Denoiser(const Denoiser& other)
    : net_(other.net_->clone()), round_index_(other.round_index_),
      train_config_(other.train_config_), init_hash_(other.init_hash_) {}

Denoiser& Denoiser::operator=(const Denoiser& other) {
  if (this != &other) {
    net_ = other.net_->clone();
    round_index_ = other.round_index_;
    train_config_ = other.train_config_;
    init_hash_ = other.init_hash_;
  }
  return *this;
}

void Denoiser::set_metadata(int round_index, nlohmann::json train_config, std::uint64_t init_hash) {
  round_index_ = round_index;
  train_config_ = std::move(train_config);
  init_hash_ = init_hash;
}

ImageTensor Denoiser::denoise(const ImageTensor& masked) const {
  const int f = downsample_factor();
  if (masked.height() % f != 0 || masked.width() % f != 0) {
    throw InvalidArgument("denoise: spatial dims must be multiples of " + std::to_string(f) +
                          " (pad or crop the input)");
  }
  if (masked.channels() != architecture().channels) {
    throw InvalidArgument("denoise: model expects " + std::to_string(architecture().channels) +
                          " channels");
  }
  const std::array<ImageTensor, 1> one{masked};
  const auto out = net_->forward(nn::to_batch<float>(one));
  return nn::from_batch(out, 0);
}

void Denoiser::save(const std::filesystem::path& path) const {
  nlohmann::json table = nlohmann::json::array();
  for (const auto& p : net_->parameters()) table.push_back({{"name", p.name}, {"count", p.value.size()}});
  const nlohmann::json header = {{"format", "mid-checkpoint"},
                                 {"version", 1},
                                 {"dtype", "float32-le"},
                                 {"architecture", architecture().to_json()},
                                 {"round_index", round_index_},
                                 {"train_config", train_config_},
                                 {"init_hash", init_hash_},
                                 {"parameter_count", parameter_count()},
                                 {"parameter_hash", nn::parameter_hash(*net_)},
                                 {"parameters", table}};
  const std::string text = header.dump();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kMagic.data(), kMagic.size());
  write_u64_le(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& p : net_->parameters()) write_floats_le(out, p.value);
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Denoiser Denoiser::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw IoError(path.string() + " is not a checkpoint");
  const std::uint64_t len = read_u64_le(in);
  if (!in || len > (1u << 26)) throw IoError("corrupt checkpoint header in " + path.string());
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt checkpoint header in " + path.string() + ": " + e.what());
  }
  try {
    auto net = nn::make_network<float>(nn::ArchitectureSpec::from_json(header.at("architecture")));
    auto params = net->parameters();
    const auto& table = header.at("parameters");
    if (table.size() != params.size()) throw IoError("checkpoint parameter table does not match architecture");
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (table[i].at("count").get<std::size_t>() != params[i].value.size() ||
          table[i].at("name").get<std::string>() != params[i].name) {
        throw IoError("checkpoint parameter '" + params[i].name + "' has unexpected shape");
      }
      read_floats_le(in, params[i].value);
    }
    if (!in) throw IoError("truncated checkpoint " + path.string());
    if (in.peek() != std::char_traits<char>::eof()) throw IoError("trailing bytes in checkpoint " + path.string());
    if (header.contains("parameter_hash") &&
        header.at("parameter_hash").get<std::uint64_t>() != nn::parameter_hash(*net)) {
      throw IoError("checkpoint " + path.string() + " fails its parameter hash");
    }
    return Denoiser(std::move(net), header.at("round_index").get<int>(), header.at("train_config"),
                    header.at("init_hash").get<std::uint64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint header in " + path.string() + ": " + e.what());
  }
}

ImageTensor denoise_once(const Denoiser& model, const ImageTensor& masked_input) {
  return model.denoise(masked_input);
}

}  // namespace mid
