#include "mid/model/network.hpp"

#include <cmath>
#include <cstring>
#include <optional>

#include "mid/core/error.hpp"

namespace mid::nn {

nlohmann::json ArchitectureSpec::to_json() const {
  return {{"id", id}, {"channels", channels}, {"width", width}, {"depth", depth}};
}

ArchitectureSpec ArchitectureSpec::from_json(const nlohmann::json& j) {
  ArchitectureSpec s;
  s.id = j.at("id").get<std::string>();
  s.channels = j.at("channels").get<int>();
  s.width = j.at("width").get<int>();
  s.depth = j.at("depth").get<int>();
  return s;
}

template <typename T>
std::vector<ParamView<const T>> Network<T>::parameters() const {
  auto mutable_views = const_cast<Network*>(this)->parameters();
  std::vector<ParamView<const T>> out;
  out.reserve(mutable_views.size());
  for (auto& p : mutable_views) out.push_back({p.name, p.value, p.grad, p.fan_in, p.is_bias});
  return out;
}

template <typename T>
std::size_t Network<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.value.size();
  return n;
}

template <typename T>
void Network<T>::zero_grad() {
  for (auto& p : parameters()) std::fill(p.grad.begin(), p.grad.end(), T(0));
}

namespace {

template <typename T>
void push_conv(std::vector<ParamView<T>>& out, const std::string& name, Conv2d<T>& c) {
  out.push_back({name + ".weight", c.weight, c.grad_weight, c.fan_in(), false});
  out.push_back({name + ".bias", c.bias, c.grad_bias, c.fan_in(), true});
}

template <typename T>
void push_up(std::vector<ParamView<T>>& out, const std::string& name, ConvTranspose2x2<T>& c) {
  out.push_back({name + ".weight", c.weight, c.grad_weight, c.fan_in(), false});
  out.push_back({name + ".bias", c.bias, c.grad_bias, c.fan_in(), true});
}

template <typename T>
class UNet final : public Network<T> {
 public:
  explicit UNet(const ArchitectureSpec& spec) : spec_(spec) {
    const int c = spec.channels;
    const int w1 = spec.width;
    const int w2 = 2 * w1;
    const int w3 = 4 * w1;
    if (c <= 0 || w1 <= 0) throw InvalidArgument("unet: channels and width must be positive");
    convs_ = {
        Conv2d<T>(c, w1, 3, 1),   Conv2d<T>(w1, w1, 3, 1),  // encoder 1
        Conv2d<T>(w1, w2, 3, 2),  Conv2d<T>(w2, w2, 3, 1),  // encoder 2
        Conv2d<T>(w2, w3, 3, 2),  Conv2d<T>(w3, w3, 3, 1),  // bottleneck
        Conv2d<T>(w3, w2, 3, 1),  Conv2d<T>(w2, w2, 3, 1),  // decoder 2
        Conv2d<T>(w2, w1, 3, 1),  Conv2d<T>(w1, w1, 3, 1),  // decoder 1
        Conv2d<T>(w1, c, 1, 1),                              // head
    };
    ups_ = {ConvTranspose2x2<T>(w3, w2), ConvTranspose2x2<T>(w2, w1)};
  }

  const ArchitectureSpec& spec() const override { return spec_; }
  int downsample_factor() const override { return 4; }

  Tensor4<T> forward(const Tensor4<T>& x) const override { return run(x, nullptr); }

  Tensor4<T> forward_train(const Tensor4<T>& x) override {
    tape_.emplace();
    tape_->conv.resize(convs_.size());
    tape_->act.resize(convs_.size());
    tape_->up.resize(ups_.size());
    return run(x, &*tape_);
  }

  Tensor4<T> backward(const Tensor4<T>& grad_out) override {
    if (!tape_) throw InternalError("unet: backward without forward_train");
    Tape& t = *tape_;
    auto back = [&](int i, Tensor4<T> g) {
      leaky_relu_backward_inplace(g, t.act[i]);
      return convs_[i].backward(g, t.conv[i]);
    };
    Tensor4<T> g = convs_[10].backward(grad_out, t.conv[10]);
    g = back(9, std::move(g));
    g = back(8, std::move(g));
    Tensor4<T> g_up2, g_skip1;
    split_channels(g, spec_.width, g_up2, g_skip1);
    g = ups_[1].backward(g_up2, t.up[1]);
    g = back(7, std::move(g));
    g = back(6, std::move(g));
    Tensor4<T> g_up1, g_skip2;
    split_channels(g, 2 * spec_.width, g_up1, g_skip2);
    g = ups_[0].backward(g_up1, t.up[0]);
    g = back(5, std::move(g));
    g = back(4, std::move(g));
    add_inplace(g, g_skip2);
    g = back(3, std::move(g));
    g = back(2, std::move(g));
    add_inplace(g, g_skip1);
    g = back(1, std::move(g));
    g = back(0, std::move(g));
    tape_.reset();
    return g;
  }

  std::vector<ParamView<T>> parameters() override {
    std::vector<ParamView<T>> out;
    for (std::size_t i = 0; i < convs_.size(); ++i) push_conv(out, "conv" + std::to_string(i), convs_[i]);
    for (std::size_t i = 0; i < ups_.size(); ++i) push_up(out, "up" + std::to_string(i), ups_[i]);
    return out;
  }

  std::unique_ptr<Network<T>> clone() const override {
    auto copy = std::make_unique<UNet>(*this);
    copy->tape_.reset();
    return copy;
  }

 private:
  struct Tape {
    std::vector<typename Conv2d<T>::Cache> conv;
    std::vector<Tensor4<T>> act;
    std::vector<typename ConvTranspose2x2<T>::Cache> up;
  };

  Tensor4<T> run(const Tensor4<T>& x, Tape* t) const {
    if (x.c != spec_.channels) throw InvalidArgument("unet: input channel count mismatch");
    if (x.h % 4 != 0 || x.w % 4 != 0) {
      throw InvalidArgument("unet: spatial dims must be multiples of 4");
    }
    auto step = [&](int i, const Tensor4<T>& in) {
      Tensor4<T> y = convs_[i].forward(in, t ? &t->conv[i] : nullptr);
      leaky_relu_inplace(y);
      if (t) t->act[i] = y;
      return y;
    };
    Tensor4<T> e1 = step(1, step(0, x));
    Tensor4<T> e2 = step(3, step(2, e1));
    Tensor4<T> b = step(5, step(4, e2));
    Tensor4<T> u1 = ups_[0].forward(b, t ? &t->up[0] : nullptr);
    Tensor4<T> d2 = step(7, step(6, concat_channels(u1, e2)));
    Tensor4<T> u2 = ups_[1].forward(d2, t ? &t->up[1] : nullptr);
    Tensor4<T> d1 = step(9, step(8, concat_channels(u2, e1)));
    return convs_[10].forward(d1, t ? &t->conv[10] : nullptr);
  }

  ArchitectureSpec spec_;
  std::vector<Conv2d<T>> convs_;
  std::vector<ConvTranspose2x2<T>> ups_;
  std::optional<Tape> tape_;
};

template <typename T>
class ConvStack final : public Network<T> {
 public:
  explicit ConvStack(const ArchitectureSpec& spec) : spec_(spec) {
    if (spec.depth < 1 || spec.channels <= 0 || spec.width <= 0) {
      throw InvalidArgument("convstack: depth, channels and width must be positive");
    }
    if (spec.depth == 1) {
      convs_.emplace_back(spec.channels, spec.channels, 3, 1);
      return;
    }
    convs_.emplace_back(spec.channels, spec.width, 3, 1);
    for (int i = 0; i < spec.depth - 2; ++i) convs_.emplace_back(spec.width, spec.width, 3, 1);
    convs_.emplace_back(spec.width, spec.channels, 3, 1);
  }

  const ArchitectureSpec& spec() const override { return spec_; }
  int downsample_factor() const override { return 1; }

  Tensor4<T> forward(const Tensor4<T>& x) const override { return run(x, nullptr); }

  Tensor4<T> forward_train(const Tensor4<T>& x) override {
    tape_.emplace();
    tape_->conv.resize(convs_.size());
    tape_->act.resize(convs_.size());
    return run(x, &*tape_);
  }

  Tensor4<T> backward(const Tensor4<T>& grad_out) override {
    if (!tape_) throw InternalError("convstack: backward without forward_train");
    Tensor4<T> g = grad_out;
    const int last = static_cast<int>(convs_.size()) - 1;
    for (int i = last; i >= 0; --i) {
      if (i != last) leaky_relu_backward_inplace(g, tape_->act[i]);
      g = convs_[i].backward(g, tape_->conv[i]);
    }
    tape_.reset();
    return g;
  }

  std::vector<ParamView<T>> parameters() override {
    std::vector<ParamView<T>> out;
    for (std::size_t i = 0; i < convs_.size(); ++i) push_conv(out, "conv" + std::to_string(i), convs_[i]);
    return out;
  }

  std::unique_ptr<Network<T>> clone() const override {
    auto copy = std::make_unique<ConvStack>(*this);
    copy->tape_.reset();
    return copy;
  }

 private:
  struct Tape {
    std::vector<typename Conv2d<T>::Cache> conv;
    std::vector<Tensor4<T>> act;
  };

  Tensor4<T> run(const Tensor4<T>& x, Tape* t) const {
    if (x.c != spec_.channels) throw InvalidArgument("convstack: input channel count mismatch");
    Tensor4<T> y = x;
    const int last = static_cast<int>(convs_.size()) - 1;
    for (int i = 0; i <= last; ++i) {
      y = convs_[i].forward(y, t ? &t->conv[i] : nullptr);
      if (i != last) {
        leaky_relu_inplace(y);
        if (t) t->act[i] = y;
      }
    }
    return y;
  }

  ArchitectureSpec spec_;
  std::vector<Conv2d<T>> convs_;
  std::optional<Tape> tape_;
};

}  // namespace

template <typename T>
std::unique_ptr<Network<T>> make_network(const ArchitectureSpec& spec) {
  if (spec.id == "unet") return std::make_unique<UNet<T>>(spec);
  if (spec.id == "convstack") return std::make_unique<ConvStack<T>>(spec);
  throw InvalidArgument("unknown architecture id '" + spec.id + "'");
}

template <typename T>
void initialize_parameters(Network<T>& net, RngStream& rng) {
  for (auto& p : net.parameters()) {
    if (p.is_bias) {
      std::fill(p.value.begin(), p.value.end(), T(0));
      continue;
    }
    const double std_dev = std::sqrt(2.0 / static_cast<double>(p.fan_in));
    for (T& v : p.value) v = static_cast<T>(std_dev * rng.normal());
  }
}

template <typename T>
std::uint64_t parameter_hash(const Network<T>& net) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const auto& p : net.parameters()) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p.value.data());
    for (std::size_t i = 0; i < p.value.size_bytes(); ++i) {
      h ^= bytes[i];
      h *= 0x100000001B3ULL;
    }
  }
  return h;
}

template <typename Dst, typename Src>
void copy_parameters(Network<Dst>& dst, const Network<Src>& src) {
  auto d = dst.parameters();
  auto s = src.parameters();
  if (d.size() != s.size()) throw InvalidArgument("copy_parameters: architecture mismatch");
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i].value.size() != s[i].value.size()) throw InvalidArgument("copy_parameters: shape mismatch");
    for (std::size_t k = 0; k < d[i].value.size(); ++k) d[i].value[k] = static_cast<Dst>(s[i].value[k]);
  }
}

template class Network<float>;
template class Network<double>;
template std::unique_ptr<Network<float>> make_network<float>(const ArchitectureSpec&);
template std::unique_ptr<Network<double>> make_network<double>(const ArchitectureSpec&);
template void initialize_parameters<float>(Network<float>&, RngStream&);
template void initialize_parameters<double>(Network<double>&, RngStream&);
template std::uint64_t parameter_hash<float>(const Network<float>&);
template std::uint64_t parameter_hash<double>(const Network<double>&);
template void copy_parameters<float, float>(Network<float>&, const Network<float>&);
template void copy_parameters<double, float>(Network<double>&, const Network<float>&);
template void copy_parameters<float, double>(Network<float>&, const Network<double>&);

}  // namespace mid::nn
