// Copyright 2026 The pssl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pssl/dinn/model.h"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "pssl/signal/random.h"

namespace pssl {

const char* VariantName(Variant v) {
  switch (v) {
    case Variant::kDinn:
      return "dinn";
    case Variant::kDinnEmbedding:
      return "dinn-embedding";
    case Variant::kCrnn:
      return "crnn";
  }
  return "?";
}

Variant ParseVariant(std::string_view name) {
  if (name == "dinn") return Variant::kDinn;
  if (name == "dinn-embedding") return Variant::kDinnEmbedding;
  if (name == "crnn") return Variant::kCrnn;
  throw std::invalid_argument("unknown architecture '" + std::string(name) +
                              "' (expected dinn, dinn-embedding, crnn)");
}

const char* ScaleName(Scale s) { return s == Scale::kToy ? "toy" : "full"; }

Scale ParseScale(std::string_view name) {
  if (name == "toy") return Scale::kToy;
  if (name == "full") return Scale::kFull;
  throw std::invalid_argument("unknown scale '" + std::string(name) + "' (expected toy, full)");
}

ArchitectureConfig ArchitectureConfig::Make(Variant variant, Scale scale, size_t num_mics,
                                            MetadataMask mask) {
  ArchitectureConfig c;
  c.variant = variant;
  c.scale = scale;
  c.num_mics = num_mics;
  c.mask = variant == Variant::kCrnn ? MetadataMask::None() : mask;
  if (scale == Scale::kFull) {
    c.conv_kernels = {64, 128, 256, 512};
    c.gru_hidden = 256;
  }
  return c;
}

std::vector<Shape> ArchitectureConfig::ShapeChain() const {
  if (num_mics < 2) throw std::invalid_argument("architecture needs at least 2 microphones");
  if (conv_kernels.empty()) throw std::invalid_argument("architecture needs conv layers");
  if (gru_hidden == 0 || gru_layers == 0) throw std::invalid_argument("empty GRU");
  if (conv_padding < 0) throw std::invalid_argument("negative conv padding");
  if (uses_metadata() && metadata_dim() == 0) {
    throw std::invalid_argument(std::string(VariantName(variant)) +
                                " needs a non-empty metadata mask");
  }
  std::vector<Shape> chain;
  size_t c = input_channels(), l = num_frames, f = num_bins;
  chain.push_back({c, l, f});
  for (size_t i = 0; i < conv_kernels.size(); ++i) {
    if (conv_kernels[i] == 0) throw std::invalid_argument("zero conv kernels");
    const size_t grow = 2 * static_cast<size_t>(conv_padding);
    if (l + grow < 2 || f + grow < 2) {
      throw std::invalid_argument("conv layer " + std::to_string(i + 1) + " input " +
                                  ShapeString({c, l, f}) + " is smaller than the kernel");
    }
    l = (l + grow - 1) / 2;
    f = (f + grow - 1) / 2;
    c = conv_kernels[i];
    if (l == 0 || f == 0) {
      throw std::invalid_argument("conv layer " + std::to_string(i + 1) +
                                  " pools an axis to zero; input " + ShapeString(chain[0]));
    }
    chain.push_back({c, l, f});
  }
  chain.push_back({l, c});                  // mean over frequency, time-major
  chain.push_back({l, feature_dim()});      // GRU
  chain.push_back({feature_dim()});         // mean over time
  chain.push_back({fusion_dim()});          // concat
  chain.push_back({fusion_dim()});          // hidden linear
  chain.push_back({2});
  return chain;
}

std::string ArchitectureConfig::ToText() const {
  std::ostringstream os;
  os << "variant=" << VariantName(variant) << "\n";
  os << "scale=" << ScaleName(scale) << "\n";
  os << "conv_kernels=";
  for (size_t i = 0; i < conv_kernels.size(); ++i) os << (i ? "," : "") << conv_kernels[i];
  os << "\n";
  os << "gru_hidden=" << gru_hidden << "\n";
  os << "gru_layers=" << gru_layers << "\n";
  os << "num_mics=" << num_mics << "\n";
  os << "mask=" << (uses_metadata() ? mask : MetadataMask::None()).ToString() << "\n";
  os << "num_frames=" << num_frames << "\n";
  os << "num_bins=" << num_bins << "\n";
  os << "conv_padding=" << conv_padding << "\n";
  os << "batch_norm_after_relu=" << (batch_norm_after_relu ? 1 : 0) << "\n";
  os << "normalize_input=" << (normalize_input ? 1 : 0) << "\n";
  return os.str();
}

ArchitectureConfig ArchitectureConfig::FromText(std::string_view text) {
  ArchitectureConfig c;
  std::istringstream is{std::string(text)};
  std::string line;
  auto to_size = [](const std::string& v) { return static_cast<size_t>(std::stoull(v)); };
  while (std::getline(is, line)) {
    const size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq), v = line.substr(eq + 1);
    if (key == "variant") {
      c.variant = ParseVariant(v);
    } else if (key == "scale") {
      c.scale = ParseScale(v);
    } else if (key == "conv_kernels") {
      c.conv_kernels.clear();
      std::istringstream ks(v);
      std::string k;
      while (std::getline(ks, k, ',')) c.conv_kernels.push_back(to_size(k));
    } else if (key == "gru_hidden") {
      c.gru_hidden = to_size(v);
    } else if (key == "gru_layers") {
      c.gru_layers = to_size(v);
    } else if (key == "num_mics") {
      c.num_mics = to_size(v);
    } else if (key == "mask") {
      c.mask = MetadataMask::Parse(v);
    } else if (key == "num_frames") {
      c.num_frames = to_size(v);
    } else if (key == "num_bins") {
      c.num_bins = to_size(v);
    } else if (key == "conv_padding") {
      c.conv_padding = std::stoi(v);
    } else if (key == "batch_norm_after_relu") {
      c.batch_norm_after_relu = v == "1";
    } else if (key == "normalize_input") {
      c.normalize_input = v == "1";
    }
  }
  return c;
}

namespace {

template <typename T>
void FillUniform(Tensor<T>& t, double bound, Rng& rng) {
  for (T& v : t.mutable_value()) v = static_cast<T>(Uniform(rng, -bound, bound));
}

template <typename T>
std::vector<T> ToVector(const NamedArray& a) {
  std::vector<T> out;
  if (a.dtype == DType::kFloat32) {
    for (float v : a.AsFloats()) out.push_back(static_cast<T>(v));
  } else {
    for (double v : a.AsDoubles()) out.push_back(static_cast<T>(v));
  }
  return out;
}

template <typename T>
NamedArray FromSpan(std::string name, const Shape& shape, std::span<const T> v) {
  std::vector<uint64_t> dims(shape.begin(), shape.end());
  if constexpr (std::is_same_v<T, float>) {
    return NamedArray::Floats(std::move(name), std::move(dims), v);
  } else {
    return NamedArray::Doubles(std::move(name), std::move(dims), v);
  }
}

}  // namespace

template <typename T>
Tensor<T> Model<T>::Add(std::string name, Shape shape) {
  Tensor<T> t = Tensor<T>::Zeros(std::move(shape), true);
  params_.push_back({std::move(name), t});
  return t;
}

template <typename T>
Model<T>::Model(const ArchitectureConfig& config, uint64_t seed) : config_(config) {
  config_.Validate();
  Rng rng(seed);
  size_t in = config_.input_channels();
  for (size_t i = 0; i < config_.conv_kernels.size(); ++i) {
    const size_t k = config_.conv_kernels[i];
    const std::string p = "conv" + std::to_string(i + 1) + ".";
    Tensor<T> w = Add(p + "w", {k, in, 2, 2});
    FillUniform(w, std::sqrt(6.0 / (4.0 * in)), rng);
    conv_w_.push_back(w);
    conv_b_.push_back(Add(p + "b", {k}));
    ad::BatchNormParams<T> bn(k);
    params_.push_back({p + "bn.gamma", bn.gamma});
    params_.push_back({p + "bn.beta", bn.beta});
    bn_.push_back(std::move(bn));
    in = k;
  }
  const size_t h = config_.gru_hidden;
  const double gru_bound = 1.0 / std::sqrt(static_cast<double>(h));
  for (size_t layer = 0; layer < config_.gru_layers; ++layer) {
    for (int dir = 0; dir < 2; ++dir) {
      const std::string p =
          "gru" + std::to_string(layer + 1) + (dir == 0 ? ".fwd." : ".bwd.");
      ad::GruParams<T> g{Add(p + "w_ih", {3 * h, in}), Add(p + "w_hh", {3 * h, h}),
                         Add(p + "b_ih", {3 * h}), Add(p + "b_hh", {3 * h})};
      for (Tensor<T>* t : {&g.w_ih, &g.w_hh, &g.b_ih, &g.b_hh}) FillUniform(*t, gru_bound, rng);
      (dir == 0 ? gru_fwd_ : gru_bwd_).push_back(g);
    }
    in = 2 * h;
  }
  auto linear = [&](const std::string& p, size_t fan_in, size_t fan_out,
                    std::vector<Tensor<T>>& dst) {
    Tensor<T> w = Add(p + "w", {fan_out, fan_in});
    FillUniform(w, std::sqrt(6.0 / static_cast<double>(fan_in)), rng);
    dst.push_back(w);
    dst.push_back(Add(p + "b", {fan_out}));
  };
  const size_t nphi = config_.metadata_dim();
  if (config_.variant == Variant::kDinnEmbedding) {
    linear("embed1.", nphi, 2 * nphi, emb_);
    linear("embed2.", 2 * nphi, nphi, emb_);
  }
  linear("fuse1.", config_.fusion_dim(), config_.fusion_dim(), fuse_);
  linear("fuse2.", config_.fusion_dim(), 2, fuse_);
}

template <typename T>
Tensor<T> Model<T>::Forward(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& phi,
                            bool training) {
  const auto& c = config_;
  if (x.rank() != 4 || x.dim(1) != c.input_channels() || x.dim(2) != c.num_frames ||
      x.dim(3) != c.num_bins) {
    throw std::invalid_argument("model input " + ShapeString(x.shape()) + " does not match [N, " +
                                std::to_string(c.input_channels()) + ", " +
                                std::to_string(c.num_frames) + ", " + std::to_string(c.num_bins) +
                                "]");
  }
  const size_t n = x.dim(0);
  if (c.uses_metadata()) {
    if (!phi.defined()) {
      throw std::invalid_argument(std::string(VariantName(c.variant)) + " requires metadata");
    }
    if (phi.shape() != Shape{n, c.metadata_dim()}) {
      throw std::invalid_argument("metadata " + ShapeString(phi.shape()) + " does not match [" +
                                  std::to_string(n) + ", " + std::to_string(c.metadata_dim()) +
                                  "]");
    }
  } else if (phi.defined()) {
    throw std::invalid_argument("crnn takes no metadata");
  }

  Tensor<T> h = x;
  if (c.normalize_input) {
    if (x.requires_grad()) {
      throw std::invalid_argument("normalized model input cannot require a gradient");
    }
    const size_t per = x.size() / n;
    std::vector<T> v(x.value().begin(), x.value().end());
    for (size_t i = 0; i < n; ++i) {
      double ss = 0.0;
      for (size_t j = 0; j < per; ++j) ss += static_cast<double>(v[i * per + j]) * v[i * per + j];
      const double rms = std::sqrt(ss / static_cast<double>(per));
      const T scale = static_cast<T>(rms > 0.0 ? 1.0 / rms : 1.0);
      for (size_t j = 0; j < per; ++j) v[i * per + j] *= scale;
    }
    h = Tensor<T>(x.shape(), std::move(v));
  }
  for (size_t i = 0; i < conv_w_.size(); ++i) {
    h = ad::Conv2d(tape, h, conv_w_[i], conv_b_[i], c.conv_padding);
    if (c.batch_norm_after_relu) {
      h = ad::BatchNorm(tape, ad::Relu(tape, h), bn_[i], training);
    } else {
      h = ad::Relu(tape, ad::BatchNorm(tape, h, bn_[i], training));
    }
    h = ad::AvgPool2d(tape, h);
  }
  h = ad::SwapAxes(tape, ad::MeanOverAxis(tape, h, 3), 1, 2);  // [N, L, K]
  for (size_t layer = 0; layer < gru_fwd_.size(); ++layer) {
    h = ad::BidirectionalGru(tape, h, gru_fwd_[layer], gru_bwd_[layer]);
  }
  Tensor<T> z = ad::MeanOverAxis(tape, h, 1);  // [N, 2H]
  if (c.variant == Variant::kDinn) {
    z = ad::Concat(tape, z, phi);
  } else if (c.variant == Variant::kDinnEmbedding) {
    Tensor<T> e = ad::Relu(tape, ad::Linear(tape, phi, emb_[0], emb_[1]));
    e = ad::Relu(tape, ad::Linear(tape, e, emb_[2], emb_[3]));
    z = ad::Concat(tape, z, e);
  }
  z = ad::Relu(tape, ad::Linear(tape, z, fuse_[0], fuse_[1]));
  return ad::Linear(tape, z, fuse_[2], fuse_[3]);
}

template <typename T>
std::vector<Tensor<T>> Model<T>::parameter_tensors() const {
  std::vector<Tensor<T>> out;
  for (const auto& p : params_) out.push_back(p.tensor);
  return out;
}

template <typename T>
size_t Model<T>::NumParameters() const {
  size_t n = 0;
  for (const auto& p : params_) n += p.tensor.size();
  return n;
}

template <typename T>
void Model<T>::ZeroGrad() {
  for (auto& p : params_) p.tensor.ZeroGrad();
}

template <typename T>
void Model<T>::Export(std::string_view prefix, std::vector<NamedArray>& out) const {
  const std::string pre(prefix);
  for (const auto& p : params_) {
    out.push_back(FromSpan<T>(pre + p.name, p.tensor.shape(), p.tensor.value()));
  }
  for (size_t i = 0; i < bn_.size(); ++i) {
    const std::string p = pre + "conv" + std::to_string(i + 1) + ".bn.";
    const Shape s{bn_[i].running_mean.size()};
    out.push_back(FromSpan<T>(p + "running_mean", s, bn_[i].running_mean));
    out.push_back(FromSpan<T>(p + "running_var", s, bn_[i].running_var));
  }
}

template <typename T>
void Model<T>::Import(std::string_view prefix, const Checkpoint& ckpt) {
  const std::string pre(prefix);
  auto load = [&](const std::string& name, std::span<T> dst) {
    if (!ckpt.Has(name)) throw std::invalid_argument("checkpoint lacks array '" + name + "'");
    const std::vector<T> v = ToVector<T>(ckpt.Get(name));
    if (v.size() != dst.size()) {
      throw std::invalid_argument("checkpoint array '" + name + "' has " +
                                  std::to_string(v.size()) + " values, expected " +
                                  std::to_string(dst.size()));
    }
    std::copy(v.begin(), v.end(), dst.begin());
  };
  for (auto& p : params_) load(pre + p.name, p.tensor.mutable_value());
  for (size_t i = 0; i < bn_.size(); ++i) {
    const std::string p = pre + "conv" + std::to_string(i + 1) + ".bn.";
    load(p + "running_mean", bn_[i].running_mean);
    load(p + "running_var", bn_[i].running_var);
  }
}

template class Model<float>;
template class Model<double>;

}  // namespace pssl
