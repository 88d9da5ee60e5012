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

#ifndef PSSL_DINN_MODEL_H_
#define PSSL_DINN_MODEL_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "pssl/autodiff/checkpoint.h"
#include "pssl/autodiff/tensor.h"
#include "pssl/scene/metadata.h"

namespace pssl {

enum class Variant { kDinn, kDinnEmbedding, kCrnn };
enum class Scale { kToy, kFull };

const char* VariantName(Variant v);
Variant ParseVariant(std::string_view name);
const char* ScaleName(Scale s);
Scale ParseScale(std::string_view name);

struct ArchitectureConfig {
  Variant variant = Variant::kDinn;
  Scale scale = Scale::kToy;
  std::vector<size_t> conv_kernels = {16, 32, 64, 64};
  size_t gru_hidden = 64;
  size_t gru_layers = 2;
  size_t num_mics = 4;
  MetadataMask mask;  // ignored (None) for crnn
  size_t num_frames = 14;
  size_t num_bins = 513;
  int conv_padding = 1;
  bool batch_norm_after_relu = false;
  // Divide each sample's input by its RMS over all channels, frames and
  // bins. Source level varies by orders of magnitude with distance to the
  // nearest microphone; the shared factor keeps inter-channel differences.
  bool normalize_input = true;

  // Preset kernels and hidden size for the scale. crnn gets an empty mask.
  static ArchitectureConfig Make(Variant variant, Scale scale, size_t num_mics = 4,
                                 MetadataMask mask = MetadataMask::Full());

  bool uses_metadata() const { return variant != Variant::kCrnn; }
  size_t metadata_dim() const { return uses_metadata() ? mask.Dimension(num_mics) : 0; }
  size_t input_channels() const { return 2 * num_mics; }
  size_t feature_dim() const { return 2 * gru_hidden; }
  size_t fusion_dim() const { return feature_dim() + metadata_dim(); }

  // Per-sample shapes from the input to the fusion output; the conv block
  // stages are [K, L, F] after each pool. Throws std::invalid_argument when
  // the configuration is inconsistent or an axis collapses.
  std::vector<Shape> ShapeChain() const;
  void Validate() const { ShapeChain(); }

  // "key=value" lines, stable across runs.
  std::string ToText() const;
  static ArchitectureConfig FromText(std::string_view text);
};

template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T> tensor;
};

// Feature extractor: 4 x (conv 2x2 -> batch norm -> relu -> avg pool 2x2),
// mean over frequency, stacked bidirectional GRU, mean over time. Fusion:
// [features, phi or embedded phi] -> linear -> relu -> linear(2).
template <typename T>
class Model {
 public:
  Model(const ArchitectureConfig& config, uint64_t seed);

  const ArchitectureConfig& config() const { return config_; }

  // x: [N, 2M, L, F]; phi: [N, metadata_dim] for metadata variants and
  // undefined for crnn. Returns [N, 2].
  Tensor<T> Forward(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& phi, bool training);

  const std::vector<NamedParam<T>>& parameters() const { return params_; }
  std::vector<Tensor<T>> parameter_tensors() const;
  size_t NumParameters() const;
  void ZeroGrad();

  // Weights and running statistics under "<prefix><name>".
  void Export(std::string_view prefix, std::vector<NamedArray>& out) const;
  // Throws std::invalid_argument on a missing or mis-shaped array.
  void Import(std::string_view prefix, const Checkpoint& ckpt);

 private:
  Tensor<T> Add(std::string name, Shape shape);

  ArchitectureConfig config_;
  std::vector<NamedParam<T>> params_;
  std::vector<Tensor<T>> conv_w_, conv_b_;
  std::vector<ad::BatchNormParams<T>> bn_;
  std::vector<ad::GruParams<T>> gru_fwd_, gru_bwd_;
  std::vector<Tensor<T>> emb_;   // w1, b1, w2, b2
  std::vector<Tensor<T>> fuse_;  // w1, b1, w2, b2
};

}  // namespace pssl

#endif  // PSSL_DINN_MODEL_H_
