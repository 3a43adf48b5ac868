#pragma once

#include <optional>
#include <string>

#include "netcore/network.hpp"
#include "quantizer/plan.hpp"

namespace polyscore::io {

/// A network as stored on disk, with its codebooks (if quantized) and the
/// fixed-point widths it is served with.
struct ModelBundle {
  PolyNetwork net;
  std::optional<quant::QuantizationPlan> plan;
  int input_bits = 8;
  int weight_bits = 8;
};

/// JSON manifest (layer kinds, shapes, geometry, scales, codebooks with
/// decimal-text centroids) plus a sidecar of little-endian float32 weights
/// whose offsets the manifest records. Returns the manifest text; the sidecar
/// bytes go to `sidecar`.
std::string encode_manifest(const ModelBundle& model, const std::string& sidecar_name,
                            std::vector<std::uint8_t>& sidecar);
/// Weights of quantized layers are snapped back onto their centroids, since
/// float32 storage perturbs them.
ModelBundle decode_manifest(const std::string& manifest, const std::vector<std::uint8_t>& sidecar);

/// Writes `<path>` and the sidecar `<path stem>.weights.bin` next to it.
void save_model(const ModelBundle& model, const std::string& path);
ModelBundle load_model(const std::string& path);

}  // namespace polyscore::io
