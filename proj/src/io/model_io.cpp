#include "io/model_io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>

#include <json.hpp>

#include "common/bytes.hpp"
#include "hecrypt/params.hpp"
#include "io/files.hpp"

namespace polyscore::io {

namespace {

using nlohmann::json;
using quant::Codebook;
using quant::CodebookPtr;
using quant::TensorRole;

constexpr const char* kFormat = "polyscore-model";
constexpr int kVersion = 1;

std::string decimal(double v) {
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_decimal(const json& j) {
  if (j.is_number()) return j.get<double>();
  require(j.is_string(), ErrorCode::Config, "manifest: expected a decimal string");
  const auto s = j.get<std::string>();
  if (s == "-inf") return -INFINITY;
  if (s == "inf") return INFINITY;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  require(used == s.size() && used > 0, ErrorCode::Config, "manifest: bad decimal '" + s + "'");
  return v;
}

json encode_codebook(const Codebook& cb) {
  json j;
  j["bits"] = cb.bits;
  if (cb.is_fixed_point()) {
    j["fixed_scale_bits"] = *cb.fixed_scale_bits;
    return j;
  }
  j["zero_index"] = cb.zero_index;
  json c = json::array(), b = json::array();
  for (double v : cb.centroids) c.push_back(decimal(v));
  for (double v : cb.boundaries) b.push_back(decimal(v));
  j["centroids"] = c;
  j["boundaries"] = b;
  return j;
}

CodebookPtr decode_codebook(const json& j) {
  auto cb = std::make_shared<Codebook>();
  cb->bits = j.at("bits").get<int>();
  if (j.contains("fixed_scale_bits")) {
    cb->fixed_scale_bits = j.at("fixed_scale_bits").get<int>();
  } else {
    cb->zero_index = j.at("zero_index").get<std::size_t>();
    for (const auto& v : j.at("centroids")) cb->centroids.push_back(parse_decimal(v));
    for (const auto& v : j.at("boundaries")) cb->boundaries.push_back(parse_decimal(v));
  }
  cb->validate();
  return cb;
}

/// Codebooks are stored once and referenced by id.
class CodebookTable {
 public:
  std::string add(const CodebookPtr& cb) {
    auto it = ids_.find(cb.get());
    if (it != ids_.end()) return it->second;
    const std::string id = "cb" + std::to_string(ids_.size());
    ids_[cb.get()] = id;
    table_[id] = encode_codebook(*cb);
    return id;
  }
  json table() const { return table_; }

 private:
  std::map<const Codebook*, std::string> ids_;
  json table_ = json::object();
};

const char* param_name(LayerKind kind, std::size_t i) {
  static const char* dense[] = {"W", "b"};
  static const char* conv[] = {"kernel", "b"};
  static const char* bn[] = {"gamma", "beta", "mean", "stddev"};
  switch (kind) {
    case LayerKind::Dense: return dense[i];
    case LayerKind::Conv: return conv[i];
    case LayerKind::BatchNorm: return bn[i];
    default: return "p";
  }
}

}  // namespace

std::string encode_manifest(const ModelBundle& model, const std::string& sidecar_name,
                            std::vector<std::uint8_t>& sidecar) {
  const auto& net = model.net;
  ByteWriter blob;
  CodebookTable codebooks;
  json m;
  m["format"] = kFormat;
  m["version"] = kVersion;
  m["input_shape"] = net.input_shape();
  m["output_dim"] = net.output_dim();
  m["weights_file"] = sidecar_name;
  m["fixed_point"] = {{"input_bits", model.input_bits}, {"weight_bits", model.weight_bits}};
  if (net.he_compatible()) {
    m["fixed_point"]["input_scale_bits"] = he::input_scale_for(8.0, model.input_bits);
    m["fixed_point"]["weight_scale_bits"] = he::weight_scale_for(net, model.weight_bits);
  }
  json layers = json::array();
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    const auto& layer = net.layers()[l];
    json j;
    j["kind"] = to_string(layer.kind);
    if (layer.kind == LayerKind::Conv) {
      j["stride"] = layer.conv.stride;
      j["padding"] = layer.conv.padding == Padding::Same ? "same" : "valid";
    }
    if (layer.kind == LayerKind::MaxPool || layer.kind == LayerKind::ScaledMeanPool)
      j["window"] = {layer.pool.window_h, layer.pool.window_w};
    json params = json::array();
    for (std::size_t p = 0; p < layer.params.size(); ++p) {
      const auto& t = layer.params[p];
      params.push_back({{"name", param_name(layer.kind, p)},
                        {"shape", t.shape},
                        {"offset", blob.data().size()},
                        {"count", t.size()}});
      for (double v : t.data) blob.f32(static_cast<float>(v));
    }
    j["params"] = params;
    if (model.plan && l < model.plan->layers.size()) {
      json refs = json::object();
      for (std::size_t r = 0; r < quant::kRoleCount; ++r)
        if (const auto& cb = model.plan->layers[l].roles[r]) refs[quant::to_string(static_cast<TensorRole>(r))] = codebooks.add(cb);
      if (!refs.empty()) j["codebooks"] = refs;
    }
    layers.push_back(j);
  }
  m["layers"] = layers;
  if (model.plan) {
    json q;
    q["bits"] = model.plan->bits;
    if (model.plan->input) q["input"] = codebooks.add(model.plan->input);
    m["quantization"] = q;
  }
  m["codebooks"] = codebooks.table();
  sidecar = blob.take();
  return m.dump(2) + "\n";
}

ModelBundle decode_manifest(const std::string& manifest, const std::vector<std::uint8_t>& sidecar) {
  try {
    const json m = json::parse(manifest);
    require(m.at("format") == kFormat, ErrorCode::Config, "manifest: not a polyscore model");
    require(m.at("version") == kVersion, ErrorCode::Config, "manifest: unsupported version");
    ModelBundle out;
    const auto& fp = m.at("fixed_point");
    out.input_bits = fp.at("input_bits").get<int>();
    out.weight_bits = fp.at("weight_bits").get<int>();

    std::map<std::string, CodebookPtr> codebooks;
    for (const auto& [id, j] : m.at("codebooks").items()) codebooks[id] = decode_codebook(j);
    auto lookup = [&](const json& id) {
      auto it = codebooks.find(id.get<std::string>());
      require(it != codebooks.end(), ErrorCode::Config, "manifest: unknown codebook " + id.dump());
      return it->second;
    };

    std::vector<Layer> layers;
    std::vector<quant::LayerQuantization> quant_layers;
    for (const auto& j : m.at("layers")) {
      Layer layer;
      layer.kind = layer_kind_from_string(j.at("kind").get<std::string>());
      if (j.contains("stride")) layer.conv.stride = j.at("stride").get<int>();
      if (j.contains("padding")) {
        const auto p = j.at("padding").get<std::string>();
        require(p == "same" || p == "valid", ErrorCode::Config, "manifest: bad padding '" + p + "'");
        layer.conv.padding = p == "same" ? Padding::Same : Padding::Valid;
      }
      if (j.contains("window")) {
        layer.pool.window_h = j.at("window").at(0).get<std::size_t>();
        layer.pool.window_w = j.at("window").at(1).get<std::size_t>();
      }
      for (const auto& p : j.at("params")) {
        Tensor t(p.at("shape").get<Shape>());
        const auto offset = p.at("offset").get<std::size_t>();
        const auto count = p.at("count").get<std::size_t>();
        require(count == t.size(), ErrorCode::Config, "manifest: parameter count does not match its shape");
        require(offset % 4 == 0 && offset <= sidecar.size() && count <= (sidecar.size() - offset) / 4,
                ErrorCode::Config, "manifest: parameter blob outside the weights file");
        ByteReader r(std::span<const std::uint8_t>(sidecar).subspan(offset, count * 4), ErrorCode::Config, "weights file");
        for (auto& v : t.data) {
          v = r.f32();
          r.check(std::isfinite(v), "non-finite weight");
        }
        layer.params.push_back(std::move(t));
      }
      quant::LayerQuantization lq;
      if (j.contains("codebooks"))
        for (const auto& [role, id] : j.at("codebooks").items())
          lq[quant::tensor_role_from_string(role)] = lookup(id);
      // float32 storage moves centroid values; put them back exactly.
      if (!layer.params.empty()) {
        if (const auto& cb = lq[TensorRole::Weights]) layer.params[0] = quant::quantize(layer.params[0], cb);
        if (layer.params.size() > 1)
          if (const auto& cb = lq[TensorRole::Bias]) layer.params[1] = quant::quantize(layer.params[1], cb);
      }
      layers.push_back(std::move(layer));
      quant_layers.push_back(std::move(lq));
    }
    out.net = PolyNetwork(m.at("input_shape").get<Shape>(), std::move(layers));
    require(out.net.output_dim() == m.at("output_dim").get<std::size_t>(), ErrorCode::Config,
            "manifest: output dimension does not match the layers");
    if (m.contains("quantization")) {
      quant::QuantizationPlan plan;
      const auto& q = m.at("quantization");
      plan.bits = q.at("bits").get<int>();
      if (q.contains("input")) plan.input = lookup(q.at("input"));
      plan.layers = std::move(quant_layers);
      out.plan = std::move(plan);
    }
    return out;
  } catch (const json::exception& e) {
    raise(ErrorCode::Config, std::string("manifest: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Config) throw;
    raise(ErrorCode::Config, std::string("manifest: ") + e.what());
  }
}

void save_model(const ModelBundle& model, const std::string& path) {
  const std::filesystem::path p(path);
  const std::string sidecar_name = p.stem().string() + ".weights.bin";
  std::vector<std::uint8_t> sidecar;
  const std::string manifest = encode_manifest(model, sidecar_name, sidecar);
  write_file((p.parent_path() / sidecar_name).string(), sidecar);
  write_text(path, manifest);
}

ModelBundle load_model(const std::string& path) {
  const std::string manifest = read_text(path);
  std::string sidecar_name;
  try {
    sidecar_name = nlohmann::json::parse(manifest).at("weights_file").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::Config, std::string("manifest: ") + e.what());
  }
  require(sidecar_name.find('/') == std::string::npos && sidecar_name != ".." && !sidecar_name.empty(),
          ErrorCode::Config, "manifest: weights file must be a plain file name");
  const auto dir = std::filesystem::path(path).parent_path();
  return decode_manifest(manifest, read_file((dir / sidecar_name).string()));
}

}  // namespace polyscore::io
