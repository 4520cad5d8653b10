#include <cctype>
#include <cmath>
#include <map>
#include <random>

#include "binary_io.hpp"
#include "hashing.hpp"
#include "mvg/error.hpp"
#include "mvg/formats.hpp"
#include "mvg/fusion.hpp"

namespace mvg {

void FusionConfig::check() const {
  if (d_node == 0 || d_model == 0 || d_llm == 0) throw Error(ErrorCode::InvalidArgument, "dimensions must be positive");
  if (gat_heads == 0 || d_model % gat_heads != 0)
    throw Error(ErrorCode::InvalidArgument, "gat_heads must divide d_model");
  if (cga_heads == 0 || d_model % cga_heads != 0)
    throw Error(ErrorCode::InvalidArgument, "cga_heads must divide d_model");
  if (rms_eps < 0.0) throw Error(ErrorCode::InvalidArgument, "rms_eps must be >= 0");
}

namespace {

void fill_uniform(std::span<double> values, double bound, std::mt19937_64& rng) {
  for (auto& v : values) v = bound * detail::unit_interval_signed(rng());
}

Matrix uniform_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  Matrix m(rows, cols);
  fill_uniform(m.values(), 1.0 / std::sqrt(static_cast<double>(rows)), rng);
  return m;
}

}  // namespace

FusionParams FusionParams::initialize(const FusionConfig& config, std::uint64_t seed) {
  config.check();
  std::mt19937_64 rng(detail::Fnv1a().str("fusion-params").u64(seed).value());
  const std::size_t d = config.d_model;
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));

  FusionParams p;
  p.lift_weight = config.d_node == d ? Matrix::identity(d) : uniform_matrix(config.d_node, d, rng);
  p.lift_bias.assign(d, 0.0);
  for (std::size_t l = 0; l < config.layers; ++l) {
    LayerParams layer;
    layer.gat_weight = uniform_matrix(d, d, rng);
    layer.gat_attn.resize(2 * d);
    fill_uniform(layer.gat_attn, bound, rng);
    if (config.separate_edge_types) {
      layer.gat_attn_inter.resize(2 * d);
      fill_uniform(layer.gat_attn_inter, bound, rng);
    }
    layer.w_q = uniform_matrix(d, d, rng);
    layer.w_k = uniform_matrix(d, d, rng);
    layer.w_v = uniform_matrix(d, d, rng);
    layer.alpha.assign(d, 0.0);
    layer.gain_gat.assign(d, 1.0);
    layer.gain_cga.assign(d, 1.0);
    p.layers.push_back(std::move(layer));
  }
  p.proj_weight = uniform_matrix(d, config.d_llm, rng);
  p.proj_bias.assign(config.d_llm, 0.0);
  return p;
}

FusionParams FusionParams::zeros_like(const FusionParams& other) {
  FusionParams z = other;
  for (auto& t : tensors(z)) std::fill(t.values.begin(), t.values.end(), 0.0);
  return z;
}

FusionConfig FusionParams::shape_config(const FusionConfig& base) const {
  FusionConfig c = base;
  c.d_node = lift_weight.rows();
  c.d_model = lift_weight.cols();
  c.d_llm = proj_weight.cols();
  c.layers = layers.size();
  c.separate_edge_types = !layers.empty() && !layers.front().gat_attn_inter.empty();
  return c;
}

namespace {

template <class View, class Params>
std::vector<View> collect(Params& p) {
  std::vector<View> out;
  auto mat = [&](std::string name, auto& m) { out.push_back({std::move(name), {m.rows(), m.cols()}, m.values()}); };
  auto vec = [&](std::string name, auto& v) {
    out.push_back({std::move(name), {v.size()}, {v.data(), v.size()}});
  };
  mat("lift.weight", p.lift_weight);
  vec("lift.bias", p.lift_bias);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto& layer = p.layers[l];
    const std::string pre = "layers." + std::to_string(l) + ".";
    mat(pre + "gat.weight", layer.gat_weight);
    vec(pre + "gat.attn", layer.gat_attn);
    if (!layer.gat_attn_inter.empty()) vec(pre + "gat.attn_inter", layer.gat_attn_inter);
    mat(pre + "cga.w_q", layer.w_q);
    mat(pre + "cga.w_k", layer.w_k);
    mat(pre + "cga.w_v", layer.w_v);
    vec(pre + "cga.alpha", layer.alpha);
    vec(pre + "norm.gat_gain", layer.gain_gat);
    vec(pre + "norm.cga_gain", layer.gain_cga);
  }
  mat("proj.weight", p.proj_weight);
  vec("proj.bias", p.proj_bias);
  return out;
}

}  // namespace

std::vector<TensorView> tensors(FusionParams& params) { return collect<TensorView>(params); }
std::vector<ConstTensorView> tensors(const FusionParams& params) { return collect<ConstTensorView>(params); }

std::string encode_checkpoint(const FusionParams& params) {
  detail::BinaryWriter w;
  w.magic("GFMP");
  w.u32(kFormatVersion);
  for (const auto& t : tensors(params)) {
    w.u32(static_cast<std::uint32_t>(t.name.size()));
    w.bytes(t.name);
    w.u32(static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) w.u32(static_cast<std::uint32_t>(d));
    for (double v : t.values) w.f32(static_cast<float>(v));
  }
  return w.take();
}

FusionParams decode_checkpoint(std::string bytes, const std::string& source) {
  detail::BinaryReader r(std::move(bytes), source);
  r.expect_magic("GFMP");
  if (const auto v = r.u32("version"); v != kFormatVersion) r.fail("unsupported version " + std::to_string(v));

  struct Record {
    std::vector<std::size_t> shape;
    std::vector<double> values;
  };
  std::map<std::string, Record> records;
  std::size_t max_layer = 0;
  bool any_layer = false;
  while (!r.at_end()) {
    const std::uint32_t name_len = r.u32("name length");
    if (name_len == 0 || name_len > 256) r.fail("implausible tensor name length " + std::to_string(name_len));
    std::string name = r.bytes(name_len, "tensor name");
    const std::uint32_t rank = r.u32("rank");
    if (rank < 1 || rank > 2) r.fail("tensor '" + name + "' has unsupported rank " + std::to_string(rank));
    Record rec;
    std::uint64_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      rec.shape.push_back(r.u32("dimension"));
      count *= rec.shape.back();
    }
    if (count * 4 > r.remaining()) r.fail("truncated payload for tensor '" + name + "'");
    rec.values.resize(count);
    for (auto& v : rec.values) v = r.f32("tensor value");
    if (name.starts_with("layers.")) {
      std::size_t idx = 0;
      std::size_t pos = 7;
      while (pos < name.size() && std::isdigit(static_cast<unsigned char>(name[pos])))
        idx = idx * 10 + static_cast<std::size_t>(name[pos++] - '0');
      if (pos == 7 || pos >= name.size() || name[pos] != '.') r.fail("malformed layer tensor name '" + name + "'");
      max_layer = std::max<std::size_t>(max_layer, idx);
      any_layer = true;
    }
    if (!records.emplace(name, std::move(rec)).second) r.fail("duplicate tensor '" + name + "'");
  }

  auto missing = [&](const std::string& name) -> Record& {
    auto it = records.find(name);
    if (it == records.end()) r.fail("missing tensor '" + name + "'");
    return it->second;
  };
  auto as_matrix = [&](const std::string& name) {
    Record& rec = missing(name);
    if (rec.shape.size() != 2) r.fail("tensor '" + name + "' must be rank 2");
    Matrix m(rec.shape[0], rec.shape[1]);
    std::copy(rec.values.begin(), rec.values.end(), m.values().begin());
    return m;
  };
  auto as_vector = [&](const std::string& name) {
    Record& rec = missing(name);
    if (rec.shape.size() != 1) r.fail("tensor '" + name + "' must be rank 1");
    return rec.values;
  };

  FusionParams p;
  p.lift_weight = as_matrix("lift.weight");
  p.lift_bias = as_vector("lift.bias");
  const std::size_t layer_count = any_layer ? max_layer + 1 : 0;
  for (std::size_t l = 0; l < layer_count; ++l) {
    const std::string pre = "layers." + std::to_string(l) + ".";
    LayerParams layer;
    layer.gat_weight = as_matrix(pre + "gat.weight");
    layer.gat_attn = as_vector(pre + "gat.attn");
    if (records.contains(pre + "gat.attn_inter")) layer.gat_attn_inter = as_vector(pre + "gat.attn_inter");
    layer.w_q = as_matrix(pre + "cga.w_q");
    layer.w_k = as_matrix(pre + "cga.w_k");
    layer.w_v = as_matrix(pre + "cga.w_v");
    layer.alpha = as_vector(pre + "cga.alpha");
    layer.gain_gat = as_vector(pre + "norm.gat_gain");
    layer.gain_cga = as_vector(pre + "norm.cga_gain");
    p.layers.push_back(std::move(layer));
  }
  p.proj_weight = as_matrix("proj.weight");
  p.proj_bias = as_vector("proj.bias");

  // Shape consistency across tensors.
  const std::size_t d = p.lift_weight.cols();
  auto bad = [&](const std::string& what) {
    r.fail("inconsistent shape for " + what);
  };
  if (p.lift_bias.size() != d || p.proj_weight.rows() != d || p.proj_bias.size() != p.proj_weight.cols()) bad("lift/proj");
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& L = p.layers[l];
    auto square = [&](const Matrix& m) { return m.rows() == d && m.cols() == d; };
    if (!square(L.gat_weight) || !square(L.w_q) || !square(L.w_k) || !square(L.w_v) || L.gat_attn.size() != 2 * d ||
        (!L.gat_attn_inter.empty() && L.gat_attn_inter.size() != 2 * d) || L.alpha.size() != d ||
        L.gain_gat.size() != d || L.gain_cga.size() != d)
      bad("layer " + std::to_string(l));
  }
  return p;
}

void save_checkpoint(const std::string& path, const FusionParams& params) {
  detail::write_file(path, encode_checkpoint(params));
}

FusionParams load_checkpoint(const std::string& path) { return decode_checkpoint(detail::read_file(path), path); }

std::string encode_graph_tokens(const std::vector<TokenMatrix>& tokens) {
  detail::BinaryWriter w;
  w.magic("GTOK");
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(tokens.size()));
  for (const auto& t : tokens) {
    w.u32(static_cast<std::uint32_t>(t.owner.size()));
    w.bytes(t.owner);
    w.u32(static_cast<std::uint32_t>(t.values.rows()));
    w.u32(static_cast<std::uint32_t>(t.values.cols()));
    for (double v : t.values.values()) w.f32(static_cast<float>(v));
  }
  return w.take();
}

std::vector<TokenMatrix> decode_graph_tokens(std::string bytes, const std::string& source) {
  detail::BinaryReader r(std::move(bytes), source);
  r.expect_magic("GTOK");
  if (const auto v = r.u32("version"); v != kFormatVersion) r.fail("unsupported version " + std::to_string(v));
  const std::uint32_t count = r.u32("matrix count");
  std::vector<TokenMatrix> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    TokenMatrix t;
    t.owner = r.bytes(r.u32("id length"), "video id");
    const std::uint32_t rows = r.u32("rows");
    const std::uint32_t cols = r.u32("cols");
    if (4ull * rows * cols > r.remaining()) r.fail("truncated token matrix for '" + t.owner + "'");
    t.values = Matrix(rows, cols);
    for (auto& v : t.values.values()) v = r.f32("token value");
    out.push_back(std::move(t));
  }
  if (!r.at_end()) r.fail("trailing bytes after " + std::to_string(count) + " token matrices");
  return out;
}

}  // namespace mvg
