#include "ppkit/model_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <map>
#include <vector>

#include "ppkit/bytes.hpp"

namespace ppkit {
namespace {

constexpr char kMagic[4] = {'P', 'P', 'K', 'M'};

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0')
    throw FormatError("model metadata: bad number for " + key + ": '" + v + "'");
  return d;
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const long long i = std::strtoll(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0')
    throw FormatError("model metadata: bad integer for " + key + ": '" + v + "'");
  return i;
}

std::vector<std::pair<std::string, std::string>> metadata_pairs(const ModelBundle& b) {
  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("codec", b.codec);
  kv.emplace_back("qp_group", b.qp_group);
  kv.emplace_back("method", b.method);
  kv.emplace_back("g.blocks", std::to_string(b.gen_config.num_residual_blocks));
  kv.emplace_back("g.width", std::to_string(b.gen_config.feature_width));
  kv.emplace_back("g.kernel", std::to_string(b.gen_config.kernel_size));
  kv.emplace_back("g.block_size", std::to_string(b.gen_config.input_block_size));
  kv.emplace_back("has_disc", b.has_discriminator ? "1" : "0");
  if (b.has_discriminator) {
    kv.emplace_back("d.input", std::to_string(b.disc_config.input_size));
    kv.emplace_back("d.base_width", std::to_string(b.disc_config.base_width));
    kv.emplace_back("d.dense_width", std::to_string(b.disc_config.dense_width));
    kv.emplace_back("d.kernel", std::to_string(b.disc_config.kernel_size));
    kv.emplace_back("d.leaky_slope", fmt_double(b.disc_config.leaky_slope));
    kv.emplace_back("d.bn_eps", fmt_double(b.disc_config.bn_eps));
    kv.emplace_back("d.bn_momentum", fmt_double(b.disc_config.bn_momentum));
  }
  return kv;
}

void write_params(ByteWriter& w, const std::vector<ParamSpec>& specs,
                  const ParameterSetF& params) {
  for (const ParamSpec& s : specs) {
    const Tensor4f& t = params.at(s.name);
    for (std::int64_t i = 0; i < t.size(); ++i) w.f32(t[i]);
  }
}

ParameterSetF read_params(ByteReader& r, const std::vector<ParamSpec>& specs) {
  ParameterSetF out;
  for (const ParamSpec& s : specs) {
    Tensor4f t(s.dims);
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = r.f32();
    out.add(s.name, std::move(t), s.trainable);
  }
  return out;
}

}  // namespace

void validate_bundle(const ModelBundle& b) {
  if (b.codec != "VVC" && b.codec != "AV1")
    throw ValidationError("model bundle: codec must be VVC or AV1, got '" + b.codec + "'");
  if (b.method != "l1" && b.method != "perceptual")
    throw ValidationError("model bundle: method must be l1 or perceptual, got '" + b.method +
                          "'");
  if (b.qp_group.empty()) throw ValidationError("model bundle: empty qp group");
  validate_params(generator_param_specs(b.gen_config), b.gen_params);
  if (b.has_discriminator)
    validate_params(discriminator_param_specs(b.disc_config), b.disc_params);
}

void save_model(const ModelBundle& b, const std::string& path) {
  validate_bundle(b);
  ByteWriter w;
  w.raw(kMagic, 4);
  w.u16(kModelFormatVersion);
  const auto kv = metadata_pairs(b);
  w.u32(static_cast<std::uint32_t>(kv.size()));
  for (const auto& [k, v] : kv) {
    w.str(k);
    w.str(v);
  }
  write_params(w, generator_param_specs(b.gen_config), b.gen_params);
  if (b.has_discriminator)
    write_params(w, discriminator_param_specs(b.disc_config), b.disc_params);
  w.u64(w.checksum());
  w.write_file(path);
}

ModelBundle load_model(const std::string& path) {
  ByteReader r = ByteReader::from_file(path);
  if (r.size() < 4 || std::memcmp(r.take(4), kMagic, 4) != 0)
    throw FormatError(path + ": not a model file (bad magic)");
  if (r.size() < 4 + 2 + 8) throw FormatError("truncated file: " + path);
  // Verify the trailer before trusting any length field, so corruption
  // surfaces as a checksum error rather than garbage weights.
  {
    ByteReader whole = ByteReader::from_file(path);
    const std::size_t body = whole.size() - 8;
    const std::uint64_t computed = fnv1a64(whole.take(body), body);
    const std::uint64_t trailer = whole.u64();
    if (computed != trailer)
      throw FormatError(path + ": checksum mismatch (file corrupted)");
  }
  const std::uint16_t version = r.u16();
  if (version != kModelFormatVersion)
    throw FormatError(path + ": unsupported model format version " + std::to_string(version));

  std::map<std::string, std::string> kv;
  const std::uint32_t pairs = r.u32();
  for (std::uint32_t i = 0; i < pairs; ++i) {
    const std::string k = r.str();
    const std::string v = r.str();
    if (!kv.emplace(k, v).second)
      throw FormatError(path + ": duplicate metadata key " + k);
  }
  auto need = [&](const std::string& k) -> const std::string& {
    auto it = kv.find(k);
    if (it == kv.end()) throw FormatError(path + ": missing metadata key " + k);
    return it->second;
  };

  ModelBundle b;
  b.codec = need("codec");
  b.qp_group = need("qp_group");
  b.method = need("method");
  b.gen_config.num_residual_blocks = parse_int("g.blocks", need("g.blocks"));
  b.gen_config.feature_width = parse_int("g.width", need("g.width"));
  b.gen_config.kernel_size = parse_int("g.kernel", need("g.kernel"));
  b.gen_config.input_block_size = parse_int("g.block_size", need("g.block_size"));
  b.has_discriminator = need("has_disc") == "1";
  if (b.has_discriminator) {
    b.disc_config.input_size = parse_int("d.input", need("d.input"));
    b.disc_config.base_width = parse_int("d.base_width", need("d.base_width"));
    b.disc_config.dense_width = parse_int("d.dense_width", need("d.dense_width"));
    b.disc_config.kernel_size = parse_int("d.kernel", need("d.kernel"));
    b.disc_config.leaky_slope = parse_double("d.leaky_slope", need("d.leaky_slope"));
    b.disc_config.bn_eps = parse_double("d.bn_eps", need("d.bn_eps"));
    b.disc_config.bn_momentum = parse_double("d.bn_momentum", need("d.bn_momentum"));
  }

  b.gen_params = read_params(r, generator_param_specs(b.gen_config));
  if (b.has_discriminator)
    b.disc_params = read_params(r, discriminator_param_specs(b.disc_config));
  if (r.remaining() != 8)
    throw FormatError(path + ": unexpected trailing data (" +
                      std::to_string(r.remaining() - 8) + " extra bytes)");
  validate_bundle(b);
  return b;
}

}  // namespace ppkit
