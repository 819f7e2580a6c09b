#pragma once

#include <cstdint>
#include <string>

#include "ppkit/models.hpp"
#include "ppkit/params.hpp"

namespace ppkit {

inline constexpr std::uint16_t kModelFormatVersion = 1;

// A trained model plus the tags Eq-style dispatch selects on. Perceptual
// bundles may carry the discriminator so training can resume from them.
struct ModelBundle {
  std::string codec = "VVC";   // VVC | AV1
  std::string qp_group = "QP32";
  std::string method = "l1";   // l1 | perceptual
  GeneratorConfig gen_config{};
  ParameterSetF gen_params;
  bool has_discriminator = false;
  DiscriminatorConfig disc_config{};
  ParameterSetF disc_params;
};

void validate_bundle(const ModelBundle& bundle);

// File layout: "PPKM", u16 version, length-prefixed key/value metadata, raw
// f32 little-endian parameter values in parameter-set order, u64 FNV-1a of all
// preceding bytes.
void save_model(const ModelBundle& bundle, const std::string& path);
ModelBundle load_model(const std::string& path);

}  // namespace ppkit
