#pragma once

#include <string>
#include <vector>

#include "ppkit/model_io.hpp"

namespace ppkit {

// Upper-inclusive QP interval; the last entry of a table has an infinite bound.
struct QpInterval {
  double upper;
  std::string group;
};

// Per-codec interval tables mapping evaluation QP to a trained-model group.
const std::vector<QpInterval>& qp_model_table(const std::string& codec);

std::string select_model(const std::string& codec, double qp_eval);

struct RegistryEntry {
  std::string codec;
  std::string qp_group;
  std::string method;
  std::string path;  // resolved (absolute or manifest-relative already applied)
};

// Manifest-backed map (codec, qp_group, method) -> model file. Manifest lines
// are `codec qp_group method path`, `#` starts a comment, relative paths are
// taken from the manifest's directory.
class ModelRegistry {
public:
  static ModelRegistry load(const std::string& manifest_path);
  static ModelRegistry from_entries(std::vector<RegistryEntry> entries);

  const std::vector<RegistryEntry>& entries() const { return entries_; }

  // Selects the group for (codec, qp_eval), loads the mapped bundle and checks
  // its metadata matches the request.
  ModelBundle resolve(const std::string& codec, double qp_eval,
                      const std::string& method) const;

  std::vector<std::string> available_groups(const std::string& codec,
                                            const std::string& method) const;

private:
  std::vector<RegistryEntry> entries_;
};

}  // namespace ppkit
