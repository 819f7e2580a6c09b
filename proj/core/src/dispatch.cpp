#include "ppkit/dispatch.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace ppkit {

const std::vector<QpInterval>& qp_model_table(const std::string& codec) {
  static const std::vector<QpInterval> vvc = {
      {24.5, "QP22"}, {29.5, "QP27"}, {34.5, "QP32"}, {39.5, "QP37"},
      {std::numeric_limits<double>::infinity(), "QP42"},
  };
  static const std::vector<QpInterval> av1 = {
      {37.5, "QP32"}, {49.0, "QP43"}, {59.0, "QP55"},
      {std::numeric_limits<double>::infinity(), "QP63"},
  };
  if (codec == "VVC") return vvc;
  if (codec == "AV1") return av1;
  throw ValidationError("unknown codec '" + codec + "' (expected VVC or AV1)");
}

std::string select_model(const std::string& codec, double qp_eval) {
  if (!std::isfinite(qp_eval))
    throw ValidationError("qp must be finite, got " + std::to_string(qp_eval));
  for (const QpInterval& iv : qp_model_table(codec))
    if (qp_eval <= iv.upper) return iv.group;
  // Unreachable: the last interval is unbounded.
  throw ValidationError("qp " + std::to_string(qp_eval) + " matched no interval");
}

ModelRegistry ModelRegistry::load(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open model registry " + manifest_path);
  const std::filesystem::path base = std::filesystem::path(manifest_path).parent_path();
  ModelRegistry reg;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    RegistryEntry e;
    if (!(ls >> e.codec)) continue;  // blank or comment-only line
    if (!(ls >> e.qp_group >> e.method >> e.path))
      throw FormatError(manifest_path + ":" + std::to_string(line_no) +
                        ": expected `codec qp_group method path`");
    std::string extra;
    if (ls >> extra)
      throw FormatError(manifest_path + ":" + std::to_string(line_no) +
                        ": unexpected trailing field '" + extra + "'");
    const std::filesystem::path p(e.path);
    if (p.is_relative()) e.path = (base / p).string();
    reg.entries_.push_back(std::move(e));
  }
  return reg;
}

ModelRegistry ModelRegistry::from_entries(std::vector<RegistryEntry> entries) {
  ModelRegistry reg;
  reg.entries_ = std::move(entries);
  return reg;
}

std::vector<std::string> ModelRegistry::available_groups(const std::string& codec,
                                                         const std::string& method) const {
  std::vector<std::string> out;
  for (const RegistryEntry& e : entries_)
    if (e.codec == codec && e.method == method) out.push_back(e.qp_group);
  return out;
}

ModelBundle ModelRegistry::resolve(const std::string& codec, double qp_eval,
                                   const std::string& method) const {
  const std::string group = select_model(codec, qp_eval);
  for (const RegistryEntry& e : entries_) {
    if (e.codec != codec || e.qp_group != group || e.method != method) continue;
    ModelBundle b = load_model(e.path);
    if (b.codec != codec || b.qp_group != group || b.method != method)
      throw ValidationError("model metadata mismatch for " + e.path + ": file is (" +
                            b.codec + ", " + b.qp_group + ", " + b.method +
                            "), registry entry is (" + codec + ", " + group + ", " + method +
                            ")");
    return b;
  }
  std::string have;
  for (const std::string& g : available_groups(codec, method))
    have += (have.empty() ? "" : ", ") + g;
  throw ModelNotFoundError("no model for group " + group + " (codec " + codec + ", method " +
                           method + "); available groups: " + (have.empty() ? "none" : have));
}

}  // namespace ppkit
