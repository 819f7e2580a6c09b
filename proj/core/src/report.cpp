#include "ppkit/report.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

namespace ppkit {
namespace {

std::string fmt2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

BdReport build_bd_report(const std::vector<BdSequenceResult>& rows) {
  if (rows.empty()) throw ValidationError("bd report: no sequence results");
  BdReport rep;
  rep.rows = rows;
  std::vector<std::string> class_order;
  std::map<std::string, std::pair<double, int>> acc;  // class -> (sum, count)
  double total = 0;
  for (const auto& r : rows) {
    if (r.cls.empty() || r.sequence.empty())
      throw ValidationError("bd report: empty class or sequence name");
    if (!acc.count(r.cls)) class_order.push_back(r.cls);
    auto& [sum, count] = acc[r.cls];
    sum += r.bd_percent;
    ++count;
    total += r.bd_percent;
  }
  double class_total = 0;
  for (const auto& cls : class_order) {
    const auto& [sum, count] = acc[cls];
    const double mean = sum / count;
    rep.class_means.emplace_back(cls, mean);
    class_total += mean;
  }
  rep.overall_mean_of_sequences = total / static_cast<double>(rows.size());
  rep.overall_mean_of_class_means = class_total / static_cast<double>(class_order.size());
  return rep;
}

std::string render_bd_table(const BdReport& rep) {
  std::size_t name_w = 8;  // fits "Sequence"
  for (const auto& r : rep.rows) name_w = std::max(name_w, r.sequence.size());
  const std::string overall_a = "mean of sequences";
  const std::string overall_b = "mean of class means";
  name_w = std::max(name_w, overall_b.size());

  std::string out;
  auto row = [&](const std::string& cls, const std::string& name, const std::string& value) {
    out += cls;
    out.append(cls.size() < 7 ? 7 - cls.size() : 1, ' ');
    out += name;
    out.append(name_w - name.size() + 2, ' ');
    // right-align the value in 12 columns
    if (value.size() < 12) out.append(12 - value.size(), ' ');
    out += value;
    out += "\n";
  };
  row("Class", "Sequence", "BD-rate (%)");
  for (const auto& r : rep.rows) row(r.cls, r.sequence, fmt2(r.bd_percent));
  out += "\n";
  for (const auto& [cls, mean] : rep.class_means) row(cls, "class mean", fmt2(mean));
  out += "\n";
  row("Overall", overall_a, fmt2(rep.overall_mean_of_sequences));
  row("Overall", overall_b, fmt2(rep.overall_mean_of_class_means));
  return out;
}

std::string render_bd_csv(const BdReport& rep) {
  std::string out = "class,sequence,bd_rate_percent\n";
  for (const auto& r : rep.rows)
    out += r.cls + "," + r.sequence + "," + fmt2(r.bd_percent) + "\n";
  for (const auto& [cls, mean] : rep.class_means)
    out += cls + ",__class_mean__," + fmt2(mean) + "\n";
  out += "Overall,__mean_of_sequences__," + fmt2(rep.overall_mean_of_sequences) + "\n";
  out += "Overall,__mean_of_class_means__," + fmt2(rep.overall_mean_of_class_means) + "\n";
  return out;
}

}  // namespace ppkit
