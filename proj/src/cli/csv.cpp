#include "caedp/cli/csv.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <unordered_map>

#include "caedp/textio.hpp"

namespace caedp::cli {
namespace {

[[noreturn]] void fail_at(const std::string& source, long row, const std::string& column,
                          const std::string& what) {
  throw ValidationError(source + " row " + std::to_string(row) + ", column '" + column + "': " +
                        what);
}

// Headers X_1, X_2, ... in numeric order (ignoring anything else).
std::vector<std::string> numbered_columns(const std::vector<std::string>& header, char prefix) {
  std::map<long long, std::string> found;
  for (const auto& h : header) {
    if (h.size() < 3 || h[0] != prefix || h[1] != '_') continue;
    try {
      found.emplace(parse_int(std::string_view(h).substr(2), "index"), h);
    } catch (const std::invalid_argument&) {
    }
  }
  std::vector<std::string> out;
  for (auto& [idx, name] : found) out.push_back(name);
  return out;
}

}  // namespace

ClusterDataset read_csv(std::istream& in, const ColumnSchema& schema, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(source + ": file is empty");
  std::vector<std::string> header;
  for (auto h : split(trim(line))) header.emplace_back(trim(h));
  std::unordered_map<std::string, int> col;
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    if (!col.emplace(header[c], c).second) fail_at(source, 1, header[c], "duplicate column");
  }
  const auto index_of = [&](const std::string& name) {
    const auto it = col.find(name);
    if (it == col.end()) fail_at(source, 1, name, "missing column");
    return it->second;
  };
  const std::vector<std::string> xs = schema.x.empty() ? numbered_columns(header, 'X') : schema.x;
  const std::vector<std::string> vs = schema.v.empty() ? numbered_columns(header, 'V') : schema.v;
  const int c_id = index_of(schema.cluster), c_a = index_of(schema.treatment);
  const int c_d = index_of(schema.d), c_m = index_of(schema.m), c_y = index_of(schema.y);
  std::vector<int> c_x, c_v;
  for (const auto& x : xs) c_x.push_back(index_of(x));
  for (const auto& v : vs) c_v.push_back(index_of(v));

  ClusterDataset data;
  data.p = static_cast<int>(xs.size());
  data.q = static_cast<int>(vs.size());
  data.binary_d = schema.binary_d;
  std::unordered_map<std::string, std::size_t> cluster_of;
  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split(trim(line));
    if (fields.size() != header.size()) {
      fail_at(source, row, header.back(),
              "expected " + std::to_string(header.size()) + " fields, found " +
                  std::to_string(fields.size()));
    }
    const auto number = [&](int c) {
      try {
        return parse_double(fields[c], "value");
      } catch (const std::invalid_argument&) {
        fail_at(source, row, header[c], "'" + std::string(trim(fields[c])) + "' is not a number");
      }
    };
    const std::string id(trim(fields[c_id]));
    if (id.empty()) fail_at(source, row, header[c_id], "empty cluster id");
    const double a = number(c_a);
    if (a != 0.0 && a != 1.0) fail_at(source, row, header[c_a], "treatment must be 0 or 1");
    Eigen::VectorXd v(data.q);
    for (int t = 0; t < data.q; ++t) v[t] = number(c_v[t]);

    auto [it, inserted] = cluster_of.emplace(id, data.clusters.size());
    if (inserted) {
      ClusterRecord rec;
      rec.id = id;
      rec.treatment = static_cast<int>(a);
      rec.v = v;
      data.clusters.push_back(std::move(rec));
    }
    auto& cluster = data.clusters[it->second];
    if (cluster.treatment != static_cast<int>(a)) {
      fail_at(source, row, header[c_a],
              "cluster '" + id + "' has conflicting treatment values (" +
                  std::to_string(cluster.treatment) + " earlier)");
    }
    for (int t = 0; t < data.q; ++t) {
      if (cluster.v[t] != v[t]) {
        fail_at(source, row, header[c_v[t]], "cluster '" + id + "' has conflicting values");
      }
    }
    Individual ind;
    ind.x.resize(data.p);
    for (int t = 0; t < data.p; ++t) ind.x[t] = number(c_x[t]);
    ind.d = number(c_d);
    if (schema.binary_d && ind.d != 0.0 && ind.d != 1.0) {
      fail_at(source, row, header[c_d], "binary confounder must be 0 or 1");
    }
    ind.m = number(c_m);
    ind.y = number(c_y);
    cluster.individuals.push_back(std::move(ind));
  }
  if (data.clusters.empty()) throw ValidationError(source + ": no data rows");
  try {
    data.validate();
  } catch (const std::invalid_argument& e) {
    throw ValidationError(source + ": " + e.what());
  }
  return data;
}

ClusterDataset ingest_csv(const std::string& path, const ColumnSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open data file '" + path + "'");
  return read_csv(in, schema, path);
}

void write_csv(std::ostream& out, const ClusterDataset& data) {
  out << "cluster_id,A";
  for (int t = 0; t < data.p; ++t) out << ",X_" << t + 1;
  for (int t = 0; t < data.q; ++t) out << ",V_" << t + 1;
  out << ",D,M,Y\n";
  for (const auto& c : data.clusters) {
    for (const auto& ind : c.individuals) {
      out << c.id << ',' << c.treatment;
      for (int t = 0; t < data.p; ++t) out << ',' << format_double(ind.x[t]);
      for (int t = 0; t < data.q; ++t) out << ',' << format_double(c.v[t]);
      out << ',' << format_double(ind.d) << ',' << format_double(ind.m) << ','
          << format_double(ind.y) << '\n';
    }
  }
}

}  // namespace caedp::cli
