#include "cdoa/dataset.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace cdoa {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw DatasetError("line " + std::to_string(line) + ": " + what);
}

double number(const std::string& s, std::size_t line, const char* field) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || ptr != end || !std::isfinite(v))
    fail(line, std::string("bad ") + field + " '" + s + "'");
  return v;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<DatasetRecord> parse_dataset(std::istream& in, const NodeLayout& layout) {
  std::string line;
  std::size_t line_no = 0;
  // Header, skipping a UTF-8 byte-order mark.
  if (!std::getline(in, line)) throw DatasetError("line 1: missing header");
  ++line_no;
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  const auto header = split(line);
  const std::vector<std::string> expected{"timestamp", "node_id", "rssi_dbm", "gt_x", "gt_y"};
  if (header != expected)
    fail(1, "header must be 'timestamp,node_id,rssi_dbm,gt_x,gt_y'");

  std::vector<DatasetRecord> records;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split(line);
    if (f.size() != 5) fail(line_no, "expected 5 fields, found " + std::to_string(f.size()));
    DatasetRecord r;
    r.line = line_no;
    r.timestamp = number(f[0], line_no, "timestamp");
    r.node_id = f[1];
    if (r.node_id.empty()) fail(line_no, "empty node_id");
    if (!layout.index_of(r.node_id)) fail(line_no, "unknown node_id '" + r.node_id + "'");
    r.rssi = number(f[2], line_no, "rssi_dbm");
    if (f[3].empty() != f[4].empty()) fail(line_no, "gt_x and gt_y must both be present or both empty");
    if (!f[3].empty()) r.truth = Position(number(f[3], line_no, "gt_x"), number(f[4], line_no, "gt_y"));
    records.push_back(std::move(r));
  }
  return records;
}

IngestResult group_records(const std::vector<DatasetRecord>& records, const NodeLayout& layout) {
  IngestResult out;
  out.total_rows = records.size();

  struct Group {
    double timestamp;
    std::vector<const DatasetRecord*> by_node;
    std::vector<std::size_t> lines;
  };
  std::vector<Group> groups;
  std::map<double, std::size_t> index;
  for (const auto& r : records) {
    auto [it, fresh] = index.try_emplace(r.timestamp, groups.size());
    if (fresh) groups.push_back({r.timestamp, std::vector<const DatasetRecord*>(layout.size()), {}});
    Group& g = groups[it->second];
    const std::size_t k = *layout.index_of(r.node_id);
    if (g.by_node[k]) {
      out.diagnostics.push_back("line " + std::to_string(r.line) + ": duplicate reading for node '" +
                                r.node_id + "' at t=" + fmt(r.timestamp) + ", first kept");
      ++out.diagnosed_rows;
      continue;
    }
    g.by_node[k] = &r;
    g.lines.push_back(r.line);
  }

  for (const auto& g : groups) {
    std::string missing;
    for (std::size_t k = 0; k < layout.size(); ++k)
      if (!g.by_node[k]) missing += (missing.empty() ? "" : ", ") + layout.node(k).id;
    if (!missing.empty()) {
      std::string lines;
      for (auto l : g.lines) lines += (lines.empty() ? "" : ",") + std::to_string(l);
      out.diagnostics.push_back("t=" + fmt(g.timestamp) + " (lines " + lines +
                                "): rejected, missing node(s) " + missing);
      out.diagnosed_rows += g.lines.size();
      continue;
    }
    DatasetSnapshot s;
    s.snapshot.timestamp = g.timestamp;
    s.snapshot.window_len = 1;
    s.snapshot.readings.resize(static_cast<Eigen::Index>(layout.size()));
    for (std::size_t k = 0; k < layout.size(); ++k) {
      s.snapshot.readings(static_cast<Eigen::Index>(k)) = g.by_node[k]->rssi;
      if (!s.truth && g.by_node[k]->truth) s.truth = g.by_node[k]->truth;
    }
    out.used_rows += layout.size();
    out.snapshots.push_back(std::move(s));
  }
  return out;
}

IngestResult ingest_dataset(std::istream& in, const NodeLayout& layout) {
  return group_records(parse_dataset(in, layout), layout);
}

IngestResult ingest_dataset(const std::string& path, const NodeLayout& layout) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");
  return ingest_dataset(in, layout);
}

void export_dataset(std::ostream& out, const NodeLayout& layout,
                    const std::vector<DatasetSnapshot>& snapshots) {
  out << "timestamp,node_id,rssi_dbm,gt_x,gt_y\n";
  for (const auto& s : snapshots) {
    if (static_cast<std::size_t>(s.snapshot.readings.size()) != layout.size())
      throw InvalidArgument("snapshot size does not match the layout");
    for (std::size_t k = 0; k < layout.size(); ++k) {
      out << fmt(s.snapshot.timestamp) << ',' << layout.node(k).id << ','
          << fmt(s.snapshot.readings(static_cast<Eigen::Index>(k))) << ',';
      if (s.truth) out << fmt(s.truth->x()) << ',' << fmt(s.truth->y());
      else out << ',';
      out << '\n';
    }
  }
}

std::vector<DatasetSnapshot> to_dataset(const ObservationStream& stream) {
  std::vector<DatasetSnapshot> out;
  out.reserve(stream.observations.size());
  for (std::size_t i = 0; i < stream.observations.size(); ++i)
    out.push_back({stream.observations[i].snapshot, stream.truth[i]});
  return out;
}

TrialResult run_dataset(const std::string& method, const MethodContext& ctx,
                        const std::vector<DatasetSnapshot>& snapshots) {
  ObservationStream stream;
  std::vector<bool> has_truth;
  for (std::size_t i = 0; i < snapshots.size(); ++i) {
    const auto& s = snapshots[i];
    Observation o;
    o.timestamp = s.snapshot.timestamp;
    o.bag = s.snapshot.readings;
    o.snapshot = s.snapshot;
    if (i > 0 && s.truth && snapshots[i - 1].truth) o.odometry = *s.truth - *snapshots[i - 1].truth;
    stream.observations.push_back(std::move(o));
    stream.truth.push_back(s.truth.value_or(Position::Zero()));
    has_truth.push_back(s.truth.has_value());
  }
  TrialResult r = run_on_stream(method, ctx, stream);
  r.trajectory = "dataset";
  // Snapshots without ground truth cannot be scored.
  std::vector<EstimateRecord> scored;
  std::size_t unscored = 0;
  for (std::size_t i = 0; i < r.estimates.size(); ++i) {
    if (has_truth[i]) scored.push_back(r.estimates[i]);
    else ++unscored;
  }
  if (unscored > 0) {
    r.estimates = std::move(scored);
    finalize(r);
  }
  return r;
}

}  // namespace cdoa
