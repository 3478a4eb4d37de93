#pragma once

#include "cdoa/experiment.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cdoa {

/// Malformed dataset content. The message carries the line number.
struct DatasetError : InvalidArgument {
  using InvalidArgument::InvalidArgument;
};

struct DatasetRecord {
  double timestamp = 0.0;
  std::string node_id;
  double rssi = 0.0;
  std::optional<Position> truth;
  std::size_t line = 0;
};

struct DatasetSnapshot {
  RssiSnapshot snapshot;  // readings in layout order, window_len 1
  std::optional<Position> truth;
};

struct IngestResult {
  std::vector<DatasetSnapshot> snapshots;  // first-appearance order of timestamps
  std::vector<std::string> diagnostics;    // one per rejected timestamp or duplicate row
  std::size_t total_rows = 0;
  std::size_t used_rows = 0;
  std::size_t diagnosed_rows = 0;  // total_rows == used_rows + diagnosed_rows
};

/// Parses the canonical CSV (timestamp,node_id,rssi_dbm,gt_x,gt_y with a
/// header line). gt_x and gt_y may be empty.
std::vector<DatasetRecord> parse_dataset(std::istream& in, const NodeLayout& layout);

/// Groups records into complete snapshots. Timestamps missing any node are
/// rejected with a diagnostic; a repeated (timestamp, node) row is diagnosed
/// and the first reading kept.
IngestResult group_records(const std::vector<DatasetRecord>& records, const NodeLayout& layout);

IngestResult ingest_dataset(std::istream& in, const NodeLayout& layout);
IngestResult ingest_dataset(const std::string& path, const NodeLayout& layout);

/// Writes snapshots in the canonical schema, full double precision.
void export_dataset(std::ostream& out, const NodeLayout& layout,
                    const std::vector<DatasetSnapshot>& snapshots);

/// The snapshots and truths of a simulated stream, as a dataset would hold them.
std::vector<DatasetSnapshot> to_dataset(const ObservationStream& stream);

/// Replays a dataset through one method. Datasets carry no odometry, so
/// successive ground-truth differences stand in when both are present.
TrialResult run_dataset(const std::string& method, const MethodContext& ctx,
                        const std::vector<DatasetSnapshot>& snapshots);

}  // namespace cdoa
