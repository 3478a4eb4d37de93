#pragma once

#include "cdoa/config.hpp"
#include "cdoa/methods.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cdoa {

struct EstimateRecord {
  std::size_t index = 0;
  Position truth = Position::Zero();
  std::optional<Position> estimate;  // nullopt: missing, excluded from RMSE
  double iter_time = 0.0;            // seconds spent inside the localizer call
};

struct TrialResult {
  std::string method;
  std::string trajectory;
  double noise_dbm = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;
  std::vector<EstimateRecord> estimates;
  double rmse = 0.0;  // NaN when every estimate is missing
  double mean_tpi = 0.0;
  double median_tpi = 0.0;
  std::size_t missing = 0;
};

/// sqrt(mean |truth - estimate|^2) over the present estimates.
double rmse_of(const std::vector<EstimateRecord>& estimates);

/// Fills rmse, TPI and the missing count from `estimates`.
void finalize(TrialResult& r);

/// The robot's side of one trial: one observation per waypoint.
struct ObservationStream {
  std::vector<Position> truth;
  std::vector<Observation> observations;
};

/// Draws every waypoint's raw readings from a stream seeded with `seed`.
/// Each bag holds max(window_len, irssi_bag) readings per node.
ObservationStream simulate_observations(const NodeLayout& layout, const ChannelModel& model,
                                        const Trajectory& trajectory, const Hyperparams& hyper,
                                        std::uint64_t seed);

/// Feeds a stream to one fresh localizer, timing only the update calls.
TrialResult run_on_stream(const std::string& method, const MethodContext& ctx,
                          const ObservationStream& stream);

TrialResult run_trial(const std::string& method, const NodeLayout& layout,
                      const ChannelModel& model, const Trajectory& trajectory,
                      const Hyperparams& hyper, std::uint64_t seed, const Workspace& ws);

/// Seed of one cell of an experiment grid; a pure function of its inputs.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

/// Runs every (trajectory, noise level, trial) cell with all selected
/// methods on the same observation stream. Results are ordered by
/// trajectory, noise, trial, then method whatever `jobs` is.
std::vector<TrialResult> run_experiment(const ExperimentConfig& cfg, int jobs = 1);

struct MethodSummary {
  std::string method;
  std::size_t trials = 0;
  double rmse_mean = 0.0;
  double rmse_std = 0.0;  // population
  double tpi_mean = 0.0;  // seconds, mean over trials of per-trial mean TPI
  double tpi_std = 0.0;
  double tpi_median = 0.0;  // median over every timed call
  std::size_t missing = 0;
};

/// Per-method mean and population std across trials, in first-seen order.
/// Trials whose RMSE is undefined are left out of the RMSE statistics.
std::vector<MethodSummary> compute_metrics(const std::vector<TrialResult>& results);

std::string summary_markdown(const std::vector<MethodSummary>& rows);
void write_summary_csv(std::ostream& out, const std::vector<MethodSummary>& rows);

/// One row per waypoint per trial.
void write_results_csv(std::ostream& out, const std::vector<TrialResult>& results);
/// Inverse of write_results_csv; trial statistics are recomputed.
std::vector<TrialResult> read_results_csv(std::istream& in);

/// True when `p` lies in the convex hull of the layout nodes (edges included).
bool inside_node_hull(const NodeLayout& layout, const Position& p, double tol = 1e-9);

/// Error pooled over every estimate of a method, split by whether the truth
/// lies inside the node hull. An empty side has NaN RMSE and count 0.
struct BoundarySplit {
  std::string method;
  double rmse_inside = 0.0;
  std::size_t inside = 0;
  double rmse_outside = 0.0;
  std::size_t outside = 0;
};

std::vector<BoundarySplit> boundary_breakdown(const std::vector<TrialResult>& results,
                                              const NodeLayout& layout);
void write_boundary_csv(std::ostream& out, const std::vector<BoundarySplit>& rows);

struct AblationPoint {
  int particles = 0;
  bool odometry = true;
  std::vector<double> rmse;  // one per trial seed, pooled over trajectories and noise levels
  double rmse_mean = 0.0;
  double rmse_std = 0.0;
};

/// CDOA-PF at each particle count, with and without the odometry motion
/// model, on paired observation streams. `counts` must be ascending.
std::vector<AblationPoint> ablate_particles(const ExperimentConfig& cfg,
                                            const std::vector<int>& counts, int jobs = 1);

void write_ablation_csv(std::ostream& out, const std::vector<AblationPoint>& points);

}  // namespace cdoa
