#include "cdoa/experiment.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <istream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

namespace cdoa {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    m = 0.5 * (m + lo);
  }
  return m;
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd population(const std::vector<double>& v) {
  MeanStd r;
  if (v.empty()) return r;
  r.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - r.mean) * (x - r.mean);
  r.std = std::sqrt(ss / static_cast<double>(v.size()));
  return r;
}

// Runs fn(0..count-1) on up to `jobs` threads; rethrows the first failure.
template <class Fn>
void parallel_for(std::size_t count, int jobs, Fn&& fn) {
  const std::size_t workers =
      std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next.store(count);
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

double rmse_of(const std::vector<EstimateRecord>& estimates) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& e : estimates) {
    if (!e.estimate) continue;
    sum += (*e.estimate - e.truth).squaredNorm();
    ++n;
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : std::sqrt(sum / static_cast<double>(n));
}

void finalize(TrialResult& r) {
  r.rmse = rmse_of(r.estimates);
  std::vector<double> times;
  times.reserve(r.estimates.size());
  r.missing = 0;
  for (const auto& e : r.estimates) {
    times.push_back(e.iter_time);
    if (!e.estimate) ++r.missing;
  }
  r.mean_tpi = population(times).mean;
  r.median_tpi = median(times);
}

ObservationStream simulate_observations(const NodeLayout& layout, const ChannelModel& model,
                                        const Trajectory& trajectory, const Hyperparams& hyper,
                                        std::uint64_t seed) {
  model.validate();
  if (trajectory.waypoints.empty()) throw InvalidArgument("trajectory has no waypoints");
  const int bag_size = std::max(hyper.window_len, hyper.baselines.irssi_bag);
  Rng rng(seed);
  Rng odo_rng(derive_seed(seed, 0x0d0));
  std::normal_distribution<double> odo_noise(0.0, 1.0);

  ObservationStream s;
  s.truth = trajectory.waypoints;
  s.observations.reserve(s.truth.size());
  for (std::size_t i = 0; i < s.truth.size(); ++i) {
    Observation o;
    o.timestamp = static_cast<double>(i);
    o.bag = sample_bag(model, layout, s.truth[i], bag_size, rng);
    o.snapshot = snapshot_from_bag(o.bag, hyper.window_len, o.timestamp);
    Displacement d = i == 0 ? Displacement::Zero() : Displacement(s.truth[i] - s.truth[i - 1]);
    if (hyper.odometry_noise_std > 0.0)
      d += hyper.odometry_noise_std * Displacement(odo_noise(odo_rng), odo_noise(odo_rng));
    o.odometry = d;
    s.observations.push_back(std::move(o));
  }
  return s;
}

TrialResult run_on_stream(const std::string& method, const MethodContext& ctx,
                          const ObservationStream& stream) {
  auto localizer = MethodRegistry::instance().create(method, ctx);
  TrialResult r;
  r.method = method;
  r.seed = ctx.seed;
  r.estimates.reserve(stream.observations.size());
  for (std::size_t i = 0; i < stream.observations.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    auto est = localizer->update(stream.observations[i]);
    const auto t1 = std::chrono::steady_clock::now();
    if (est && !is_finite(*est)) est.reset();
    r.estimates.push_back({i, stream.truth[i], est, std::chrono::duration<double>(t1 - t0).count()});
  }
  finalize(r);
  return r;
}

TrialResult run_trial(const std::string& method, const NodeLayout& layout,
                      const ChannelModel& model, const Trajectory& trajectory,
                      const Hyperparams& hyper, std::uint64_t seed, const Workspace& ws) {
  hyper.validate();
  const auto stream = simulate_observations(layout, model, trajectory, hyper, seed);
  MethodContext ctx{layout, model, ws, hyper, derive_seed(seed, 0x9f)};
  TrialResult r = run_on_stream(method, ctx, stream);
  r.trajectory = std::string(to_string(trajectory.kind));
  r.noise_dbm = model.noise_std;
  r.seed = seed;
  return r;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  // splitmix64 over the inputs in turn
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(base);
  h = mix(h ^ a);
  h = mix(h ^ b);
  h = mix(h ^ c);
  return h;
}

std::vector<TrialResult> run_experiment(const ExperimentConfig& cfg, int jobs) {
  cfg.validate();
  const auto methods = MethodRegistry::instance().resolve(cfg.methods);
  const auto layout = cfg.layout();
  const auto trajectories = cfg.build_trajectories();
  const auto noises = cfg.effective_noise_levels();

  const std::size_t cells = trajectories.size() * noises.size() * static_cast<std::size_t>(cfg.trials);
  std::vector<std::vector<TrialResult>> slots(cells);
  parallel_for(cells, jobs, [&](std::size_t cell) {
    const std::size_t trial = cell % static_cast<std::size_t>(cfg.trials);
    const std::size_t ni = (cell / static_cast<std::size_t>(cfg.trials)) % noises.size();
    const std::size_t ti = cell / (static_cast<std::size_t>(cfg.trials) * noises.size());
    ChannelModel model = cfg.channel;
    model.noise_std = noises[ni];
    const std::uint64_t seed = derive_seed(cfg.seed, ti, ni, trial);
    const auto stream = simulate_observations(layout, model, trajectories[ti], cfg.hyper, seed);
    MethodContext ctx{layout, model, cfg.workspace, cfg.hyper, derive_seed(seed, 0x9f)};
    for (const auto& m : methods) {
      TrialResult r = run_on_stream(m, ctx, stream);
      r.trajectory = std::string(to_string(trajectories[ti].kind));
      r.noise_dbm = noises[ni];
      r.trial = static_cast<int>(trial);
      r.seed = seed;
      slots[cell].push_back(std::move(r));
    }
  });

  std::vector<TrialResult> out;
  out.reserve(cells * methods.size());
  for (auto& s : slots)
    for (auto& r : s) out.push_back(std::move(r));
  return out;
}

std::vector<MethodSummary> compute_metrics(const std::vector<TrialResult>& results) {
  if (results.empty()) throw InvalidArgument("compute_metrics needs at least one result");
  std::vector<std::string> order;
  std::map<std::string, std::vector<const TrialResult*>> by;
  for (const auto& r : results) {
    if (!by.contains(r.method)) order.push_back(r.method);
    by[r.method].push_back(&r);
  }
  std::vector<MethodSummary> rows;
  for (const auto& name : order) {
    MethodSummary s;
    s.method = name;
    std::vector<double> rmse, tpi, calls;
    for (const TrialResult* r : by[name]) {
      ++s.trials;
      s.missing += r->missing;
      if (std::isfinite(r->rmse)) rmse.push_back(r->rmse);
      tpi.push_back(r->mean_tpi);
      for (const auto& e : r->estimates) calls.push_back(e.iter_time);
    }
    const auto rm = population(rmse);
    const auto tm = population(tpi);
    s.rmse_mean = rmse.empty() ? std::numeric_limits<double>::quiet_NaN() : rm.mean;
    s.rmse_std = rmse.empty() ? std::numeric_limits<double>::quiet_NaN() : rm.std;
    s.tpi_mean = tm.mean;
    s.tpi_std = tm.std;
    s.tpi_median = median(std::move(calls));
    rows.push_back(s);
  }
  return rows;
}

std::string summary_markdown(const std::vector<MethodSummary>& rows) {
  std::vector<std::array<std::string, 5>> cells;
  cells.push_back({"Method", "RMSE (m)", "Average TPI (ms)", "Median TPI (ms)", "Trials"});
  char buf[96];
  for (const auto& r : rows) {
    std::array<std::string, 5> c;
    c[0] = r.method;
    std::snprintf(buf, sizeof buf, "%.2f ± %.2f", r.rmse_mean, r.rmse_std);
    c[1] = buf;
    std::snprintf(buf, sizeof buf, "%.3f ± %.3f", 1e3 * r.tpi_mean, 1e3 * r.tpi_std);
    c[2] = buf;
    std::snprintf(buf, sizeof buf, "%.3f", 1e3 * r.tpi_median);
    c[3] = buf;
    c[4] = std::to_string(r.trials);
    if (r.missing > 0) c[4] += " (" + std::to_string(r.missing) + " missing)";
    cells.push_back(c);
  }
  // Column widths in code points so the ± sign does not skew alignment.
  auto width = [](const std::string& s) {
    return static_cast<std::size_t>(std::count_if(s.begin(), s.end(),
                                                  [](char ch) { return (ch & 0xC0) != 0x80; }));
  };
  std::array<std::size_t, 5> w{};
  for (const auto& c : cells)
    for (std::size_t k = 0; k < 5; ++k) w[k] = std::max(w[k], width(c[k]));
  std::ostringstream out;
  auto row = [&](const std::array<std::string, 5>& c) {
    out << '|';
    for (std::size_t k = 0; k < 5; ++k) {
      out << ' ' << c[k] << std::string(w[k] - width(c[k]), ' ') << " |";
    }
    out << '\n';
  };
  row(cells[0]);
  out << '|';
  for (std::size_t k = 0; k < 5; ++k) out << std::string(w[k] + 2, '-') << '|';
  out << '\n';
  for (std::size_t i = 1; i < cells.size(); ++i) row(cells[i]);
  return out.str();
}

void write_summary_csv(std::ostream& out, const std::vector<MethodSummary>& rows) {
  out << "method,trials,rmse_mean_m,rmse_std_m,tpi_mean_ms,tpi_std_ms,tpi_median_ms,missing\n";
  for (const auto& r : rows)
    out << r.method << ',' << r.trials << ',' << fmt(r.rmse_mean) << ',' << fmt(r.rmse_std) << ','
        << fmt(1e3 * r.tpi_mean) << ',' << fmt(1e3 * r.tpi_std) << ',' << fmt(1e3 * r.tpi_median)
        << ',' << r.missing << '\n';
}

void write_results_csv(std::ostream& out, const std::vector<TrialResult>& results) {
  out << "method,trajectory,noise_dbm,trial,seed,index,truth_x,truth_y,est_x,est_y,error_m,"
         "iter_time_s\n";
  for (const auto& r : results) {
    for (const auto& e : r.estimates) {
      out << r.method << ',' << r.trajectory << ',' << fmt(r.noise_dbm) << ',' << r.trial << ','
          << r.seed << ',' << e.index << ',' << fmt(e.truth.x()) << ',' << fmt(e.truth.y()) << ',';
      if (e.estimate)
        out << fmt(e.estimate->x()) << ',' << fmt(e.estimate->y()) << ','
            << fmt((*e.estimate - e.truth).norm());
      else
        out << ",,";
      out << ',' << fmt(e.iter_time) << '\n';
    }
  }
}

bool inside_node_hull(const NodeLayout& layout, const Position& p, double tol) {
  // Monotone chain, counter-clockwise, collinear points dropped.
  std::vector<Position> pts;
  for (const auto& n : layout.nodes()) pts.push_back(n.pos);
  std::sort(pts.begin(), pts.end(), [](const Position& a, const Position& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  auto cross = [](const Position& o, const Position& a, const Position& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Position> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  if (hull.size() < 3) return false;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Position& a = hull[i];
    const Position& b = hull[(i + 1) % hull.size()];
    if (cross(a, b, p) < -tol * (b - a).norm()) return false;
  }
  return true;
}

std::vector<BoundarySplit> boundary_breakdown(const std::vector<TrialResult>& results,
                                              const NodeLayout& layout) {
  std::vector<BoundarySplit> rows;
  std::map<std::string, std::size_t> slot;
  std::vector<std::array<double, 2>> sums;
  for (const auto& r : results) {
    auto [it, fresh] = slot.try_emplace(r.method, rows.size());
    if (fresh) {
      rows.push_back({r.method});
      sums.push_back({0.0, 0.0});
    }
    auto& row = rows[it->second];
    auto& sum = sums[it->second];
    for (const auto& e : r.estimates) {
      if (!e.estimate) continue;
      const double sq = (*e.estimate - e.truth).squaredNorm();
      if (inside_node_hull(layout, e.truth)) {
        sum[0] += sq;
        ++row.inside;
      } else {
        sum[1] += sq;
        ++row.outside;
      }
    }
  }
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].rmse_inside = rows[i].inside ? std::sqrt(sums[i][0] / rows[i].inside) : nan;
    rows[i].rmse_outside = rows[i].outside ? std::sqrt(sums[i][1] / rows[i].outside) : nan;
  }
  return rows;
}

void write_boundary_csv(std::ostream& out, const std::vector<BoundarySplit>& rows) {
  out << "method,rmse_inside_m,estimates_inside,rmse_outside_m,estimates_outside\n";
  for (const auto& r : rows)
    out << r.method << ',' << fmt(r.rmse_inside) << ',' << r.inside << ',' << fmt(r.rmse_outside)
        << ',' << r.outside << '\n';
}

std::vector<TrialResult> read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("results CSV is empty");
  std::vector<TrialResult> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 12)
      throw InvalidArgument("results CSV line " + std::to_string(line_no) + ": expected 12 fields");
    try {
      const int trial = std::stoi(c[3]);
      const std::uint64_t seed = std::stoull(c[4]);
      const double noise = std::stod(c[2]);
      if (out.empty() || out.back().method != c[0] || out.back().trajectory != c[1] ||
          out.back().trial != trial || out.back().seed != seed || out.back().noise_dbm != noise) {
        TrialResult r;
        r.method = c[0];
        r.trajectory = c[1];
        r.noise_dbm = noise;
        r.trial = trial;
        r.seed = seed;
        out.push_back(std::move(r));
      }
      EstimateRecord e;
      e.index = std::stoull(c[5]);
      e.truth = {std::stod(c[6]), std::stod(c[7])};
      if (!c[8].empty()) e.estimate = Position(std::stod(c[8]), std::stod(c[9]));
      e.iter_time = std::stod(c[11]);
      out.back().estimates.push_back(e);
    } catch (const std::logic_error&) {
      throw InvalidArgument("results CSV line " + std::to_string(line_no) + ": malformed number");
    }
  }
  for (auto& r : out) finalize(r);
  return out;
}

std::vector<AblationPoint> ablate_particles(const ExperimentConfig& cfg,
                                            const std::vector<int>& counts, int jobs) {
  cfg.validate();
  if (counts.empty()) throw InvalidArgument("ablation needs at least one particle count");
  if (!std::is_sorted(counts.begin(), counts.end()))
    throw InvalidArgument("particle counts must be ascending");
  const auto layout = cfg.layout();
  const auto trajectories = cfg.build_trajectories();
  const auto noises = cfg.effective_noise_levels();
  const auto trials = static_cast<std::size_t>(cfg.trials);

  // rmse[trial][count][odometry] pooled over trajectories and noise levels
  std::vector<std::vector<std::array<double, 2>>> pooled(
      trials, std::vector<std::array<double, 2>>(counts.size(), {0.0, 0.0}));
  parallel_for(trials, jobs, [&](std::size_t trial) {
    std::size_t cells = 0;
    for (std::size_t ti = 0; ti < trajectories.size(); ++ti) {
      for (std::size_t ni = 0; ni < noises.size(); ++ni) {
        ChannelModel model = cfg.channel;
        model.noise_std = noises[ni];
        const std::uint64_t seed = derive_seed(cfg.seed, ti, ni, trial);
        const auto stream = simulate_observations(layout, model, trajectories[ti], cfg.hyper, seed);
        for (std::size_t k = 0; k < counts.size(); ++k) {
          for (int odo = 0; odo < 2; ++odo) {
            Hyperparams h = cfg.hyper;
            h.pf.particles = counts[k];
            h.use_odometry = odo == 1;
            MethodContext ctx{layout, model, cfg.workspace, h, derive_seed(seed, 0x9f)};
            pooled[trial][k][static_cast<std::size_t>(odo)] += run_on_stream("cdoa-pf", ctx, stream).rmse;
          }
        }
        ++cells;
      }
    }
    for (auto& per_count : pooled[trial])
      for (double& v : per_count) v /= static_cast<double>(cells);
  });

  std::vector<AblationPoint> out;
  for (int odo = 1; odo >= 0; --odo) {
    for (std::size_t k = 0; k < counts.size(); ++k) {
      AblationPoint p;
      p.particles = counts[k];
      p.odometry = odo == 1;
      for (std::size_t t = 0; t < trials; ++t) p.rmse.push_back(pooled[t][k][static_cast<std::size_t>(odo)]);
      const auto ms = population(p.rmse);
      p.rmse_mean = ms.mean;
      p.rmse_std = ms.std;
      out.push_back(std::move(p));
    }
  }
  return out;
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationPoint>& points) {
  out << "particles,odometry,trials,rmse_mean_m,rmse_std_m\n";
  for (const auto& p : points)
    out << p.particles << ',' << (p.odometry ? "on" : "off") << ',' << p.rmse.size() << ','
        << fmt(p.rmse_mean) << ',' << fmt(p.rmse_std) << '\n';
}

}  // namespace cdoa
