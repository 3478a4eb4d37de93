#include "cdoa/methods.hpp"

#include <algorithm>

namespace cdoa {

namespace {

// Single-reading snapshot the RSSI-only baselines see in raw mode.
RssiSnapshot baseline_snapshot(const Observation& obs, BaselineInput input) {
  if (input == BaselineInput::Window || obs.bag.cols() == 0) return obs.snapshot;
  return snapshot_from_bag(obs.bag, 1, obs.timestamp);
}

std::optional<Displacement> odometry_for(const Observation& obs, const Hyperparams& h) {
  if (!h.use_odometry) return std::nullopt;
  return obs.odometry;
}

class CdoaPfMethod final : public Localizer {
 public:
  explicit CdoaPfMethod(const MethodContext& ctx)
      : ctx_(ctx),
        method_(resolve_gradient(ctx.hyper, ctx.layout)),
        smoother_{ctx.hyper.ewma_alpha, std::nullopt},
        pf_(pf_config(ctx.hyper), ctx.workspace,
            ExpectedBearing::from_model(ctx.hyper.bearing, ctx.layout, method_), ctx.seed) {}

  std::optional<Position> update(const Observation& obs) override {
    const auto odo = odometry_for(obs, ctx_.hyper);
    const auto m = estimate_cdoa(ctx_.layout, obs.snapshot, smoother_, method_);
    if (!m) {
      pf_.predict(odo);
      return std::nullopt;
    }
    return pf_.step(*m, odo).estimate;
  }

 private:
  static ParticleFilterConfig pf_config(const Hyperparams& h) {
    ParticleFilterConfig c = h.pf;
    c.window = h.window;
    c.sigma = h.sigma;
    return c;
  }

  MethodContext ctx_;
  GradientMethod method_;
  CdoaSmoother smoother_;
  CdoaParticleFilter pf_;
};

class CdoaEmMethod final : public Localizer {
 public:
  explicit CdoaEmMethod(const MethodContext& ctx)
      : ctx_(ctx),
        method_(resolve_gradient(ctx.hyper, ctx.layout)),
        smoother_{ctx.hyper.ewma_alpha, std::nullopt},
        em_(GridConfig{ctx.hyper.em_resolution, ctx.hyper.window, ctx.hyper.sigma, ctx.hyper.em_prune},
            ctx.workspace,
            ExpectedBearing::from_model(ctx.hyper.bearing, ctx.layout, method_)) {}

  std::optional<Position> update(const Observation& obs) override {
    const auto odo = odometry_for(obs, ctx_.hyper);
    const auto m = estimate_cdoa(ctx_.layout, obs.snapshot, smoother_, method_);
    if (!m) {
      em_.advance(odo);
      return std::nullopt;
    }
    return em_.step(*m, odo);
  }

 private:
  MethodContext ctx_;
  GradientMethod method_;
  CdoaSmoother smoother_;
  CdoaEm em_;
};

class TrilaterationMethod final : public Localizer {
 public:
  explicit TrilaterationMethod(const MethodContext& ctx) : ctx_(ctx) {}
  std::optional<Position> update(const Observation& obs) override {
    const auto r = trilaterate(ctx_.layout, baseline_snapshot(obs, ctx_.hyper.baseline_input),
                               ctx_.model, ctx_.workspace);
    return r.position;
  }

 private:
  MethodContext ctx_;
};

class WclMethod final : public Localizer {
 public:
  explicit WclMethod(const MethodContext& ctx) : ctx_(ctx) {}
  std::optional<Position> update(const Observation& obs) override {
    return weighted_centroid(ctx_.layout, baseline_snapshot(obs, ctx_.hyper.baseline_input),
                             ctx_.hyper.baselines.wcl_mode, ctx_.model)
        .position;
  }

 private:
  MethodContext ctx_;
};

class DrssiMethod final : public Localizer {
 public:
  explicit DrssiMethod(const MethodContext& ctx)
      : ctx_(ctx),
        locator_(ctx.layout, ctx.model, ctx.workspace, ctx.hyper.baselines.grid_resolution) {}
  std::optional<Position> update(const Observation& obs) override {
    return locator_.locate(baseline_snapshot(obs, ctx_.hyper.baseline_input));
  }

 private:
  MethodContext ctx_;
  DrssiLocator locator_;
};

class IrssiMethod final : public Localizer {
 public:
  explicit IrssiMethod(const MethodContext& ctx) : ctx_(ctx) {}
  std::optional<Position> update(const Observation& obs) override {
    const int cols = std::min<int>(static_cast<int>(obs.bag.cols()), ctx_.hyper.baselines.irssi_bag);
    if (cols < 1) return std::nullopt;
    const Eigen::MatrixXd bag = obs.bag.leftCols(cols);
    return irssi_locate(state_, ctx_.layout, bag, ctx_.model, ctx_.hyper.baselines.irssi_k).position;
  }

 private:
  MethodContext ctx_;
  IRssiState state_;
};

class PfEkfMethod final : public Localizer {
 public:
  explicit PfEkfMethod(const MethodContext& ctx)
      : ctx_(ctx), filter_(ctx.hyper.baselines.pfekf, ctx.layout, ctx.workspace, ctx.seed) {}
  std::optional<Position> update(const Observation& obs) override {
    return filter_.step(baseline_snapshot(obs, ctx_.hyper.baseline_input), ctx_.model).position;
  }

 private:
  MethodContext ctx_;
  PfEkf filter_;
};

template <class T>
MethodFactory factory() {
  return [](const MethodContext& ctx) { return std::make_unique<T>(ctx); };
}

}  // namespace

GradientMethod resolve_gradient(const Hyperparams& hyper, const NodeLayout& layout) {
  if (hyper.gradient == "auto") return default_gradient_method(layout);
  return parse_gradient_method(hyper.gradient);
}

MethodRegistry::MethodRegistry() {
  add("cdoa-em", factory<CdoaEmMethod>());
  add("cdoa-pf", factory<CdoaPfMethod>());
  add("i-rssi", factory<IrssiMethod>());
  add("d-rssi", factory<DrssiMethod>());
  add("pf-ekf", factory<PfEkfMethod>());
  add("trilateration", factory<TrilaterationMethod>());
  add("wcl", factory<WclMethod>());
}

MethodRegistry& MethodRegistry::instance() {
  static MethodRegistry registry;
  return registry;
}

void MethodRegistry::add(const std::string& name, MethodFactory factory) {
  if (name.empty() || name == "all") throw InvalidArgument("reserved method name '" + name + "'");
  if (!factories_.contains(name)) order_.push_back(name);
  factories_[name] = std::move(factory);
}

bool MethodRegistry::contains(const std::string& name) const { return factories_.contains(name); }

std::unique_ptr<Localizer> MethodRegistry::create(const std::string& name,
                                                  const MethodContext& ctx) const {
  const auto it = factories_.find(name);
  if (it == factories_.end()) throw InvalidArgument("unknown method '" + name + "'");
  return it->second(ctx);
}

std::vector<std::string> MethodRegistry::resolve(const std::vector<std::string>& requested) const {
  std::vector<std::string> out;
  auto push = [&](const std::string& n) {
    if (std::find(out.begin(), out.end(), n) == out.end()) out.push_back(n);
  };
  for (const auto& r : requested) {
    if (r == "all") {
      for (const auto& n : order_) push(n);
    } else if (contains(r)) {
      push(r);
    } else {
      throw InvalidArgument("unknown method '" + r + "'");
    }
  }
  if (out.empty()) throw InvalidArgument("no method selected");
  return out;
}

}  // namespace cdoa
