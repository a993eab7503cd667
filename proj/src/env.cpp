#include "autotune/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace autotune::envs {

namespace {

// All envs integrate with semi-implicit Euler at dt/kSubsteps, which keeps
// the undamped pendulum's energy drift under 1% per episode at dt = 0.02.
constexpr int kSubsteps = 8;
constexpr double kGravityStd = 9.8;  // m/s^2, fixed world constant

// bouncing_ball: unit square arena mapped to kBallArenaMeters of height.
constexpr double kBallArenaMeters = 2.5;
constexpr double kBallRadius = 0.075;       // world units
constexpr double kBallActionAccel = 2.0;    // horizontal, world units/s^2
constexpr double kBallSpawnHeight = 0.9;
constexpr double kBallMaxSpeed = 8.0;       // world units/s, saturation
constexpr double kBallMaxRestitution = 0.95;

// damped_pendulum: planar rod, pivot fixed, torque-controlled.
constexpr double kRodLengthMeters = 1.0;
constexpr double kMaxTorque = 3.0;          // N*m
constexpr double kPendulumMaxOmega = 20.0;  // rad/s, saturation

// sliding_block: 1-D block on a floor, force-controlled.
constexpr double kBlockArenaMeters = 2.0;
constexpr double kBlockMaxForce = 14.0;     // N
constexpr double kBlockHalfWidth = 0.10;    // world units
constexpr double kBlockHalfHeight = 0.07;
constexpr double kBlockCenterY = 0.17;
constexpr double kBlockMaxSpeed = 6.0;      // m/s, saturation

double clamp(double x, double lo, double hi) { return std::min(std::max(x, lo), hi); }
double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

ParamSchema ball_schema() {
  using K = ParamKind;
  return ParamSchema{{{"gravity", K::dynamics, 9.8},
                      {"restitution", K::dynamics, 0.7},
                      {"ball_r", K::visual, 0.45},
                      {"ball_g", K::visual, 0.25},
                      {"ball_b", K::visual, 0.15},
                      {"bg_r", K::visual, 0.10},
                      {"bg_g", K::visual, 0.18},
                      {"bg_b", K::visual, 0.28}}};
}

ParamSchema pendulum_schema() {
  using K = ParamKind;
  return ParamSchema{{{"mass", K::dynamics, 1.0},
                      {"damping", K::dynamics, 0.8},
                      {"rod_r", K::visual, 0.50},
                      {"rod_g", K::visual, 0.30},
                      {"rod_b", K::visual, 0.15},
                      {"bg_r", K::visual, 0.12},
                      {"bg_g", K::visual, 0.16},
                      {"bg_b", K::visual, 0.24}}};
}

ParamSchema block_schema() {
  using K = ParamKind;
  return ParamSchema{{{"friction", K::dynamics, 0.3},
                      {"block_mass", K::dynamics, 1.0},
                      {"brightness", K::visual, 0.7},
                      {"block_r", K::visual, 0.45},
                      {"block_g", K::visual, 0.30},
                      {"block_b", K::visual, 0.20}}};
}

void check_params(const EnvSpec& spec, const ParamVector& params) {
  if (params.size() != spec.schema.size())
    throw std::invalid_argument("env: parameter vector has " + std::to_string(params.size()) +
                                " entries, schema expects " + std::to_string(spec.schema.size()));
}

// ---- dynamics -------------------------------------------------------------

// state q = [x, y, vx, vy], world units
EnvState ball_step(const EnvState& s, std::span<const double> a, const ParamVector& p, double dt) {
  double x = s.q[0], y = s.q[1], vx = s.q[2], vy = s.q[3];
  const double g = p[0] / kBallArenaMeters;
  const double e = clamp(p[1], 0.0, kBallMaxRestitution);
  const double ax = clamp(a[0], -1.0, 1.0) * kBallActionAccel;
  const double h = dt / kSubsteps;
  for (int i = 0; i < kSubsteps; ++i) {
    vy -= g * h;
    vx += ax * h;
    vx = clamp(vx, -kBallMaxSpeed, kBallMaxSpeed);
    vy = clamp(vy, -kBallMaxSpeed, kBallMaxSpeed);
    x += vx * h;
    y += vy * h;
    if (y < kBallRadius) {
      y = kBallRadius;
      if (vy < 0.0) vy = -e * vy;
    }
    if (y > 1.0 - kBallRadius) {
      y = 1.0 - kBallRadius;
      if (vy > 0.0) vy = -e * vy;
    }
    if (x < kBallRadius) {
      x = kBallRadius;
      if (vx < 0.0) vx = -e * vx;
    }
    if (x > 1.0 - kBallRadius) {
      x = 1.0 - kBallRadius;
      if (vx > 0.0) vx = -e * vx;
    }
  }
  return {{x, y, vx, vy}, s.step + 1};
}

// state q = [theta, omega]; theta = 0 hangs straight down
EnvState pendulum_step(const EnvState& s, std::span<const double> a, const ParamVector& p,
                       double dt) {
  double theta = s.q[0], omega = s.q[1];
  const double m = std::max(p[0], kParamFloor);
  const double c = std::max(p[1], 0.0);
  const double tau = clamp(a[0], -1.0, 1.0) * kMaxTorque;
  const double inertia = m * kRodLengthMeters * kRodLengthMeters;
  const double h = dt / kSubsteps;
  for (int i = 0; i < kSubsteps; ++i) {
    const double alpha =
        -(kGravityStd / kRodLengthMeters) * std::sin(theta) + (tau - c * omega) / inertia;
    omega += alpha * h;
    omega = clamp(omega, -kPendulumMaxOmega, kPendulumMaxOmega);
    theta += omega * h;
  }
  return {{theta, omega}, s.step + 1};
}

// state q = [x, vx]; x in world units, vx in m/s
EnvState block_step(const EnvState& s, std::span<const double> a, const ParamVector& p,
                    double dt) {
  double x = s.q[0], v = s.q[1];
  const double mu = std::max(p[0], 0.0);
  const double m = std::max(p[1], kParamFloor);
  const double force = clamp(a[0], -1.0, 1.0) * kBlockMaxForce;
  const double fric = mu * m * kGravityStd;  // max static/kinetic friction force
  const double h = dt / kSubsteps;
  for (int i = 0; i < kSubsteps; ++i) {
    if (std::abs(v) < 1e-9) {
      v = 0.0;
      if (std::abs(force) > fric) v += (force - fric * sgn(force)) / m * h;
    } else {
      const double acc = (force - fric * sgn(v)) / m;
      const double vn = v + acc * h;
      // kinetic friction stops the block instead of reversing it
      v = (vn * v < 0.0 && std::abs(force) <= fric) ? 0.0 : vn;
    }
    v = clamp(v, -kBlockMaxSpeed, kBlockMaxSpeed);
    x += (v / kBlockArenaMeters) * h;
    if (x < kBlockHalfWidth) {
      x = kBlockHalfWidth;
      if (v < 0.0) v = 0.0;
    }
    if (x > 1.0 - kBlockHalfWidth) {
      x = 1.0 - kBlockHalfWidth;
      if (v > 0.0) v = 0.0;
    }
  }
  return {{x, v}, s.step + 1};
}

// ---- rendering ------------------------------------------------------------

struct Rgb {
  double r = 0.0, g = 0.0, b = 0.0;
};

Rgb scaled(const Rgb& c, double k) { return {c.r * k, c.g * k, c.b * k}; }

uint8_t quantize(double c) { return static_cast<uint8_t>(std::lround(clamp(c, 0.0, 1.0) * 255.0)); }

void fill_frame(Frame& f, const Rgb& c) {
  const uint8_t r = quantize(c.r), g = quantize(c.g), b = quantize(c.b);
  for (size_t i = 0; i < f.rgb.size(); i += 3) {
    f.rgb[i] = r;
    f.rgb[i + 1] = g;
    f.rgb[i + 2] = b;
  }
}

// Paints color over the frame with a ~1px soft edge; dist_fn returns the
// signed distance (world units) from a pixel center to the shape boundary.
template <class DistFn>
void paint(Frame& f, const Rgb& color, DistFn dist_fn) {
  const int n = f.width;
  const double px = 1.0 / n;  // pixel size in world units
  for (int y = 0; y < n; ++y) {
    const double wy = 1.0 - (y + 0.5) * px;
    for (int x = 0; x < n; ++x) {
      const double wx = (x + 0.5) * px;
      const double d = dist_fn(wx, wy);
      const double cov = clamp(0.5 - d / px, 0.0, 1.0);
      if (cov <= 0.0) continue;
      uint8_t* p = &f.rgb[3 * (static_cast<size_t>(y) * n + x)];
      const double inv = 1.0 - cov;
      p[0] = quantize(p[0] / 255.0 * inv + clamp(color.r, 0.0, 1.0) * cov);
      p[1] = quantize(p[1] / 255.0 * inv + clamp(color.g, 0.0, 1.0) * cov);
      p[2] = quantize(p[2] / 255.0 * inv + clamp(color.b, 0.0, 1.0) * cov);
    }
  }
}

double circle_dist(double wx, double wy, double cx, double cy, double radius) {
  return std::hypot(wx - cx, wy - cy) - radius;
}

double segment_dist(double wx, double wy, double ax, double ay, double bx, double by,
                    double half_width) {
  const double vx = bx - ax, vy = by - ay;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((wx - ax) * vx + (wy - ay) * vy) / len2 : 0.0;
  t = clamp(t, 0.0, 1.0);
  return std::hypot(wx - (ax + t * vx), wy - (ay + t * vy)) - half_width;
}

double rect_dist(double wx, double wy, double cx, double cy, double hw, double hh) {
  const double dx = std::abs(wx - cx) - hw;
  const double dy = std::abs(wy - cy) - hh;
  return std::max(dx, dy);
}

Frame ball_render(const EnvState& s, const ParamVector& p, int n) {
  Frame f{n, n, std::vector<uint8_t>(static_cast<size_t>(3) * n * n)};
  fill_frame(f, {p[5], p[6], p[7]});
  const double cx = s.q[0], cy = s.q[1];
  paint(f, {p[2], p[3], p[4]},
        [&](double wx, double wy) { return circle_dist(wx, wy, cx, cy, kBallRadius); });
  return f;
}

Frame pendulum_render(const EnvState& s, const ParamVector& p, int n) {
  Frame f{n, n, std::vector<uint8_t>(static_cast<size_t>(3) * n * n)};
  fill_frame(f, {p[5], p[6], p[7]});
  const Rgb rod{p[2], p[3], p[4]};
  const double pivot_x = 0.5, pivot_y = 0.80, draw_len = 0.50;
  const double bob_x = pivot_x + draw_len * std::sin(s.q[0]);
  const double bob_y = pivot_y - draw_len * std::cos(s.q[0]);
  paint(f, rod, [&](double wx, double wy) {
    return segment_dist(wx, wy, pivot_x, pivot_y, bob_x, bob_y, 0.018);
  });
  paint(f, rod,
        [&](double wx, double wy) { return circle_dist(wx, wy, bob_x, bob_y, 0.07); });
  return f;
}

Frame block_render(const EnvState& s, const ParamVector& p, int n) {
  Frame f{n, n, std::vector<uint8_t>(static_cast<size_t>(3) * n * n)};
  const double brightness = p[2];
  fill_frame(f, scaled({0.30, 0.30, 0.34}, brightness));
  paint(f, scaled({0.18, 0.18, 0.20}, brightness), [&](double wx, double wy) {
    (void)wx;
    return wy - 0.10;  // floor strip
  });
  paint(f, scaled({p[3], p[4], p[5]}, brightness), [&](double wx, double wy) {
    return rect_dist(wx, wy, s.q[0], kBlockCenterY, kBlockHalfWidth, kBlockHalfHeight);
  });
  return f;
}

int sim_threads() {
#ifdef _OPENMP
  int n = omp_get_max_threads();
#else
  int n = 1;
#endif
  if (const char* env = std::getenv("AUTOTUNE_SIM_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = std::min(n, cap);
  }
  return n;
}

}  // namespace

EnvId env_id_from_string(const std::string& s) {
  if (s == "bouncing_ball") return EnvId::bouncing_ball;
  if (s == "damped_pendulum") return EnvId::damped_pendulum;
  if (s == "sliding_block") return EnvId::sliding_block;
  throw std::invalid_argument("unknown env '" + s + "'");
}

std::string to_string(EnvId id) {
  switch (id) {
    case EnvId::bouncing_ball: return "bouncing_ball";
    case EnvId::damped_pendulum: return "damped_pendulum";
    case EnvId::sliding_block: return "sliding_block";
  }
  return "?";
}

std::vector<std::string> env_id_names() {
  return {"bouncing_ball", "damped_pendulum", "sliding_block"};
}

Controller::Kind controller_kind_from_string(const std::string& s) {
  if (s == "random") return Controller::Kind::random;
  if (s == "sinusoid") return Controller::Kind::sinusoid;
  if (s == "scripted_reach") return Controller::Kind::scripted_reach;
  throw std::invalid_argument("unknown controller '" + s + "'");
}

std::string to_string(Controller::Kind k) {
  switch (k) {
    case Controller::Kind::random: return "random";
    case Controller::Kind::sinusoid: return "sinusoid";
    case Controller::Kind::scripted_reach: return "scripted_reach";
  }
  return "?";
}

void EnvSpec::validate() const {
  if (frame_size != 16 && frame_size != 32 && frame_size != 64)
    throw std::invalid_argument("EnvSpec: frame_size must be one of {16, 32, 64}");
  if (dt <= 0.0) throw std::invalid_argument("EnvSpec: dt must be positive");
  if (episode_len < 10) throw std::invalid_argument("EnvSpec: episode_len must be >= 10");
  if (action_dim < 1) throw std::invalid_argument("EnvSpec: action_dim must be >= 1");
  schema.validate();
}

EnvSpec make_env_spec(EnvId id, int frame_size, int episode_len) {
  EnvSpec spec;
  spec.env_id = id;
  spec.frame_size = frame_size;
  spec.episode_len = episode_len;
  spec.action_dim = 1;
  switch (id) {
    case EnvId::bouncing_ball: spec.schema = ball_schema(); break;
    case EnvId::damped_pendulum: spec.schema = pendulum_schema(); break;
    case EnvId::sliding_block: spec.schema = block_schema(); break;
  }
  spec.validate();
  return spec;
}

EnvSpec make_env_spec(const std::string& env_id, int frame_size, int episode_len) {
  return make_env_spec(env_id_from_string(env_id), frame_size, episode_len);
}

ParamVector preset_real_params(EnvId id) {
  ParamSchema schema;
  switch (id) {
    case EnvId::bouncing_ball: schema = ball_schema(); break;
    case EnvId::damped_pendulum: schema = pendulum_schema(); break;
    case EnvId::sliding_block: schema = block_schema(); break;
  }
  ParamVector out;
  for (const auto& e : schema.entries) out.values.push_back(e.reference_scale);
  return out;
}

EnvState env_reset(const EnvSpec& spec, const ParamVector& params, Rng& rng) {
  check_params(spec, params);
  switch (spec.env_id) {
    case EnvId::bouncing_ball:
      return {{rng.uniform(0.3, 0.7), kBallSpawnHeight, 0.0, 0.0}, 0};
    case EnvId::damped_pendulum:
      return {{rng.uniform(0.4, 0.7), 0.0}, 0};
    case EnvId::sliding_block:
      return {{rng.uniform(0.25, 0.45), 0.0}, 0};
  }
  throw std::logic_error("env_reset: unreachable");
}

EnvState env_step(const EnvSpec& spec, const EnvState& state, std::span<const double> action,
                  const ParamVector& params) {
  check_params(spec, params);
  if (static_cast<int>(action.size()) != spec.action_dim)
    throw std::invalid_argument("env_step: action dim mismatch");
  switch (spec.env_id) {
    case EnvId::bouncing_ball: return ball_step(state, action, params, spec.dt);
    case EnvId::damped_pendulum: return pendulum_step(state, action, params, spec.dt);
    case EnvId::sliding_block: return block_step(state, action, params, spec.dt);
  }
  throw std::logic_error("env_step: unreachable");
}

Frame render(const EnvSpec& spec, const EnvState& state, const ParamVector& params) {
  check_params(spec, params);
  switch (spec.env_id) {
    case EnvId::bouncing_ball: return ball_render(state, params, spec.frame_size);
    case EnvId::damped_pendulum: return pendulum_render(state, params, spec.frame_size);
    case EnvId::sliding_block: return block_render(state, params, spec.frame_size);
  }
  throw std::logic_error("render: unreachable");
}

namespace {

struct CtrlState {
  double amp = 1.0, freq_hz = 0.5, phase = 0.0;
};

CtrlState controller_init(const Controller& c, Rng& rng) {
  CtrlState s;
  if (c.kind == Controller::Kind::sinusoid) {
    s.amp = rng.uniform(0.5, 1.0);
    s.freq_hz = rng.uniform(0.25, 1.25);
    s.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }
  return s;
}

std::vector<double> controller_action(const Controller& c, const CtrlState& cs,
                                      const EnvSpec& spec, const EnvState& state, int t,
                                      Rng& rng) {
  std::vector<double> a(spec.action_dim, 0.0);
  switch (c.kind) {
    case Controller::Kind::random:
      for (auto& x : a) x = rng.uniform(-1.0, 1.0);
      break;
    case Controller::Kind::sinusoid:
      for (auto& x : a)
        x = cs.amp * std::sin(2.0 * std::numbers::pi * cs.freq_hz * t * spec.dt + cs.phase);
      break;
    case Controller::Kind::scripted_reach: {
      double u = 0.0;
      switch (spec.env_id) {
        case EnvId::bouncing_ball: u = 3.0 * (0.5 - state.q[0]) - 1.0 * state.q[2]; break;
        case EnvId::damped_pendulum: u = 2.0 * (0.6 - state.q[0]) - 0.5 * state.q[1]; break;
        case EnvId::sliding_block: u = 4.0 * (0.75 - state.q[0]) - 2.0 * state.q[1]; break;
      }
      a[0] = clamp(u, -1.0, 1.0);
      break;
    }
  }
  for (auto& x : a) x = clamp(x, -1.0, 1.0);
  return a;
}

}  // namespace

Trajectory rollout(const EnvSpec& spec, const ParamVector& params, const Controller& controller,
                   uint64_t episode_seed) {
  Rng init_rng(derive_seed(episode_seed, 0x1e5e1));
  Rng ctrl_rng(derive_seed(episode_seed, stream::kController, controller.seed));
  CtrlState cs = controller_init(controller, ctrl_rng);

  Trajectory traj;
  traj.frames.reserve(spec.episode_len);
  traj.actions.reserve(spec.episode_len);
  EnvState state = env_reset(spec, params, init_rng);
  for (int t = 0; t < spec.episode_len; ++t) {
    traj.frames.push_back(render(spec, state, params));
    traj.actions.push_back(controller_action(controller, cs, spec, state, t, ctrl_rng));
    state = env_step(spec, state, traj.actions.back(), params);
  }
  traj.gen_params = params;
  return traj;
}

std::vector<Trajectory> rollout_batch(const EnvSpec& spec, const ParamDistribution& dist,
                                      const Controller& controller, uint64_t batch_seed,
                                      int count) {
  dist.validate();
  std::vector<uint64_t> seeds(count);
  for (int i = 0; i < count; ++i) seeds[i] = derive_seed(batch_seed, static_cast<uint64_t>(i) + 1);
  std::vector<Trajectory> out(count);
  const int threads = sim_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (int i = 0; i < count; ++i) {
    Rng param_rng(derive_seed(seeds[i], 0x9a2a));
    const ParamVector params = sample_params(dist, param_rng);
    out[i] = rollout(spec, params, controller, seeds[i]);
  }
  return out;
}

PseudoRealEnv::PseudoRealEnv(EnvSpec spec, ParamVector real_params)
    : spec_(std::move(spec)), real_params_(std::move(real_params)) {
  check_params(spec_, real_params_);
}

Trajectory PseudoRealEnv::rollout(const Controller& controller, uint64_t episode_seed) const {
  Trajectory traj = envs::rollout(spec_, real_params_, controller, episode_seed);
  traj.gen_params.reset();
  return traj;
}

std::vector<Trajectory> PseudoRealEnv::rollout_batch(const Controller& controller,
                                                     uint64_t batch_seed, int count) const {
  std::vector<uint64_t> seeds(count);
  for (int i = 0; i < count; ++i) seeds[i] = derive_seed(batch_seed, static_cast<uint64_t>(i) + 1);
  std::vector<Trajectory> out(count);
  const int threads = sim_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (int i = 0; i < count; ++i) out[i] = rollout(controller, seeds[i]);
  return out;
}

void write_ppm(const Frame& frame, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_ppm: cannot open " + path.string());
  os << "P6\n" << frame.width << " " << frame.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(frame.rgb.data()),
           static_cast<std::streamsize>(frame.rgb.size()));
}

void dump_trajectory_ppm(const Trajectory& traj, const std::filesystem::path& dir,
                         const std::string& prefix) {
  std::filesystem::create_directories(dir);
  for (size_t i = 0; i < traj.frames.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "%s_%04zu.ppm", prefix.c_str(), i);
    write_ppm(traj.frames[i], dir / name);
  }
}

}  // namespace autotune::envs
