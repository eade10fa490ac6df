#include "diffquad/policy.hpp"

#include <filesystem>
#include <fstream>
#include <random>

#include "diffquad/world.hpp"
#include "doctest.h"

using namespace diffquad;

namespace {

std::vector<double> random_obs(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> obs(kObsDim);
  for (auto& x : obs) x = n(rng);
  return obs;
}

}  // namespace

TEST_CASE("observation layout checksum is pinned") {
  // FNV-1a("vHd3.vH3.omega3.qH4.invdepth192"); a layout change must break this
  CHECK(observation_layout_checksum() == 12401576214035009318ull);
}

TEST_CASE("zero weights map to zero rates and mid thrust") {
  PolicyConfig cfg;
  cfg.hidden = {8, 8};
  ActionBounds b;
  b.f_max = 19.62;
  Policy p(cfg, b);
  std::fill(p.params().begin(), p.params().end(), 0.0);
  std::vector<double> obs(kObsDim, 0.7);
  Action a = p.act(obs);
  CHECK(a.omega_d.x == 0.0);
  CHECK(a.omega_d.y == 0.0);
  CHECK(a.omega_d.z == 0.0);
  CHECK(a.f_d == doctest::Approx(b.f_max / 2));
}

TEST_CASE("actions stay within bounds for any parameters") {
  std::mt19937_64 rng(33);
  std::normal_distribution<double> n(0.0, 5.0);
  ActionBounds b;
  for (int rep = 0; rep < 10; ++rep) {
    PolicyConfig cfg;
    cfg.hidden = {16, 16};
    cfg.seed = static_cast<std::uint64_t>(rep);
    Policy p(cfg, b);
    for (auto& w : p.params()) w = n(rng);  // wild weights
    auto obs = random_obs(rng);
    Action a = p.act(obs);
    CHECK(std::abs(a.omega_d.x) <= b.omega_max.x);
    CHECK(std::abs(a.omega_d.y) <= b.omega_max.y);
    CHECK(std::abs(a.omega_d.z) <= b.omega_max.z);
    CHECK(a.f_d >= 0.0);
    CHECK(a.f_d <= b.f_max);
    CHECK(std::isfinite(a.f_d));
  }
}

TEST_CASE("determinism: same params and obs give bitwise-same actions") {
  PolicyConfig cfg;
  cfg.seed = 4;
  Policy p(cfg, ActionBounds{});
  std::mt19937_64 rng(5);
  auto obs = random_obs(rng);
  Action a1 = p.act(obs);
  Action a2 = p.act(obs);
  CHECK(a1.omega_d.x == a2.omega_d.x);
  CHECK(a1.omega_d.y == a2.omega_d.y);
  CHECK(a1.omega_d.z == a2.omega_d.z);
  CHECK(a1.f_d == a2.f_d);
}

TEST_CASE("init_params is seeded and fan-in scaled") {
  PolicyConfig cfg;
  cfg.seed = 11;
  Policy a(cfg, ActionBounds{});
  Policy b(cfg, ActionBounds{});
  CHECK(a.params() == b.params());
  cfg.seed = 12;
  Policy c(cfg, ActionBounds{});
  CHECK(a.params() != c.params());

  // std of the first-layer weights approximately 1/sqrt(fan_in)
  const int fan_in = kObsDim;
  const int rows = a.net().dims()[1];
  double sum = 0, sum2 = 0;
  const int n = rows * fan_in;
  for (int i = 0; i < n; ++i) {
    const double w = a.params()[static_cast<std::size_t>(i)];
    sum += w;
    sum2 += w * w;
  }
  const double mean = sum / n;
  const double stddev = std::sqrt(sum2 / n - mean * mean);
  CHECK(stddev == doctest::Approx(1.0 / std::sqrt(fan_in)).epsilon(0.1));

  // forward from init produces a finite, bounded action
  std::mt19937_64 rng(1);
  Action act = a.act(random_obs(rng));
  CHECK(std::isfinite(act.f_d));
}

TEST_CASE("recorded policy gradients match finite differences") {
  PolicyConfig cfg;
  cfg.hidden = {24, 16, 12, 10, 8};  // 6 affine layers, small for the test
  cfg.seed = 7;
  ActionBounds bounds;
  Policy p(cfg, bounds);
  std::mt19937_64 rng(9);
  auto obs_values = random_obs(rng);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const std::array<double, 4> mix{u(rng), u(rng), u(rng), u(rng)};

  // scalar probe: loss = sum_k mix_k * squash(raw)_k
  const auto loss_value = [&](std::span<const double> o) {
    Action a = p.act(o);
    return mix[0] * a.omega_d.x + mix[1] * a.omega_d.y + mix[2] * a.omega_d.z +
           mix[3] * a.f_d;
  };

  Tape tape;
  std::vector<Var> obs;
  obs.reserve(kObsDim);
  for (double v : obs_values) obs.push_back(tape.leaf(v));
  Policy::EvalRecord rec;
  auto raw = p.raw_on_tape(tape, obs, rec);
  auto act = squash_action(raw, bounds);
  Var loss = mix[0] * act.omega_d.x + mix[1] * act.omega_d.y + mix[2] * act.omega_d.z +
             mix[3] * act.f_d;
  tape.backward(loss);

  SUBCASE("w.r.t. observations") {
    const double h = 1e-6;
    std::uniform_int_distribution<int> pick(0, kObsDim - 1);
    for (int rep = 0; rep < 30; ++rep) {
      const int i = pick(rng);
      auto pert = obs_values;
      pert[static_cast<std::size_t>(i)] += h;
      const double fp = loss_value(pert);
      pert[static_cast<std::size_t>(i)] -= 2 * h;
      const double fm = loss_value(pert);
      const double central = (fp - fm) / (2 * h);
      CHECK(std::abs(tape.grad(obs[static_cast<std::size_t>(i)]) - central) /
                std::max(1.0, std::abs(central)) <
            1e-5);
    }
  }
  SUBCASE("w.r.t. weights") {
    std::vector<double> grad(p.params().size(), 0.0);
    p.accumulate_param_grad(rec, tape, grad);
    const double h = 1e-6;
    std::uniform_int_distribution<std::size_t> pick(0, p.params().size() - 1);
    for (int rep = 0; rep < 40; ++rep) {
      const std::size_t i = pick(rng);
      const double orig = p.params()[i];
      p.params()[i] = orig + h;
      const double fp = loss_value(obs_values);
      p.params()[i] = orig - h;
      const double fm = loss_value(obs_values);
      p.params()[i] = orig;
      const double central = (fp - fm) / (2 * h);
      CHECK(std::abs(grad[i] - central) / std::max(1.0, std::abs(central)) < 1e-5);
    }
  }
}

TEST_CASE("assemble_observation") {
  QuadParams qp;

  SUBCASE("hover state with zero command") {
    auto s = hover_state(qp);
    std::vector<double> pooled(kDepthObsDim, 0.1);
    auto obs = assemble_observation(s, Vec3d{0, 0, 0}, pooled);
    for (int i = 0; i < 9; ++i) CHECK(obs[static_cast<std::size_t>(i)] == 0.0);
    CHECK(obs[9] == 1.0);  // identity heading-local quaternion
    CHECK(obs[10] == 0.0);
    CHECK(obs[11] == 0.0);
    CHECK(obs[12] == doctest::Approx(0.0));
    for (int i = kStateObsDim; i < kObsDim; ++i)
      CHECK(obs[static_cast<std::size_t>(i)] == 0.1);
  }
  SUBCASE("heading-frame invariance under a world yaw") {
    // rotate the whole world (state + command + scene) by a yaw angle:
    // the observation must not change
    CameraModel cam;
    ForestParams fp;
    fp.density = 0.03;
    fp.seed = 21;
    auto field = generate_forest(fp);
    const double psi = 1.1;
    const Quatd rot = Quatd::from_yaw(psi);

    QuadState<double> s;
    s.p = {-8.0, 1.0, 1.5};
    s.q = normalized(Quatd{0.9, 0.05, -0.08, 0.3});
    s.v = {2.0, 0.4, -0.1};
    s.omega = {0.2, -0.1, 0.3};
    const Vec3d v_d{3.0, 0.5, 0.0};

    QuadState<double> s2 = s;
    s2.p = rotate(rot, s.p);
    s2.q = rot * s.q;
    s2.v = rotate(rot, s.v);
    const Vec3d v_d2 = rotate(rot, v_d);

    ObstacleField field2 = field;
    for (auto& c : field2.cylinders) {
      const Vec3d rc = rotate(rot, Vec3d{c.cx, c.cy, 0.0});
      c.cx = rc.x;
      c.cy = rc.y;
    }

    DepthPreprocess dp;
    auto obs1 = assemble_observation(
        s, v_d, preprocess_depth(render_depth(s.p, s.q, CameraModel{}, field), dp));
    auto obs2 = assemble_observation(
        s2, v_d2, preprocess_depth(render_depth(s2.p, s2.q, cam, field2), dp));
    for (int i = 0; i < kObsDim; ++i)
      CHECK(obs1[static_cast<std::size_t>(i)] ==
            doctest::Approx(obs2[static_cast<std::size_t>(i)]).epsilon(1e-6));
  }
  SUBCASE("non-finite inputs are rejected") {
    auto s = hover_state(qp);
    s.v.x = std::numeric_limits<double>::infinity();
    std::vector<double> pooled(kDepthObsDim, 0.1);
    CHECK_THROWS_AS((void)assemble_observation(s, Vec3d{0, 0, 0}, pooled),
                    std::invalid_argument);
  }
}

TEST_CASE("checkpoints round-trip and reject mismatches") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto path = (dir / "diffquad_policy_test.json").string();

  PolicyConfig cfg;
  cfg.hidden = {16, 8};
  cfg.seed = 3;
  ActionBounds b;
  b.omega_max = {2.0, 2.0, 1.0};
  b.f_max = 15.0;
  Policy p(cfg, b);
  p.save(path);

  Policy q = Policy::load(path);
  CHECK(q.params() == p.params());
  CHECK(q.bounds().f_max == 15.0);
  CHECK(q.bounds().omega_max.z == 1.0);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> obs(kObsDim);
  for (auto& x : obs) x = n(rng);
  Action a1 = p.act(obs), a2 = q.act(obs);
  CHECK(a1.f_d == a2.f_d);
  CHECK(a1.omega_d.y == a2.omega_d.y);

  SUBCASE("corrupted checksum is rejected") {
    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)), {});
    in.close();
    auto pos = text.find("obs_checksum");
    REQUIRE(pos != std::string::npos);
    text[pos + 16] = text[pos + 16] == '1' ? '2' : '1';
    const auto bad = (dir / "diffquad_policy_bad.json").string();
    std::ofstream out(bad);
    out << text;
    out.close();
    CHECK_THROWS_AS((void)Policy::load(bad), std::runtime_error);
    std::filesystem::remove(bad);
  }
  std::filesystem::remove(path);
}
