// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fail.
#include "helpers.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

using namespace qpi;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass{false};
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

ScenarioFile bundled(const std::string& name) {
  return load_scenario(std::string(QPI_SCENARIO_DIR) + "/" + name + ".json");
}

std::vector<RegressorSample> noisy_samples(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> a(0.0, 2.0), e(0.0, 5.0);
  const ParameterVector truth{16.21, 0.142648, 0.0};
  std::vector<RegressorSample> out;
  for (std::size_t k = 0; k < n; ++k) {
    RigidBodyState base;
    base.linear_acceleration = Vec3(a(rng), a(rng), a(rng));
    base.angular_velocity = Vec3(0.3 * a(rng), 0.3 * a(rng), a(rng));
    base.angular_acceleration = Vec3(a(rng), a(rng), 3 * a(rng));
    RegressorSample s;
    s.phi = regressor_matrix(base, Vec3(0, 0, 9.81), RegressorModel::rigid_body);
    s.z = s.phi * truth.vector();
    for (int i = 0; i < 6; ++i) s.z(i) += e(rng);
    out.push_back(s);
  }
  return out;
}

Outcome regressor_consistency() {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  int count = 0;
  for (auto model : {RegressorModel::gravity_torque, RegressorModel::rigid_body}) {
    for (int k = 0; k < 1000; ++k, ++count) {
      const auto [s, pi] = fixtures::random_clean_snapshot(rng, model);
      const RegressorSample r = build_regressor(s, model);
      worst = std::max(worst, (r.z - r.phi * pi.vector()).cwiseAbs().maxCoeff());
    }
  }
  return {worst <= 1e-8, fmt("max |z - phi pi| = %.3g over %.0f snapshots", worst, count)};
}

Outcome kf_batch_equivalence() {
  const auto samples = noisy_samples(500, 77);
  KFState kf;
  kf.Q.setZero();
  kf.P = 1e9 * Mat3::Identity();
  kf.R = Mat6::Identity();
  for (const auto& s : samples) kf = kf_update(kf_predict(kf), s);
  const ParameterVector batch = batch_least_squares(samples);
  const double diff = (kf.pi_hat.vector() - batch.vector()).cwiseAbs().maxCoeff();
  return {diff <= 1e-4, fmt("max |kf - batch| = %.3g", diff)};
}

Outcome covariance_drop() {
  const ScenarioFile f = bundled("stand_then_trot");
  const AdaptationConfig& a = f.experiment.adaptation;
  const double onset = f.scenario.gait_timeline.at(1).start_time;
  int good = 0;
  double latest = 0.0, closest = 1e9;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const RunResult r = run_experiment(with_seed(f, seed));
    bool above = true;
    double first_below = -1.0;
    for (const auto& row : r.trace) {
      const Vec3 p = row.kf_covariance;
      if (row.time < onset) {
        above = above && (p.array() > a.thresholds.array()).all();
        closest = std::min(closest, (p - a.thresholds).minCoeff());
      } else if (first_below < 0 && (p.array() < a.thresholds.array()).all()) {
        first_below = row.time;
      }
    }
    const bool ok = above && first_below >= 0 && first_below - onset <= 10.0;
    if (ok) ++good;
    latest = std::max(latest, first_below < 0 ? 1e9 : first_below - onset);
  }
  return {good == 10, fmt("%.0f/10 seeds; standing margin above limits %.4f; slowest drop %.2f s after onset",
                          good, closest, latest)};
}

Outcome payload_tracking() {
  const ScenarioFile f = bundled("payload_switching");
  const auto& events = f.scenario.payload_events;
  int good = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const RunResult r = run_experiment(with_seed(f, seed));
    double seed_worst = 0.0;
    for (std::size_t e = 0; e < events.size(); ++e) {
      if (events[e].mass_delta <= 0) continue;
      const double from = events[e].time + 5.0;
      const double to = e + 1 < events.size() ? events[e + 1].time : f.scenario.duration;
      for (const auto& row : r.trace) {
        if (row.time >= from && row.time < to)
          seed_worst = std::max(seed_worst, std::abs(row.kf.m - row.truth.m));
      }
    }
    if (seed_worst <= 0.5) ++good;
    worst = std::max(worst, seed_worst);
  }
  return {good == 10, fmt("%.0f/10 seeds within 0.5 kg from 5 s after each attach; worst %.3f kg", good, worst)};
}

Outcome bias_ordering() {
  const ScenarioFile f = bundled("standing_bias");
  int wins = 0;
  double kf_sum = 0.0, rls_sum = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const RunReport r = run_experiment(with_seed(f, seed)).report;
    const double kf = r.metrics("kf_published").terminal_error(0);
    const double rls = r.metrics("rls").terminal_error(0);
    if (kf < rls) ++wins;
    kf_sum += kf;
    rls_sum += rls;
  }
  return {wins >= 18, fmt("KF better on %.0f/20 seeds; mean terminal |dm| KF %.3f kg, RLS %.3f kg", wins,
                          kf_sum / 20, rls_sum / 20)};
}

Outcome covariance_invariants() {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  KFState kf;
  double min_eig = 1e9, worst_growth = -1e9;
  for (int k = 0; k < 100000; ++k) {
    if (k % 1000 == 0) {
      kf = KFState{};
      kf.Q = Vec3(u(rng), u(rng), u(rng)).asDiagonal();
      kf.Q *= 1e-2;
    }
    RigidBodyState base;
    base.linear_acceleration = 3.0 * Vec3(n(rng), n(rng), n(rng));
    base.angular_velocity = Vec3(n(rng), n(rng), n(rng));
    base.angular_acceleration = 5.0 * Vec3(n(rng), n(rng), n(rng));
    RegressorSample s;
    s.phi = regressor_matrix(base, Vec3(0, 0, 9.81),
                             k % 2 ? RegressorModel::rigid_body : RegressorModel::gravity_torque);
    for (int i = 0; i < 6; ++i) s.z(i) = 50.0 * n(rng);
    const KFState prior = kf_predict(kf);
    kf = kf_update(prior, s);
    min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Mat3>(kf.P).eigenvalues().minCoeff());
    worst_growth = std::max(worst_growth, (kf.P.diagonal() - prior.P.diagonal()).maxCoeff());
  }
  return {min_eig >= -1e-10 && worst_growth <= 1e-12,
          fmt("min eigenvalue %.3g; max diag(P+) - diag(P-) %.3g", min_eig, worst_growth)};
}

Outcome leg_round_trip() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> abd(-0.5, 0.5), hip(-1.2, 1.2), knee(0.3, 2.5);
  std::normal_distribution<double> f(0.0, 60.0);
  LegModel leg;
  leg.link_lengths = Vec3(0.06, 0.213, 0.213);
  double rt = 0.0, fd = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Vec3 q(abd(rng), hip(rng), -knee(rng));
    const Vec3 force(f(rng), f(rng), f(rng));
    const Mat3 j = leg_jacobian(leg, q);
    rt = std::max(rt, (leg_grf_from_torques(leg, q, j.transpose() * force) - force).cwiseAbs().maxCoeff());
    Mat3 numeric;
    for (int c = 0; c < 3; ++c) {
      Vec3 dq = Vec3::Zero();
      dq(c) = 1e-6;
      numeric.col(c) = (leg_forward_kinematics(leg, q + dq) - leg_forward_kinematics(leg, q - dq)) / 2e-6;
    }
    fd = std::max(fd, (j - numeric).cwiseAbs().maxCoeff());
  }
  return {rt <= 1e-9 && fd <= 1e-5, fmt("round trip error %.3g N; Jacobian vs differences %.3g", rt, fd)};
}

Outcome offcenter_com() {
  const ScenarioFile f = bundled("offcenter_payload");
  const auto& base = f.scenario.true_base_parameters;
  const auto& ev = f.scenario.payload_events.at(0);
  const double m = base.m + ev.mass_delta;
  const double cx_true = (base.h_x + ev.mass_delta * ev.attach_point[0]) / m;
  int good = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const RunResult r = run_experiment(with_seed(f, seed));
    double sum = 0.0;
    int n = 0;
    for (std::size_t k = 0; k < r.trace.size(); ++k) {
      if (r.trace[k].time < ev.time + 10.0) continue;
      sum += com_from_parameters(r.published_total[k]).x;
      ++n;
    }
    const double err = std::abs(sum / n - cx_true);
    if (err <= 0.003) ++good;
    worst = std::max(worst, err);
  }
  return {good == 10, fmt("true c_x %.2f mm; %.0f/10 seeds within 3 mm; worst error %.2f mm",
                          cx_true * 1e3, good, worst * 1e3)};
}

Outcome determinism() {
  const ScenarioFile f = bundled("payload_switching");
  const fs::path root = fs::temp_directory_path() / "qpi_acceptance_determinism";
  fs::remove_all(root);
  cmd_run(f, 7, root / "a");
  cmd_run(f, 7, root / "b");
  auto read = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  };
  const std::string a = read(root / "a" / "trace.csv");
  const bool same = !a.empty() && a == read(root / "b" / "trace.csv");
  fs::remove_all(root);
  return {same, fmt("trace.csv of %.0f bytes", static_cast<double>(a.size())) +
                    (same ? " identical" : " differs")};
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "regressor consistency", 1.0, regressor_consistency},
      {2, "KF matches batch least squares", 1.0, kf_batch_equivalence},
      {3, "covariance drop on stepping", 10.0, covariance_drop},
      {4, "payload tracking", 20.0, payload_tracking},
      {5, "bias robustness vs RLS", 30.0, bias_ordering},
      {6, "covariance PSD and monotone", 5.0, covariance_invariants},
      {7, "leg round trip", 1.0, leg_round_trip},
      {8, "off-center COM recovery", 20.0, offcenter_com},
      {9, "determinism", 10.0, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.limit_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::printf("[%s] criterion %d %s: %s (%.2f s, limit %.0f s%s)\n", pass ? "PASS" : "FAIL", c.id,
                c.name, o.detail.c_str(), secs, c.limit_s, in_time ? "" : ", too slow");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
