#pragma once

#include "qpi/adaptation.hpp"
#include "qpi/estimators.hpp"
#include "qpi/scenario_io.hpp"
#include "qpi/simulator.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qpi {

/// One row of trace.csv.
struct TraceRow {
  double time{0.0};
  ParameterVector truth;
  ParameterVector kf;
  ParameterVector rls;
  Vec3 kf_covariance{Vec3::Zero()};  ///< diag(P)
  std::uint8_t gated{0};
  bool fresh{false};
  std::string event{"none"};
};

inline constexpr std::string_view kTraceHeader =
    "time,true_m,true_h_x,true_h_y,kf_m,kf_h_x,kf_h_y,rls_m,rls_h_x,rls_h_y,"
    "kf_P_m,kf_P_h_x,kf_P_h_y,gated_mask,fresh,event";

struct CovarianceSummary {
  double initial{0.0};
  double min{0.0};
  double max{0.0};
  double final{0.0};
  double mean{0.0};
};

struct EstimatorMetrics {
  std::string estimator;
  Vec3 terminal_error{Vec3::Zero()};  ///< |estimate - truth| at the last tick
  Vec3 final_mae{Vec3::Zero()};       ///< mean |error| over the final 25% of ticks
  double convergence_time_m{-1.0};    ///< s; -1 if never settled in the band
  double convergence_time_h{-1.0};
  CovarianceSummary covariance_trace;
  double duty_cycle{1.0};

  std::vector<std::pair<std::string, double>> flatten() const {
    return {{"terminal_error_m", terminal_error(0)},
            {"terminal_error_h_x", terminal_error(1)},
            {"terminal_error_h_y", terminal_error(2)},
            {"final_mae_m", final_mae(0)},
            {"final_mae_h_x", final_mae(1)},
            {"final_mae_h_y", final_mae(2)},
            {"convergence_time_m", convergence_time_m},
            {"convergence_time_h", convergence_time_h},
            {"cov_trace_initial", covariance_trace.initial},
            {"cov_trace_min", covariance_trace.min},
            {"cov_trace_max", covariance_trace.max},
            {"cov_trace_final", covariance_trace.final},
            {"cov_trace_mean", covariance_trace.mean},
            {"duty_cycle", duty_cycle}};
  }
};

struct RunReport {
  std::string scenario_name;
  std::uint64_t seed{0};
  std::size_t ticks{0};
  std::vector<EstimatorMetrics> estimators;  ///< kf_published, kf_estimate, rls
  std::uint64_t kf_stream_checksum{0};
  std::uint64_t rls_stream_checksum{0};

  const EstimatorMetrics& metrics(std::string_view name) const {
    for (const auto& m : estimators)
      if (m.estimator == name) return m;
    throw Error("no metrics for estimator '" + std::string(name) + "'");
  }
};

struct RunResult {
  std::vector<TraceRow> trace;
  std::vector<ParameterVector> published_total;  ///< published base model plus legs, per tick
  std::vector<Mat3> rls_covariance;
  RunReport report;
};

// Convergence bands used for the time-to-convergence metric.
inline constexpr double kMassBand = 0.5;     // kg
inline constexpr double kMomentBand = 0.01;  // kg*m

namespace detail {

class Fnv1a {
 public:
  void add(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      hash_ ^= p[i];
      hash_ *= 1099511628211ull;
    }
  }
  void add(double v) { add(&v, sizeof v); }
  void add(const Vec3& v) {
    for (int i = 0; i < 3; ++i) add(v(i));
  }
  void add(const RobotSnapshot& s) {
    add(s.time);
    add(s.base.linear_acceleration);
    add(s.base.angular_velocity);
    add(s.base.angular_acceleration);
    add(s.gravity);
    for (const auto& f : s.feet) {
      add(f.position);
      add(f.force);
      const unsigned char flags = static_cast<unsigned char>((f.contact_measured ? 1 : 0) | (f.contact_scheduled ? 2 : 0));
      add(&flags, 1);
    }
  }
  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_{1469598103934665603ull};
};

inline Vec3 abs_error(const ParameterVector& est, const ParameterVector& truth) {
  return (est.vector() - truth.vector()).cwiseAbs();
}

inline double settle_time(const std::vector<double>& times, const std::vector<bool>& inside) {
  if (inside.empty() || !inside.back()) return -1.0;
  std::size_t k = inside.size();
  while (k > 0 && inside[k - 1]) --k;
  return times[k];
}

inline EstimatorMetrics compute_metrics(std::string name, const std::vector<double>& times,
                                        const std::vector<ParameterVector>& truth,
                                        const std::vector<ParameterVector>& estimate,
                                        const std::vector<double>& cov_trace, double duty_cycle) {
  EstimatorMetrics m;
  m.estimator = std::move(name);
  const std::size_t n = times.size();
  if (n == 0) return m;
  m.terminal_error = abs_error(estimate.back(), truth.back());
  const std::size_t tail_start = n - std::max<std::size_t>(1, n / 4);
  Vec3 acc = Vec3::Zero();
  for (std::size_t k = tail_start; k < n; ++k) acc += abs_error(estimate[k], truth[k]);
  m.final_mae = acc / static_cast<double>(n - tail_start);

  std::vector<bool> mass_in(n), moment_in(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Vec3 e = abs_error(estimate[k], truth[k]);
    mass_in[k] = e(0) <= kMassBand;
    moment_in[k] = e(1) <= kMomentBand && e(2) <= kMomentBand;
  }
  m.convergence_time_m = settle_time(times, mass_in);
  m.convergence_time_h = settle_time(times, moment_in);

  m.covariance_trace.initial = cov_trace.front();
  m.covariance_trace.final = cov_trace.back();
  m.covariance_trace.min = *std::min_element(cov_trace.begin(), cov_trace.end());
  m.covariance_trace.max = *std::max_element(cov_trace.begin(), cov_trace.end());
  m.covariance_trace.mean =
      std::accumulate(cov_trace.begin(), cov_trace.end(), 0.0) / static_cast<double>(n);
  m.duty_cycle = duty_cycle;
  return m;
}

}  // namespace detail

/// Runs the gated, thresholded KF pipeline and the raw (ungated) RLS in
/// lockstep on the same noisy stream.
inline RunResult run_experiment(const ScenarioFile& file) {
  ScenarioRunner runner(file.scenario);
  AdaptationConfig adaptation = file.experiment.adaptation;
  adaptation.regressor_model = file.scenario.regressor_model;
  AdaptationPipeline pipeline(file.experiment.kf, adaptation);
  RLSState rls = file.experiment.rls;

  RunResult result;
  const std::size_t n = file.scenario.tick_count();
  result.trace.reserve(n);
  result.published_total.reserve(n);
  result.rls_covariance.reserve(n);

  std::vector<double> times, kf_trace, rls_trace;
  std::vector<ParameterVector> truth, kf_est, rls_est;
  std::size_t fresh_ticks = 0;
  detail::Fnv1a kf_stream, rls_stream;

  while (!runner.done()) {
    const SimTick tick = runner.next();

    kf_stream.add(tick.noisy);
    const AdaptationResult& step = pipeline.tick(tick.noisy);

    rls_stream.add(tick.noisy);
    rls = rls_update(rls, build_regressor(tick.noisy, file.scenario.regressor_model));

    TraceRow row;
    row.time = tick.noisy.time;
    row.truth = tick.pi_true;
    row.kf = step.kf.pi_hat;
    row.rls = rls.pi_hat;
    row.kf_covariance = step.kf.P.diagonal();
    row.gated = step.gated;
    row.fresh = step.published.fresh;
    row.event = tick.event_label;
    result.trace.push_back(row);
    result.published_total.push_back(step.published.pi_base + adaptation.leg_contribution);
    result.rls_covariance.push_back(rls.P);

    times.push_back(row.time);
    truth.push_back(row.truth);
    kf_est.push_back(row.kf);
    rls_est.push_back(row.rls);
    kf_trace.push_back(step.kf.P.trace());
    rls_trace.push_back(rls.P.trace());
    if (row.fresh) ++fresh_ticks;
  }

  RunReport& report = result.report;
  report.scenario_name = file.scenario.name;
  report.seed = file.scenario.noise.seed;
  report.ticks = times.size();
  const double duty = times.empty() ? 0.0 : static_cast<double>(fresh_ticks) / static_cast<double>(times.size());
  report.estimators.push_back(detail::compute_metrics("kf_published", times, truth,
                                                      result.published_total, kf_trace, duty));
  report.estimators.push_back(detail::compute_metrics("kf_estimate", times, truth, kf_est, kf_trace, 1.0));
  report.estimators.push_back(detail::compute_metrics("rls", times, truth, rls_est, rls_trace, 1.0));
  report.kf_stream_checksum = kf_stream.value();
  report.rls_stream_checksum = rls_stream.value();
  return result;
}

inline ScenarioFile with_seed(ScenarioFile file, std::uint64_t seed) {
  file.scenario.noise.seed = seed;
  return file;
}

// ---------------------------------------------------------------------------
// Output formatting

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

/// RFC-4180 field quoting.
inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string trace_csv(const std::vector<TraceRow>& rows) {
  std::ostringstream os;
  os << kTraceHeader << "\r\n";
  for (const auto& r : rows) {
    os << format_number(r.time);
    for (const auto* p : {&r.truth, &r.kf, &r.rls}) {
      os << ',' << format_number(p->m) << ',' << format_number(p->h_x) << ','
         << format_number(p->h_y);
    }
    for (int i = 0; i < 3; ++i) os << ',' << format_number(r.kf_covariance(i));
    os << ',' << static_cast<int>(r.gated) << ',' << (r.fresh ? 1 : 0) << ',' << csv_field(r.event)
       << "\r\n";
  }
  return os.str();
}

inline std::string report_text(const RunReport& report) {
  std::ostringstream os;
  os << "# Estimation report\n"
     << "# Hardware tracking-error metrics (base height, roll, pitch) need a closed\n"
     << "# control loop and are replaced by estimation errors against ground truth:\n"
     << "#   terminal_error_*   |estimate - truth| at the last tick (kg, kg*m)\n"
     << "#   final_mae_*        mean |error| over the final 25% of ticks\n"
     << "#   convergence_time_* first time after which the error stays within\n"
     << "#                      +-" << kMassBand << " kg / +-" << kMomentBand << " kg*m (-1: never)\n"
     << "#   cov_trace_*        trace of the estimator covariance over the run\n"
     << "#   duty_cycle         fraction of ticks with a fresh published model\n"
     << "scenario: " << report.scenario_name << '\n'
     << "seed: " << report.seed << '\n'
     << "ticks: " << report.ticks << '\n'
     << "kf_stream_checksum: " << report.kf_stream_checksum << '\n'
     << "rls_stream_checksum: " << report.rls_stream_checksum << '\n'
     << "lockstep: " << (report.kf_stream_checksum == report.rls_stream_checksum ? "ok" : "MISMATCH")
     << '\n';
  for (const auto& m : report.estimators) {
    os << '[' << m.estimator << "]\n";
    for (const auto& [key, value] : m.flatten()) os << key << ": " << format_number(value) << '\n';
  }
  return os.str();
}

/// Writes via a temporary file and a rename so readers never see partial output.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << contents;
    if (!out.flush()) throw Error("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Commands

inline RunReport cmd_run(const ScenarioFile& file, std::uint64_t seed,
                         const std::filesystem::path& out_dir) {
  const RunResult result = run_experiment(with_seed(file, seed));
  std::filesystem::create_directories(out_dir);
  write_file_atomic(out_dir / "trace.csv", trace_csv(result.trace));
  write_file_atomic(out_dir / "report.txt", report_text(result.report));
  return result.report;
}

struct MetricSummary {
  std::string estimator;
  std::string metric;
  double mean{0.0};
  double stddev{0.0};  ///< sample standard deviation, 0 when n = 1
  std::size_t n{0};
};

inline std::vector<MetricSummary> summarize(const std::vector<RunReport>& reports) {
  std::vector<MetricSummary> out;
  if (reports.empty()) return out;
  for (std::size_t e = 0; e < reports.front().estimators.size(); ++e) {
    const auto names = reports.front().estimators[e].flatten();
    for (std::size_t k = 0; k < names.size(); ++k) {
      std::vector<double> values;
      for (const auto& r : reports) values.push_back(r.estimators[e].flatten()[k].second);
      MetricSummary s;
      s.estimator = reports.front().estimators[e].estimator;
      s.metric = names[k].first;
      s.n = values.size();
      s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.n);
      if (s.n > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(ss / static_cast<double>(s.n - 1));
      }
      out.push_back(s);
    }
  }
  return out;
}

inline std::string compare_csv(const std::vector<MetricSummary>& rows) {
  std::ostringstream os;
  os << "estimator,metric,mean,std,n\r\n";
  for (const auto& r : rows) {
    os << csv_field(r.estimator) << ',' << csv_field(r.metric) << ',' << format_number(r.mean) << ','
       << format_number(r.stddev) << ',' << r.n << "\r\n";
  }
  return os.str();
}

/// Runs every seed first and writes compare.csv only if all of them succeed.
inline std::vector<MetricSummary> cmd_compare(const ScenarioFile& file,
                                              const std::vector<std::uint64_t>& seeds,
                                              const std::filesystem::path& out_dir) {
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  std::vector<RunReport> reports;
  for (auto seed : seeds) {
    reports.push_back(cmd_run(file, seed, out_dir / ("seed_" + std::to_string(seed))));
  }
  const auto summary = summarize(reports);
  write_file_atomic(out_dir / "compare.csv", compare_csv(summary));
  return summary;
}

enum class SweepParameter { noise_scale, forgetting, thresholds };

inline std::optional<SweepParameter> sweep_parameter_from_string(std::string_view s) {
  if (s == "noise-scale") return SweepParameter::noise_scale;
  if (s == "forgetting") return SweepParameter::forgetting;
  if (s == "thresholds") return SweepParameter::thresholds;
  return std::nullopt;
}

inline std::string_view to_string(SweepParameter p) {
  switch (p) {
    case SweepParameter::noise_scale: return "noise-scale";
    case SweepParameter::forgetting: return "forgetting";
    case SweepParameter::thresholds: return "thresholds";
  }
  return "unknown";
}

/// noise-scale multiplies every noise standard deviation, forgetting sets the
/// RLS factor, thresholds multiplies all three covariance limits.
inline ScenarioFile apply_sweep_value(ScenarioFile file, SweepParameter param, double value) {
  switch (param) {
    case SweepParameter::noise_scale: {
      if (!(value >= 0.0)) throw ConfigError("noise-scale values must be non-negative");
      auto& n = file.scenario.noise;
      n.force_noise_std *= value;
      n.position_noise_std *= value;
      n.accel_noise_std *= value;
      n.angular_accel_noise_std *= value;
      break;
    }
    case SweepParameter::forgetting:
      if (!(value > 0.0 && value <= 1.0)) throw ConfigError("forgetting values must lie in (0, 1]");
      file.experiment.rls.lambda = value;
      break;
    case SweepParameter::thresholds:
      if (!(value > 0.0)) throw ConfigError("threshold scales must be positive");
      file.experiment.adaptation.thresholds *= value;
      break;
  }
  return file;
}

struct SweepPoint {
  double value{0.0};
  RunReport report;
};

inline std::string sweep_csv(SweepParameter param, const std::vector<SweepPoint>& points) {
  std::ostringstream os;
  os << "parameter,value,estimator,metric,result\r\n";
  for (const auto& p : points) {
    for (const auto& m : p.report.estimators) {
      for (const auto& [key, v] : m.flatten()) {
        os << to_string(param) << ',' << format_number(p.value) << ',' << csv_field(m.estimator) << ','
           << key << ',' << format_number(v) << "\r\n";
      }
    }
  }
  return os.str();
}

inline std::vector<SweepPoint> cmd_sweep(const ScenarioFile& file, SweepParameter param,
                                         const std::vector<double>& values, std::uint64_t seed,
                                         const std::filesystem::path& out_dir) {
  if (values.empty()) throw ConfigError("at least one sweep value is required");
  std::vector<ScenarioFile> variants;
  for (double v : values) variants.push_back(apply_sweep_value(file, param, v));
  std::vector<SweepPoint> points;
  for (std::size_t i = 0; i < values.size(); ++i) {
    points.push_back({values[i], cmd_run(variants[i], seed, out_dir / ("value_" + std::to_string(i)))});
  }
  write_file_atomic(out_dir / "sweep.csv", sweep_csv(param, points));
  return points;
}

}  // namespace qpi
