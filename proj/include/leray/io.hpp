#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "leray/dynamics.hpp"
#include "leray/experiments.hpp"

namespace leray::io {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr const char* kArtifactVersion = "0.1.0";

/// Everything a run needs, in JSON sections model / noise / solver / study /
/// initial / corrector. The corrector sweep takes dim and gamma from the
/// model and noise sections and its N list from noise.n_sweep.
struct Config {
  experiments::RateStudyConfig study;
  experiments::CorrectorSweepConfig corrector;

  experiments::CorrectorSweepConfig corrector_sweep() const;
  friend bool operator==(const Config&, const Config&);
};

json to_json(const Config& cfg);
/// Missing keys keep the values of `base`; unknown keys and wrong types are
/// validation errors.
Config config_from_json(const json& j, const Config& base);
Config load_config(const fs::path& path, const Config& base);

/// FNV-1a 64 of the key-sorted compact dump, as 16 hex digits.
std::string hash_json(const json& j);

json record_to_json(const experiments::ExperimentRecord& r);
experiments::ExperimentRecord record_from_json(const json& j);
std::string record_line(const experiments::ExperimentRecord& r);
std::vector<experiments::ExperimentRecord> read_records(const fs::path& path);

json corrector_row_to_json(const experiments::CorrectorRow& r);

/// Appends one line per call; the file is truncated when the writer opens.
class JsonlWriter {
 public:
  explicit JsonlWriter(const fs::path& path);
  void write(const json& j);
  void write_record(const experiments::ExperimentRecord& r);

 private:
  fs::path path_;
};

struct RunManifest {
  std::string subcommand;
  std::string config_path;
  json config;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string timestamp;
  std::string status = "running";
};
json to_json(const RunManifest& m);
void write_manifest(const fs::path& dir, const RunManifest& m);
std::string utc_timestamp();

/// Exclusive marker file; a second lock on the same directory fails until
/// the first is released.
class RunLock {
 public:
  explicit RunLock(const fs::path& dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  fs::path path_;
};

/// CSV columns log_N, log_error, log_ci_lo, log_ci_hi, reference,
/// reference_slope. The reference line has the predicted slope and passes
/// through the first record.
void emit_plot_data(const std::vector<experiments::ExperimentRecord>& records, double predicted_exponent,
                    const fs::path& path);

struct PlotData {
  std::vector<double> log_n;
  std::vector<double> log_error;
  std::vector<double> log_ci_lo;
  std::vector<double> log_ci_hi;
  std::vector<double> reference;
  std::vector<double> reference_slope;
};
PlotData read_plot_data(const fs::path& path);
/// Least-squares fit over the finite rows.
experiments::LineFit fit_plot_data(const PlotData& data);

/// {dim, cutoff, modes: [{k, re, im}]} over canonical representatives only.
json field_to_json(const spectral::SpectralField& u);
spectral::SpectralField field_from_json(const json& j);

struct CheckpointHeader {
  std::string scheme;
  double dt = 0.0;
  double T = 0.0;
  int M = 0;
  int N = 0;
  double gamma = 0.0;
  double gamma0 = 0.0;
  double kappa = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t sample = 0;
};
json trajectory_to_json(const CheckpointHeader& header, const dynamics::Trajectory& traj);
void write_json(const fs::path& path, const json& j);
json read_json(const fs::path& path);

}  // namespace leray::io
