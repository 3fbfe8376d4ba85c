#include "leray/io.hpp"

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "leray/error.hpp"

namespace leray::io {

using experiments::CorrectorRow;
using experiments::ExperimentRecord;

namespace {

void check_keys(const json& obj, const std::string& section, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw ValidationError("config section '" + section + "' must be an object");
  for (const auto& [k, v] : obj.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) throw ValidationError("unknown config key '" + section + "." + k + "'");
  }
}

[[noreturn]] void bad_type(const std::string& section, const char* key, const char* what) {
  throw ValidationError("config key '" + section + "." + key + "' must be " + what);
}

void read_int(const json& obj, const std::string& section, const char* key, int& out) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) bad_type(section, key, "an integer");
  out = v.get<int>();
}

void read_u64(const json& obj, const std::string& section, const char* key, std::uint64_t& out) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  if (!v.is_number_unsigned()) bad_type(section, key, "a non-negative integer");
  out = v.get<std::uint64_t>();
}

void read_double(const json& obj, const std::string& section, const char* key, double& out) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  if (!v.is_number()) bad_type(section, key, "a number");
  out = v.get<double>();
}

void read_bool(const json& obj, const std::string& section, const char* key, bool& out) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  if (!v.is_boolean()) bad_type(section, key, "a boolean");
  out = v.get<bool>();
}

void read_string(const json& obj, const std::string& section, const char* key, std::string& out) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  if (!v.is_string()) bad_type(section, key, "a string");
  out = v.get<std::string>();
}

void read_int_list(const json& obj, const std::string& section, const char* key, std::vector<int>& out) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  if (!v.is_array()) bad_type(section, key, "an array of integers");
  std::vector<int> vals;
  for (const auto& e : v) {
    if (!e.is_number_integer()) bad_type(section, key, "an array of integers");
    vals.push_back(e.get<int>());
  }
  out = std::move(vals);
}

void read_double_list(const json& obj, const std::string& section, const char* key, std::vector<double>& out) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  if (!v.is_array()) bad_type(section, key, "an array of numbers");
  std::vector<double> vals;
  for (const auto& e : v) {
    if (!e.is_number()) bad_type(section, key, "an array of numbers");
    vals.push_back(e.get<double>());
  }
  out = std::move(vals);
}

std::string transport_name(dynamics::TransportPath p) {
  return p == dynamics::TransportPath::fft ? "fft" : "direct";
}

dynamics::TransportPath parse_transport(const std::string& s) {
  if (s == "fft") return dynamics::TransportPath::fft;
  if (s == "direct") return dynamics::TransportPath::direct;
  throw ValidationError("solver.transport must be 'fft' or 'direct'");
}

}  // namespace

experiments::CorrectorSweepConfig Config::corrector_sweep() const {
  auto c = corrector;
  c.dim = study.dim;
  c.gamma = study.gamma;
  c.n_sweep = study.n_sweep;
  return c;
}

bool operator==(const Config& a, const Config& b) { return to_json(a) == to_json(b); }

json to_json(const Config& cfg) {
  const auto& s = cfg.study;
  json j;
  j["model"] = {{"dim", s.dim}, {"gamma0", s.gamma0}, {"kappa", s.kappa}};
  j["noise"] = {{"gamma", s.gamma}, {"n_sweep", s.n_sweep}};
  j["solver"] = {{"dt", s.dt},
                 {"T", s.T},
                 {"M", s.M},
                 {"scheme", dynamics::scheme_name(s.scheme)},
                 {"save_every", s.save_every},
                 {"transport", transport_name(s.transport)}};
  j["study"] = {{"q", s.q},
                {"alpha", s.alpha},
                {"samples", s.samples},
                {"seed", s.seed},
                {"ci_level", s.ci_level},
                {"bootstrap_resamples", s.bootstrap_resamples},
                {"gaussianity_samples", s.gaussianity_samples},
                {"gaussianity_T", s.gaussianity_T},
                {"gaussian_mode", s.gaussian_mode},
                {"gaussian_component", s.gaussian_component}};
  j["initial"] = {{"cutoff", s.initial.cutoff},
                  {"seed", s.initial.seed},
                  {"norm", s.initial.norm},
                  {"decay", s.initial.decay}};
  j["corrector"] = {{"alphas", cfg.corrector.alphas},
                    {"b", cfg.corrector.b},
                    {"kappa", cfg.corrector.kappa},
                    {"range_factor", cfg.corrector.range_factor},
                    {"check_extension", cfg.corrector.check_extension}};
  return j;
}

Config config_from_json(const json& j, const Config& base) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  check_keys(j, "<root>", {"model", "noise", "solver", "study", "initial", "corrector"});
  Config cfg = base;
  auto& s = cfg.study;
  const json empty = json::object();
  auto section = [&](const char* name) -> const json& { return j.contains(name) ? j.at(name) : empty; };

  const json& model = section("model");
  check_keys(model, "model", {"dim", "gamma0", "kappa"});
  read_int(model, "model", "dim", s.dim);
  read_double(model, "model", "gamma0", s.gamma0);
  read_double(model, "model", "kappa", s.kappa);

  const json& noise = section("noise");
  check_keys(noise, "noise", {"gamma", "n_sweep"});
  read_double(noise, "noise", "gamma", s.gamma);
  read_int_list(noise, "noise", "n_sweep", s.n_sweep);

  const json& solver = section("solver");
  check_keys(solver, "solver", {"dt", "T", "M", "scheme", "save_every", "transport"});
  read_double(solver, "solver", "dt", s.dt);
  read_double(solver, "solver", "T", s.T);
  read_int(solver, "solver", "M", s.M);
  std::string scheme = dynamics::scheme_name(s.scheme);
  read_string(solver, "solver", "scheme", scheme);
  s.scheme = dynamics::parse_scheme(scheme);
  read_int(solver, "solver", "save_every", s.save_every);
  std::string transport = transport_name(s.transport);
  read_string(solver, "solver", "transport", transport);
  s.transport = parse_transport(transport);

  const json& study = section("study");
  check_keys(study, "study",
             {"q", "alpha", "samples", "seed", "ci_level", "bootstrap_resamples", "gaussianity_samples",
              "gaussianity_T", "gaussian_mode", "gaussian_component"});
  read_double(study, "study", "q", s.q);
  read_double(study, "study", "alpha", s.alpha);
  read_int(study, "study", "samples", s.samples);
  read_u64(study, "study", "seed", s.seed);
  read_double(study, "study", "ci_level", s.ci_level);
  read_int(study, "study", "bootstrap_resamples", s.bootstrap_resamples);
  read_int(study, "study", "gaussianity_samples", s.gaussianity_samples);
  read_double(study, "study", "gaussianity_T", s.gaussianity_T);
  read_int_list(study, "study", "gaussian_mode", s.gaussian_mode);
  read_int(study, "study", "gaussian_component", s.gaussian_component);

  const json& initial = section("initial");
  check_keys(initial, "initial", {"cutoff", "seed", "norm", "decay"});
  read_int(initial, "initial", "cutoff", s.initial.cutoff);
  read_u64(initial, "initial", "seed", s.initial.seed);
  read_double(initial, "initial", "norm", s.initial.norm);
  read_double(initial, "initial", "decay", s.initial.decay);

  const json& corr = section("corrector");
  check_keys(corr, "corrector", {"alphas", "b", "kappa", "range_factor", "check_extension"});
  read_double_list(corr, "corrector", "alphas", cfg.corrector.alphas);
  read_double(corr, "corrector", "b", cfg.corrector.b);
  read_double(corr, "corrector", "kappa", cfg.corrector.kappa);
  read_int(corr, "corrector", "range_factor", cfg.corrector.range_factor);
  read_bool(corr, "corrector", "check_extension", cfg.corrector.check_extension);
  return cfg;
}

Config load_config(const fs::path& path, const Config& base) {
  return config_from_json(read_json(path), base);
}

std::string hash_json(const json& j) {
  // nlohmann::json keeps object keys sorted, so the dump is order independent.
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json record_to_json(const ExperimentRecord& r) {
  return {{"study", r.study},           {"N", r.N},
          {"error", r.error},           {"ci_low", r.ci_low},
          {"ci_high", r.ci_high},       {"error_fine", r.error_fine},
          {"epsilon_N", r.epsilon_N},   {"D_N", r.D_N},
          {"samples_used", r.samples_used}, {"flagged", r.flagged},
          {"config_hash", r.config_hash},   {"seed", r.seed}};
}

ExperimentRecord record_from_json(const json& j) {
  try {
    ExperimentRecord r;
    r.study = j.at("study").get<std::string>();
    r.N = j.at("N").get<int>();
    r.error = j.at("error").get<double>();
    r.ci_low = j.at("ci_low").get<double>();
    r.ci_high = j.at("ci_high").get<double>();
    r.error_fine = j.at("error_fine").get<double>();
    r.epsilon_N = j.at("epsilon_N").get<double>();
    r.D_N = j.at("D_N").get<double>();
    r.samples_used = j.at("samples_used").get<int>();
    r.flagged = j.at("flagged").get<int>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    return r;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed record: ") + e.what());
  }
}

std::string record_line(const ExperimentRecord& r) { return record_to_json(r).dump(); }

std::vector<ExperimentRecord> read_records(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open records file " + path.string());
  std::vector<ExperimentRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError(std::string("malformed JSONL line: ") + e.what());
    }
    out.push_back(record_from_json(j));
  }
  return out;
}

json corrector_row_to_json(const CorrectorRow& r) {
  return {{"dim", r.dim},         {"gamma", r.gamma},       {"N", r.N},
          {"alpha", r.alpha},     {"b", r.b},               {"kappa", r.kappa},
          {"epsilon_N", r.epsilon_N}, {"D_N", r.D_N},       {"mode_range", r.mode_range},
          {"op_norm", r.op_norm}, {"ratio", r.ratio},       {"ratio_extended", r.ratio_extended}};
}

JsonlWriter::JsonlWriter(const fs::path& path) : path_(path) {
  std::ofstream out(path_, std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot create " + path_.string());
}

void JsonlWriter::write(const json& j) {
  std::ofstream out(path_, std::ios::app);
  out << j.dump() << '\n';
  if (!out) throw RuntimeFailure("write failed for " + path_.string());
}

void JsonlWriter::write_record(const ExperimentRecord& r) { write(record_to_json(r)); }

json to_json(const RunManifest& m) {
  return {{"subcommand", m.subcommand}, {"config_path", m.config_path},
          {"config", m.config},         {"config_hash", m.config_hash},
          {"artifact_version", kArtifactVersion}, {"timestamp", m.timestamp},
          {"seed", m.seed},             {"status", m.status}};
}

void write_manifest(const fs::path& dir, const RunManifest& m) { write_json(dir / "manifest.json", to_json(m)); }

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

RunLock::RunLock(const fs::path& dir) : path_(dir / "run.lock") {
  std::FILE* f = std::fopen(path_.c_str(), "wx");
  if (!f) {
    if (errno == EEXIST) throw RuntimeFailure("run directory is locked by another process: " + path_.string());
    throw RuntimeFailure("cannot create lock file " + path_.string());
  }
  std::fclose(f);
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

void emit_plot_data(const std::vector<ExperimentRecord>& records, double predicted_exponent, const fs::path& path) {
  if (records.empty()) throw ValidationError("no records to emit");
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw RuntimeFailure("cannot create " + path.string());
  std::fprintf(f, "log_N,log_error,log_ci_lo,log_ci_hi,reference,reference_slope\n");
  const double x0 = std::log(static_cast<double>(records.front().N));
  const double y0 = std::log(records.front().error);
  for (const auto& r : records) {
    const double x = std::log(static_cast<double>(r.N));
    std::fprintf(f, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", x, std::log(r.error), std::log(r.ci_low),
                 std::log(r.ci_high), y0 + predicted_exponent * (x - x0), predicted_exponent);
  }
  if (std::fclose(f) != 0) throw RuntimeFailure("write failed for " + path.string());
}

PlotData read_plot_data(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open plot data " + path.string());
  std::string line;
  std::getline(in, line);
  PlotData d;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) vals.push_back(std::strtod(cell.c_str(), nullptr));
    if (vals.size() != 6) throw ValidationError("plot data row needs 6 columns");
    d.log_n.push_back(vals[0]);
    d.log_error.push_back(vals[1]);
    d.log_ci_lo.push_back(vals[2]);
    d.log_ci_hi.push_back(vals[3]);
    d.reference.push_back(vals[4]);
    d.reference_slope.push_back(vals[5]);
  }
  return d;
}

experiments::LineFit fit_plot_data(const PlotData& data) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < data.log_n.size(); ++i) {
    if (!std::isfinite(data.log_error[i])) continue;
    x.push_back(data.log_n[i]);
    y.push_back(data.log_error[i]);
  }
  return experiments::fit_line(x, y);
}

json field_to_json(const spectral::SpectralField& u) {
  const auto& lat = u.lattice();
  const int d = u.dim();
  json modes = json::array();
  for (std::size_t i : lat.canonical_indices()) {
    const auto& k = lat.mode(i);
    json kk = json::array(), re = json::array(), im = json::array();
    for (int c = 0; c < d; ++c) {
      kk.push_back(k[c]);
      re.push_back(u.at(i)[static_cast<std::size_t>(c)].real());
      im.push_back(u.at(i)[static_cast<std::size_t>(c)].imag());
    }
    modes.push_back({{"k", kk}, {"re", re}, {"im", im}});
  }
  return {{"dim", d}, {"cutoff", u.cutoff()}, {"modes", modes}};
}

spectral::SpectralField field_from_json(const json& j) {
  try {
    const int d = j.at("dim").get<int>();
    const int cutoff = j.at("cutoff").get<int>();
    if (d != 2 && d != 3) throw ValidationError("snapshot dim must be 2 or 3");
    if (cutoff < 1) throw ValidationError("snapshot cutoff must be >= 1");
    spectral::SpectralField u(spectral::Lattice::ball(d, cutoff));
    for (const auto& m : j.at("modes")) {
      const auto k = m.at("k").get<std::vector<int>>();
      const auto re = m.at("re").get<std::vector<double>>();
      const auto im = m.at("im").get<std::vector<double>>();
      if (static_cast<int>(k.size()) != d || static_cast<int>(re.size()) != d || static_cast<int>(im.size()) != d) {
        throw ValidationError("snapshot mode entries need dim components");
      }
      spectral::Mode mode{{k[0], k[1], d == 3 ? k[2] : 0}};
      auto idx = u.lattice().find(mode);
      if (!idx || !u.lattice().canonical(*idx)) throw ValidationError("snapshot mode is not a canonical lattice mode");
      std::vector<spectral::cplx> v(static_cast<std::size_t>(d));
      for (int c = 0; c < d; ++c) v[static_cast<std::size_t>(c)] = {re[static_cast<std::size_t>(c)], im[static_cast<std::size_t>(c)]};
      u.set_pair(*idx, v);
    }
    return u;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed snapshot: ") + e.what());
  }
}

json trajectory_to_json(const CheckpointHeader& h, const dynamics::Trajectory& traj) {
  json frames = json::array();
  for (std::size_t f = 0; f < traj.frames.size(); ++f) {
    frames.push_back({{"t", traj.times[f]}, {"step", traj.steps[f]}, {"field", field_to_json(traj.frames[f])}});
  }
  json header = {{"scheme", h.scheme}, {"dt", h.dt},         {"T", h.T},
                 {"M", h.M},           {"N", h.N},           {"gamma", h.gamma},
                 {"gamma0", h.gamma0}, {"kappa", h.kappa},   {"seed", h.seed},
                 {"sample", h.sample}};
  return {{"header", header}, {"frames", frames}};
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot create " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw RuntimeFailure("write failed for " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace leray::io
