// Copyright 2026 The AirPool Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Experiment orchestration: INI configuration, the sweep experiments, CSV,
// SVG and metadata emission, and the bound-validation gate.

#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <functional>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <openssl/evp.h>

#include "airpool/airpool.hpp"

namespace airpool {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ExperimentKind { TradeoffCurve, AlphaOptimality, BoundValidation, SyntheticE2E, LatencyTable };

inline std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::TradeoffCurve: return "tradeoff_curve";
    case ExperimentKind::AlphaOptimality: return "alpha_optimality";
    case ExperimentKind::BoundValidation: return "bound_validation";
    case ExperimentKind::SyntheticE2E: return "synthetic_e2e";
    case ExperimentKind::LatencyTable: return "latency_table";
  }
  return "unknown";
}

inline ExperimentKind parse_experiment_kind(const std::string& s) {
  for (auto k : {ExperimentKind::TradeoffCurve, ExperimentKind::AlphaOptimality,
                 ExperimentKind::BoundValidation, ExperimentKind::SyntheticE2E,
                 ExperimentKind::LatencyTable}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("experiment.kind: unknown experiment '" + s + "'");
}

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::LatencyTable;
  SystemParams system;
  std::string feature_model = "rectified_gaussian";
  std::vector<std::string> distributions{"rectified_gaussian", "uniform", "exponential"};
  std::string pooling = "max";
  std::vector<double> snr_grid_db;
  std::vector<double> alpha_grid;
  std::size_t trials = 100000;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  unsigned workers = 0;  // 0: available parallelism
  int q_bits = 6;
  // Synthetic end-to-end task.
  std::size_t dataset_size = 5000;
  std::size_t epochs = 200;
  double learning_rate = 0.1;
  std::size_t trials_per_sample = 20;
  // Bound validation: simulate with noise power scaled by this factor while the
  // bounds keep the nominal value. δ is loose by up to K² at α = 1, so only
  // scales well above that are guaranteed to trip the channel-bound check.
  double fault_noise_scale = 1.0;

  unsigned resolved_workers() const { return workers == 0 ? default_workers() : workers; }

  void validate() const {
    try {
      system.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("system: ") + e.what());
    }
    const bool monte_carlo = kind != ExperimentKind::LatencyTable;
    if (monte_carlo && trials < 10000) {
      throw ConfigError("experiment.trials: Monte Carlo experiments need >= 10000 trials");
    }
    if (snr_grid_db.empty()) throw ConfigError("sweep.snr_db: grid must be nonempty");
    if (kind != ExperimentKind::LatencyTable && kind != ExperimentKind::SyntheticE2E &&
        alpha_grid.empty()) {
      throw ConfigError("sweep.alpha: grid must be nonempty");
    }
    for (double a : alpha_grid) {
      if (!(a >= 1.0 && a <= kAlphaMax)) throw ConfigError("sweep.alpha: values must lie in [1, 128]");
    }
    if (!std::is_sorted(alpha_grid.begin(), alpha_grid.end())) {
      throw ConfigError("sweep.alpha: grid must be ascending");
    }
    if (pooling != "max" && pooling != "average") {
      throw ConfigError("features.pooling: expected 'max' or 'average'");
    }
    if (q_bits < 1) throw ConfigError("latency.q_bits: must be >= 1");
    if (trials_per_sample < 1) throw ConfigError("sensing.trials_per_sample: must be >= 1");
    if (dataset_size < 10) throw ConfigError("sensing.dataset_size: must be >= 10");
    if (!(learning_rate > 0.0)) throw ConfigError("sensing.learning_rate: must be > 0");
    if (!(fault_noise_scale > 0.0)) throw ConfigError("validation.fault_noise_scale: must be > 0");
  }
};

/// Built-in settings of each experiment.
inline ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  switch (kind) {
    case ExperimentKind::LatencyTable:
      c.snr_grid_db = {6.0, 10.0, 16.0};
      break;
    case ExperimentKind::TradeoffCurve:
      c.snr_grid_db = {10.0};
      c.alpha_grid = geometric_grid(1.0, 64.0, 25);
      break;
    case ExperimentKind::AlphaOptimality:
      c.snr_grid_db = {20.0, 25.0, 30.0, 35.0, 40.0};
      c.alpha_grid = default_alpha_grid();
      break;
    case ExperimentKind::BoundValidation:
      c.snr_grid_db = {0.0, 6.0, 12.0};
      c.alpha_grid = {1.0, 2.0, 4.0, 8.0, 16.0};
      break;
    case ExperimentKind::SyntheticE2E:
      c.system.k_sensors = 4;
      c.system.n_features = 4;
      c.snr_grid_db = {0.0, 5.0, 10.0, 15.0, 20.0};
      break;
  }
  return c;
}

namespace detail {

inline double parse_double(const std::string& field, const std::string& text) {
  double v = 0.0;
  const std::string t = [&] {
    const auto b = text.find_first_not_of(" \t");
    const auto e = text.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : text.substr(b, e - b + 1);
  }();
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError(field + ": expected a number, got '" + text + "'");
  }
  return v;
}

inline std::uint64_t parse_uint(const std::string& field, const std::string& text) {
  const double v = parse_double(field, text);
  if (!(v >= 0.0) || v != std::floor(v) || v > 1.8e19) {
    throw ConfigError(field + ": expected a non-negative integer, got '" + text + "'");
  }
  return static_cast<std::uint64_t>(v);
}

inline std::vector<double> parse_list(const std::string& field, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(field, item));
  return out;
}

inline std::vector<std::string> parse_names(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace detail

/// Parses an INI-style configuration. Sections: [experiment], [system],
/// [features], [sweep], [latency], [sensing], [validation]. Unknown keys are
/// rejected so typos surface as errors.
inline ExperimentConfig parse_config(std::istream& in, const std::string& source = "<config>") {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(source + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  const std::string kind_name = tree.get<std::string>("experiment.kind", "");
  if (kind_name.empty()) throw ConfigError(source + ": experiment.kind is required");
  ExperimentConfig c = default_config(parse_experiment_kind(kind_name));

  using Setter = std::function<void(const std::string&, const std::string&)>;
  const auto num = [](auto& dst) {
    return Setter([&dst](const std::string& f, const std::string& v) {
      dst = static_cast<std::remove_reference_t<decltype(dst)>>(detail::parse_double(f, v));
    });
  };
  const auto uint = [](auto& dst) {
    return Setter([&dst](const std::string& f, const std::string& v) {
      dst = static_cast<std::remove_reference_t<decltype(dst)>>(detail::parse_uint(f, v));
    });
  };
  const auto str = [](std::string& dst) {
    return Setter([&dst](const std::string&, const std::string& v) { dst = v; });
  };
  const auto list = [](std::vector<double>& dst) {
    return Setter([&dst](const std::string& f, const std::string& v) {
      dst = detail::parse_list(f, v);
    });
  };
  double path_loss_db = std::numeric_limits<double>::quiet_NaN();
  const std::map<std::string, Setter> setters{
      {"experiment.kind", [](const std::string&, const std::string&) {}},
      {"experiment.seed", uint(c.seed)},
      {"experiment.trials", uint(c.trials)},
      {"experiment.output_dir", str(c.output_dir)},
      {"experiment.workers", uint(c.workers)},
      {"system.k_sensors", uint(c.system.k_sensors)},
      {"system.n_features", uint(c.system.n_features)},
      {"system.bandwidth_hz", num(c.system.bandwidth_hz)},
      {"system.n_subchannels", uint(c.system.n_subchannels)},
      {"system.power_budget_w", num(c.system.power_budget_w)},
      {"system.noise_density_dbm_per_hz", num(c.system.noise_density_dbm_per_hz)},
      {"system.noise_figure_db", num(c.system.noise_figure_db)},
      {"system.path_loss", num(c.system.path_loss)},
      {"system.path_loss_db", num(path_loss_db)},
      {"system.rician_ratio_db", num(c.system.rician_ratio_db)},
      {"system.truncation_threshold", num(c.system.truncation_threshold)},
      {"features.model", str(c.feature_model)},
      {"features.distributions",
       [&c](const std::string&, const std::string& v) { c.distributions = detail::parse_names(v); }},
      {"features.pooling", str(c.pooling)},
      {"sweep.snr_db", list(c.snr_grid_db)},
      {"sweep.alpha", list(c.alpha_grid)},
      {"latency.q_bits", uint(c.q_bits)},
      {"sensing.dataset_size", uint(c.dataset_size)},
      {"sensing.epochs", uint(c.epochs)},
      {"sensing.learning_rate", num(c.learning_rate)},
      {"sensing.trials_per_sample", uint(c.trials_per_sample)},
      {"validation.fault_noise_scale", num(c.fault_noise_scale)},
  };
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError(source + ": key '" + section + "' must belong to a section");
    }
    for (const auto& [key, value] : body) {
      const std::string field = section + "." + key;
      const auto it = setters.find(field);
      if (it == setters.end()) throw ConfigError(source + ": unknown field '" + field + "'");
      try {
        it->second(field, value.data());
      } catch (const ConfigError& e) {
        throw ConfigError(source + ": " + e.what());
      }
    }
  }
  if (!std::isnan(path_loss_db)) c.system.path_loss = db_to_linear(-path_loss_db);
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open configuration file");
  return parse_config(in, path);
}

/// Feature model from "rectified_gaussian", "uniform", "exponential" or
/// "empirical:<path>".
inline FeatureModel make_feature_model(const std::string& name) {
  if (name == "rectified_gaussian") return FeatureModel::rectified_gaussian();
  if (name == "uniform") return FeatureModel::uniform01();
  if (name == "exponential") return FeatureModel::exponential_unit();
  if (name.rfind("empirical:", 0) == 0) {
    return FeatureModel::empirical(load_empirical_samples(name.substr(10)));
  }
  throw ConfigError("features.model: unknown feature model '" + name + "'");
}

inline PoolingMode make_pooling_mode(const std::string& name) {
  return name == "average" ? PoolingMode::average() : PoolingMode::max();
}

/// One CSV cell: number, integer or text.
using Cell = std::variant<double, std::int64_t, std::string>;

/// Shortest round-trip-free rendering with 12 significant digits.
inline std::string format_number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 12);
  return std::string(buf, r.ptr);
}

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  std::vector<Series> series;
};

struct ExperimentResult {
  std::string experiment;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  std::vector<std::pair<std::string, std::string>> config_echo;
  ChartSpec chart;
  // Free-form findings (failed checks, diagnostics) for the console.
  std::vector<std::string> notes;
  bool checks_passed = true;

  void add_row(std::vector<Cell> row) {
    if (row.size() != columns.size()) {
      throw std::logic_error("ExperimentResult: row width does not match columns");
    }
    rows.push_back(std::move(row));
  }

  std::string to_csv() const {
    std::string out;
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (i) out += ',';
      out += columns[i];
    }
    out += '\n';
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out += ',';
        std::visit(
            [&out](const auto& v) {
              using T = std::decay_t<decltype(v)>;
              if constexpr (std::is_same_v<T, double>) {
                out += format_number(v);
              } else if constexpr (std::is_same_v<T, std::int64_t>) {
                out += std::to_string(v);
              } else {
                if (v.find_first_of(",\"\n") == std::string::npos) {
                  out += v;
                } else {
                  out += '"';
                  for (char ch : v) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
                  out += '"';
                }
              }
            },
            row[i]);
      }
      out += '\n';
    }
    return out;
  }

  /// Numeric column by name (non-numeric cells become NaN).
  std::vector<double> column(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw std::out_of_range("no column '" + name + "'");
    const std::size_t c = static_cast<std::size_t>(it - columns.begin());
    std::vector<double> out;
    for (const auto& row : rows) {
      if (const double* d = std::get_if<double>(&row[c])) out.push_back(*d);
      else if (const auto* i = std::get_if<std::int64_t>(&row[c])) out.push_back(static_cast<double>(*i));
      else out.push_back(std::numeric_limits<double>::quiet_NaN());
    }
    return out;
  }
};

/// Git blob object id (SHA-1 over "blob <size>\0" + content).
inline std::string git_blob_hash(const std::string& content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw std::runtime_error("git_blob_hash: cannot allocate digest context");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw std::runtime_error("git_blob_hash: digest failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) {
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return os.str();
}

/// Static SVG line chart; log axes drop non-positive points.
inline std::string render_svg(const ChartSpec& chart) {
  constexpr double W = 720, H = 450, L = 80, R = 190, T = 40, B = 60;
  const auto tx = [&](double v) { return chart.log_x ? std::log10(v) : v; };
  const auto ty = [&](double v) { return chart.log_y ? std::log10(v) : v; };
  const auto usable = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && (!chart.log_x || x > 0) && (!chart.log_y || y > 0);
  };
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : chart.series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!usable(s.x[i], s.y[i])) continue;
      x0 = std::min(x0, tx(s.x[i]));
      x1 = std::max(x1, tx(s.x[i]));
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  const auto px = [&](double v) { return L + (tx(v) - x0) / (x1 - x0) * (W - L - R); };
  const auto py = [&](double v) { return H - B - (ty(v) - y0) / (y1 - y0) * (H - T - B); };
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
  std::ostringstream os;
  os << std::setprecision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
     << chart.title << "</text>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = x0 + (x1 - x0) * i / 4.0;
    const double fy = y0 + (y1 - y0) * i / 4.0;
    const double vx = chart.log_x ? std::pow(10.0, fx) : fx;
    const double vy = chart.log_y ? std::pow(10.0, fy) : fy;
    const double sx = L + (W - L - R) * i / 4.0;
    const double sy = H - B - (H - T - B) * i / 4.0;
    os << "<line x1=\"" << sx << "\" y1=\"" << H - B << "\" x2=\"" << sx << "\" y2=\""
       << H - B + 5 << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << sx << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">"
       << format_number(vx).substr(0, 8) << "</text>\n";
    os << "<line x1=\"" << L - 5 << "\" y1=\"" << sy << "\" x2=\"" << L << "\" y2=\"" << sy
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << L - 8 << "\" y=\"" << sy + 4 << "\" text-anchor=\"end\">"
       << format_number(vy).substr(0, 8) << "</text>\n";
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">"
     << chart.x_label << "</text>\n";
  os << "<text x=\"18\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
     << (T + H - B) / 2 << ")\">" << chart.y_label << "</text>\n";
  for (std::size_t s = 0; s < chart.series.size(); ++s) {
    const auto& ser = chart.series[s];
    const char* color = palette[s % std::size(palette)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < ser.x.size(); ++i) {
      if (usable(ser.x[i], ser.y[i])) os << px(ser.x[i]) << ',' << py(ser.y[i]) << ' ';
    }
    os << "\"/>\n";
    const double ly = T + 18.0 * static_cast<double>(s) + 10;
    os << "<line x1=\"" << W - R + 15 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 40
       << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << W - R + 45 << "\" y=\"" << ly + 4 << "\">" << ser.name << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

struct WrittenFiles {
  std::filesystem::path csv, svg, meta;
};

/// Writes <dir>/<experiment>.csv, .svg and .meta.txt. Metadata lives outside
/// the CSV so the CSV stays byte-identical across identical runs.
inline WrittenFiles write_result(const ExperimentResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  WrittenFiles f{dir / (r.experiment + ".csv"), dir / (r.experiment + ".svg"),
                 dir / (r.experiment + ".meta.txt")};
  const std::string csv = r.to_csv();
  const auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
  };
  write(f.csv, csv);
  write(f.svg, render_svg(r.chart));
  std::ostringstream meta;
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  meta << "experiment=" << r.experiment << '\n';
  meta << "csv_blob_sha1=" << git_blob_hash(csv) << '\n';
  meta << "timestamp_utc=" << std::put_time(&utc, "%Y-%m-%dT%H:%M:%SZ") << '\n';
  for (const auto& [k, v] : r.config_echo) meta << "config." << k << '=' << v << '\n';
  write(f.meta, meta.str());
  return f;
}

namespace detail {

inline std::string join_numbers(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += format_number(v[i]);
  }
  return s;
}

inline std::vector<std::pair<std::string, std::string>> echo(const ExperimentConfig& c) {
  std::vector<std::pair<std::string, std::string>> e{
      {"kind", to_string(c.kind)},
      {"seed", std::to_string(c.seed)},
      {"trials", std::to_string(c.trials)},
      {"workers", std::to_string(c.resolved_workers())},
      {"k_sensors", std::to_string(c.system.k_sensors)},
      {"n_features", std::to_string(c.system.n_features)},
      {"bandwidth_hz", format_number(c.system.bandwidth_hz)},
      {"truncation_threshold", format_number(c.system.truncation_threshold)},
      {"feature_model", c.feature_model},
      {"pooling", c.pooling},
      {"snr_db", join_numbers(c.snr_grid_db)},
      {"alpha", join_numbers(c.alpha_grid)},
  };
  return e;
}

// P/σ² ratio for a dB value, with σ² = 1.
inline double snr_linear(double db) { return db_to_linear(db); }

}  // namespace detail

inline ExperimentResult run_latency_table(const ExperimentConfig& c) {
  ExperimentResult r;
  r.experiment = to_string(c.kind);
  r.config_echo = detail::echo(c);
  r.columns = {"interface", "snr_db", "q_bits", "latency_ms", "seed"};
  const auto seed = static_cast<std::int64_t>(c.seed);
  const double air_ms = airpool_latency(c.system) * 1e3;
  r.add_row({std::string("airpooling"), std::string(""), std::int64_t{0}, air_ms, seed});
  Series air{"AirPooling", {}, {}}, dig{"digital Q=" + std::to_string(c.q_bits), {}, {}};
  for (double db : c.snr_grid_db) {
    const double ms = digital_latency(c.system, c.q_bits, db_to_linear(db)) * 1e3;
    r.add_row({std::string("digital"), db, std::int64_t{c.q_bits}, ms, seed});
    air.x.push_back(db);
    air.y.push_back(air_ms);
    dig.x.push_back(db);
    dig.y.push_back(ms);
  }
  r.chart = {"Air latency", "receive SNR (dB)", "latency (ms)", false, true, {air, dig}};
  return r;
}

inline ExperimentResult run_tradeoff_curve(const ExperimentConfig& c) {
  ExperimentResult r;
  r.experiment = to_string(c.kind);
  r.config_echo = detail::echo(c);
  r.columns = {"distribution", "snr_db", "alpha", "delta", "delta_hat", "epsilon_m", "sum", "seed"};
  r.chart = {"Noise vs approximation error", "alpha", "error", true, true, {}};
  const std::size_t k = static_cast<std::size_t>(c.system.k_sensors);
  for (const auto& dist : c.distributions) {
    const FeatureModel model = make_feature_model(dist);
    for (double db : c.snr_grid_db) {
      const TradeoffCurve curve = tradeoff_curve(model, k, detail::snr_linear(db), 1.0,
                                                 c.alpha_grid, c.trials, c.seed,
                                                 c.resolved_workers());
      Series sd{dist + " delta", {}, {}}, se{dist + " eps_m", {}, {}};
      for (const auto& row : curve.rows) {
        r.add_row({dist, db, row.alpha, row.delta, row.delta_hat, row.epsilon_m, row.sum,
                   static_cast<std::int64_t>(c.seed)});
        sd.x.push_back(row.alpha);
        sd.y.push_back(row.delta);
        se.x.push_back(row.alpha);
        se.y.push_back(row.epsilon_m);
      }
      for (const auto& d : curve.diagnostics) r.notes.push_back(dist + ": " + d);
      if (c.snr_grid_db.size() == 1) {
        r.chart.series.push_back(sd);
        r.chart.series.push_back(se);
      }
    }
  }
  return r;
}

inline ExperimentResult run_alpha_optimality(const ExperimentConfig& c) {
  ExperimentResult r;
  r.experiment = to_string(c.kind);
  r.config_echo = detail::echo(c);
  r.columns = {"snr_db",        "alpha_closed", "alpha_bisection", "alpha_bruteforce",
               "alpha_calibrated", "d_closed",  "d_bruteforce",    "d_calibrated",
               "method",        "seed"};
  const std::size_t k = static_cast<std::size_t>(c.system.k_sensors);
  const FeatureModel model = make_feature_model(c.feature_model);
  const PoolingMode mode = PoolingMode::max();
  const unsigned workers = c.resolved_workers();
  const double e_fmax_sq = max_second_moment(model, k, 10 * c.trials, c.seed, workers).value;
  BetaStarCache cache;
  BruteForceOptions bf{c.trials, c.trials, c.seed, workers, &cache};
  const auto empirical_d = [&](double alpha, double snr) {
    const AirPoolConfig cfg = config_for_alpha(model, mode, k, alpha, snr, 1.0, bf);
    return estimate_errors(model, cfg, k, c.trials, c.seed, workers).d_total;
  };
  struct Point {
    double db, closed, bisection, brute, d_closed, d_brute;
    std::string method;
  };
  std::vector<Point> pts;
  for (double db : c.snr_grid_db) {
    const double snr = detail::snr_linear(db);
    SelectOptions so;
    so.moment_trials = 10 * c.trials;
    so.seed = c.seed;
    so.workers = workers;
    so.brute_force = bf;
    so.alpha_grid = c.alpha_grid;
    const AlphaDecision sel = select_alpha(mode, model, k, snr, 1.0, so);
    const auto root = stationarity_root(k, snr, 1.0, e_fmax_sq);
    const AlphaDecision brute = brute_force_alpha(model, mode, k, snr, 1.0, c.alpha_grid, bf);
    pts.push_back({db, sel.alpha_star, root.value_or(std::numeric_limits<double>::quiet_NaN()),
                   brute.alpha_star, empirical_d(sel.alpha_star, snr), brute.objective_value,
                   to_string(sel.method)});
  }
  std::optional<CalibrationConstants> cal;
  std::vector<CalibrationPair> pairs;
  for (const auto& p : pts) {
    if (p.method == "closed_form") pairs.push_back({p.closed, p.brute});
  }
  if (pairs.size() >= 3) {
    try {
      cal = fit_calibration(pairs);
      r.notes.push_back("calibration c1=" + format_number(cal->c1) + " c2=" +
                        format_number(cal->c2) + " fit_error=" + format_number(cal->fit_error));
    } catch (const std::invalid_argument& e) {
      r.notes.push_back(e.what());
    }
  }
  Series s_closed{"closed form", {}, {}}, s_brute{"brute force", {}, {}}, s_cal{"calibrated", {}, {}};
  for (const auto& p : pts) {
    double a_cal = std::numeric_limits<double>::quiet_NaN();
    double d_cal = std::numeric_limits<double>::quiet_NaN();
    if (cal && p.method == "closed_form") {
      a_cal = cal->apply(p.closed);
      d_cal = empirical_d(a_cal, detail::snr_linear(p.db));
      s_cal.x.push_back(p.db);
      s_cal.y.push_back(d_cal);
    }
    r.add_row({p.db, p.closed, p.bisection, p.brute, a_cal, p.d_closed, p.d_brute, d_cal, p.method,
               static_cast<std::int64_t>(c.seed)});
    s_closed.x.push_back(p.db);
    s_closed.y.push_back(p.d_closed);
    s_brute.x.push_back(p.db);
    s_brute.y.push_back(p.d_brute);
  }
  r.chart = {"AirPooling error at the selected alpha", "P/sigma^2 (dB)", "empirical D", false, true,
             {s_closed, s_brute}};
  if (!s_cal.x.empty()) r.chart.series.push_back(s_cal);
  return r;
}

/// One row of the validation table.
struct CheckResult {
  std::string tag;
  std::string detail;
  double measured = 0.0;
  double bound = 0.0;
  bool passed = true;
  // Signed slack in the direction of the check (≥ 0 when passing).
  double margin() const { return bound - measured; }
};

/// Runs the bound and property suites. Every check is of the form
/// measured ≤ bound (after moving tolerances to the bound side).
inline std::vector<CheckResult> validate_bounds(const ExperimentConfig& c) {
  std::vector<CheckResult> out;
  const auto add = [&](std::string tag, std::string detail, double measured, double bound) {
    out.push_back({std::move(tag), std::move(detail), measured, bound, measured <= bound});
  };
  const std::size_t k = static_cast<std::size_t>(c.system.k_sensors);
  const FeatureModel model = make_feature_model(c.feature_model);
  const unsigned workers = c.resolved_workers();
  const std::uint64_t seed = c.seed;
  BetaStarCache cache;

  // Decomposition and bound validity over (mode, α, SNR).
  for (const auto& mode : {PoolingMode::average(), PoolingMode::max()}) {
    for (double a : c.alpha_grid) {
      for (double db : c.snr_grid_db) {
        const double snr = detail::snr_linear(db);
        BruteForceOptions bf{c.trials, c.trials, seed, workers, &cache};
        AirPoolConfig sim = config_for_alpha(model, mode, k, a, snr, c.fault_noise_scale, bf);
        const ErrorBreakdown e = estimate_errors(model, sim, k, c.trials, derive_seed(seed, 11), workers);
        const double nominal_delta = delta_bound_from_nu(sim.moments.nu_sq, a, snr, 1.0);
        std::ostringstream where;
        where << mode.name() << " alpha=" << a << " snr_db=" << db;
        add("channel-bound", where.str(), e.d_chan, nominal_delta + 4 * e.std_errors[1]);
        add("approx-bound", where.str(), e.d_appr,
            e.epsilon_bound + 4 * std::hypot(e.std_errors[2], e.epsilon_std_error));
        add("decomposition", where.str(), -e.decomposition_slack,
            4 * e.decomposition_slack_se);
      }
    }
  }

  // Large-α behavior of δ̂ at P/σ² = 10.
  const double r64 = delta_hat(64, 10, 1) / delta_bound_gamma_form(64, 10, 1);
  const double r8 = delta_hat(8, 10, 1) / delta_bound_gamma_form(8, 10, 1);
  add("dhat-ratio", "|dhat/delta - 1| at alpha=64", std::abs(r64 - 1), 0.05);
  add("dhat-ratio", "alpha=64 closer to 1 than alpha=8", std::abs(r64 - 1), std::abs(r8 - 1));
  const double slope = delta_hat_derivative(64, 10, 1) / (2.0 / std::numbers::e);
  add("dhat-slope", "|d(dhat)/d(alpha) / (2/e) - 1| at alpha=64", std::abs(slope - 1), 0.05);

  // Monotone δ and ε_m along the grid.
  for (const std::string dist : {"rectified_gaussian", "uniform", "exponential"}) {
    const TradeoffCurve curve = tradeoff_curve(make_feature_model(dist), k, 10.0, 1.0,
                                               geometric_grid(1.0, 64.0, 25), c.trials, seed, workers);
    add("tradeoff-monotone", dist + " diagnostics", static_cast<double>(curve.diagnostics.size()), 0);
  }

  // Zero-noise reconfigurability.
  {
    SystemParams quiet = c.system;
    quiet.truncation_threshold = 0.0;
    FeatureMatrix f(k, 256);
    Rng rng = make_rng(seed, 21);
    sample_features_into(model, f.data(), rng);
    const AirPoolConfig avg = make_average_config(model, k, 1.0, 0.0);
    const auto g = airpool_round(f, avg, quiet, seed);
    double worst = 0.0;
    for (std::size_t n = 0; n < f.cols(); ++n) {
      const double exact = true_pool(f.column(n), PoolingMode::average());
      worst = std::max(worst, std::abs(g[n] - exact) / std::max(exact, 1e-300));
    }
    add("zero-noise-average", "zero-noise relative error", worst, 1e-12);
    const double b64 = cache.get(model, k, 64, c.trials, seed, workers).beta;
    const AirPoolConfig mx = make_max_config(model, k, 64, b64, 1.0, 0.0);
    RunningStats rel;
    Rng rng2 = make_rng(seed, 22);
    std::vector<double> col(k);
    for (std::size_t t = 0; t < c.trials; ++t) {
      sample_features_into(model, col, rng2);
      const double gm = true_pool(col, PoolingMode::max());
      if (gm > 0) rel.add(std::abs(noiseless_pool(col, mx) - gm) / gm);
    }
    add("zero-noise-max", "zero-noise mean relative error, alpha=64", rel.mean, 0.02);
  }

  // Closed-form α against the stationarity root.
  if (k >= 4) {
    const double e_fmax_sq = max_second_moment(model, k, 10 * c.trials, seed, workers).value;
    double prev_gap = std::numeric_limits<double>::infinity();
    for (double snr : {1e2, 1e3, 1e4}) {
      const AlphaDecision d = alpha_closed_form(k, snr, 1.0, e_fmax_sq);
      const auto root = stationarity_root(k, snr, 1.0, e_fmax_sq);
      const double gap = root ? std::abs(d.alpha_star - *root) : std::numeric_limits<double>::infinity();
      add("closed-form-gap", "gap nonincreasing at P/sigma^2=" + format_number(snr), gap, prev_gap);
      prev_gap = gap;
      if (snr >= 1e3) {
        const double rhs = e_fmax_sq * std::log(static_cast<double>(k)) / (d.alpha_star * d.alpha_star);
        add("closed-form-residual", "relative stationarity residual at P/sigma^2=" + format_number(snr),
            std::abs(alpha_stationarity_residual(d.alpha_star, k, snr, 1.0, e_fmax_sq)) / rhs, 0.10);
      }
    }
  }

  // Averaging is optimal at α = 1.
  {
    BruteForceOptions bf{c.trials, c.trials, seed, workers, &cache};
    for (double db : c.snr_grid_db) {
      const AlphaDecision d = brute_force_alpha(model, PoolingMode::average(), k,
                                                detail::snr_linear(db), 1.0, c.alpha_grid, bf);
      add("average-optimal", "average argmin alpha at snr_db=" + format_number(db), d.alpha_star, 1.0);
    }
  }
  return out;
}

inline ExperimentResult run_bound_validation(const ExperimentConfig& c) {
  ExperimentResult r;
  r.experiment = to_string(c.kind);
  r.config_echo = detail::echo(c);
  r.config_echo.emplace_back("fault_noise_scale", format_number(c.fault_noise_scale));
  r.columns = {"tag", "detail", "measured", "bound", "margin", "passed", "seed"};
  Series slack{"bound - measured", {}, {}};
  for (const auto& chk : validate_bounds(c)) {
    r.add_row({chk.tag, chk.detail, chk.measured, chk.bound, chk.margin(),
               std::int64_t{chk.passed ? 1 : 0}, static_cast<std::int64_t>(c.seed)});
    slack.x.push_back(static_cast<double>(r.rows.size()));
    slack.y.push_back(chk.margin());
    if (!chk.passed) {
      r.checks_passed = false;
      r.notes.push_back("FAILED " + chk.tag + " (" + chk.detail + "): measured " +
                        format_number(chk.measured) + " > bound " + format_number(chk.bound));
    }
  }
  r.chart = {"Bound validation slack", "check index", "bound - measured", false, false, {slack}};
  return r;
}

inline ExperimentResult run_synthetic_e2e(const ExperimentConfig& c) {
  ExperimentResult r;
  r.experiment = to_string(c.kind);
  r.config_echo = detail::echo(c);
  r.columns = {"snr_db", "alpha", "beta", "method", "r_ap", "r_ap_se", "d_sigma", "d_sigma_se",
               "r0", "p0_dbm", "seed"};
  DatasetOptions dopt;
  dopt.k_views = static_cast<std::size_t>(c.system.k_sensors);
  dopt.n_features = static_cast<std::size_t>(c.system.n_features);
  dopt.mode = make_pooling_mode(c.pooling);
  const SyntheticDataset ds = generate_dataset(c.dataset_size, c.seed, dopt);
  TrainOptions topt;
  topt.epochs = c.epochs;
  topt.learning_rate = c.learning_rate;
  topt.seed = c.seed;
  const ShallowClassifier clf = train_classifier(ds, topt);
  const DataSplit split = split_dataset(ds.size(), c.seed);
  const FeatureModel model = FeatureModel::rectified_gaussian();
  const std::size_t k = dopt.k_views;
  const unsigned workers = c.resolved_workers();
  const double noise = c.system.effective_noise_density() * c.system.bandwidth_hz;
  double inv_gain = std::numeric_limits<double>::quiet_NaN();
  if (c.system.truncation_threshold > 0.0) {
    inv_gain = inverse_gain_moment(c.system, 1000000, derive_seed(c.seed, 31), workers).value;
  }
  Series acc{"R_AP", {}, {}}, err{"D_sigma", {}, {}};
  for (double db : c.snr_grid_db) {
    const double snr = db_to_linear(db);
    const double p_rx = snr * noise;
    SelectOptions so;
    so.moment_trials = c.trials;
    so.seed = c.seed;
    so.workers = workers;
    so.brute_force.trials = c.trials;
    so.brute_force.beta_trials = c.trials;
    so.brute_force.seed = c.seed;
    const AlphaDecision d = select_alpha(dopt.mode, model, k, p_rx, noise, so);
    AirPoolConfig cfg = dopt.mode.kind == PoolingKind::Max
                            ? make_max_config(model, k, d.alpha_star, d.beta, p_rx, noise)
                            : make_average_config(model, k, p_rx, noise, d.alpha_star);
    const AccuracyEstimate est = evaluate_accuracy(clf, ds, split.test, cfg, c.system,
                                                   c.trials_per_sample, c.seed, workers);
    const double p0_dbm = std::isfinite(inv_gain)
                              ? linear_to_db(power_budget_for_snr(c.system, inv_gain, snr)) + 30.0
                              : std::numeric_limits<double>::quiet_NaN();
    r.add_row({db, d.alpha_star, cfg.beta, to_string(d.method), est.r_ap, est.r_ap_se, est.d_sigma,
               est.d_sigma_se, clf.clean_accuracy(), p0_dbm, static_cast<std::int64_t>(c.seed)});
    acc.x.push_back(db);
    acc.y.push_back(est.r_ap);
    err.x.push_back(db);
    err.y.push_back(est.d_sigma);
  }
  r.notes.push_back("clean accuracy R0 = " + format_number(clf.clean_accuracy()));
  r.chart = {"Synthetic task under AirPooling", "receive SNR (dB)", "value", false, true, {acc, err}};
  return r;
}

inline ExperimentResult run_experiment(const ExperimentConfig& c) {
  c.validate();
  switch (c.kind) {
    case ExperimentKind::LatencyTable: return run_latency_table(c);
    case ExperimentKind::TradeoffCurve: return run_tradeoff_curve(c);
    case ExperimentKind::AlphaOptimality: return run_alpha_optimality(c);
    case ExperimentKind::BoundValidation: return run_bound_validation(c);
    case ExperimentKind::SyntheticE2E: return run_synthetic_e2e(c);
  }
  throw std::logic_error("run_experiment: unknown experiment");
}

}  // namespace airpool
