// Copyright 2026 The QRE Authors
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

#pragma once

// Experiment harness behind the `qre` command line tool: strict TOML-style
// configuration, run directories keyed by a config hash, CSV tables with JSON
// sidecars and gnuplot scripts, and one function per subcommand.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qre/adversary.hpp"
#include "qre/classifier.hpp"
#include "qre/dataset.hpp"
#include "qre/defense.hpp"
#include "qre/error.hpp"
#include "qre/haar.hpp"
#include "qre/qec.hpp"

#ifndef QRE_VERSION
#define QRE_VERSION "0.1.0-unknown"
#endif

namespace qre::harness {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2, kNumericalError = 3, kCheckFailed = 4 };

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

struct KeySpec {
  std::string name;
  Json fallback;  // type of the key is the type of its default
  std::string help;
};

struct Schema {
  std::string command;
  std::string summary;
  std::vector<KeySpec> keys;

  const KeySpec *find(const std::string &key) const {
    for (const auto &k : keys) {
      if (k.name == key) return &k;
    }
    return nullptr;
  }
};

inline const std::vector<Schema> &schemas() {
  static const std::vector<Schema> all = {
      {"gen-data",
       "Generate a labelled cluster-Ising ground-state dataset",
       {{"n", 8, "qubits"},
        {"count", 200, "samples"},
        {"seed", 1, "RNG seed"},
        {"margin", 0.1, "excluded band around lambda = 1"},
        {"lambda-lo", 0.0, "lowest lambda"},
        {"lambda-hi", 2.0, "highest lambda"}}},
      {"train",
       "Train the ancilla-readout classifier with Adam",
       {{"n", 8, "qubits (ignored when a dataset file is given)"},
        {"count", 200, "generated dataset size"},
        {"seed", 1, "dataset and initialization seed"},
        {"dataset", "", "dataset file from gen-data (empty: generate)"},
        {"loss", "kl", "kl or ns"},
        {"layers", 10, "classifier layers P"},
        {"learning-rate", 0.05, "Adam step size"},
        {"epochs", 100, "epochs"},
        {"iterations", 10, "Adam iterations per epoch"},
        {"batch-size", 0, "0 = full batch"},
        {"train-fraction", 0.8, "training split"}}},
      {"eval",
       "Evaluate a classifier checkpoint on a dataset",
       {{"model", "", "checkpoint from train (required)"},
        {"dataset", "", "dataset file (empty: generate from n of the model)"},
        {"count", 200, "generated dataset size"},
        {"seed", 2, "dataset seed"}}},
      {"attack",
       "Gradient attack on encoded or plain classifier inputs",
       {{"model", "", "checkpoint (empty: random classifier)"},
        {"n", 8, "qubits for a random classifier"},
        {"layers", 10, "layers for a random classifier"},
        {"dataset", "", "dataset file (empty: generate)"},
        {"count", 200, "generated dataset size"},
        {"inputs", 200, "number of attacked samples"},
        {"seed", 1, "seed for data, encoders and the random classifier"},
        {"encoder", "none", "none, global-haar, block-haar or pvqc"},
        {"block-size", 2, "block size m for block-haar"},
        {"encoder-depth", 4, "layers for pvqc"},
        {"steps", 50, "attack steps"},
        {"step-size", 0.1, "ascent step size"},
        {"budget", 0.5, "Euclidean radius of the parameter ball"},
        {"adversary-layers", 4, "adversarial circuit layers"}}},
      {"grad-stats",
       "Gradient mean and variance at theta_0 over sampled encoders",
       {{"n", Json::array({4, 6, 8}), "qubit counts (list, a..b or a..b:step)"},
        {"encoder", "global-haar", "global-haar, block-haar, pvqc or none"},
        {"samples", 1000, "encoder samples N"},
        {"seed", 1, "RNG seed"},
        {"classifier", "none", "none (Z readout) or random"},
        {"classifier-layers", 10, "random classifier layers"},
        {"loss", "kl", "kl or ns for a random classifier"},
        {"input", "ground", "ground or random"},
        {"lambda", 0.5, "cluster-Ising lambda of the ground-state input"},
        {"block-size", 2, "block size m"},
        {"encoder-depth", 4, "layers for pvqc"},
        {"adversary-layers", 4, "adversarial circuit layers"},
        {"theorem-scope", false, "keep only generators acting on every block"}}},
      {"haar-verify",
       "Monte Carlo versus analytic Haar moments",
       {{"d", Json::array({2, 4}), "dimensions"},
        {"samples", 200000, "Haar samples per query"},
        {"seed", 1, "RNG seed"}}},
      {"risk",
       "Adversarial risk under local unitary attacks",
       {{"model", "", "checkpoint (empty: random classifier)"},
        {"n", 6, "qubits for a random classifier"},
        {"layers", 4, "layers for a random classifier"},
        {"tau", Json::array({0.17, 0.34, 0.5, 1.0}), "normalized Hamming budgets"},
        {"trials", 1000, "sampled inputs per budget"},
        {"strategy", "greedy", "greedy or random"},
        {"candidates", 16, "Haar candidates per greedy step"},
        {"seed", 1, "RNG seed"}}},
      {"concentration",
       "Extension measure of a half-measure set under factor replacements",
       {{"n", 10, "qubits"},
        {"tau", Json::array({0.1, 0.3, 0.5}), "normalized Hamming budgets"},
        {"samples", 500, "sampled product states"},
        {"predicate", "first-qubit", "first-qubit or mean-fidelity"},
        {"restarts", 4, "greedy restarts"},
        {"candidates", 8, "Haar candidates per restart"},
        {"seed", 1, "RNG seed"}}},
      {"qec-sim",
       "Logical error rates of small stabilizer codes",
       {{"code", "repetition3", "repetition3 or perfect5"},
        {"levels", 1, "concatenation levels (1 or 2)"},
        {"noise", "bit-flip", "bit-flip, depolarizing or random-unitary"},
        {"p", Json::array({0.02, 0.05, 0.1}), "noise strengths"},
        {"placement", "iid", "iid or fixed"},
        {"tau", 0.0, "fraction of qubits hit for fixed placement"},
        {"recovery", "coherent", "coherent or projective"},
        {"input", "zero", "zero or random logical input"},
        {"trials", 100000, "Monte Carlo trials per p"},
        {"seed", 1, "RNG seed"}}},
      {"qdp",
       "Empirical differential privacy, adversarial risk and its bound",
       {{"n", 4, "classifier qubits"},
        {"layers", 4, "classifier layers"},
        {"p0", Json::array({0.01, 0.05, 0.1, 0.2}), "output probability floors"},
        {"tau", Json::array({0.25, 0.5, 0.75, 1.0}), "normalized Hamming budgets"},
        {"pairs", 500, "sampled input pairs"},
        {"seed", 1, "RNG seed"},
        {"qec", false, "also run the encoded-input distance and ratio check"},
        {"code", "repetition3", "code for the encoded check"},
        {"qec-logical", 4, "logical qubits (classifier size) for the encoded check"},
        {"qec-tau", 0.01, "physical bit-flip rate"},
        {"qec-p0", 0.05, "floor of the encoded-check classifier"},
        {"delta", 0.1, "failure probability"},
        {"qec-pairs", 2000, "physical pairs"}}},
  };
  return all;
}

inline const Schema &schema_for(const std::string &command) {
  for (const auto &s : schemas()) {
    if (s.command == command) return s;
  }
  throw ConfigError("unknown subcommand '" + command + "'");
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(const std::string &s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

template <class T>
T parse_number(const std::string &text, const std::string &key) {
  T v{};
  const auto *end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ConfigError("key '" + key + "': cannot parse '" + text + "' as a number");
  }
  return v;
}

inline std::string unquote(const std::string &s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
  return s;
}

/// Converts `raw` to the type of `fallback`. Lists accept "[a, b]", "a,b",
/// and for integers "a..b" or "a..b:step".
inline Json coerce(const std::string &raw_in, const Json &fallback, const std::string &key) {
  const std::string raw = trim(raw_in);
  if (fallback.is_boolean()) {
    if (raw == "true") return true;
    if (raw == "false") return false;
    throw ConfigError("key '" + key + "': expected true or false, got '" + raw + "'");
  }
  if (fallback.is_number_integer()) return parse_number<long long>(raw, key);
  if (fallback.is_number_float()) return parse_number<double>(raw, key);
  if (fallback.is_string()) return unquote(raw);
  if (fallback.is_array()) {
    const bool ints = fallback.empty() || fallback.front().is_number_integer();
    std::string body = raw;
    if (body.size() >= 2 && body.front() == '[' && body.back() == ']') body = body.substr(1, body.size() - 2);
    Json out = Json::array();
    const auto dots = body.find("..");
    if (dots != std::string::npos) {
      if (!ints) throw ConfigError("key '" + key + "': ranges are only allowed for integer lists");
      const auto colon = body.find(':', dots);
      const long long lo = parse_number<long long>(trim(body.substr(0, dots)), key);
      const long long hi = parse_number<long long>(
          trim(body.substr(dots + 2, colon == std::string::npos ? std::string::npos : colon - dots - 2)), key);
      const long long step = colon == std::string::npos ? 1 : parse_number<long long>(trim(body.substr(colon + 1)), key);
      if (step < 1 || hi < lo) throw ConfigError("key '" + key + "': invalid range '" + raw + "'");
      for (long long v = lo; v <= hi; v += step) out.push_back(v);
      return out;
    }
    for (const auto &item : split(body, ',')) {
      if (item.empty()) throw ConfigError("key '" + key + "': empty list element in '" + raw + "'");
      if (ints) {
        out.push_back(parse_number<long long>(item, key));
      } else {
        out.push_back(parse_number<double>(item, key));
      }
    }
    return out;
  }
  throw ConfigError("key '" + key + "': unsupported type");
}

}  // namespace detail

/// Raw key-value document: section -> key -> value text.
using RawConfig = std::map<std::string, std::map<std::string, std::string>>;

/// Parses "[section]" headers and "key = value" lines; '#' starts a comment
/// outside quotes. Every key must belong to a section named after a
/// subcommand and be known to its schema.
inline RawConfig parse_config_text(const std::string &text) {
  RawConfig out;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      schema_for(section);
      if (out.count(section)) throw ConfigError(where + "duplicate section [" + section + "]");
      out[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    if (section.empty()) throw ConfigError(where + "key outside of a [subcommand] section");
    const std::string key = detail::trim(line.substr(0, eq));
    const auto *spec = schema_for(section).find(key);
    if (!spec) throw ConfigError(where + "unknown key '" + key + "' in [" + section + "]");
    if (out[section].count(key)) throw ConfigError(where + "duplicate key '" + key + "'");
    const std::string value = detail::trim(line.substr(eq + 1));
    detail::coerce(value, spec->fallback, section + "." + key);
    out[section][key] = value;
  }
  return out;
}

inline RawConfig load_config_file(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str());
}

/// Defaults, then the file's section, then command-line overrides.
inline Json resolve_config(const std::string &command, const RawConfig &file,
                           const std::map<std::string, std::string> &overrides) {
  const auto &schema = schema_for(command);
  Json cfg = Json::object();
  for (const auto &k : schema.keys) cfg[k.name] = k.fallback;
  if (const auto it = file.find(command); it != file.end()) {
    for (const auto &[k, v] : it->second) cfg[k] = detail::coerce(v, schema.find(k)->fallback, k);
  }
  for (const auto &[k, v] : overrides) {
    const auto *spec = schema.find(k);
    if (!spec) throw ConfigError("unknown option '" + k + "' for " + command);
    cfg[k] = detail::coerce(v, spec->fallback, k);
  }
  return cfg;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string config_hash(const std::string &command, const Json &cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(command + "\n" + cfg.dump())));
  return buf;
}

// ---------------------------------------------------------------------------
// Tables

inline std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
inline std::string fmt(long long v) { return std::to_string(v); }
inline std::string fmt(long v) { return std::to_string(v); }
inline std::string fmt(int v) { return std::to_string(v); }
inline std::string fmt(std::size_t v) { return std::to_string(v); }
inline std::string fmt(bool v) { return v ? "true" : "false"; }
inline std::string fmt(const std::string &v) { return v; }
inline std::string fmt(const char *v) { return v; }

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  // gnuplot: x column, y columns, log-scale y
  std::string x;
  std::vector<std::string> y;
  bool logy = false;

  Table(std::string name_, std::vector<std::string> columns_) : name(std::move(name_)), columns(std::move(columns_)) {}

  template <class... T>
  void add(const T &...v) {
    rows.push_back({fmt(v)...});
    qre::detail::require(rows.back().size() == columns.size(), "row width does not match the header");
  }
};

inline std::string csv_field(const std::string &s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string to_csv(const Table &t) {
  std::string out;
  auto line = [&](const std::vector<std::string> &cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += csv_field(cells[i]);
    }
    out += "\r\n";
  };
  line(t.columns);
  for (const auto &r : t.rows) line(r);
  return out;
}

inline std::string gnuplot_script(const Table &t) {
  std::ostringstream os;
  os << "# gnuplot -p " << t.name << ".gp\n"
     << "set datafile separator ','\n"
     << "set key autotitle columnhead\n"
     << "set xlabel '" << t.x << "'\n";
  if (t.logy) os << "set logscale y 2\n";
  os << "plot ";
  for (std::size_t i = 0; i < t.y.size(); ++i) {
    if (i) os << ", \\\n     ";
    os << "'" << t.name << ".csv' using '" << t.x << "':'" << t.y[i] << "' with linespoints";
  }
  os << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Runs

struct Check {
  std::string name;
  bool passed;
  std::string detail;
};

struct Run {
  std::string command;
  Json config;
  std::filesystem::path dir;
  std::vector<Table> tables;
  Json summary = Json::object();
  std::vector<Check> checks;

  template <class T>
  T get(const std::string &key) const {
    return config.at(key).get<T>();
  }
  std::uint64_t seed() const { return config.at("seed").get<std::uint64_t>(); }
  std::string path(const std::string &file) const { return (dir / file).string(); }

  void check(std::string name, bool passed, std::string detail = "") {
    checks.push_back({std::move(name), passed, std::move(detail)});
  }
};

inline void write_text(const std::filesystem::path &p, const std::string &s) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << s;
}

/// CSV, gnuplot script and JSON sidecar per table, plus run.json.
inline void write_outputs(const Run &run, double seconds) {
  Json checks = Json::array();
  for (const auto &c : run.checks) checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  Json provenance = {{"command", run.command},
                     {"config", run.config},
                     {"config_hash", config_hash(run.command, run.config)},
                     {"seed", run.config.value("seed", Json())},
                     {"version", QRE_VERSION},
                     {"rng", Rng::kAlgorithm},
                     {"threads", worker_count()},
                     {"wall_clock_seconds", seconds}};
  for (const auto &t : run.tables) {
    write_text(run.dir / (t.name + ".csv"), to_csv(t));
    if (!t.y.empty()) write_text(run.dir / (t.name + ".gp"), gnuplot_script(t));
    Json side = provenance;
    side["table"] = t.name;
    side["columns"] = t.columns;
    side["rows"] = t.rows.size();
    side["summary"] = run.summary;
    side["checks"] = checks;
    write_text(run.dir / (t.name + ".json"), side.dump(2) + "\n");
  }
  Json all = provenance;
  all["summary"] = run.summary;
  all["checks"] = checks;
  Json names = Json::array();
  for (const auto &t : run.tables) names.push_back(t.name + ".csv");
  all["tables"] = names;
  write_text(run.dir / "run.json", all.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Subcommands

namespace detail {

inline Dataset dataset_for(const Run &run, int n) {
  const auto path = run.get<std::string>("dataset");
  if (!path.empty()) return load_dataset(path);
  return generate_dataset(n, run.get<int>("count"), run.seed());
}

inline ClassifierModel model_for(const Run &run) {
  const auto path = run.get<std::string>("model");
  if (!path.empty()) return load_model(path);
  return make_classifier(run.get<int>("n"), run.get<int>("layers"), run.seed());
}

inline double median(std::vector<double> v) {
  qre::detail::require(!v.empty(), "median of an empty set");
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<long>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2) return hi;
  return (*std::max_element(v.begin(), v.begin() + static_cast<long>(mid)) + hi) / 2;
}

/// Random Hermitian operator with spectral norm 1.
inline Mat random_hermitian(std::size_t d, Rng &rng) {
  const Mat g = ginibre(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d), rng);
  const Mat h = (g + g.adjoint()) / 2.0;
  return h / Eigen::SelfAdjointEigenSolver<Mat>(h).eigenvalues().cwiseAbs().maxCoeff();
}

inline Mat random_density(std::size_t d, Rng &rng) {
  const Mat g = ginibre(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d), rng);
  const Mat r = g * g.adjoint();
  return r / r.trace().real();
}

}  // namespace detail

inline void cmd_gen_data(Run &run) {
  DatasetOptions opt;
  opt.margin = run.get<double>("margin");
  opt.lambda_lo = run.get<double>("lambda-lo");
  opt.lambda_hi = run.get<double>("lambda-hi");
  const auto ds = generate_dataset(run.get<int>("n"), run.get<int>("count"), run.seed(), opt);
  save_dataset(run.path("dataset.bin"), ds);
  Table t{"samples", {"index", "lambda", "label", "degenerate"}};
  t.x = "lambda";
  t.y = {"label"};
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto &s = ds.samples[i];
    t.add(i, s.lambda, s.label, s.degenerate);
  }
  run.summary = dataset_sidecar(ds);
  run.tables.push_back(std::move(t));
}

inline void cmd_train(Run &run) {
  const auto ds = detail::dataset_for(run, run.get<int>("n"));
  TrainConfig cfg;
  cfg.loss = parse_loss_kind(run.get<std::string>("loss"));
  cfg.layers = run.get<int>("layers");
  cfg.learning_rate = run.get<double>("learning-rate");
  cfg.epochs = run.get<int>("epochs");
  cfg.iterations_per_epoch = run.get<int>("iterations");
  cfg.batch_size = run.get<int>("batch-size");
  cfg.train_fraction = run.get<double>("train-fraction");
  cfg.seed = run.seed();
  const auto r = train(ds, cfg);
  save_model(run.path("model.json"), r.model);
  Table t{"trace", {"epoch", "train_loss", "train_accuracy", "val_loss", "val_accuracy"}};
  t.x = "epoch";
  t.y = {"train_loss", "val_loss"};
  for (const auto &e : r.trace) t.add(e.epoch, e.train_loss, e.train_accuracy, e.val_loss, e.val_accuracy);
  const auto &last = r.trace.back();
  run.summary = {{"final_train_loss", last.train_loss},
                 {"final_val_loss", last.val_loss},
                 {"final_train_accuracy", last.train_accuracy},
                 {"final_val_accuracy", last.val_accuracy},
                 {"train_size", r.train_indices.size()},
                 {"val_size", r.val_indices.size()}};
  run.check("val_accuracy>=0.9", last.val_accuracy >= 0.9, fmt(last.val_accuracy));
  run.check("loss_gap<0.1", std::abs(last.train_loss - last.val_loss) < 0.1,
            fmt(std::abs(last.train_loss - last.val_loss)));
  run.tables.push_back(std::move(t));
}

inline void cmd_eval(Run &run) {
  const auto path = run.get<std::string>("model");
  if (path.empty()) throw ConfigError("eval needs --model");
  const auto m = load_model(path);
  const auto ds = [&] {
    const auto dpath = run.get<std::string>("dataset");
    if (!dpath.empty()) return load_dataset(dpath);
    return generate_dataset(m.n_data, run.get<int>("count"), run.seed());
  }();
  qre::detail::require(ds.n == m.n_data, "dataset and model sizes differ");
  Table t{"eval", {"index", "lambda", "label", "p0", "p1", "predicted", "loss"}};
  t.x = "lambda";
  t.y = {"p1"};
  double loss = 0.0, acc = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto &s = ds.samples[i];
    const auto p = class_probs(m, s.state);
    const double l = loss_from_probability(m.loss, s.label == 0 ? p.first : p.second);
    const int y = predict_from_probs(p);
    t.add(i, s.lambda, s.label, p.first, p.second, y, l);
    loss += l;
    acc += y == s.label;
  }
  const double nn = static_cast<double>(ds.size());
  run.summary = {{"accuracy", acc / nn}, {"mean_loss", loss / nn}, {"samples", ds.size()}};
  run.tables.push_back(std::move(t));
}

inline void cmd_attack(Run &run) {
  const auto m = detail::model_for(run);
  const auto ds = detail::dataset_for(run, m.n_data);
  qre::detail::require(ds.n == m.n_data, "dataset and model sizes differ");
  AttackConfig acfg;
  acfg.steps = run.get<int>("steps");
  acfg.step_size = run.get<double>("step-size");
  acfg.budget = run.get<double>("budget");
  acfg.adversary_layers = run.get<int>("adversary-layers");
  acfg.validate();
  Codebook book;
  book.kind = parse_codebook_kind(run.get<std::string>("encoder"));
  book.n_qubits = m.n_data;
  book.block_size = run.get<int>("block-size");
  book.depth = run.get<int>("encoder-depth");
  book.seed = Rng(run.seed()).split(0xE4C0DE)();
  book.validate();
  const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(run.get<int>("inputs")), ds.size());
  const auto adversary = build_adversarial_circuit(m.n_data, acfg.adversary_layers);
  std::vector<AttackResult> res(count);
  parallel_for(count, [&](std::size_t i) {
    EncodedLossContext ctx;
    ctx.model = &m;
    ctx.adversary = adversary;
    ctx.encoder = book.sample(i);
    ctx.psi = ds.samples[i].state.amps();
    ctx.label = ds.samples[i].label;
    ctx.loss = m.loss;
    res[i] = gradient_attack(std::move(ctx), acfg);
  });
  Table t{"attack", {"index", "label", "clean_loss", "final_loss", "first_grad_inf_norm", "clean_label",
                     "attacked_label", "flipped"}};
  t.x = "index";
  t.y = {"clean_loss", "final_loss"};
  std::vector<double> norms;
  long flips = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const auto &r = res[i];
    t.add(i, ds.samples[i].label, r.loss_trace.front(), r.loss_trace.back(), r.first_grad_inf_norm, r.clean_label,
          r.attacked_label, r.flipped());
    norms.push_back(r.first_grad_inf_norm);
    flips += r.flipped();
  }
  const auto rate = wilson_interval(flips, static_cast<long>(count));
  run.summary = {{"encoder", to_string(book.kind)},
                 {"inputs", count},
                 {"success_rate", rate.value},
                 {"success_ci", {rate.lo, rate.hi}},
                 {"median_first_grad_inf_norm", detail::median(norms)}};
  run.tables.push_back(std::move(t));
}

inline GradStatsConfig grad_stats_config(const Run &run) {
  GradStatsConfig cfg;
  cfg.n_values = run.get<std::vector<int>>("n");
  cfg.encoder = parse_codebook_kind(run.get<std::string>("encoder"));
  cfg.samples = run.get<long>("samples");
  cfg.seed = run.seed();
  cfg.classifier = run.get<std::string>("classifier");
  cfg.classifier_layers = run.get<int>("classifier-layers");
  cfg.loss = parse_loss_kind(run.get<std::string>("loss"));
  cfg.input = run.get<std::string>("input");
  cfg.lambda = run.get<double>("lambda");
  cfg.block_size = run.get<int>("block-size");
  cfg.encoder_depth = run.get<int>("encoder-depth");
  cfg.adversary_layers = run.get<int>("adversary-layers");
  cfg.theorem_scope = run.get<bool>("theorem-scope");
  return cfg;
}

inline void cmd_grad_stats(Run &run) {
  const auto cfg = grad_stats_config(run);
  const auto recs = grad_stats_experiment(cfg);
  const bool block = cfg.encoder == CodebookKind::BlockHaar;
  const bool global = cfg.encoder == CodebookKind::GlobalHaar;
  Table t{"grad_stats", {"n", "encoder", "mean", "mean_stderr", "variance", "variance_stderr", "thm_bound", "thm_exact"}};
  t.x = "n";
  t.y = {"variance", "thm_bound", "thm_exact"};
  t.logy = true;
  Json per_n = Json::array();
  std::vector<double> xs, ys;
  for (const auto &r : recs) {
    const double bound = block ? r.thm2_bound : global ? r.thm1_bound : std::nan("");
    const double exact = block ? r.block_exact : global ? r.thm1_exact : std::nan("");
    t.add(r.n, r.encoder, r.mean, r.mean_stderr, r.variance, r.variance_stderr, bound, exact);
    xs.push_back(r.n);
    ys.push_back(r.variance);
    int worst = 0;
    double worst_z = 0.0;
    for (std::size_t i = 0; i < r.param_mean.size(); ++i) {
      const double z = std::abs(r.param_mean[i]) / r.param_mean_stderr[i];
      if (z > worst_z) {
        worst_z = z;
        worst = r.params[i];
      }
    }
    per_n.push_back({{"n", r.n},
                     {"params", r.params.size()},
                     {"mean_abs", r.mean_abs},
                     {"max_param_mean_z", worst_z},
                     {"max_param_mean_z_index", worst},
                     {"c0", std::isnan(r.c0) ? Json() : Json(r.c0)},
                     {"classifier", r.classifier},
                     {"input", r.input}});
    if (cfg.encoder != CodebookKind::Identity) {
      run.check("mean n=" + std::to_string(r.n), worst_z <= 4.0, "max |mean|/stderr = " + fmt(worst_z));
    }
    if (!std::isnan(bound)) {
      run.check("bound n=" + std::to_string(r.n), r.variance <= bound + 3 * r.variance_stderr,
                fmt(r.variance) + " vs " + fmt(bound));
    }
    if (!std::isnan(exact)) {
      run.check("exact n=" + std::to_string(r.n), std::abs(r.variance - exact) <= 3 * r.variance_stderr,
                fmt(r.variance) + " vs " + fmt(exact));
    }
  }
  run.summary = {{"per_n", per_n}};
  if (xs.size() >= 2) run.summary["log2_variance_slope"] = log2_slope(xs, ys);
  run.tables.push_back(std::move(t));
}

struct MomentQuery {
  std::string name;
  Mat exact;
  std::function<Mat(const Mat &)> f;
};

/// Moment queries per dimension: first moment of a random Hermitian operator,
/// the second moment with A = B = Z on qubit 0 and X = |0><0|, the second
/// moment with random Hermitian A, B (unit spectral norm) and a random density
/// matrix X, and the 2-fold twirl of |00><00|.
inline std::vector<MomentQuery> moment_queries(std::size_t d, Rng &rng) {
  std::vector<MomentQuery> q;
  const auto di = static_cast<Eigen::Index>(d);
  const Mat o = detail::random_hermitian(d, rng);
  q.push_back({"first-moment", first_moment(o), [o](const Mat &u) { return Mat(u * o * u.adjoint()); }});
  Mat z = Mat::Identity(di, di);
  for (Eigen::Index i = 1; i < di; i += 2) z(i, i) = -1.0;
  Mat x0 = Mat::Zero(di, di);
  x0(0, 0) = 1.0;
  q.push_back({"second-moment-z", second_moment(z, z, x0),
               [z, x0](const Mat &u) { return Mat(u.adjoint() * z * u * x0 * u.adjoint() * z * u); }});
  const Mat a = detail::random_hermitian(d, rng), b = detail::random_hermitian(d, rng);
  const Mat x = detail::random_density(d, rng);
  q.push_back({"second-moment-random", second_moment(a, b, x),
               [a, b, x](const Mat &u) { return Mat(u.adjoint() * a * u * x * u.adjoint() * b * u); }});
  Mat p = Mat::Zero(di * di, di * di);
  p(0, 0) = 1.0;
  q.push_back({"twirl-00", haar_twirl2(p, d), [p](const Mat &u) {
                 const Mat uu = kron(u, u);
                 return Mat(uu * p * uu.adjoint());
               }});
  return q;
}

inline void cmd_haar_verify(Run &run) {
  const auto dims = run.get<std::vector<int>>("d");
  const long samples = run.get<long>("samples");
  Table t{"haar_verify", {"d", "query", "mc_error", "stderr", "analytic_norm"}};
  t.x = "d";
  t.y = {"mc_error"};
  t.logy = true;
  std::uint64_t stream = 0;
  double worst = 0.0;
  for (int d : dims) {
    if (d < 2) throw ConfigError("haar-verify dimensions must be at least 2");
    Rng qrng = Rng(run.seed()).split(static_cast<std::uint64_t>(d));
    const auto queries = moment_queries(static_cast<std::size_t>(d), qrng);
    std::vector<MomentEstimate> est(queries.size());
    parallel_for(queries.size(), [&](std::size_t k) {
      Rng srng = Rng(run.seed()).split(1000 + stream + k);
      est[k] = monte_carlo_moment([&] { return sample_haar_unitary(static_cast<std::size_t>(d), srng); },
                                  queries[k].f, samples);
    });
    stream += queries.size();
    for (std::size_t k = 0; k < queries.size(); ++k) {
      const double err = (est[k].mean - queries[k].exact).norm();
      worst = std::max(worst, err);
      t.add(d, queries[k].name, err, est[k].stderr_frobenius, queries[k].exact.norm());
      run.check(queries[k].name + " d=" + std::to_string(d), err < 5e-3, fmt(err));
    }
  }
  run.summary = {{"max_error", worst}, {"samples", samples}};
  run.tables.push_back(std::move(t));
}

inline void cmd_risk(Run &run) {
  const auto m = detail::model_for(run);
  const int n = m.n_data;
  const auto taus = run.get<std::vector<double>>("tau");
  const auto strategy = parse_local_strategy(run.get<std::string>("strategy"));
  const int candidates = run.get<int>("candidates");
  const long trials = run.get<long>("trials");
  const auto label = classifier_label(m);
  // Class measures of the Haar product measure.
  std::vector<int> labels(static_cast<std::size_t>(trials));
  const Rng base(run.seed());
  parallel_for(labels.size(), [&](std::size_t i) {
    Rng r = base.split(0xC1A55).split(i);
    labels[i] = label(sample_product_spec(n, r).state());
  });
  long ones = 0;
  for (int y : labels) ones += y;
  std::vector<double> mu = {static_cast<double>(trials - ones) / trials, static_cast<double>(ones) / trials};
  std::sort(mu.rbegin(), mu.rend());
  Table t{"risk", {"tau", "replacements", "risk", "ci_lo", "ci_hi", "threshold_tau"}};
  t.x = "tau";
  t.y = {"risk"};
  for (std::size_t k = 0; k < taus.size(); ++k) {
    const double tau = taus[k];
    if (!(tau >= 0 && tau <= 1)) throw ConfigError("tau must be in [0, 1]");
    const ProductAttack attack = [&, tau](const ProductStateSpec &s, Rng &r) {
      if (replacement_budget(n, tau) < 1) return s;
      return local_unitary_attack(s, loss_score(m, s), tau, strategy, r, candidates);
    };
    const auto p = adversarial_risk_estimate(n, label, attack, trials, base.split(k));
    double thr = std::nan("");
    if (p.value > 0 && p.value < 1 && mu.back() > 0) thr = thm3_threshold(n, mu, p.value);
    t.add(tau, replacement_budget(n, tau), p.value, p.lo, p.hi, thr);
  }
  run.summary = {{"n", n}, {"class_measures", mu}, {"strategy", run.get<std::string>("strategy")}};
  run.tables.push_back(std::move(t));
}

inline void cmd_concentration(Run &run) {
  const int n = run.get<int>("n");
  const auto name = run.get<std::string>("predicate");
  SetPredicate pred;
  if (name == "first-qubit") {
    pred = first_qubit_predicate();
  } else if (name == "mean-fidelity") {
    pred = mean_fidelity_predicate();
  } else {
    throw ConfigError("unknown predicate '" + name + "' (expected first-qubit or mean-fidelity)");
  }
  const auto taus = run.get<std::vector<double>>("tau");
  Table t{"concentration", {"tau", "predicate", "replacements", "set_measure", "extension_measure", "extension_lo",
                            "extension_hi", "levy_bound", "lemma_bound"}};
  t.x = "tau";
  t.y = {"extension_measure", "levy_bound"};
  for (std::size_t k = 0; k < taus.size(); ++k) {
    const auto rep = concentration_probe(n, pred, taus[k], run.get<long>("samples"), Rng(run.seed()).split(k),
                                         run.get<int>("restarts"), run.get<int>("candidates"));
    t.add(taus[k], pred.name, rep.replacements, rep.set_measure.value, rep.extension_measure.value,
          rep.extension_measure.lo, rep.extension_measure.hi, rep.levy_bound, rep.lemma_bound);
    const double slack = 3 * rep.extension_measure.standard_error();
    run.check("levy tau=" + fmt(taus[k]), rep.extension_measure.value >= rep.levy_bound - slack,
              fmt(rep.extension_measure.value) + " vs " + fmt(rep.levy_bound));
  }
  run.summary = {{"n", n}, {"predicate", pred.name}};
  run.tables.push_back(std::move(t));
}

inline void cmd_qec_sim(Run &run) {
  const auto code = parse_code(run.get<std::string>("code"), run.get<int>("levels"));
  const auto kind = parse_noise_kind(run.get<std::string>("noise"));
  const auto placement_name = run.get<std::string>("placement");
  if (placement_name != "iid" && placement_name != "fixed") throw ConfigError("placement must be iid or fixed");
  const auto recovery_name = run.get<std::string>("recovery");
  if (recovery_name != "coherent" && recovery_name != "projective") {
    throw ConfigError("recovery must be coherent or projective");
  }
  const auto input = run.get<std::string>("input");
  if (input != "zero" && input != "random") throw ConfigError("input must be zero or random");
  const long trials = run.get<long>("trials");
  if (trials < 1000) throw ConfigError("qec-sim needs at least 1000 trials");
  const auto ps = run.get<std::vector<double>>("p");
  const bool has_reference =
      code.base.name == "repetition3" && kind == NoiseKind::BitFlip && placement_name == "iid";
  Table t{"qec_sim", {"p", "rate", "rate_stderr", "mean_infidelity", "reference"}};
  t.x = "p";
  t.y = {"rate", "reference"};
  for (std::size_t k = 0; k < ps.size(); ++k) {
    NoiseModel noise{kind, ps[k], placement_name == "iid" ? Placement::Iid : Placement::Fixed, run.get<double>("tau")};
    noise.validate();
    const auto e = logical_error_rate(code, noise, trials, Rng(run.seed()).split(k), input == "random",
                                      recovery_name == "coherent" ? RecoveryMode::Coherent : RecoveryMode::Projective);
    double ref = std::nan("");
    if (has_reference) {
      ref = majority_failure(ps[k]);
      if (code.levels == 2) ref = majority_failure(ref);
      run.check("rate p=" + fmt(ps[k]), std::abs(e.rate - ref) <= 3 * e.stderr_rate, fmt(e.rate) + " vs " + fmt(ref));
    }
    t.add(ps[k], e.rate, e.stderr_rate, e.mean_infidelity, ref);
  }
  run.summary = {{"code", code.name()}, {"physical_per_logical", code.block_size()}, {"trials", trials}};
  run.tables.push_back(std::move(t));
}

inline void cmd_qdp(Run &run) {
  const int n = run.get<int>("n");
  const auto m = make_classifier(n, run.get<int>("layers"), run.seed());
  const auto floors = run.get<std::vector<double>>("p0");
  auto taus = run.get<std::vector<double>>("tau");
  std::sort(taus.begin(), taus.end());
  const long pairs = run.get<long>("pairs");
  Table t{"qdp", {"tau", "p0", "epsilon", "risk", "risk_stderr", "exp_neg_entropy", "bound"}};
  t.x = "tau";
  t.y = {"risk", "bound"};
  for (double p0 : floors) {
    if (!(p0 > 0 && p0 < 0.5)) throw ConfigError("p0 must be in (0, 0.5)");
    double prev = 0.0;
    for (double tau : taus) {
      const auto rep = qdp_estimate(n, noisy_channel({&m, p0}), tau, pairs, Rng(run.seed()).split(0xD9));
      t.add(tau, p0, rep.dp.epsilon, rep.risk, rep.risk_stderr, rep.exp_neg_entropy, rep.bound);
      const std::string at = " tau=" + fmt(tau) + " p0=" + fmt(p0);
      run.check("risk<=bound" + at, rep.risk <= rep.bound + 3 * rep.risk_stderr,
                fmt(rep.risk) + " vs " + fmt(rep.bound));
      run.check("monotone" + at, rep.dp.epsilon >= prev, fmt(rep.dp.epsilon));
      run.check("floor" + at, rep.dp.epsilon <= std::log((1 - p0) / p0) + 1e-12, fmt(rep.dp.epsilon));
      prev = rep.dp.epsilon;
    }
  }
  run.summary = {{"n", n}, {"pairs", pairs}};
  run.tables.push_back(std::move(t));
  if (!run.get<bool>("qec")) return;

  // Encoded-input check: the epsilon curve of the logical classifier on a
  // grid of k / L, then physical pairs under iid bit flips.
  const int logical = run.get<int>("qec-logical");
  const auto code = parse_code(run.get<std::string>("code"));
  const auto lm = make_classifier(logical, run.get<int>("layers"), run.seed() + 1);
  const NoisyClassifier nc{&lm, run.get<double>("qec-p0")};
  std::vector<std::pair<double, double>> curve;
  Table c{"epsilon_curve", {"tau", "epsilon"}};
  c.x = "tau";
  c.y = {"epsilon"};
  for (int k = 0; k <= logical; ++k) {
    const double tau = static_cast<double>(k) / logical;
    const double eps = qdp_epsilon_estimate(logical, noisy_channel(nc), tau, pairs, Rng(run.seed()).split(0xC7)).epsilon;
    curve.emplace_back(tau, eps);
    c.add(tau, eps);
  }
  const double qtau = run.get<double>("qec-tau"), delta = run.get<double>("delta");
  const auto rep = verify_thm4(code, logical, nc, {NoiseKind::BitFlip, qtau}, qtau, delta, curve,
                               run.get<long>("qec-pairs"), Rng(run.seed()).split(0x4E));
  Table q{"qec_privacy", {"tau", "delta", "distance_bound", "epsilon_bound", "pairs", "fraction_distance_ok",
                          "fraction_ratio_ok", "fraction_ok", "stderr_ok", "mean_physical_distance",
                          "mean_logical_distance"}};
  q.add(qtau, delta, rep.distance_bound, rep.epsilon_bound, rep.pairs, rep.fraction_distance_ok,
        rep.fraction_ratio_ok, rep.fraction_ok, rep.stderr_ok, rep.mean_physical_distance, rep.mean_logical_distance);
  run.check("encoded fraction", rep.fraction_ok >= 1 - delta - 3 * rep.stderr_ok, fmt(rep.fraction_ok));
  run.tables.push_back(std::move(c));
  run.tables.push_back(std::move(q));
}

inline const std::map<std::string, std::function<void(Run &)>> &commands() {
  static const std::map<std::string, std::function<void(Run &)>> all = {
      {"gen-data", cmd_gen_data}, {"train", cmd_train},         {"eval", cmd_eval},
      {"attack", cmd_attack},     {"grad-stats", cmd_grad_stats}, {"haar-verify", cmd_haar_verify},
      {"risk", cmd_risk},         {"concentration", cmd_concentration}, {"qec-sim", cmd_qec_sim},
      {"qdp", cmd_qdp}};
  return all;
}

struct Options {
  std::string command;
  std::string config_file;
  std::map<std::string, std::string> overrides;
  std::string out_root = "runs";
  bool force = false;
  bool check = false;
};

struct Outcome {
  int code = kOk;
  std::filesystem::path dir;
  std::string message;
};

/// Runs one subcommand end to end. Config errors are reported before any
/// directory is created; failures after that leave a FAILED marker.
inline Outcome execute(const Options &opt, std::ostream &log) {
  Outcome out;
  Run run;
  try {
    run.command = opt.command;
    const RawConfig file = opt.config_file.empty() ? RawConfig{} : load_config_file(opt.config_file);
    run.config = resolve_config(opt.command, file, opt.overrides);
  } catch (const ConfigError &e) {
    out.code = kConfigError;
    out.message = e.what();
    return out;
  }
  run.dir = std::filesystem::path(opt.out_root) / (opt.command + "-" + config_hash(opt.command, run.config));
  out.dir = run.dir;
  if (std::filesystem::exists(run.dir)) {
    if (!opt.force) {
      out.code = kConfigError;
      out.message = "run directory " + run.dir.string() + " exists (use --force to overwrite)";
      return out;
    }
    std::filesystem::remove_all(run.dir);
  }
  std::filesystem::create_directories(run.dir);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    commands().at(opt.command)(run);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_outputs(run, secs);
  } catch (const std::exception &e) {
    out.message = e.what();
    if (dynamic_cast<const ConfigError *>(&e)) {
      out.code = kConfigError;
    } else if (dynamic_cast<const NumericalError *>(&e)) {
      out.code = kNumericalError;
    } else {
      out.code = kFailure;
    }
    write_text(run.dir / "FAILED", out.message + "\n");
    return out;
  }
  int failed = 0;
  for (const auto &c : run.checks) {
    if (!c.passed) {
      ++failed;
      if (opt.check) log << "check failed: " << c.name << " (" << c.detail << ")\n";
    }
  }
  if (opt.check && failed > 0) {
    out.code = kCheckFailed;
    out.message = std::to_string(failed) + " of " + std::to_string(run.checks.size()) + " checks failed";
  }
  return out;
}

}  // namespace qre::harness
