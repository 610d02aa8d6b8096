#pragma once

// Configuration parsing, figure presets, and CSV / JSON serialization.

#include "nddc/config.hpp"
#include "nddc/diagnostics.hpp"
#include "nddc/sweep.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace nddc::io {

using json = nlohmann::json;

inline constexpr const char* kToolVersion = "1.0.0";

// ---------------------------------------------------------------------------
// Number formatting
// ---------------------------------------------------------------------------

/// 17 significant digits, enough to round-trip any double.
[[nodiscard]] inline std::string formatNumber(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Same value as a JSON number, or null when not finite.
[[nodiscard]] inline json jsonNumber(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// ---------------------------------------------------------------------------
// Enum parsing
// ---------------------------------------------------------------------------

[[nodiscard]] inline ModelKind parseModel(std::string_view s) {
  for (auto k : {ModelKind::TransmissionN, ModelKind::ReactionN, ModelKind::TwoAgentTransmission,
                 ModelKind::TwoAgentReaction})
    if (toString(k) == s) return k;
  throw std::invalid_argument("unknown model '" + std::string(s) +
                              "' (expected transmission, reaction, two-agent-transmission, "
                              "two-agent-reaction)");
}

[[nodiscard]] inline DerivativeMode parseDerivativeMode(std::string_view s) {
  if (s == "backward-difference") return DerivativeMode::BackwardDifference;
  if (s == "stored-rhs") return DerivativeMode::StoredRhs;
  throw std::invalid_argument("unknown derivative mode '" + std::string(s) +
                              "' (expected backward-difference or stored-rhs)");
}

[[nodiscard]] inline Classification parseClassification(std::string_view s) {
  for (auto c : {Classification::Converged, Classification::Diverged, Classification::Inconclusive})
    if (toString(c) == s) return c;
  throw std::invalid_argument("unknown classification '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

[[nodiscard]] inline std::string readFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void writeFile(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec)
      throw std::runtime_error("cannot create directory '" + path.parent_path().string() +
                               "': " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

/// Comma- or whitespace-separated numeric rows; '#' lines and a non-numeric
/// first line (header) are skipped.
[[nodiscard]] inline std::vector<std::vector<double>> parseNumericRows(const std::string& text,
                                                                       const std::string& source) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty() || line[0] == '#') continue;
    for (char& c : line)
      if (c == ',' || c == ';' || c == '\t' || c == '\r') c = ' ';
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    bool numeric = true;
    while (ls >> tok) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(tok, &used));
        if (used != tok.size()) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (rows.empty()) continue;
      throw std::invalid_argument(source + ":" + std::to_string(lineNo) + ": non-numeric entry");
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Weights and datum specs
// ---------------------------------------------------------------------------

[[nodiscard]] inline Matrix matrixFromRows(const std::vector<std::vector<double>>& rows,
                                           const std::string& source) {
  if (rows.empty()) throw std::invalid_argument(source + ": empty weight matrix");
  const auto n = rows.size();
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != n)
      throw std::invalid_argument(source + ": weight matrix must be square (" + std::to_string(n) +
                                  " rows, row " + std::to_string(i + 1) + " has " +
                                  std::to_string(rows[i].size()) + " entries)");
    for (std::size_t j = 0; j < n; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

[[nodiscard]] inline Matrix matrixFromJson(const json& j, const std::string& source) {
  if (!j.is_array()) throw std::invalid_argument(source + ": weights must be an array of rows");
  std::vector<std::vector<double>> rows;
  for (const auto& r : j) rows.push_back(r.get<std::vector<double>>());
  return matrixFromRows(rows, source);
}

[[nodiscard]] inline json matrixToJson(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(row);
  }
  return out;
}

[[nodiscard]] inline StateMatrix stateFromJson(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw std::invalid_argument(what + " must be an array of rows");
  StateMatrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (j[i].size() != j[0].size()) throw std::invalid_argument(what + ": ragged rows");
    for (std::size_t k = 0; k < j[i].size(); ++k)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = j[i][k].get<double>();
  }
  return m;
}

[[nodiscard]] inline json stateToJson(const StateMatrix& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    out.push_back(row);
  }
  return out;
}

/// uniform | random-row | random-sym | path to a JSON array or numeric table.
[[nodiscard]] inline WeightMatrix weightsFromSpec(const std::string& spec, int agents,
                                                  std::uint64_t seed, double minOffDiagonal = 0.0) {
  weights::WeightSpec ws;
  ws.agents = agents;
  ws.seed = seed;
  ws.minOffDiagonal = minOffDiagonal;
  if (spec == "uniform") {
    ws.kind = weights::WeightKind::Uniform;
  } else if (spec == "random-row") {
    ws.kind = weights::WeightKind::RandomRowStochastic;
  } else if (spec == "random-sym") {
    ws.kind = weights::WeightKind::RandomSymmetricBistochastic;
  } else {
    const std::filesystem::path path(spec);
    if (!std::filesystem::exists(path))
      throw std::invalid_argument("invalid weight spec '" + spec +
                                  "' (expected uniform, random-row, random-sym or a file path)");
    const auto text = readFile(path);
    ws.kind = weights::WeightKind::Explicit;
    if (path.extension() == ".json") {
      const auto j = json::parse(text);
      ws.explicitWeights = matrixFromJson(j.is_object() ? j.at("weights") : j, spec);
    } else {
      ws.explicitWeights = matrixFromRows(parseNumericRows(text, spec), spec);
    }
    if (ws.explicitWeights.rows() != agents)
      throw std::invalid_argument("weights file '" + spec + "' is " +
                                  std::to_string(ws.explicitWeights.rows()) + "x" +
                                  std::to_string(ws.explicitWeights.rows()) + " but N = " +
                                  std::to_string(agents));
  }
  return weights::make(ws);
}

/// Datum table file: rows of time, then N*d states, then N*d derivatives.
[[nodiscard]] inline InitialDatum datumFromTable(const std::string& path, int rows, int cols) {
  const auto data = parseNumericRows(readFile(path), path);
  const auto width = static_cast<std::size_t>(rows * cols);
  std::vector<DatumSample> samples;
  for (const auto& r : data) {
    if (r.size() != 1 + 2 * width)
      throw std::invalid_argument(path + ": datum rows need 1 + 2*" + std::to_string(width) +
                                  " columns (time, states, derivatives)");
    DatumSample s{r[0], StateMatrix(rows, cols), StateMatrix(rows, cols)};
    for (std::size_t k = 0; k < width; ++k) {
      s.state(static_cast<Eigen::Index>(k) / cols, static_cast<Eigen::Index>(k) % cols) = r[1 + k];
      s.derivative(static_cast<Eigen::Index>(k) / cols, static_cast<Eigen::Index>(k) % cols) =
          r[1 + width + k];
    }
    samples.push_back(std::move(s));
  }
  return InitialDatum::table(std::move(samples));
}

/// constant:c | linear:a,b | path. For N-agent models c, a and b scale the
/// ramp (agent 1 at the value, agent N at 0); two-agent models take them as
/// the gap.
[[nodiscard]] inline InitialDatum datumFromSpec(const std::string& spec, ModelKind model,
                                                int agents, int dim) {
  const bool scalar = isTwoAgent(model);
  const int rows = scalar ? 1 : agents;
  const int cols = scalar ? 1 : dim;
  auto shape = [&](double v) {
    return scalar ? StateMatrix::Constant(1, 1, v) : rampState(agents, dim, v);
  };
  auto number = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw std::invalid_argument("invalid datum spec '" + spec + "': '" + s + "' is not a number");
    }
  };
  if (spec.rfind("constant:", 0) == 0) return InitialDatum::constant(shape(number(spec.substr(9))));
  if (spec.rfind("linear:", 0) == 0) {
    const auto body = spec.substr(7);
    const auto comma = body.find(',');
    if (comma == std::string::npos)
      throw std::invalid_argument("invalid datum spec '" + spec + "' (expected linear:a,b)");
    return InitialDatum::linear(shape(number(body.substr(0, comma))),
                                shape(number(body.substr(comma + 1))));
  }
  if (std::filesystem::exists(spec)) return datumFromTable(spec, rows, cols);
  throw std::invalid_argument("invalid datum spec '" + spec +
                              "' (expected constant:c, linear:a,b or a file path)");
}

[[nodiscard]] inline json datumToJson(const InitialDatum& d) {
  json j;
  switch (d.kind()) {
    case DatumKind::Constant:
      j["kind"] = "constant";
      j["value"] = stateToJson(d.offset());
      break;
    case DatumKind::Linear:
      j["kind"] = "linear";
      j["offset"] = stateToJson(d.offset());
      j["slope"] = stateToJson(d.slope());
      break;
    case DatumKind::SampledTable: {
      j["kind"] = "table";
      json samples = json::array();
      for (const auto& s : d.samples())
        samples.push_back({{"time", s.time},
                           {"state", stateToJson(s.state)},
                           {"derivative", stateToJson(s.derivative)}});
      j["samples"] = samples;
      break;
    }
  }
  return j;
}

[[nodiscard]] inline InitialDatum datumFromJson(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "constant") return InitialDatum::constant(stateFromJson(j.at("value"), "datum value"));
  if (kind == "linear")
    return InitialDatum::linear(stateFromJson(j.at("offset"), "datum offset"),
                                stateFromJson(j.at("slope"), "datum slope"));
  if (kind == "table") {
    std::vector<DatumSample> samples;
    for (const auto& s : j.at("samples"))
      samples.push_back({s.at("time").get<double>(), stateFromJson(s.at("state"), "datum state"),
                         stateFromJson(s.at("derivative"), "datum derivative")});
    return InitialDatum::table(std::move(samples));
  }
  throw std::invalid_argument("unknown datum kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Command-line values; any field that is set wins over the config file.
struct Overrides {
  std::optional<std::string> model;
  std::optional<double> tau;
  std::optional<double> lambda;
  std::optional<int> stepsPerDelay;
  std::optional<double> tEnd;
  std::optional<int> agents;
  std::optional<int> dim;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> weights;
  std::optional<std::string> datum;
  std::optional<std::string> derivativeMode;
};

/// Builds a validated SimConfig. Defaults: steps_per_delay 32, datum
/// constant:1, weights uniform, n 3 (two-agent models: 2), d 1, seed 0,
/// t_end = max(50, 40 tau) rounded onto the mesh.
[[nodiscard]] inline SimConfig parseConfig(const json& file, const Overrides& o = {}) {
  if (!file.is_null() && !file.is_object())
    throw std::invalid_argument("config must be a JSON object");
  auto has = [&](const char* key) { return file.is_object() && file.contains(key); };
  auto required = [&](const char* key, auto fromFlag) {
    using T = typename decltype(fromFlag)::value_type;
    if (fromFlag) return *fromFlag;
    if (!has(key)) throw std::invalid_argument(std::string("missing required field '") + key + "'");
    return file.at(key).template get<T>();
  };
  auto optional = [&](const char* key, auto fromFlag, auto fallback) {
    using T = decltype(fallback);
    if (fromFlag) return static_cast<T>(*fromFlag);
    if (has(key)) return file.at(key).template get<T>();
    return fallback;
  };

  SimConfig c;
  try {
    c.model = parseModel(required("model", o.model));
    c.tau = required("tau", o.tau);
    c.lambda = required("lambda", o.lambda);
    c.stepsPerDelay = optional("steps_per_delay", o.stepsPerDelay, 32);
    c.seed = optional("seed", o.seed, std::uint64_t{0});
    c.derivativeMode =
        parseDerivativeMode(optional("derivative_mode", o.derivativeMode, std::string("backward-difference")));
    const bool scalar = isTwoAgent(c.model);
    c.agents = scalar ? 2 : optional("n", o.agents, 3);
    c.dim = scalar ? 1 : optional("d", o.dim, 1);
    if (has("classifier")) {
      const auto& k = file.at("classifier");
      c.classifier.tolLow = k.value("tol_low", c.classifier.tolLow);
      c.classifier.tolHigh = k.value("tol_high", c.classifier.tolHigh);
      c.classifier.trailingFraction = k.value("trailing_fraction", c.classifier.trailingFraction);
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config field has the wrong type: ") + e.what());
  }

  if (!(c.tau >= 0.0) || !std::isfinite(c.tau)) throw std::invalid_argument("tau must be >= 0");
  if (!(c.lambda >= 0.0) || !std::isfinite(c.lambda))
    throw std::invalid_argument("lambda must be >= 0");
  if (c.stepsPerDelay < 1) throw std::invalid_argument("steps_per_delay must be >= 1");
  if (c.agents < 2) throw std::invalid_argument("n must be >= 2");
  if (c.dim < 1) throw std::invalid_argument("d must be >= 1");

  if (o.tEnd || has("t_end")) {
    c.tEnd = o.tEnd ? *o.tEnd : file.at("t_end").get<double>();
    (void)makeMesh(c.tau, c.stepsPerDelay, c.tEnd);
  } else {
    c.tEnd = defaultHorizon(c.tau, c.stepsPerDelay);
  }

  if (o.datum) {
    c.datum = datumFromSpec(*o.datum, c.model, c.agents, c.dim);
  } else if (has("datum")) {
    const auto& d = file.at("datum");
    c.datum = d.is_string() ? datumFromSpec(d.get<std::string>(), c.model, c.agents, c.dim)
                            : datumFromJson(d);
  } else {
    c.datum = datumFromSpec("constant:1", c.model, c.agents, c.dim);
  }
  const int rows = isTwoAgent(c.model) ? 1 : c.agents;
  const int cols = isTwoAgent(c.model) ? 1 : c.dim;
  if (c.datum.rows() != rows || c.datum.cols() != cols)
    throw std::invalid_argument("datum shape " + std::to_string(c.datum.rows()) + "x" +
                                std::to_string(c.datum.cols()) + " does not match " +
                                std::to_string(rows) + "x" + std::to_string(cols));
  if (c.datum.kind() == DatumKind::SampledTable)
    (void)initHistory(c.datum, makeMesh(c.tau, c.stepsPerDelay, c.tEnd), rows, cols);

  if (!isTwoAgent(c.model)) {
    if (o.weights) {
      c.weights = weightsFromSpec(*o.weights, c.agents, c.seed);
    } else if (has("weights")) {
      const auto& w = file.at("weights");
      c.weights = w.is_string()
                      ? weightsFromSpec(w.get<std::string>(), c.agents, c.seed,
                                        file.value("min_off_diagonal", 0.0))
                      : weights::validate(matrixFromJson(w, "config weights"));
    } else {
      c.weights = weights::makeUniform(c.agents);
    }
    if (c.weights.size() != c.agents)
      throw std::invalid_argument("weight matrix is " + std::to_string(c.weights.size()) +
                                  "x" + std::to_string(c.weights.size()) + " but n = " +
                                  std::to_string(c.agents));
    if (c.model == ModelKind::TransmissionN && !c.weights.flags.rowStochastic)
      throw std::invalid_argument("transmission model needs row-stochastic weights");
  }
  return c;
}

[[nodiscard]] inline SimConfig parseConfigFile(const std::string& path, const Overrides& o = {}) {
  json j;
  try {
    j = json::parse(readFile(path));
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path + ": invalid JSON: " + e.what());
  }
  return parseConfig(j, o);
}

/// Fully resolved configuration; parseConfig(configToJson(c)) reproduces c.
[[nodiscard]] inline json configToJson(const SimConfig& c) {
  json j;
  j["model"] = std::string(toString(c.model));
  j["tau"] = c.tau;
  j["lambda"] = c.lambda;
  j["steps_per_delay"] = c.stepsPerDelay;
  j["t_end"] = c.tEnd;
  j["n"] = c.agents;
  j["d"] = c.dim;
  j["seed"] = c.seed;
  j["derivative_mode"] = std::string(toString(c.derivativeMode));
  j["datum"] = datumToJson(c.datum);
  if (!isTwoAgent(c.model)) j["weights"] = matrixToJson(c.weights.weights);
  j["classifier"] = {{"tol_low", c.classifier.tolLow},
                     {"tol_high", c.classifier.tolHigh},
                     {"trailing_fraction", c.classifier.trailingFraction}};
  return j;
}

// ---------------------------------------------------------------------------
// Figure presets
// ---------------------------------------------------------------------------

struct SweepSpec {
  ModelKind model = ModelKind::TwoAgentReaction;
  sweep::Range lambdaRange;
  sweep::Range tauRange;
  sweep::Resolution resolution;
  SimConfig base;
  sweep::HorizonPolicy horizon;
};

struct FigurePreset {
  std::string name;
  std::vector<SimConfig> runs;  // first run is the lambda = 0 baseline
  std::optional<SweepSpec> sweep;
};

/// Parameter sets of the four figures; all runs start from a unit gap.
[[nodiscard]] inline FigurePreset figurePreset(std::string_view name) {
  FigurePreset p;
  p.name = std::string(name);
  auto batch = [&](ModelKind model, double tau, std::initializer_list<double> lambdas,
                   double tEnd) {
    const int m = 64;
    for (double l : lambdas) p.runs.push_back(twoAgentConfig(model, l, tau, m, meshHorizon(tau, m, tEnd)));
  };
  if (name == "fig1") {
    batch(ModelKind::TwoAgentTransmission, 0.25, {0.0, 1.0, 4.0, 4.5}, 100.0);
  } else if (name == "fig2") {
    batch(ModelKind::TwoAgentTransmission, 1.25, {0.0, 0.2, 0.6, 1.0}, 100.0);
  } else if (name == "fig3") {
    SweepSpec s;
    s.model = ModelKind::TwoAgentReaction;
    s.lambdaRange = {0.0, 3.0};
    s.tauRange = {0.0, 1.0};
    s.resolution = {31, 41};
    s.base = twoAgentConfig(ModelKind::TwoAgentReaction, 0.0, 0.5, 32, 1.0);
    s.horizon = {400.0, 200.0};
    p.sweep = s;
  } else if (name == "fig4") {
    batch(ModelKind::TwoAgentReaction, 0.85, {0.0, 0.04, 0.25, 0.45}, 400.0);
  } else {
    throw std::invalid_argument("unknown figure '" + std::string(name) +
                                "' (expected fig1, fig2, fig3 or fig4)");
  }
  return p;
}

// ---------------------------------------------------------------------------
// Trajectory CSV
// ---------------------------------------------------------------------------

[[nodiscard]] inline std::vector<std::string> trajectoryHeader(const Trajectory& tr) {
  std::vector<std::string> h{"time"};
  if (tr.scalarGap) {
    if (tr.hasStates()) h.emplace_back("x");
    h.insert(h.end(), {"d_x", "argmax_i", "argmax_j"});
    return h;
  }
  if (tr.hasStates())
    for (int i = 1; i <= tr.agents; ++i)
      for (int k = 1; k <= tr.dim; ++k) h.push_back("x" + std::to_string(i) + "_" + std::to_string(k));
  h.emplace_back("d_x");
  for (int k = 1; k <= tr.dim; ++k) h.push_back("X_" + std::to_string(k));
  h.insert(h.end(), {"argmax_i", "argmax_j"});
  return h;
}

/// One row per mesh sample from t = -tau; agent indices are 1-based.
[[nodiscard]] inline std::string trajectoryCsv(const Trajectory& tr) {
  std::string out;
  const auto header = trajectoryHeader(tr);
  for (std::size_t c = 0; c < header.size(); ++c) out += (c ? "," : "") + header[c];
  out += '\n';
  for (std::size_t s = 0; s < tr.size(); ++s) {
    out += formatNumber(tr.times[s]);
    if (tr.hasStates())
      for (std::size_t k = 0; k < tr.width(); ++k) out += "," + formatNumber(tr.states[s * tr.width() + k]);
    out += "," + formatNumber(tr.diameters[s].value);
    if (!tr.scalarGap)
      for (int k = 0; k < tr.dim; ++k) out += "," + formatNumber(tr.means[s * static_cast<std::size_t>(tr.dim) + static_cast<std::size_t>(k)]);
    out += "," + std::to_string(tr.diameters[s].pair.first + 1) + "," +
           std::to_string(tr.diameters[s].pair.second + 1) + "\n";
  }
  return out;
}

inline void writeTrajectoryCsv(const Trajectory& tr, const std::filesystem::path& path) {
  writeFile(path, trajectoryCsv(tr));
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  [[nodiscard]] std::size_t column(std::string_view name) const {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == name) return c;
    throw std::out_of_range("no column '" + std::string(name) + "'");
  }
};

/// Reads a numeric CSV with a header line.
[[nodiscard]] inline CsvTable readCsv(const std::filesystem::path& path) {
  const auto text = readFile(path);
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("'" + path.string() + "' is empty");
  std::stringstream hs(line);
  for (std::string cell; std::getline(hs, cell, ',');) t.header.push_back(cell);
  t.rows = parseNumericRows(text.substr(text.find('\n') + 1), path.string());
  for (const auto& r : t.rows)
    if (r.size() != t.header.size())
      throw std::runtime_error("'" + path.string() + "': row width does not match header");
  return t;
}

// ---------------------------------------------------------------------------
// Grid output
// ---------------------------------------------------------------------------

[[nodiscard]] inline std::string gridCsv(const sweep::StabilityGrid& g) {
  std::string out =
      "lambda,tau,classification,final_d_x,trailing_peak,amplitude_ratio,t_end,steps_per_delay\n";
  for (std::size_t t = 0; t < g.taus.size(); ++t)
    for (std::size_t l = 0; l < g.lambdas.size(); ++l) {
      const auto& c = g.at(l, t);
      out += formatNumber(g.lambdas[l]) + "," + formatNumber(g.taus[t]) + "," +
             std::string(toString(c.label)) + "," + formatNumber(c.finalDiameter) + "," +
             formatNumber(c.trailingPeak) + "," + formatNumber(c.amplitudeRatio) + "," +
             formatNumber(c.tEnd) + "," + std::to_string(c.stepsPerDelay) + "\n";
    }
  return out;
}

inline void writeGridCsv(const sweep::StabilityGrid& g, const std::filesystem::path& path) {
  writeFile(path, gridCsv(g));
}

[[nodiscard]] inline json gridToJson(const sweep::StabilityGrid& g) {
  json j;
  j["model"] = std::string(toString(g.model));
  j["lambda"] = g.lambdas;
  j["tau"] = g.taus;
  json raster = json::array();
  for (std::size_t t = 0; t < g.taus.size(); ++t) {
    json row = json::array();
    for (std::size_t l = 0; l < g.lambdas.size(); ++l) row.push_back(std::string(toString(g.at(l, t).label)));
    raster.push_back(row);
  }
  j["raster"] = raster;  // raster[tau index][lambda index]
  json boundary = json::array();
  for (std::size_t l = 0; l < g.boundary.size(); ++l) {
    const auto& b = g.boundary[l];
    boundary.push_back({{"lambda", g.lambdas[l]},
                        {"tau", b.tau ? json(*b.tau) : json(nullptr)},
                        {"converged_below", b.convergedBelow},
                        {"diverged_above", b.divergedAbove}});
  }
  j["boundary"] = boundary;
  json curves = json::array();
  for (const auto& c : g.overlays) {
    json taus = json::array();
    for (double v : c.taus) taus.push_back(jsonNumber(v));
    curves.push_back({{"label", c.label}, {"lambda", c.lambdas}, {"tau", taus}});
  }
  j["overlays"] = curves;
  return j;
}

inline void writeGridJson(const sweep::StabilityGrid& g, const std::filesystem::path& path) {
  writeFile(path, gridToJson(g).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Diagnostics output
// ---------------------------------------------------------------------------

[[nodiscard]] inline std::string lyapunovCsv(const diagnostics::LyapunovSeries& s) {
  std::string out = "time,value,decrement,bound,checked\n";
  for (std::size_t k = 0; k < s.values.size(); ++k) {
    out += formatNumber(s.times[k]) + "," + formatNumber(s.values[k]);
    if (k == 0)
      out += ",,,0\n";
    else
      out += "," + formatNumber(s.decrements[k - 1]) + "," + formatNumber(s.bounds[k - 1]) + "," +
             (s.checked[k - 1] ? "1" : "0") + "\n";
  }
  return out;
}

inline void writeLyapunovCsv(const diagnostics::LyapunovSeries& s, const std::filesystem::path& path) {
  writeFile(path, lyapunovCsv(s));
}

[[nodiscard]] inline std::string ijCsv(const Trajectory& tr, const diagnostics::IJReport& r) {
  std::string out = "time,argmax_i,argmax_j\n";
  for (std::size_t k = 0; k < r.pairs.size(); ++k)
    out += formatNumber(tr.times[tr.origin() + k]) + "," + std::to_string(r.pairs[k].first + 1) +
           "," + std::to_string(r.pairs[k].second + 1) + "\n";
  return out;
}

inline void writeIJCsv(const Trajectory& tr, const diagnostics::IJReport& r,
                       const std::filesystem::path& path) {
  writeFile(path, ijCsv(tr, r));
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

struct RunManifest {
  SimConfig config;
  std::string toolVersion = kToolVersion;
  double wallSeconds = 0.0;
  std::vector<std::string> outputs;
  Classification classification = Classification::Inconclusive;
  ClassificationEvidence evidence;
};

[[nodiscard]] inline json manifestToJson(const RunManifest& m) {
  const auto& e = m.evidence;
  return {{"tool_version", m.toolVersion},
          {"wall_seconds", m.wallSeconds},
          {"config", configToJson(m.config)},
          {"outputs", m.outputs},
          {"classification", std::string(toString(m.classification))},
          {"evidence",
           {{"reference", jsonNumber(e.reference)},
            {"final_d_x", jsonNumber(e.finalDiameter)},
            {"trailing_peak", jsonNumber(e.trailingPeak)},
            {"previous_peak", jsonNumber(e.previousPeak)},
            {"amplitude_ratio", jsonNumber(e.amplitudeRatio)},
            {"window_samples", e.windowSamples},
            {"overflow", e.overflow},
            {"non_finite", e.nonFinite}}}};
}

inline void writeManifest(const RunManifest& m, const std::filesystem::path& path) {
  writeFile(path, manifestToJson(m).dump(2) + "\n");
}

}  // namespace nddc::io
