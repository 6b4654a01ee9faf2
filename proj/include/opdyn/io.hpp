#pragma once

// File formats.
//
//   network JSON   {"n": int, "w": [[...]], "m_mode": "uniform"|"mirror"|"explicit",
//                   "m": [[...]]}            ("m" only with m_mode "explicit")
//   edge list CSV  i,j,w_ij per line, 0-based; an optional non-numeric header
//   parameters     {"lambda": [...], "phi": [...], "threshold": [...], "y0": [...]}
//   trajectory CSV t,agent,y,y_hat
//   matrices       {"R": [[...]], "S": [[...]], "rho_P": x} plus one CSV per matrix

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include <json.hpp>

#include "opdyn/analysis.hpp"
#include "opdyn/dynamics.hpp"
#include "opdyn/graph.hpp"
#include "opdyn/steady_state.hpp"
#include "opdyn/types.hpp"

namespace opdyn::io {

using json = nlohmann::json;

/// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json read_json(const std::string& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw InvalidInput("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
  if (!out) throw Error("write to '" + path + "' failed");
}

inline json to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline json to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline Vector vector_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw InvalidInput(std::string(what) + " must be an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw InvalidInput(std::string(what) + " must contain only numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

inline Matrix matrix_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.empty()) {
    throw InvalidInput(std::string(what) + " must be a non-empty array of rows");
  }
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols) {
      throw InvalidInput(std::string(what) + " rows must be arrays of equal length");
    }
    for (std::size_t k = 0; k < cols; ++k) {
      if (!j[i][k].is_number()) throw InvalidInput(std::string(what) + " must contain numbers");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = j[i][k].get<double>();
    }
  }
  return m;
}

/// Rejects any key outside `allowed`.
inline void require_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                         const char* what) {
  if (!obj.is_object()) throw InvalidInput(std::string(what) + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) throw InvalidInput(std::string(what) + ": unknown field '" + key + "'");
  }
}

inline ConformityWeights conformity_from(std::string_view mode, const json* explicit_m) {
  if (mode == "uniform") return UniformConformity{};
  if (mode == "mirror") return MirrorConformity{};
  if (mode == "explicit") {
    if (!explicit_m) throw InvalidInput("m_mode 'explicit' requires an 'm' matrix");
    return ExplicitConformity{matrix_from_json(*explicit_m, "m")};
  }
  throw InvalidInput("unknown m_mode '" + std::string(mode) + "'");
}

inline InfluenceNetwork network_from_json(const json& j) {
  require_keys(j, {"n", "w", "m_mode", "m"}, "network");
  if (!j.contains("w")) throw InvalidInput("network JSON lacks 'w'");
  Matrix w = matrix_from_json(j["w"], "w");
  if (j.contains("n") && j["n"].get<std::int64_t>() != w.rows()) {
    throw InvalidInput("network JSON: 'n' disagrees with the size of 'w'");
  }
  const std::string mode = j.value("m_mode", std::string("uniform"));
  if (mode != "explicit" && j.contains("m")) {
    throw InvalidInput("network JSON: 'm' given but m_mode is '" + mode + "'");
  }
  return build_network(w, conformity_from(mode, j.contains("m") ? &j["m"] : nullptr));
}

inline json network_to_json(const InfluenceNetwork& net) {
  return json{{"n", net.n()},
              {"w", to_json(net.influence())},
              {"m_mode", "explicit"},
              {"m", to_json(net.conformity())}};
}

/// Parses `i,j,w_ij` lines into a dense weight matrix. The size is the
/// largest index + 1 unless `n` is given. Duplicate pairs are rejected.
inline Matrix edge_list_from_csv(const std::string& text, std::optional<std::size_t> n = {}) {
  struct Edge {
    std::size_t i, j;
    double w;
  };
  std::vector<Edge> edges;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::size_t max_index = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    auto trimmed = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    if (cells.size() != 3) {
      throw InvalidInput("edge list line " + std::to_string(line_no) + ": expected i,j,w_ij");
    }
    const std::string a = trimmed(cells[0]);
    const std::string b = trimmed(cells[1]);
    const std::string c = trimmed(cells[2]);
    Edge e{};
    const auto ri = std::from_chars(a.data(), a.data() + a.size(), e.i);
    const auto rj = std::from_chars(b.data(), b.data() + b.size(), e.j);
    const auto rw = std::from_chars(c.data(), c.data() + c.size(), e.w);
    const bool ok = ri.ec == std::errc{} && ri.ptr == a.data() + a.size() &&
                    rj.ec == std::errc{} && rj.ptr == b.data() + b.size() &&
                    rw.ec == std::errc{} && rw.ptr == c.data() + c.size();
    if (!ok) {
      if (edges.empty() && line_no == 1) continue;  // header
      throw InvalidInput("edge list line " + std::to_string(line_no) + " is malformed");
    }
    edges.push_back(e);
    max_index = std::max({max_index, e.i, e.j});
  }
  if (edges.empty()) throw InvalidInput("edge list is empty");
  const std::size_t size = n.value_or(max_index + 1);
  if (max_index >= size) throw InvalidInput("edge list index exceeds the declared size");
  const auto sz = static_cast<Eigen::Index>(size);
  Matrix w = Matrix::Zero(sz, sz);
  std::map<std::pair<std::size_t, std::size_t>, bool> seen;
  for (const Edge& e : edges) {
    if (!seen.emplace(std::make_pair(e.i, e.j), true).second) {
      throw InvalidInput("edge list repeats the pair " + std::to_string(e.i) + "," +
                         std::to_string(e.j));
    }
    w(static_cast<Eigen::Index>(e.i), static_cast<Eigen::Index>(e.j)) = e.w;
  }
  return w;
}

/// Parameter file; y0 and threshold are optional.
struct ParameterFile {
  AgentParameters params;
  std::optional<Vector> y0;
};

inline ParameterFile parameters_from_json(const json& j) {
  require_keys(j, {"lambda", "phi", "threshold", "y0"}, "parameters");
  if (!j.contains("lambda") || !j.contains("phi")) {
    throw InvalidInput("parameters need 'lambda' and 'phi'");
  }
  ParameterFile out;
  out.params.lambda = vector_from_json(j["lambda"], "lambda");
  out.params.phi = vector_from_json(j["phi"], "phi");
  if (j.contains("threshold")) out.params.threshold = vector_from_json(j["threshold"], "threshold");
  if (j.contains("y0")) out.y0 = vector_from_json(j["y0"], "y0");
  out.params.validate(out.params.n());
  return out;
}

inline std::string trajectory_csv(const std::vector<Snapshot>& trajectory) {
  std::string out = "t,agent,y,y_hat\n";
  for (const Snapshot& s : trajectory) {
    for (Eigen::Index i = 0; i < s.y.size(); ++i) {
      out += std::to_string(s.t);
      out += ',';
      out += std::to_string(i);
      out += ',';
      out += format_double(s.y[i]);
      out += ',';
      out += format_double(s.y_hat[i]);
      out += '\n';
    }
  }
  return out;
}

/// Wide plot series: one row per recorded step, one column per agent.
inline std::string series_dat(const std::vector<Snapshot>& trajectory, bool expressed) {
  std::string out = "# t";
  if (!trajectory.empty()) {
    for (Eigen::Index i = 0; i < trajectory.front().y.size(); ++i) {
      out += expressed ? " yhat" : " y";
      out += std::to_string(i);
    }
  }
  out += '\n';
  for (const Snapshot& s : trajectory) {
    out += std::to_string(s.t);
    const Vector& v = expressed ? s.y_hat : s.y;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      out += ' ';
      out += format_double(v[i]);
    }
    out += '\n';
  }
  return out;
}

inline std::string matrix_csv(const Matrix& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

inline json matrices_to_json(const SystemMatrices& sys) {
  return json{{"R", to_json(sys.R)}, {"S", to_json(sys.S)}, {"rho_P", sys.rho_P}};
}

inline json report_to_json(const DisagreementReport& r) {
  json j{{"v_y0", r.v_y0},
         {"v_y_star", r.v_y_star},
         {"v_yhat_star", r.v_yhat_star},
         {"kappa", r.kappa ? json(*r.kappa) : json(nullptr)},
         {"private_gap_lower_bound",
          r.private_gap_lower_bound ? json(*r.private_gap_lower_bound) : json(nullptr)},
         {"tau_S", r.tau_S ? json(*r.tau_S) : json(nullptr)},
         {"y_star", to_json(r.y_star)},
         {"y_hat_star", to_json(r.y_hat_star)},
         {"per_agent_discrepancy", to_json(r.per_agent_discrepancy)},
         {"coincident_agents", r.coincident_agents}};
  if (r.inequalities) {
    j["inequalities_hold"] = {{"upper_chain", r.inequalities->upper_chain},
                              {"lower_chain", r.inequalities->lower_chain},
                              {"expressed_spread", r.inequalities->expressed_spread}};
  } else {
    j["inequalities_hold"] = nullptr;
  }
  return j;
}

inline std::string discrepancy_csv(const DisagreementReport& r) {
  std::string out = "agent,y_star,y_hat_star,discrepancy\n";
  for (Eigen::Index i = 0; i < r.y_star.size(); ++i) {
    out += std::to_string(i) + ',' + format_double(r.y_star[i]) + ',' +
           format_double(r.y_hat_star[i]) + ',' + format_double(r.per_agent_discrepancy[i]) +
           '\n';
  }
  return out;
}

}  // namespace opdyn::io
