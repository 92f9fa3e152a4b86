#pragma once

// Tabular reports with an embedded config block, written as CSV (17 significant
// digits, '#'-prefixed header lines) or as JSON with the same fields.
//
// CSV layout:
//   # config: {...compact JSON...}
//   # summary: {...compact JSON...}
//   col_a,col_b,...
//   rows
//
// JSON layout:
//   {"config": {...}, "summary": {...}, "columns": [...], "rows": [{col: value}, ...]}

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "kramers/sampling.hpp"
#include "kramers/spectral_solver.hpp"

namespace kramers::io {

using Cell = std::variant<std::int64_t, double, std::string>;

struct Table {
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add_row(std::vector<Cell> row) {
    if (row.size() != columns.size()) throw std::invalid_argument("Table::add_row: column count mismatch");
    rows.push_back(std::move(row));
  }

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    throw std::out_of_range("Table: no column " + name);
  }

  double number(std::size_t row, const std::string& name) const {
    const Cell& c = rows.at(row).at(column(name));
    if (const auto* d = std::get_if<double>(&c)) return *d;
    if (const auto* i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
    throw std::invalid_argument("Table: column " + name + " is not numeric");
  }
};

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline Cell parse_cell(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (!s.empty()) {
    std::size_t pos = 0;
    try {
      if (s.find_first_of(".eE") == std::string::npos) {
        const long long v = std::stoll(s, &pos);
        if (pos == s.size()) return static_cast<std::int64_t>(v);
      }
      pos = 0;
      const double d = std::stod(s, &pos);
      if (pos == s.size()) return d;
    } catch (const std::exception&) {
    }
  }
  return s;
}

inline nlohmann::ordered_json cell_json(const Cell& c) {
  if (const auto* i = std::get_if<std::int64_t>(&c)) return *i;
  if (const auto* d = std::get_if<double>(&c)) {
    if (std::isfinite(*d)) return *d;
    return format_double(*d);  // JSON has no nan/inf literals
  }
  return std::get<std::string>(c);
}

inline Cell json_cell(const nlohmann::ordered_json& j) {
  if (j.is_number_integer()) return static_cast<std::int64_t>(j.get<long long>());
  if (j.is_number()) return j.get<double>();
  const std::string s = j.get<std::string>();
  if (s == "nan" || s == "inf" || s == "-inf") return parse_cell(s);
  return s;
}

}  // namespace detail

inline void write_csv(std::ostream& os, const Table& t) {
  os << "# config: " << t.config.dump() << "\n";
  os << "# summary: " << t.summary.dump() << "\n";
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << detail::csv_escape(t.columns[i]);
  os << "\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << ",";
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) os << format_double(v);
            else if constexpr (std::is_same_v<T, std::string>) os << detail::csv_escape(v);
            else os << v;
          },
          row[i]);
    }
    os << "\n";
  }
}

inline nlohmann::ordered_json to_json(const Table& t) {
  nlohmann::ordered_json j;
  j["config"] = t.config;
  j["summary"] = t.summary;
  j["columns"] = t.columns;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& row : t.rows) {
    nlohmann::ordered_json r = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < row.size(); ++i) r[t.columns[i]] = detail::cell_json(row[i]);
    j["rows"].push_back(std::move(r));
  }
  return j;
}

inline void write_json(std::ostream& os, const Table& t) { os << to_json(t).dump(2) << "\n"; }

inline Table read_csv(std::istream& is) {
  Table t;
  std::string line;
  bool have_header = false;
  while (std::getline(is, line)) {
    if (line.rfind("# config: ", 0) == 0) {
      t.config = nlohmann::ordered_json::parse(line.substr(10));
    } else if (line.rfind("# summary: ", 0) == 0) {
      t.summary = nlohmann::ordered_json::parse(line.substr(11));
    } else if (!line.empty() && line[0] == '#') {
      continue;
    } else if (!have_header) {
      t.columns = detail::csv_split(line);
      have_header = true;
    } else if (!line.empty()) {
      std::vector<Cell> row;
      for (const auto& f : detail::csv_split(line)) row.push_back(detail::parse_cell(f));
      t.add_row(std::move(row));
    }
  }
  return t;
}

inline Table from_json(const nlohmann::ordered_json& j) {
  Table t;
  t.config = j.at("config");
  t.summary = j.at("summary");
  t.columns = j.at("columns").get<std::vector<std::string>>();
  for (const auto& r : j.at("rows")) {
    std::vector<Cell> row;
    for (const auto& c : t.columns) row.push_back(detail::json_cell(r.at(c)));
    t.add_row(std::move(row));
  }
  return t;
}

inline Table read_json(std::istream& is) { return from_json(nlohmann::ordered_json::parse(is)); }

// ---------------------------------------------------------------------------
// Report objects

inline nlohmann::ordered_json finite_or_string(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

inline nlohmann::ordered_json to_json(const GridSpec& g) {
  nlohmann::ordered_json j;
  j["dims"] = g.dims;
  j["half_width"] = g.half_width;
  j["points_per_dim"] = g.points_per_dim;
  j["boundary"] = "dirichlet";
  j["prune_level"] = g.prune_level ? nlohmann::ordered_json(*g.prune_level) : nlohmann::ordered_json(nullptr);
  return j;
}

inline nlohmann::ordered_json to_json(const SpectralReport& r) {
  nlohmann::ordered_json j;
  j["lam0"] = finite_or_string(r.lam0());
  j["lam1"] = finite_or_string(r.lam1());
  j["lam2"] = finite_or_string(r.lam2());
  j["residual_norms"] = r.residual_norms;
  j["grid"] = r.grid ? to_json(*r.grid) : nlohmann::ordered_json(nullptr);
  j["operator_form"] = to_string(r.operator_form);
  j["shift"] = r.shift;
  j["iterations"] = r.iterations;
  j["unknowns"] = r.unknowns;
  return j;
}

inline nlohmann::ordered_json to_json(const ChainDiagnostics& d) {
  nlohmann::ordered_json j;
  j["kernel"] = to_string(d.kernel);
  j["chains"] = d.chains;
  j["n_steps"] = d.n_steps;
  j["burn_in"] = d.burn_in;
  j["accepted"] = d.accepted;
  j["acceptance_rate"] = d.acceptance_rate;
  j["ess"] = d.ess;
  j["autocorr_fit"] = {{"rate", finite_or_string(d.autocorr_fit.rate)},
                       {"r_squared", finite_or_string(d.autocorr_fit.r_squared)}};
  j["step_size"] = d.step_size;
  j["seed"] = d.seed;
  return j;
}

inline nlohmann::ordered_json to_json(const HittingStats& s) {
  nlohmann::ordered_json j;
  j["h"] = s.h;
  j["paths"] = s.paths;
  j["completed"] = s.transition_times.size();
  j["censored"] = s.censored;
  j["mean"] = finite_or_string(s.mean);
  j["std_err"] = finite_or_string(s.std_err);
  j["start"] = {{"sign", s.start_sign}, {"state", "I_-"}};
  j["target"] = {{"sign", 1}, {"radius", s.target_radius}, {"xbar_at_least", s.target_level}};
  j["dt"] = s.dt;
  j["seed"] = s.seed;
  return j;
}

}  // namespace kramers::io
