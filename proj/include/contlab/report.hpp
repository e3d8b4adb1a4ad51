#pragma once

// CSV and JSON writers. Every number is written in its shortest round-trip
// decimal form, so re-reading a CSV reproduces the doubles bit for bit.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <system_error>
#include <variant>
#include <vector>

#include <json.hpp>

#include "contlab/bounds.hpp"
#include "contlab/expr.hpp"
#include "contlab/transport.hpp"

namespace contlab {

using Json = nlohmann::ordered_json;

class CsvWriter {
 public:
  using Cell = std::variant<double, int, std::string>;

  CsvWriter(const std::filesystem::path& path, std::initializer_list<std::string> header)
      : path_(path), out_(path) {
    if (!out_) throw std::runtime_error("cannot write '" + path.string() + "'");
    write_line(std::vector<std::string>(header));
  }

  void row(std::initializer_list<Cell> cells) {
    std::vector<std::string> text;
    text.reserve(cells.size());
    for (const auto& c : cells) text.push_back(format(c));
    write_line(text);
  }

  const std::filesystem::path& path() const noexcept { return path_; }

  static std::string format(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c)) return detail::format_number(*d);
    if (const auto* i = std::get_if<int>(&c)) return std::to_string(*i);
    const auto& s = std::get<std::string>(c);
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
  }

 private:
  void write_line(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

  std::filesystem::path path_;
  std::ofstream out_;
};

/// Long-form field: one row per (t, x) sample.
inline void write_field_csv(const std::filesystem::path& path, const SolutionField& field,
                            const std::string& value_column) {
  CsvWriter csv(path, {"t", "x", value_column});
  for (std::size_t i = 0; i < field.row_count(); ++i) {
    for (std::size_t j = 0; j < field.width(); ++j) {
      csv.row({field.times[i], field.xs[j], field.at(i, j)});
    }
  }
}

/// Reads back a long-form field written by write_field_csv.
inline SolutionField read_field_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::string line;
  std::getline(in, line);
  SolutionField f;
  std::vector<double> xs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double vals[3];
    std::size_t start = 0;
    for (int c = 0; c < 3; ++c) {
      const auto end = c < 2 ? line.find(',', start) : line.size();
      const std::string cell = line.substr(start, end - start);
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), vals[c]);
      if (ec != std::errc()) throw std::runtime_error("bad number '" + cell + "'");
      start = end + 1;
    }
    if (f.times.empty() || f.times.back() != vals[0]) {
      f.times.push_back(vals[0]);
      f.rows.push_back(static_cast<int>(f.rows.size()));
    }
    if (f.times.size() == 1) f.xs.push_back(vals[1]);
    f.values.push_back(vals[2]);
  }
  return f;
}

inline std::string to_string(CellStatus s) {
  switch (s) {
    case CellStatus::pass: return "pass";
    case CellStatus::fail: return "fail";
    case CellStatus::not_applicable: return "n/a";
  }
  return "?";
}

/// estimate,p,mu,t,lhs,rhs,margin,rhs_displayed,slack,status; NA for cells with inadmissible mu.
inline void write_certificates_csv(const std::filesystem::path& path,
                                   const std::vector<BoundCertificate>& certs) {
  CsvWriter csv(path, {"estimate", "p", "mu", "t", "lhs", "rhs", "margin", "rhs_displayed",
                       "slack", "status"});
  for (const auto& c : certs) {
    for (std::size_t k = 0; k < c.times.size(); ++k) {
      const bool na = c.status[k] == CellStatus::not_applicable;
      csv.row({to_string(c.estimate), c.order.label(), c.mu, c.times[k], c.lhs[k],
               na ? CsvWriter::Cell{std::string("NA")} : CsvWriter::Cell{c.rhs[k]},
               na ? CsvWriter::Cell{std::string("NA")} : CsvWriter::Cell{c.margin[k]},
               na ? CsvWriter::Cell{std::string("NA")} : CsvWriter::Cell{c.rhs_displayed[k]},
               c.slack[k], to_string(c.status[k])});
    }
  }
}

inline Json to_json(const BoundCertificate& c) {
  Json invalid = Json::array();
  for (std::size_t k = 0; k < c.times.size(); ++k) {
    if (c.status[k] == CellStatus::not_applicable) invalid.push_back(c.times[k]);
  }
  Json j;
  j["estimate"] = to_string(c.estimate);
  j["p"] = c.order.label();
  j["mu"] = c.mu;
  j["verdict"] = c.pass() ? "pass" : "fail";
  j["compatible"] = c.compatible;
  j["fail_cells"] = c.fail_cells;
  j["worst_margin"] = std::isfinite(c.worst_margin) ? Json(c.worst_margin) : Json(nullptr);
  j["worst_margin_t"] = c.worst_margin_time;
  j["slack_at_worst"] = c.slack_at_worst;
  j["mu_valid"] = {{"everywhere", c.mu_valid_everywhere()}, {"invalid_times", invalid}};
  return j;
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

}  // namespace contlab
