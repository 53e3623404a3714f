#include "fragsim/report.hpp"

#include <charconv>
#include <fstream>

#include "fragsim/errors.hpp"

namespace fragsim {

namespace {

std::string number(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace

Json report_json(const ConvergenceReport& report) {
  Json verdicts = Json::array();
  for (const auto& v : report.verdicts)
    verdicts.push_back(Json{{"id", v.id}, {"description", v.description}, {"passed", v.passed}, {"detail", v.detail}});
  Json tables = Json::object();
  for (const auto& t : report.tables) tables[t.name] = Json{{"columns", t.columns}, {"rows", t.rows}};
  return Json{{"experiment", report.experiment},
              {"passed", report.passed()},
              {"parameters", report.parameters},
              {"verdicts", verdicts},
              {"tables", tables},
              {"diagnostics", report.diagnostics},
              {"warnings", report.warnings}};
}

std::string report_text(const ConvergenceReport& report) { return report_json(report).dump(2) + "\n"; }

std::string csv_field(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string quoted = "\"";
  for (const char c : field) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + "\"";
}

void write_csv(std::ostream& out, const Table& table) {
  for (std::size_t i = 0; i < table.columns.size(); ++i) out << (i ? "," : "") << csv_field(table.columns[i]);
  out << "\r\n";
  for (const auto& row : table.rows) {
    if (row.size() != table.columns.size()) throw std::logic_error("table " + table.name + " has a ragged row");
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << number(row[i]);
    out << "\r\n";
  }
}

void write_raw_jsonl(std::ostream& out, const ConvergenceReport& report) {
  for (const auto& [name, values] : report.raw) out << Json{{"name", name}, {"values", values}}.dump() << '\n';
}

void write_report_files(const std::filesystem::path& dir, const ConvergenceReport& report, bool raw) {
  std::filesystem::create_directories(dir);
  open_out(dir / "report.json") << report_text(report);
  for (const auto& t : report.tables) {
    auto out = open_out(dir / (t.name + ".csv"));
    write_csv(out, t);
  }
  if (raw) {
    auto out = open_out(dir / "raw_samples.jsonl");
    write_raw_jsonl(out, report);
  }
}

}  // namespace fragsim
