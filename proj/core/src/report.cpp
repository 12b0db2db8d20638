#include "poseuq/report.hpp"

#include <cstdio>
#include <map>
#include <sstream>
#include <vector>

namespace poseuq {

namespace {

std::string pm(double mean, double stddev, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f ± %.*f", decimals, mean, decimals, stddev);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  // "±" is two bytes but one column.
  std::size_t cols = 0;
  for (unsigned char c : s) cols += (c & 0xC0) != 0x80;
  return cols >= width ? s + " " : s + std::string(width - cols, ' ');
}

// rows: method -> (column -> cell)
std::string table(const std::string& title, const std::vector<std::string>& columns,
                  const std::vector<std::string>& methods,
                  const std::map<std::string, std::map<std::string, std::string>>& cells) {
  std::size_t first = 6;
  for (const auto& m : methods) first = std::max(first, m.size() + 2);
  std::size_t width = 16;
  for (const auto& c : columns) width = std::max(width, c.size() + 2);

  std::ostringstream out;
  out << title << '\n' << pad("method", first);
  for (const auto& c : columns) out << pad(c, width);
  out << '\n';
  for (const auto& m : methods) {
    out << pad(m, first);
    for (const auto& c : columns) {
      auto it = cells.at(m).find(c);
      out << pad(it == cells.at(m).end() ? "-" : it->second, width);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace

Json to_json(const CorrelationReport& report) {
  Json rows = Json::array();
  for (const auto& r : report.rows) {
    Json per = Json::array();
    for (const auto& [obj, rho] : r.rho_by_object) {
      per.push_back(Json{{"object_id", obj}, {"spearman_rho", rho},
                         {"n_frames", r.frames_by_object.at(obj)}});
    }
    rows.push_back(Json{{"estimator_id", r.estimator_id},
                        {"method", r.method},
                        {"mean", r.mean},
                        {"std", r.stddev},
                        {"n_objects", r.rho_by_object.size()},
                        {"objects", std::move(per)}});
  }
  return Json{{"report", "correlation"},
              {"aggregation", "mean and sample std of per-object Spearman rho across objects"},
              {"rows", std::move(rows)},
              {"warnings", report.warnings}};
}

Json to_json(const SelectionReport& report) {
  Json rows = Json::array();
  for (const auto& r : report.rows) {
    Json entries = Json::array();
    for (const auto& e : r.entries) {
      entries.push_back(Json{{"object_id", e.object_id},
                             {"sequence_id", e.sequence_id},
                             {"frame_index", e.frame_index},
                             {"add_error", e.add_error},
                             {"fallback", e.fallback}});
    }
    Json per = Json::object();
    for (const auto& [obj, m] : r.mean_by_object) per[obj] = m;
    rows.push_back(Json{{"estimator_id", r.estimator_id},
                        {"method", r.method},
                        {"mean_add_error", r.mean},
                        {"std_add_error", r.stddev},
                        {"mean_by_object", std::move(per)},
                        {"selections", std::move(entries)}});
  }
  return Json{{"report", "view_selection"},
              {"units", "meters"},
              {"aggregation", "per-object mean over sequences, then mean and sample std across objects"},
              {"rows", std::move(rows)},
              {"warnings", report.warnings}};
}

std::string format_table(const CorrelationReport& report) {
  std::vector<std::string> columns;
  std::vector<std::string> methods;
  std::map<std::string, std::map<std::string, std::string>> cells;
  for (const auto& r : report.rows) {
    if (std::find(columns.begin(), columns.end(), r.estimator_id) == columns.end()) {
      columns.push_back(r.estimator_id);
    }
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) {
      methods.push_back(r.method);
    }
    cells[r.method][r.estimator_id] =
        r.rho_by_object.empty() ? "n/a" : pm(r.mean, r.stddev, 2);
  }
  return table("# Spearman rho between UQ and ADD error (mean ± std across objects)",
               columns, methods, cells);
}

std::string format_table(const SelectionReport& report) {
  std::vector<std::string> columns;
  std::vector<std::string> methods;
  std::map<std::string, std::map<std::string, std::string>> cells;
  for (const auto& r : report.rows) {
    if (std::find(columns.begin(), columns.end(), r.estimator_id) == columns.end()) {
      columns.push_back(r.estimator_id);
    }
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) {
      methods.push_back(r.method);
    }
    cells[r.method][r.estimator_id] =
        r.mean_by_object.empty() ? "n/a" : pm(100.0 * r.mean, 100.0 * r.stddev, 1);
  }
  return table(
      "# ADD error of the selected frame in cm (per-object means; mean ± std across objects)",
      columns, methods, cells);
}

}  // namespace poseuq
