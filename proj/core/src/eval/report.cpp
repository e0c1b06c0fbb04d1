#include "endonav/eval/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "endonav/errors.hpp"

namespace endonav::eval {
namespace {

using nlohmann::json;

const TTestResult* find_test(const AggregateReport& r, env::TaskId task, const std::string& model,
                             std::string_view metric) {
  for (const auto& c : r.comparisons)
    if (c.task == task && (c.model_a == model || c.model_b == model)) return &c.tests.at(std::string(metric));
  return nullptr;
}

const MeanStd& pick(const CellSummary& c, std::string_view name) {
  if (name == "success") return c.success;
  if (name == "procedure_time") return c.procedure_time;
  if (name == "path_ratio") return c.path_ratio;
  if (name == "force_mean") return c.force_mean;
  if (name == "force_max") return c.force_max;
  if (name == "speed_mean") return c.speed_mean;
  return c.speed_max;
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json opt_number(const std::optional<double>& v) { return v ? number(*v) : json(nullptr); }

json test_json(const TTestResult& t) {
  return {{"t", number(t.t)},       {"p", number(t.p)},
          {"dof", t.dof},           {"n", t.n},
          {"mean_diff", number(t.mean_diff)}, {"degenerate", t.degenerate},
          {"significant", t.significant}, {"stars", std::string(stars(t.p))},
          {"note", t.note}};
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> csv_header() {
  std::vector<std::string> h = {"task", "model", "n"};
  for (auto name : kMetricNames)
    for (const char* suffix : {"_mean", "_std", "_p", "_sig"}) h.push_back(std::string(name) + suffix);
  return h;
}

std::string to_csv(const AggregateReport& report) {
  std::ostringstream out;
  const auto header = csv_header();
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << "\n";
  for (const auto& c : report.cells) {
    out << env::to_string(c.task) << "," << c.model << "," << c.episodes;
    for (auto name : kMetricNames) {
      const MeanStd& m = pick(c, name);
      const TTestResult* t = find_test(report, c.task, c.model, name);
      out << "," << format_number(m.n ? m.mean : NAN) << "," << format_number(m.n ? m.std : NAN) << ","
          << (t ? format_number(t->p) : "") << "," << (t ? stars(t->p) : "");
    }
    out << "\n";
  }
  return out.str();
}

json to_json(const AggregateReport& report) {
  json cells = json::array();
  for (const auto& c : report.cells) {
    json j = {{"task", env::to_string(c.task)}, {"model", c.model}, {"n", c.episodes}};
    for (auto name : kMetricNames) {
      const MeanStd& m = pick(c, name);
      j[std::string(name)] = {{"mean", number(m.mean)}, {"std", number(m.std)}, {"n", m.n}};
    }
    cells.push_back(std::move(j));
  }
  json comparisons = json::array();
  for (const auto& c : report.comparisons) {
    json tests = json::object();
    for (const auto& [name, t] : c.tests) tests[name] = test_json(t);
    comparisons.push_back({{"task", env::to_string(c.task)}, {"model_a", c.model_a},
                           {"model_b", c.model_b}, {"tests", tests}});
  }
  json episodes = json::array();
  for (const auto& e : report.episodes) {
    episodes.push_back({{"task", env::to_string(e.task)},
                        {"model", e.model},
                        {"vasculature", e.vasculature},
                        {"seed", e.seed},
                        {"success", e.success},
                        {"procedure_time", opt_number(e.procedure_time)},
                        {"path_ratio", opt_number(e.path_ratio)},
                        {"tip_force_mean", e.tip_force_mean},
                        {"tip_force_max", e.tip_force_max},
                        {"tip_speed_mean", e.tip_speed_mean},
                        {"tip_speed_max", e.tip_speed_max},
                        {"steps", e.steps},
                        {"initial_pathlength", e.initial_pathlength},
                        {"final_pathlength", e.final_pathlength}});
  }
  return {{"schema", kReportSchema}, {"cells", cells}, {"comparisons", comparisons}, {"episodes", episodes}};
}

void write_report(const AggregateReport& report, const std::filesystem::path& path, ReportFormat format) {
  const std::string text = format == ReportFormat::Csv ? to_csv(report) : to_json(report).dump(1) + "\n";
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << text;
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

std::vector<std::map<std::string, std::string>> read_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(l);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!l.empty() && l.back() == ',') cells.emplace_back();
    return cells;
  };
  if (!std::getline(in, line)) return {};
  const auto header = split(line);
  std::vector<std::map<std::string, std::string>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size())
      throw ParseError("csv line " + std::to_string(lineno) + ": " + std::to_string(cells.size()) +
                       " cells, header has " + std::to_string(header.size()));
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < header.size(); ++i) row[header[i]] = cells[i];
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<EpisodeMetrics> episodes_from_json(const json& doc) {
  if (doc.value("schema", "") != kReportSchema) throw ParseError("not an endonav-report/1 document");
  std::vector<EpisodeMetrics> out;
  auto opt = [](const json& v) -> std::optional<double> {
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
  };
  for (const auto& e : doc.at("episodes")) {
    EpisodeMetrics m;
    m.task = env::task_from_string(e.at("task").get<std::string>());
    m.model = e.at("model").get<std::string>();
    m.vasculature = e.at("vasculature").get<std::string>();
    m.seed = e.at("seed").get<std::uint64_t>();
    m.success = e.at("success").get<bool>();
    m.procedure_time = opt(e.at("procedure_time"));
    m.path_ratio = opt(e.at("path_ratio"));
    m.tip_force_mean = e.at("tip_force_mean").get<double>();
    m.tip_force_max = e.at("tip_force_max").get<double>();
    m.tip_speed_mean = e.at("tip_speed_mean").get<double>();
    m.tip_speed_max = e.at("tip_speed_max").get<double>();
    m.steps = e.at("steps").get<std::size_t>();
    m.initial_pathlength = e.at("initial_pathlength").get<double>();
    m.final_pathlength = e.at("final_pathlength").get<double>();
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace endonav::eval
