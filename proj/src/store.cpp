#include "qb/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace qb {

std::string format_double(double v) {
  if (std::isnan(v))
    return "nan";
  if (std::isinf(v))
    return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string run_csv(std::span<const RunRecord> runs) {
  std::string out = kRunCsvHeader;
  out += '\n';
  for (const auto &r : runs) {
    const std::string prefix = r.config_digest + ',' + std::to_string(r.seed) + ',';
    for (const auto &s : r.series) {
      out += prefix;
      out += std::to_string(s.t);
      out += ',';
      out += format_double(s.f_gap);
      out += ',';
      out += format_double(s.grad_norm);
      out += ',';
      out += format_double(s.dist_sq);
      out += '\n';
    }
  }
  return out;
}

std::string summary_csv(const SweepSummary &summary) {
  const bool appendix = std::any_of(
      summary.rows.begin(), summary.rows.end(),
      [](const SummaryRow &r) { return r.bound_appendix_b.has_value(); });
  std::string out = kSummaryCsvHeader;
  if (appendix)
    out += ",bound_appendix_b";
  out += '\n';
  for (const auto &r : summary.rows) {
    out += summary.config_digest + ',' + std::to_string(r.T) + ',' +
           to_string(r.statistic) + ',';
    // rows without measurements (bound-only curves) leave the stats empty
    if (r.seeds > 0)
      out += format_double(r.mean) + ',' + format_double(r.ci95);
    else
      out += ',';
    out += ',' + std::to_string(r.seeds) + ',';
    if (r.bound)
      out += format_double(*r.bound);
    out += ',';
    if (r.pass)
      out += *r.pass ? "true" : "false";
    if (appendix) {
      out += ',';
      if (r.bound_appendix_b)
        out += format_double(*r.bound_appendix_b);
    }
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string &line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ','))
    cells.push_back(cell);
  if (!line.empty() && line.back() == ',')
    cells.emplace_back();
  return cells;
}

} // namespace

SweepSummary parse_summary_csv(const std::string &text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind(kSummaryCsvHeader, 0) != 0)
    throw ConfigError("summary CSV: missing or unexpected header");
  const bool appendix = line.find("bound_appendix_b") != std::string::npos;
  SweepSummary s;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty())
      continue;
    auto c = split_csv_line(line);
    if (c.size() < 8)
      throw ConfigError("summary CSV: short row");
    if (first) {
      s.config_digest = c[0];
      s.statistic = statistic_from_string(c[2]);
      first = false;
    }
    SummaryRow r;
    r.T = std::stoll(c[1]);
    r.statistic = statistic_from_string(c[2]);
    r.seeds = std::stoll(c[5]);
    if (!c[3].empty())
      r.mean = std::stod(c[3]);
    if (!c[4].empty())
      r.ci95 = std::stod(c[4]);
    if (!c[6].empty())
      r.bound = std::stod(c[6]);
    if (!c[7].empty())
      r.pass = c[7] == "true";
    if (appendix && c.size() > 8 && !c[8].empty())
      r.bound_appendix_b = std::stod(c[8]);
    s.rows.push_back(r);
  }
  return s;
}

std::string svg_plot(const SweepSummary &summary, const std::string &title) {
  constexpr double W = 640, H = 420, M = 60;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  auto widen = [&](double T, double v) {
    if (!(v > 0.0) || T <= 0)
      return;
    xmin = std::min(xmin, std::log10(T));
    xmax = std::max(xmax, std::log10(T));
    ymin = std::min(ymin, std::log10(v));
    ymax = std::max(ymax, std::log10(v));
  };
  for (const auto &r : summary.rows) {
    const double T = static_cast<double>(r.T);
    if (r.seeds > 0) {
      widen(T, r.mean + r.ci95);
      widen(T, std::max(r.mean - r.ci95, r.mean * 0.5));
    }
    if (r.bound)
      widen(T, *r.bound);
    if (r.bound_appendix_b)
      widen(T, *r.bound_appendix_b);
  }
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
    << "\" height=\"" << H << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" "
       "font-family=\"sans-serif\" font-size=\"14\">"
    << title << "</text>\n";
  if (xmin > xmax) {
    o << "</svg>\n";
    return o.str();
  }
  if (xmax - xmin < 1e-9)
    xmax = xmin + 1;
  if (ymax - ymin < 1e-9)
    ymax = ymin + 1;
  auto px = [&](double T) {
    return M + (std::log10(T) - xmin) / (xmax - xmin) * (W - 2 * M);
  };
  auto py = [&](double v) {
    return H - M - (std::log10(v) - ymin) / (ymax - ymin) * (H - 2 * M);
  };
  o << "<line x1=\"" << M << "\" y1=\"" << H - M << "\" x2=\"" << W - M
    << "\" y2=\"" << H - M << "\" stroke=\"black\"/>\n"
    << "<line x1=\"" << M << "\" y1=\"" << M << "\" x2=\"" << M << "\" y2=\""
    << H - M << "\" stroke=\"black\"/>\n"
    << "<text x=\"" << W / 2 << "\" y=\"" << H - 20
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"12\">log10 T</text>\n"
    << "<text x=\"16\" y=\"" << H / 2
    << "\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 "
    << H / 2 << ")\">log10 " << to_string(summary.statistic) << "</text>\n";

  auto polyline = [&](auto value_of, const char *colour, const char *dash) {
    std::ostringstream pts;
    for (const auto &r : summary.rows) {
      auto v = value_of(r);
      if (v && *v > 0.0)
        pts << px(static_cast<double>(r.T)) << ',' << py(*v) << ' ';
    }
    if (!pts.str().empty())
      o << "<polyline fill=\"none\" stroke=\"" << colour
        << "\" stroke-width=\"2\" stroke-dasharray=\"" << dash << "\" points=\""
        << pts.str() << "\"/>\n";
  };
  polyline([](const SummaryRow &r) { return r.bound; }, "#c0392b", "6,4");
  polyline([](const SummaryRow &r) { return r.bound_appendix_b; }, "#8e44ad",
           "2,3");
  polyline(
      [](const SummaryRow &r) {
        return r.seeds > 0 ? std::optional<double>(r.mean) : std::nullopt;
      },
      "#2c3e50", "none");
  for (const auto &r : summary.rows) {
    if (r.seeds == 0 || !(r.mean > 0.0))
      continue;
    const double x = px(static_cast<double>(r.T));
    const double lo = std::max(r.mean - r.ci95, r.mean * 0.5);
    o << "<line x1=\"" << x << "\" y1=\"" << py(lo) << "\" x2=\"" << x
      << "\" y2=\"" << py(r.mean + r.ci95) << "\" stroke=\"#2c3e50\"/>\n"
      << "<circle cx=\"" << x << "\" cy=\"" << py(r.mean)
      << "\" r=\"3\" fill=\"#2c3e50\"/>\n";
  }
  o << "</svg>\n";
  return o.str();
}

// ---------------------------------------------------------------------------

ResultStore::ResultStore(fs::path root) : root_(std::move(root)) {}

fs::path ResultStore::default_root() {
  if (const char *env = std::getenv("QB_RESULT_DIR"); env && *env)
    return env;
  return "results";
}

void ResultStore::ensure_layout() const {
  for (const char *d :
       {"configs", "runs", "summaries", "certificates", "reports"})
    fs::create_directories(root_ / d);
}

fs::path ResultStore::config_path(const std::string &digest) const {
  return root_ / "configs" / (digest + ".json");
}
fs::path ResultStore::runs_path(const std::string &digest) const {
  return root_ / "runs" / (digest + ".csv");
}
fs::path ResultStore::summary_path(const std::string &digest,
                                   const std::string &suffix) const {
  return root_ / "summaries" / (digest + suffix);
}
fs::path ResultStore::certificate_path(const std::string &digest) const {
  return root_ / "certificates" / (digest + ".json");
}
fs::path ResultStore::report_path() const {
  return root_ / "reports" / "report.md";
}

void ResultStore::write_file(const fs::path &p, const std::string &content) {
  fs::create_directories(p.parent_path());
  fs::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f)
      throw Error("cannot write " + tmp.string());
    f << content;
    if (!f)
      throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, p);
}

std::string ResultStore::read_file(const fs::path &p) {
  std::ifstream f(p, std::ios::binary);
  if (!f)
    throw ConfigError("cannot read " + p.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

} // namespace qb
