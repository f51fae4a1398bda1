#pragma once

#include "recourse/simulation.hpp"

#include <filesystem>
#include <fstream>
#include <set>

namespace recourse {

/// Parse a summary.csv written by write_summary_csv.
inline std::vector<SummaryRow> read_summary_csv(std::istream& in, const std::string& origin = "summary") {
  std::string line;
  if (!std::getline(in, line)) throw IoError(origin + ": empty summary");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "dataset,model,generator,round,metric,mean,std,n") throw IoError(origin + ": unexpected header '" + line + "'");
  std::vector<SummaryRow> rows;
  std::size_t lineno = 1;
  auto number = [&](const std::string& s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
      throw IoError(origin + ": line " + std::to_string(lineno) + ": bad number '" + s + "'");
    return v;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line, ',');
    if (cells.size() != 8) throw IoError(origin + ": line " + std::to_string(lineno) + ": expected 8 columns");
    SummaryRow r;
    r.dataset = cells[0];
    r.model = cells[1];
    r.generator = cells[2];
    r.round = int(number(cells[3]));
    r.metric = cells[4];
    r.mean = number(cells[5]);
    r.std = number(cells[6]);
    r.n = std::size_t(number(cells[7]));
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw IoError(origin + ": summary has no rows");
  return rows;
}

inline std::vector<SummaryRow> read_summary_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open summary '" + path + "'");
  return read_summary_csv(in, path);
}

namespace detail {

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string file_token(const std::string& s) {
  std::string out;
  for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' ? c : '_';
  return out;
}

inline std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                 "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return colors[i % 10];
}

/// Plot frame: margins, a y range and helpers that map data to pixels.
struct Frame {
  double width = 640, height = 400;
  double left = 70, right = 150, top = 40, bottom = 50;
  double ymin = 0, ymax = 1;

  double plot_w() const { return width - left - right; }
  double plot_h() const { return height - top - bottom; }
  double y(double v) const { return top + plot_h() * (1.0 - (v - ymin) / (ymax - ymin)); }

  void fit(double lo, double hi) {
    if (!std::isfinite(lo) || !std::isfinite(hi)) lo = 0, hi = 1;
    lo = std::min(lo, 0.0);
    hi = std::max(hi, 0.0);
    if (hi - lo < 1e-12) hi = lo + 1.0;
    const double pad = 0.05 * (hi - lo);
    ymin = lo < 0 ? lo - pad : lo;
    ymax = hi + pad;
  }
};

inline void svg_open(std::ostream& os, const Frame& f, const std::string& title, const std::string& ylabel) {
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width << "\" height=\"" << f.height
     << "\" viewBox=\"0 0 " << f.width << ' ' << f.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect x=\"0\" y=\"0\" width=\"" << f.width << "\" height=\"" << f.height << "\" fill=\"white\"/>\n"
     << "<text x=\"" << svg_num(f.left + f.plot_w() / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
     << xml_escape(title) << "</text>\n"
     << "<text transform=\"translate(16," << svg_num(f.top + f.plot_h() / 2)
     << ") rotate(-90)\" text-anchor=\"middle\">" << xml_escape(ylabel) << "</text>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = f.ymin + (f.ymax - f.ymin) * i / 4.0;
    const double py = f.y(v);
    os << "<line x1=\"" << svg_num(f.left) << "\" y1=\"" << svg_num(py) << "\" x2=\"" << svg_num(f.left + f.plot_w())
       << "\" y2=\"" << svg_num(py) << "\" stroke=\"#dddddd\"/>\n"
       << "<text x=\"" << svg_num(f.left - 6) << "\" y=\"" << svg_num(py + 4) << "\" text-anchor=\"end\">"
       << tick_label(v) << "</text>\n";
  }
  os << "<line x1=\"" << svg_num(f.left) << "\" y1=\"" << svg_num(f.top) << "\" x2=\"" << svg_num(f.left) << "\" y2=\""
     << svg_num(f.top + f.plot_h()) << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << svg_num(f.left) << "\" y1=\"" << svg_num(f.y(0)) << "\" x2=\""
     << svg_num(f.left + f.plot_w()) << "\" y2=\"" << svg_num(f.y(0)) << "\" stroke=\"black\"/>\n";
}

inline void svg_legend(std::ostream& os, const Frame& f, const std::vector<std::string>& names) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double x = f.width - f.right + 15, y = f.top + 18.0 * double(i);
    os << "<rect x=\"" << svg_num(x) << "\" y=\"" << svg_num(y) << "\" width=\"12\" height=\"12\" fill=\""
       << palette(i) << "\"/>\n"
       << "<text x=\"" << svg_num(x + 18) << "\" y=\"" << svg_num(y + 10) << "\">" << xml_escape(names[i])
       << "</text>\n";
  }
}

inline void error_bar(std::ostream& os, double x, double y_lo, double y_hi, double half_width) {
  os << "<g class=\"error-bar\" stroke=\"black\">"
     << "<line x1=\"" << svg_num(x) << "\" y1=\"" << svg_num(y_lo) << "\" x2=\"" << svg_num(x) << "\" y2=\""
     << svg_num(y_hi) << "\"/>"
     << "<line x1=\"" << svg_num(x - half_width) << "\" y1=\"" << svg_num(y_lo) << "\" x2=\"" << svg_num(x + half_width)
     << "\" y2=\"" << svg_num(y_lo) << "\"/>"
     << "<line x1=\"" << svg_num(x - half_width) << "\" y1=\"" << svg_num(y_hi) << "\" x2=\"" << svg_num(x + half_width)
     << "\" y2=\"" << svg_num(y_hi) << "\"/></g>\n";
}

inline double finite_or(double v, double fallback) { return std::isfinite(v) ? v : fallback; }

}  // namespace detail

/// Mean per generator at one round, with its standard deviation.
struct BarPoint {
  std::string generator;
  double mean = 0.0;
  double std = 0.0;
};

inline void write_bar_chart(std::ostream& os, const std::string& title, const std::string& metric,
                            const std::vector<BarPoint>& bars) {
  using namespace detail;
  Frame f;
  double lo = 0, hi = 0;
  for (const auto& b : bars) {
    const double s = finite_or(b.std, 0.0);
    lo = std::min(lo, finite_or(b.mean, 0.0) - s);
    hi = std::max(hi, finite_or(b.mean, 0.0) + s);
  }
  f.fit(lo, hi);
  svg_open(os, f, title, metric);
  const double slot = f.plot_w() / double(std::max<std::size_t>(bars.size(), 1));
  std::vector<std::string> names;
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const auto& b = bars[i];
    names.push_back(b.generator);
    const double cx = f.left + slot * (double(i) + 0.5);
    const double bw = slot * 0.6;
    if (std::isfinite(b.mean)) {
      const double y0 = f.y(0), y1 = f.y(b.mean);
      os << "<rect class=\"bar\" x=\"" << svg_num(cx - bw / 2) << "\" y=\"" << svg_num(std::min(y0, y1))
         << "\" width=\"" << svg_num(bw) << "\" height=\"" << svg_num(std::abs(y1 - y0)) << "\" fill=\"" << palette(i)
         << "\"/>\n";
      const double s = finite_or(b.std, 0.0);
      error_bar(os, cx, f.y(b.mean - s), f.y(b.mean + s), bw / 6);
    }
    os << "<text x=\"" << svg_num(cx) << "\" y=\"" << svg_num(f.top + f.plot_h() + 18) << "\" text-anchor=\"middle\">"
       << xml_escape(b.generator) << "</text>\n";
  }
  svg_legend(os, f, names);
  os << "</svg>\n";
}

struct LineSeries {
  std::string generator;
  std::vector<int> rounds;
  std::vector<double> mean;
  std::vector<double> std;
};

inline void write_line_chart(std::ostream& os, const std::string& title, const std::string& metric,
                             const std::vector<LineSeries>& series) {
  using namespace detail;
  Frame f;
  double lo = 0, hi = 0;
  int rmin = std::numeric_limits<int>::max(), rmax = std::numeric_limits<int>::min();
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.rounds.size(); ++i) {
      rmin = std::min(rmin, s.rounds[i]);
      rmax = std::max(rmax, s.rounds[i]);
      const double sd = finite_or(s.std[i], 0.0);
      if (!std::isfinite(s.mean[i])) continue;
      lo = std::min(lo, s.mean[i] - sd);
      hi = std::max(hi, s.mean[i] + sd);
    }
  if (rmin > rmax) rmin = rmax = 0;
  f.fit(lo, hi);
  svg_open(os, f, title, metric);
  const double span = std::max(1, rmax - rmin);
  auto px = [&](int r) { return f.left + f.plot_w() * double(r - rmin) / span; };
  std::set<int> ticks;
  for (const auto& s : series) ticks.insert(s.rounds.begin(), s.rounds.end());
  for (int r : ticks)
    os << "<text x=\"" << svg_num(px(r)) << "\" y=\"" << svg_num(f.top + f.plot_h() + 18)
       << "\" text-anchor=\"middle\">" << r << "</text>\n";
  os << "<text x=\"" << svg_num(f.left + f.plot_w() / 2) << "\" y=\"" << svg_num(f.height - 8)
     << "\" text-anchor=\"middle\">round</text>\n";
  std::vector<std::string> names;
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    names.push_back(s.generator);
    std::string pts;
    for (std::size_t i = 0; i < s.rounds.size(); ++i) {
      if (!std::isfinite(s.mean[i])) continue;
      pts += svg_num(px(s.rounds[i])) + "," + svg_num(f.y(s.mean[i])) + " ";
    }
    if (!pts.empty()) pts.pop_back();
    os << "<polyline class=\"series\" fill=\"none\" stroke=\"" << palette(k) << "\" stroke-width=\"2\" points=\"" << pts
       << "\"/>\n";
    for (std::size_t i = 0; i < s.rounds.size(); ++i) {
      if (!std::isfinite(s.mean[i])) continue;
      const double sd = finite_or(s.std[i], 0.0);
      error_bar(os, px(s.rounds[i]), f.y(s.mean[i] - sd), f.y(s.mean[i] + sd), 3);
    }
  }
  svg_legend(os, f, names);
  os << "</svg>\n";
}

/// One bar chart (last round) and one line chart per metric for every
/// (dataset, model) cell. Returns the written paths in a stable order.
inline std::vector<std::filesystem::path> plot_summary(const std::vector<SummaryRow>& rows,
                                                       const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  using Cell = std::pair<std::string, std::string>;
  std::map<Cell, std::map<std::string, std::vector<const SummaryRow*>>> cells;
  for (const auto& r : rows) cells[{r.dataset, r.model}][r.metric].push_back(&r);
  std::vector<fs::path> written;
  for (const auto& [cell, metrics] : cells) {
    for (const auto& [metric, entries] : metrics) {
      std::vector<std::string> generators;
      int last_round = std::numeric_limits<int>::min();
      for (const auto* e : entries) {
        if (std::find(generators.begin(), generators.end(), e->generator) == generators.end())
          generators.push_back(e->generator);
        last_round = std::max(last_round, e->round);
      }
      std::vector<BarPoint> bars;
      std::vector<LineSeries> series;
      for (const auto& g : generators) {
        BarPoint b{g, std::numeric_limits<double>::quiet_NaN(), 0.0};
        LineSeries s{g, {}, {}, {}};
        std::vector<const SummaryRow*> mine;
        for (const auto* e : entries)
          if (e->generator == g) mine.push_back(e);
        std::sort(mine.begin(), mine.end(), [](auto* a, auto* b) { return a->round < b->round; });
        for (const auto* e : mine) {
          s.rounds.push_back(e->round);
          s.mean.push_back(e->mean);
          s.std.push_back(e->std);
          if (e->round == last_round) b = {g, e->mean, e->std};
        }
        bars.push_back(b);
        series.push_back(std::move(s));
      }
      const std::string stem = detail::file_token(cell.first) + "__" + detail::file_token(cell.second) + "__" +
                               detail::file_token(metric);
      const std::string title = cell.first + " / " + cell.second;
      const fs::path bar_path = out_dir / (stem + "__bar.svg");
      const fs::path line_path = out_dir / (stem + "__line.svg");
      {
        std::ofstream os(bar_path);
        if (!os) throw IoError("cannot write '" + bar_path.string() + "'");
        write_bar_chart(os, title + " (round " + std::to_string(last_round) + ")", metric, bars);
      }
      {
        std::ofstream os(line_path);
        if (!os) throw IoError("cannot write '" + line_path.string() + "'");
        write_line_chart(os, title, metric, series);
      }
      written.push_back(bar_path);
      written.push_back(line_path);
    }
  }
  return written;
}

}  // namespace recourse
