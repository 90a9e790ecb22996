#include "cryptoens/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "cryptoens/errors.hpp"

namespace cryptoens::report {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kSchema = "cryptoens.report/1";

json optional_number(const std::optional<double>& v) {
  if (!v) return nullptr;
  if (std::isinf(*v)) return *v > 0 ? "inf" : "-inf";
  return *v;
}

json metrics_json(const backtest::Metrics& m) {
  json j = json::object();
  for (std::size_t k = 0; k < backtest::metric_names().size(); ++k)
    j[backtest::metric_names()[k]] = optional_number(backtest::metric_value(m, k));
  return j;
}

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string header_line(const ReportContext& ctx) {
  return "# config_hash=" + ctx.config_hash + " seed=" + std::to_string(ctx.seed) + "\n";
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw DataError("cannot write " + p.string());
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

json report_json(const backtest::BacktestReport& rep, const backtest::Schedule& schedule, const ReportContext& ctx) {
  json j;
  j["schema"] = kSchema;
  j["config_hash"] = ctx.config_hash;
  j["seed"] = ctx.seed;
  j["action_mode"] = ctx.greedy ? "greedy" : "stochastic";
  j["initial_balance"] = ctx.initial_balance;
  j["test_begin"] = format_timestamp(ctx.test_begin);
  j["strategies"] = rep.strategies;
  j["metrics"] = backtest::metric_names();
  j["quantile_levels"] = backtest::quantile_levels();

  json cycles = json::array();
  for (const auto& c : schedule.cycles)
    cycles.push_back({{"id", c.id},
                      {"train_begin", format_timestamp(c.train_begin)},
                      {"train_end", format_timestamp(c.train_end)},
                      {"test_begin", format_timestamp(c.test_begin)},
                      {"test_end", format_timestamp(c.test_end)},
                      {"weeks", c.weeks}});
  j["cycles"] = cycles;
  j["weeks"] = schedule.weeks.size();

  json summary = json::object(), quantiles = json::object(), monthly = json::object();
  for (const auto& s : rep.summaries) {
    summary[s.strategy] = metrics_json(s.overall);
    summary[s.strategy]["weeks"] = s.weekly_returns.size();
    quantiles[s.strategy] = s.quantiles;
    monthly[s.strategy] = s.monthly_returns;
  }
  j["summary"] = summary;
  j["quantiles"] = quantiles;
  j["monthly_returns"] = monthly;

  if (rep.individual_aggregate) {
    json agg = json::object();
    for (std::size_t k = 0; k < rep.individual_aggregate->size(); ++k) {
      const auto& a = (*rep.individual_aggregate)[k];
      agg[backtest::metric_names()[k]] = {{"mean", a.mean}, {"median", a.median}, {"std", a.std}, {"n", a.n}};
    }
    j["individual_aggregate"] = agg;
  } else {
    j["individual_aggregate"] = nullptr;
  }

  j["histogram"] = {{"of", "monthly_returns"},
                    {"edges", rep.monthly_histogram.edges},
                    {"counts", rep.monthly_histogram.counts}};

  json periods = json::array();
  for (const auto& p : rep.periods) {
    json row = {{"week", p.week},
                {"cycle", p.cycle},
                {"strategy", p.strategy},
                {"weekly_return", p.weekly_return}};
    row.update(metrics_json(p.metrics));
    periods.push_back(std::move(row));
  }
  j["periods"] = periods;
  return j;
}

void write_report_files(const fs::path& dir, const backtest::BacktestReport& rep,
                        const backtest::Schedule& schedule, const ReportContext& ctx) {
  fs::create_directories(dir);
  write_text(dir / "report.json", report_json(rep, schedule, ctx).dump(2) + "\n");
  const auto head = header_line(ctx);

  std::string weekly = head + "period_id,cycle,start,end,strategy,return\n";
  for (const auto& p : rep.periods) {
    const auto& w = schedule.weeks.at(p.week);
    weekly += std::to_string(p.week) + "," + std::to_string(p.cycle) + "," + format_timestamp(w.start) + "," +
              format_timestamp(w.end) + "," + p.strategy + "," + num(p.weekly_return) + "\n";
  }
  write_text(dir / "weekly_returns.csv", weekly);

  std::string q = head + "level";
  for (const auto& s : rep.summaries) q += "," + s.strategy;
  q += "\n";
  for (std::size_t i = 0; i < backtest::quantile_levels().size(); ++i) {
    q += num(backtest::quantile_levels()[i]);
    for (const auto& s : rep.summaries) q += "," + num(s.quantiles[i]);
    q += "\n";
  }
  write_text(dir / "quantiles.csv", q);

  std::string ecdf = head + "strategy,monthly_return,probability\n";
  for (const auto& s : rep.summaries) {
    auto xs = s.monthly_returns;
    std::sort(xs.begin(), xs.end());
    for (std::size_t i = 0; i < xs.size(); ++i)
      ecdf += s.strategy + "," + num(xs[i]) + "," + num(static_cast<double>(i + 1) / static_cast<double>(xs.size())) + "\n";
  }
  write_text(dir / "ecdf.csv", ecdf);

  const auto& h = rep.monthly_histogram;
  std::string hist = head + "bin_low,bin_high";
  for (const auto& s : rep.summaries) hist += "," + s.strategy;
  hist += "\n";
  for (std::size_t b = 0; b + 1 < h.edges.size(); ++b) {
    hist += num(h.edges[b]) + "," + num(h.edges[b + 1]);
    for (const auto& s : rep.summaries) hist += "," + std::to_string(h.counts.at(s.strategy)[b]);
    hist += "\n";
  }
  write_text(dir / "histogram.csv", hist);

  std::string cum = head + "timestamp";
  for (const auto& s : rep.summaries) cum += "," + s.strategy;
  cum += "\n";
  const std::size_t n = rep.summaries.empty() ? 0 : rep.summaries.front().chained_values.size();
  for (std::size_t i = 0; i < n; ++i) {
    cum += format_timestamp(ctx.test_begin - kHour + static_cast<EpochSeconds>(i) * kHour);
    for (const auto& s : rep.summaries) cum += "," + num(s.chained_values.at(i));
    cum += "\n";
  }
  write_text(dir / "cumulative.csv", cum);
}

void check_report_schema(const json& j) {
  auto need = [&](const char* key, json::value_t type) {
    if (!j.contains(key)) throw DataError(std::string("report.json: missing key '") + key + "'");
    if (j.at(key).type() != type) throw DataError(std::string("report.json: key '") + key + "' has the wrong type");
  };
  if (!j.is_object()) throw DataError("report.json: not an object");
  need("schema", json::value_t::string);
  if (j.at("schema") != kSchema) throw DataError("report.json: unsupported schema " + j.at("schema").dump());
  need("config_hash", json::value_t::string);
  need("strategies", json::value_t::array);
  need("metrics", json::value_t::array);
  need("quantile_levels", json::value_t::array);
  need("summary", json::value_t::object);
  need("quantiles", json::value_t::object);
  need("monthly_returns", json::value_t::object);
  need("histogram", json::value_t::object);
  need("periods", json::value_t::array);
  need("cycles", json::value_t::array);
  if (j.at("quantile_levels").size() != 11) throw DataError("report.json: expected 11 quantile levels");
  for (const auto& s : j.at("strategies")) {
    const auto name = s.get<std::string>();
    if (!j.at("summary").contains(name)) throw DataError("report.json: no summary for " + name);
    if (!j.at("quantiles").contains(name) || j.at("quantiles").at(name).size() != 11)
      throw DataError("report.json: bad quantiles for " + name);
    for (const auto& m : j.at("metrics"))
      if (!j.at("summary").at(name).contains(m.get<std::string>()))
        throw DataError("report.json: summary of " + name + " lacks " + m.get<std::string>());
  }
}

// ---- rendering ----

namespace {

std::string fmt_cell(const json& v) {
  if (v.is_null()) return "n/a";
  if (v.is_string()) return v.get<std::string>();
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v.get<double>());
  return buf;
}

std::string pad(const std::string& s, std::size_t w, bool left = false) {
  if (s.size() >= w) return s;
  return left ? s + std::string(w - s.size(), ' ') : std::string(w - s.size(), ' ') + s;
}

std::string table(const std::string& title, const std::vector<std::string>& cols,
                  const std::vector<std::pair<std::string, std::vector<std::string>>>& rows) {
  std::size_t w0 = 18;
  for (const auto& r : rows) w0 = std::max(w0, r.first.size() + 2);
  std::vector<std::size_t> w(cols.size(), 12);
  for (std::size_t c = 0; c < cols.size(); ++c) w[c] = std::max(w[c], cols[c].size() + 2);
  std::string out = title + "\n";
  std::string line = pad("", w0, true);
  for (std::size_t c = 0; c < cols.size(); ++c) line += pad(cols[c], w[c]);
  out += line + "\n" + std::string(line.size(), '-') + "\n";
  for (const auto& [label, cells] : rows) {
    std::string l = pad(label, w0, true);
    for (std::size_t c = 0; c < cells.size(); ++c) l += pad(cells[c], w[c]);
    out += l + "\n";
  }
  return out + "\n";
}

const char* kMetricLabels[] = {"Annualized return", "Cumulative return", "Sortino", "Sharpe", "Max drawdown", "Volatility"};

std::vector<std::string> headline_strategies(const json& j) {
  std::vector<std::string> out;
  for (const auto& s : j.at("strategies")) {
    const auto name = s.get<std::string>();
    if (name.rfind("individual_", 0) != 0) out.push_back(name);
  }
  return out;
}

bool has_strategy(const json& j, const std::string& name) {
  for (const auto& s : j.at("strategies"))
    if (s == name) return true;
  return false;
}

std::string render_tables(const json& j) {
  std::string out;
  const auto metrics = j.at("metrics").get<std::vector<std::string>>();
  const auto heads = headline_strategies(j);
  {
    std::vector<std::pair<std::string, std::vector<std::string>>> rows;
    for (std::size_t k = 0; k < metrics.size(); ++k) {
      std::vector<std::string> cells;
      for (const auto& s : heads) cells.push_back(fmt_cell(j.at("summary").at(s).at(metrics[k])));
      rows.emplace_back(kMetricLabels[k], cells);
    }
    out += table("Backtesting summary", heads, rows);
  }
  {
    std::vector<std::pair<std::string, std::vector<std::string>>> rows;
    const auto levels = j.at("quantile_levels").get<std::vector<double>>();
    for (std::size_t i = 0; i < levels.size(); ++i) {
      std::vector<std::string> cells;
      for (const auto& s : heads) cells.push_back(fmt_cell(j.at("quantiles").at(s).at(i)));
      char label[16];
      std::snprintf(label, sizeof label, "%.0f%%", levels[i] * 100.0);
      rows.emplace_back(label, cells);
    }
    out += table("Quantiles of weekly returns", heads, rows);
  }
  if (has_strategy(j, "final_epoch") && has_strategy(j, "ensemble")) {
    std::vector<std::pair<std::string, std::vector<std::string>>> rows;
    for (std::size_t k = 0; k < metrics.size(); ++k)
      rows.emplace_back(kMetricLabels[k], std::vector<std::string>{fmt_cell(j.at("summary").at("final_epoch").at(metrics[k])),
                                                                   fmt_cell(j.at("summary").at("ensemble").at(metrics[k]))});
    out += table("Final epoch vs ensemble", {"final_epoch", "ensemble"}, rows);
  }
  if (j.contains("individual_aggregate") && j.at("individual_aggregate").is_object()) {
    std::vector<std::pair<std::string, std::vector<std::string>>> rows;
    for (std::size_t k = 0; k < metrics.size(); ++k) {
      const auto& a = j.at("individual_aggregate").at(metrics[k]);
      rows.emplace_back(kMetricLabels[k],
                        std::vector<std::string>{fmt_cell(a.at("mean")), fmt_cell(a.at("median")), fmt_cell(a.at("std"))});
    }
    out += table("Individual models", {"mean", "median", "std"}, rows);
  }
  return out;
}

// Minimal static SVG line / step / bar charts.
struct Series {
  std::string name;
  std::vector<double> x, y;
};

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};

std::string f3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Frame {
  double W = 760, H = 420, L = 70, R = 170, T = 40, B = 50;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  double sx(double x) const { return L + (x - x0) / (x1 - x0) * (W - L - R); }
  double sy(double y) const { return H - B - (y - y0) / (y1 - y0) * (H - T - B); }
};

void fit(Frame& f, const std::vector<Series>& series, bool zero_y) {
  double xa = std::numeric_limits<double>::infinity(), xb = -xa, ya = xa, yb = -xa;
  for (const auto& s : series) {
    for (double x : s.x) xa = std::min(xa, x), xb = std::max(xb, x);
    for (double y : s.y) ya = std::min(ya, y), yb = std::max(yb, y);
  }
  if (!std::isfinite(xa)) xa = 0, xb = 1, ya = 0, yb = 1;
  if (zero_y) ya = std::min(ya, 0.0);
  if (xb == xa) xb = xa + 1;
  if (yb == ya) yb = ya + 1;
  const double pad_y = 0.05 * (yb - ya);
  f.x0 = xa, f.x1 = xb, f.y0 = zero_y && ya == 0 ? 0 : ya - pad_y, f.y1 = yb + pad_y;
}

std::string svg_open(const Frame& f, const std::string& title, const std::string& comment) {
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + f3(f.W) + "\" height=\"" + f3(f.H) +
                  "\" viewBox=\"0 0 " + f3(f.W) + " " + f3(f.H) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s += "<!-- " + comment + " -->\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + f3(f.W / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + title + "</text>\n";
  const double xl = f.L, xr = f.W - f.R, yt = f.T, yb = f.H - f.B;
  s += "<rect x=\"" + f3(xl) + "\" y=\"" + f3(yt) + "\" width=\"" + f3(xr - xl) + "\" height=\"" + f3(yb - yt) +
       "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double yv = f.y0 + (f.y1 - f.y0) * i / 4.0, xv = f.x0 + (f.x1 - f.x0) * i / 4.0;
    s += "<line x1=\"" + f3(xl) + "\" x2=\"" + f3(xr) + "\" y1=\"" + f3(f.sy(yv)) + "\" y2=\"" + f3(f.sy(yv)) +
         "\" stroke=\"#ddd\"/>\n";
    s += "<text x=\"" + f3(xl - 6) + "\" y=\"" + f3(f.sy(yv) + 4) + "\" text-anchor=\"end\">" + tick(yv) + "</text>\n";
    s += "<text x=\"" + f3(f.sx(xv)) + "\" y=\"" + f3(yb + 16) + "\" text-anchor=\"middle\">" + tick(xv) + "</text>\n";
  }
  return s;
}

std::string legend(const Frame& f, const std::vector<std::string>& names) {
  std::string s;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double y = f.T + 14 + 18.0 * static_cast<double>(i);
    const double x = f.W - f.R + 14;
    s += "<rect x=\"" + f3(x) + "\" y=\"" + f3(y - 9) + "\" width=\"12\" height=\"10\" fill=\"" + kPalette[i % 8] + "\"/>\n";
    s += "<text x=\"" + f3(x + 18) + "\" y=\"" + f3(y) + "\">" + names[i] + "</text>\n";
  }
  return s;
}

std::string line_chart(const std::string& title, const std::string& xlabel, const std::vector<Series>& series,
                       bool step, const std::string& comment) {
  Frame f;
  fit(f, series, false);
  std::string s = svg_open(f, title, comment);
  std::vector<std::string> names;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& sr = series[i];
    names.push_back(sr.name);
    std::string pts;
    for (std::size_t k = 0; k < sr.x.size(); ++k) {
      if (step && k > 0) pts += f3(f.sx(sr.x[k])) + "," + f3(f.sy(sr.y[k - 1])) + " ";
      pts += f3(f.sx(sr.x[k])) + "," + f3(f.sy(sr.y[k])) + " ";
    }
    s += "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" + std::string(kPalette[i % 8]) + "\" points=\"" + pts + "\"/>\n";
  }
  s += "<text x=\"" + f3((f.L + f.W - f.R) / 2) + "\" y=\"" + f3(f.H - 12) + "\" text-anchor=\"middle\">" + xlabel + "</text>\n";
  return s + legend(f, names) + "</svg>\n";
}

std::string bar_chart(const std::string& title, const std::vector<double>& edges,
                      const std::vector<std::pair<std::string, std::vector<double>>>& counts, const std::string& comment) {
  Frame f;
  std::vector<Series> bounds(1);
  bounds[0].x = {edges.empty() ? 0.0 : edges.front(), edges.empty() ? 1.0 : edges.back()};
  double ymax = 1;
  for (const auto& [_, c] : counts)
    for (double v : c) ymax = std::max(ymax, v);
  bounds[0].y = {0.0, ymax};
  fit(f, bounds, true);
  std::string s = svg_open(f, title, comment);
  std::vector<std::string> names;
  const double groups = static_cast<double>(std::max<std::size_t>(counts.size(), 1));
  for (std::size_t i = 0; i < counts.size(); ++i) {
    names.push_back(counts[i].first);
    for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
      const double bw = (f.sx(edges[b + 1]) - f.sx(edges[b])) / groups;
      const double x = f.sx(edges[b]) + bw * static_cast<double>(i);
      const double y = f.sy(counts[i].second[b]);
      s += "<rect x=\"" + f3(x) + "\" y=\"" + f3(y) + "\" width=\"" + f3(std::max(bw - 0.5, 0.5)) + "\" height=\"" +
           f3(f.sy(0) - y) + "\" fill=\"" + kPalette[i % 8] + "\"/>\n";
    }
  }
  s += "<text x=\"" + f3((f.L + f.W - f.R) / 2) + "\" y=\"" + f3(f.H - 12) + "\" text-anchor=\"middle\">monthly return</text>\n";
  return s + legend(f, names) + "</svg>\n";
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  return out;
}

}  // namespace

void render_report(const fs::path& dir, std::ostream& out) {
  const json j = json::parse(read_text(dir / "report.json"), nullptr, false);
  if (j.is_discarded()) throw DataError("report.json is not valid JSON");
  check_report_schema(j);
  const auto heads = headline_strategies(j);
  const std::string comment = "config_hash=" + j.at("config_hash").get<std::string>() +
                              " seed=" + std::to_string(j.value("seed", std::uint64_t{0}));

  const auto tables = render_tables(j);
  out << tables;
  write_text(dir / "tables.txt", tables);

  // Cumulative value, chained across weekly periods.
  {
    std::istringstream in(read_text(dir / "cumulative.csv"));
    std::string line;
    std::vector<std::string> cols;
    std::vector<Series> series;
    std::vector<std::size_t> pick;
    std::size_t row = 0;
    double base = j.value("initial_balance", 1e6);
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      auto cells = split(line, ',');
      if (cols.empty()) {
        cols = cells;
        for (std::size_t c = 1; c < cols.size(); ++c)
          if (std::find(heads.begin(), heads.end(), cols[c]) != heads.end()) {
            pick.push_back(c);
            series.push_back({cols[c], {}, {}});
          }
        continue;
      }
      if (cells.size() != cols.size()) throw DataError("cumulative.csv: ragged row");
      for (std::size_t k = 0; k < pick.size(); ++k) {
        series[k].x.push_back(static_cast<double>(row) / 24.0);
        series[k].y.push_back(std::stod(cells[pick[k]]) / base - 1.0);
      }
      ++row;
    }
    write_text(dir / "cumulative.svg",
               line_chart("Cumulative return", "days since test start", series, false, comment));
  }
  // eCDF of monthly returns.
  {
    std::vector<Series> series;
    for (const auto& s : heads) {
      auto xs = j.at("monthly_returns").at(s).get<std::vector<double>>();
      std::sort(xs.begin(), xs.end());
      Series sr{s, {}, {}};
      for (std::size_t i = 0; i < xs.size(); ++i) {
        sr.x.push_back(xs[i]);
        sr.y.push_back(static_cast<double>(i + 1) / static_cast<double>(xs.size()));
      }
      series.push_back(std::move(sr));
    }
    write_text(dir / "ecdf.svg", line_chart("Empirical CDF of monthly returns", "monthly return", series, true, comment));
  }
  // Histogram of monthly returns.
  {
    const auto& h = j.at("histogram");
    const auto edges = h.at("edges").get<std::vector<double>>();
    std::vector<std::pair<std::string, std::vector<double>>> counts;
    for (const auto& s : heads) {
      std::vector<double> c;
      for (const auto& v : h.at("counts").at(s)) c.push_back(v.get<double>());
      counts.emplace_back(s, c);
    }
    write_text(dir / "histogram.svg", bar_chart("Histogram of monthly returns", edges, counts, comment));
  }
}

}  // namespace cryptoens::report
