#include "batchlab/ablation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "batchlab/error.hpp"

namespace batchlab {

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct ChartSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

std::string f2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string f4(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

// Minimal static line chart. Fixed canvas, four ticks per axis, one
// polyline per series with a small legend. Deterministic output.
void write_svg_chart(const std::vector<ChartSeries>& series, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::string& path) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b"};
  const double width = 720, height = 480;
  const double left = 70, right = 20, top = 40, bottom = 50;
  const double plot_w = width - left - right, plot_h = height - top - bottom;

  double x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;
  bool first = true;
  for (const ChartSeries& s : series)
    for (const auto& [x, y] : s.points) {
      if (first) {
        x_lo = x_hi = x;
        y_lo = y_hi = y;
        first = false;
      }
      x_lo = std::min(x_lo, x), x_hi = std::max(x_hi, x);
      y_lo = std::min(y_lo, y), y_hi = std::max(y_hi, y);
    }
  if (x_hi <= x_lo) x_hi = x_lo + 1;
  if (y_hi <= y_lo) y_hi = y_lo + (y_lo == 0 ? 1 : std::abs(y_lo) * 0.1);
  const auto px = [&](double x) { return left + (x - x_lo) / (x_hi - x_lo) * plot_w; };
  const auto py = [&](double y) {
    return top + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h;
  };

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_svg_chart: cannot open " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << width << " "
      << height << "\" font-family=\"sans-serif\" font-size=\"13\">\n";
  out << "<rect width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" "
      << "font-size=\"16\">" << title << "</text>\n";

  for (int i = 0; i <= 4; ++i) {
    const double xv = x_lo + (x_hi - x_lo) * i / 4.0;
    const double yv = y_lo + (y_hi - y_lo) * i / 4.0;
    const std::string xs = f2(px(xv)), ys = f2(py(yv));
    out << "<line x1=\"" << xs << "\" y1=\"" << top << "\" x2=\"" << xs << "\" y2=\""
        << top + plot_h << "\" stroke=\"#dddddd\"/>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << ys << "\" x2=\"" << left + plot_w
        << "\" y2=\"" << ys << "\" stroke=\"#dddddd\"/>\n";
    out << "<text x=\"" << xs << "\" y=\"" << top + plot_h + 18
        << "\" text-anchor=\"middle\">" << f4(xv) << "</text>\n";
    out << "<text x=\"" << left - 6 << "\" y=\"" << f2(py(yv) + 4)
        << "\" text-anchor=\"end\">" << f4(yv) << "</text>\n";
  }
  out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w
      << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"#333333\"/>\n";
  out << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\">" << x_label << "</text>\n";
  out << "<text x=\"18\" y=\"" << top + plot_h / 2
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << top + plot_h / 2
      << ")\">" << y_label << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = palette[s % 6];
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.8\" points=\"";
    for (const auto& [x, y] : series[s].points)
      out << f2(px(x)) << "," << f2(py(y)) << " ";
    out << "\"/>\n";
    const double ly = top + 16 + 18 * static_cast<double>(s);
    out << "<line x1=\"" << left + plot_w - 150 << "\" y1=\"" << ly << "\" x2=\""
        << left + plot_w - 125 << "\" y2=\"" << ly << "\" stroke=\"" << color
        << "\" stroke-width=\"3\"/>\n";
    out << "<text x=\"" << left + plot_w - 118 << "\" y=\"" << ly + 4 << "\">"
        << series[s].name << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw IoError("write_svg_chart: write failed for " + path);
}

}  // namespace

const std::vector<std::string>& ladder_rungs() {
  static const std::vector<std::string> rungs = {"SB", "LB", "LB+LR", "LB+LR+GBN",
                                                 "LB+LR+GBN+RA"};
  return rungs;
}

RunConfig rung_config(const RunConfig& base, const std::string& rung) {
  RunConfig cfg = base;
  cfg.kind = "train";
  cfg.ablation = AblationFlags{};
  if (rung == "SB") return cfg;
  cfg.ablation.large_batch = true;
  if (rung == "LB") return cfg;
  cfg.ablation.lr_scale = true;
  if (rung == "LB+LR") return cfg;
  cfg.ablation.gbn = true;
  if (rung == "LB+LR+GBN") return cfg;
  cfg.ablation.regime_adapt = true;
  if (rung == "LB+LR+GBN+RA") return cfg;
  throw ParameterError("rung_config: unknown rung " + rung);
}

RunReport run_single(const RunConfig& cfg, const std::string& rung,
                     const Dataset& train, const Dataset& val,
                     const std::string& out_dir, std::shared_ptr<Mlp>* model_out) {
  const auto t0 = std::chrono::steady_clock::now();
  const TrainPlan plan = plan_from_config(cfg);
  TrainResult result = train_classifier(plan, train, val);
  if (model_out) *model_out = result.model;

  RunReport report;
  report.rung = rung;
  report.config = cfg;
  report.final_train_error = result.final_train_error;
  report.final_val_error = result.final_val_error;
  report.epochs = result.epochs.size();
  report.iterations = result.iterations;
  report.batch = plan.batch;
  report.lr = plan.regime.base_lr;
  report.sigma_sq = plan.noise.sigma_sq;
  report.epoch_stats = result.epochs;
  report.distance = result.distance;

  const std::string cfg_text = effective_config_text(cfg);
  std::uint64_t h = content_hash(kHashSeed, cfg_text.data(), cfg_text.size());
  h = content_hash(h, train.inputs.data(), train.inputs.size() * sizeof(double));
  h = content_hash(h, train.labels.data(), train.labels.size() * sizeof(int));
  h = content_hash(h, val.inputs.data(), val.inputs.size() * sizeof(double));
  h = content_hash(h, val.labels.data(), val.labels.size() * sizeof(int));
  report.input_hash = h;

  const std::string dir = out_dir + "/" + rung;
  ensure_dir(dir);
  report.epochs_csv = dir + "/epochs.csv";
  report.distance_csv = dir + "/distance.csv";
  report.config_snapshot = dir + "/effective_config.ini";
  save_epochs_csv(report.epoch_stats, report.epochs_csv);
  save_distance_csv(report.distance, report.distance_csv);
  std::ofstream snap(report.config_snapshot, std::ios::binary);
  if (!snap) throw IoError("run_single: cannot open " + report.config_snapshot);
  snap << cfg_text;
  if (!snap) throw IoError("run_single: write failed for " + report.config_snapshot);

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

std::vector<RunReport> run_ablation(const RunConfig& base) {
  validate_config(base);
  ensure_dir(base.out_dir);
  {
    std::ofstream master(base.out_dir + "/config.ini", std::ios::binary);
    if (!master) throw IoError("run_ablation: cannot write master config");
    master << serialize_config(base);
  }
  Dataset train, val;
  load_data(base.dataset, train, val);

  std::vector<RunReport> reports;
  for (const std::string& rung : ladder_rungs()) {
    try {
      reports.push_back(
          run_single(rung_config(base, rung), rung, train, val, base.out_dir));
    } catch (...) {
      if (!reports.empty()) emit_report(reports, base.out_dir);
      throw;
    }
  }
  emit_report(reports, base.out_dir);
  return reports;
}

void emit_report(const std::vector<RunReport>& reports, const std::string& out_dir) {
  if (reports.empty()) throw ParameterError("emit_report: no reports");
  ensure_dir(out_dir);

  std::ofstream out(out_dir + "/summary.csv", std::ios::binary);
  if (!out) throw IoError("emit_report: cannot open summary.csv");
  out << "rung,batch,lr,epochs,iterations,final_train_error,final_val_error,"
         "input_hash\n";
  for (const RunReport& r : reports) {
    char hash[24];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(r.input_hash));
    out << r.rung << "," << r.batch << "," << g17(r.lr) << "," << r.epochs << ","
        << r.iterations << "," << g17(r.final_train_error) << ",";
    if (r.final_val_error >= 0.0) out << g17(r.final_val_error);
    out << "," << hash << "\n";
  }
  if (!out) throw IoError("emit_report: write failed for summary.csv");

  emit_charts(reports, out_dir);
}

void emit_charts(const std::vector<RunReport>& reports, const std::string& out_dir) {
  std::vector<ChartSeries> err_series;
  for (const RunReport& r : reports) {
    ChartSeries s;
    s.name = r.rung;
    for (const EpochStat& e : r.epoch_stats)
      if (e.val_error >= 0.0)
        s.points.push_back({static_cast<double>(e.epoch), 100.0 * e.val_error});
    if (!s.points.empty()) err_series.push_back(std::move(s));
  }
  if (!err_series.empty())
    write_svg_chart(err_series, "Validation error by epoch", "epoch",
                    "validation error (%)", out_dir + "/error_vs_epoch.svg");

  std::vector<ChartSeries> dist_series;
  for (const RunReport& r : reports) {
    ChartSeries s;
    s.name = r.rung;
    for (const DistanceEntry& e : r.distance.entries)
      if (e.t >= 1)
        s.points.push_back({std::log(static_cast<double>(e.t)), e.distance});
    if (s.points.size() >= 2) dist_series.push_back(std::move(s));
  }
  if (!dist_series.empty())
    write_svg_chart(dist_series, "Weight distance from initialization", "ln t",
                    "|w(t) - w(0)|", out_dir + "/distance_vs_lnt.svg");
}

}  // namespace batchlab
