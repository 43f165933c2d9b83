#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "dlg/harness/experiment.hpp"

namespace dlg::harness {

namespace {

constexpr double kWidth = 720, kHeight = 440;
constexpr double kLeft = 60, kRight = 60, kTop = 40, kBottom = 50;
const char* const kPalette[] = {"#1f77b4", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2"};
constexpr const char* kUpperColor = "#ff7f0e";

std::string fmt(double v, int digits = 2) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

// Axes: x in epochs, left y success rate [0, 1], right y average turns.
class Plot {
 public:
  Plot(double max_epoch, double max_turns) : max_x_(std::max(1.0, max_epoch)), max_t_(std::max(1.0, max_turns)) {}

  double x(double epoch) const { return kLeft + epoch / max_x_ * (kWidth - kLeft - kRight); }
  double y(double rate) const { return kHeight - kBottom - rate * (kHeight - kTop - kBottom); }
  double yt(double turns) const { return y(turns / max_t_); }

  std::string axes(const std::string& title) const {
    std::ostringstream s;
    s << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
    s << line(x(0), y(0), x(max_x_), y(0), "#000", 1, "") << line(x(0), y(0), x(0), y(1), "#000", 1, "")
      << line(x(max_x_), y(0), x(max_x_), y(1), "#000", 1, "");
    for (int i = 0; i <= 5; ++i) {
      const double r = i / 5.0;
      s << label(x(0) - 6, y(r) + 4, fmt(r, 1), "end") << label(x(max_x_) + 6, y(r) + 4, fmt(r * max_t_, 0), "start")
        << line(x(0), y(r), x(max_x_), y(r), "#ddd", 0.5, "");
      const double e = r * max_x_;
      s << label(x(e), y(0) + 16, fmt(e, 0), "middle");
    }
    s << label(kWidth / 2, kHeight - 10, "epoch", "middle");
    s << "<text x=\"16\" y=\"" << kHeight / 2 << "\" transform=\"rotate(-90 16 " << kHeight / 2
      << ")\" text-anchor=\"middle\" font-size=\"12\">success rate</text>\n";
    s << "<text x=\"" << kWidth - 14 << "\" y=\"" << kHeight / 2 << "\" transform=\"rotate(90 " << kWidth - 14 << ' '
      << kHeight / 2 << ")\" text-anchor=\"middle\" font-size=\"12\">average turns</text>\n";
    return s.str();
  }

  static std::string line(double x1, double y1, double x2, double y2, const std::string& color, double width,
                          const std::string& dash) {
    std::ostringstream s;
    s << "<line x1=\"" << fmt(x1) << "\" y1=\"" << fmt(y1) << "\" x2=\"" << fmt(x2) << "\" y2=\"" << fmt(y2)
      << "\" stroke=\"" << color << "\" stroke-width=\"" << width << '"';
    if (!dash.empty()) s << " stroke-dasharray=\"" << dash << '"';
    s << "/>\n";
    return s.str();
  }

  static std::string label(double x, double y, const std::string& text, const char* anchor) {
    std::ostringstream s;
    s << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" text-anchor=\"" << anchor << "\" font-size=\"11\">"
      << text << "</text>\n";
    return s.str();
  }

  std::string polyline(const std::vector<std::pair<double, double>>& pts, const std::string& color, double width,
                       const std::string& dash) const {
    std::ostringstream s;
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << width << '"';
    if (!dash.empty()) s << " stroke-dasharray=\"" << dash << '"';
    s << " points=\"";
    for (const auto& [px, py] : pts) s << fmt(px) << ',' << fmt(py) << ' ';
    s << "\"/>\n";
    return s.str();
  }

  double max_x() const { return max_x_; }

 private:
  double max_x_, max_t_;
};

void write_group_plot(const std::string& title, const std::vector<const LearningCurve*>& curves,
                      const std::filesystem::path& path) {
  double max_epoch = 1, max_turns = 1;
  for (const auto* c : curves) {
    for (const auto& r : c->mean) {
      max_epoch = std::max(max_epoch, static_cast<double>(r.epoch));
      max_turns = std::max(max_turns, r.avg_turns);
    }
  }
  max_turns = std::ceil(max_turns / 10.0) * 10.0;
  const Plot plot(max_epoch, max_turns);

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << plot.axes(title);

  double upper = 0;
  for (const auto* c : curves) upper = std::max(upper, c->upper_bound());
  s << Plot::line(plot.x(0), plot.y(upper), plot.x(plot.max_x()), plot.y(upper), kUpperColor, 2, "2,3");

  double legend_y = kTop + 4;
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto& c = *curves[i];
    const std::string color = kPalette[i % std::size(kPalette)];
    std::vector<std::pair<double, double>> succ, turns;
    for (const auto& r : c.mean) {
      succ.emplace_back(plot.x(r.epoch), plot.y(r.success_rate));
      turns.emplace_back(plot.x(r.epoch), plot.yt(r.avg_turns));
    }
    s << plot.polyline(succ, color, 1.8, "") << plot.polyline(turns, color, 0.8, "1,2");
    s << Plot::line(plot.x(0), plot.y(c.rule_success()), plot.x(plot.max_x()), plot.y(c.rule_success()), color, 1,
                    "8,4");
    s << Plot::line(kLeft + 10, legend_y, kLeft + 30, legend_y, color, 2, "")
      << Plot::label(kLeft + 34, legend_y + 4, c.code + " (rule " + fmt(c.rule_success()) + ")", "start");
    legend_y += 15;
  }
  s << Plot::line(kLeft + 10, legend_y, kLeft + 30, legend_y, kUpperColor, 2, "2,3")
    << Plot::label(kLeft + 34, legend_y + 4, "upper bound " + fmt(upper), "start");
  s << "</svg>\n";

  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << s.str();
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

std::vector<std::filesystem::path> emit_report(const std::vector<LearningCurve>& curves,
                                               const std::filesystem::path& out_dir) {
  if (curves.empty()) throw std::invalid_argument("no curves to report");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  std::vector<std::filesystem::path> written;
  for (const auto& c : curves) {
    const auto path = out_dir / (curve_stem(c.code, c.level) + ".csv");
    write_mean_csv(c.mean, path);
    written.push_back(path);
  }

  for (env::Level level : {env::Level::kFrame, env::Level::kNaturalLanguage}) {
    for (const auto& group : analysis_groups()) {
      std::vector<const LearningCurve*> members;
      for (const auto& code : group.codes) {
        for (const auto& c : curves) {
          if (c.level == level && c.code == code) members.push_back(&c);
        }
      }
      if (members.empty()) continue;
      const std::string stem = level == env::Level::kFrame ? group.name : group.name + "_nl";
      const auto path = out_dir / ("plot_" + stem + ".svg");
      write_group_plot(group.name + " (" + std::string(env::to_string(level)) + ")", members, path);
      written.push_back(path);
    }
  }

  const auto summary = out_dir / "summary.csv";
  std::ofstream out(summary);
  if (!out) throw IoError("cannot write " + summary.string());
  out << "code,level,intent_type,intent_rate,slot_type,slot_rate,runs,epochs,final_success,final_turns,"
         "rule_success,upper_bound,warm_success\n";
  for (const auto& c : curves) {
    out << c.code << ',' << env::to_string(c.level) << ',' << error_model::to_string(c.errors.intent_type) << ','
        << fmt(c.errors.intent_rate) << ',' << error_model::to_string(c.errors.slot_type) << ','
        << fmt(c.errors.slot_rate) << ',' << c.runs() << ',' << c.mean.size() << ',' << fmt(c.final_success(), 4)
        << ',' << fmt(c.final_turns(), 2) << ',' << fmt(c.rule_success(), 4) << ',' << fmt(c.upper_bound(), 4) << ','
        << fmt(c.warm_success(), 4) << '\n';
  }
  if (!out) throw IoError("write failed for " + summary.string());
  written.push_back(summary);
  return written;
}

}  // namespace dlg::harness
