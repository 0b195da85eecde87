#include "crda/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace crda {

void ErrorGrid::validate() const {
  auto check = [](double v) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("error grid entry outside [0,1]");
  };
  check(clean_error);
  for (const auto& row : error)
    for (double v : row) check(v);
}

double error_rate(std::span<const std::size_t> predictions, std::span<const std::uint32_t> labels) {
  if (predictions.size() != labels.size() || predictions.empty()) {
    throw DimensionError("error_rate: " + std::to_string(predictions.size()) + " predictions for " +
                         std::to_string(labels.size()) + " labels");
  }
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) wrong += predictions[i] != labels[i];
  return static_cast<double>(wrong) / static_cast<double>(labels.size());
}

std::vector<ErrorGrid> error_grids(std::span<const Model* const> models, const LabeledDataset& target, const Rng& rng,
                                   std::size_t threads) {
  const std::vector<std::uint32_t> labels = target.all_labels();
  std::vector<ErrorGrid> grids(models.size());
  for (std::size_t m = 0; m < models.size(); ++m)
    grids[m].clean_error = error_rate(predict(*models[m], target.images()), labels);

  constexpr std::size_t kCells = kCorruptionCount * kMaxSeverity;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t cell = next++; cell < kCells; cell = next++) {
      const CorruptionKind kind = kAllCorruptions[cell / kMaxSeverity];
      const int t = static_cast<int>(cell % kMaxSeverity) + 1;
      const Tensor corrupted = corrupt_batch(kind, Severity(t), target.images(), rng.derive(kind_index(kind) * 8 + t));
      for (std::size_t m = 0; m < models.size(); ++m)
        grids[m].at(kind, t) = error_rate(predict(*models[m], corrupted), labels);
    }
  };
  threads = std::clamp<std::size_t>(threads, 1, kCells);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  return grids;
}

ErrorGrid error_grid(const Model& model, const LabeledDataset& target, const Rng& rng, std::size_t threads) {
  const Model* one[] = {&model};
  return error_grids(one, target, rng, threads).front();
}

CeReport ce(const ErrorGrid& model, const ErrorGrid& reference, std::string model_id, std::string reference_id) {
  model.validate();
  reference.validate();
  CeReport r;
  r.model_id = std::move(model_id);
  r.reference_id = std::move(reference_id);
  double sum = 0.0;
  std::size_t used = 0;
  for (CorruptionKind kind : kAllCorruptions) {
    const auto& num = model.error[kind_index(kind)];
    const auto& den = reference.error[kind_index(kind)];
    const double n = std::accumulate(num.begin(), num.end(), 0.0);
    const double d = std::accumulate(den.begin(), den.end(), 0.0);
    if (d == 0.0) {
      r.excluded.push_back(kind);
      r.warnings.push_back(std::string(corruption_name(kind)) + ": reference error is zero at every severity; excluded from mCE");
      continue;
    }
    r.ce[kind_index(kind)] = n / d;
    sum += n / d;
    ++used;
  }
  if (used == 0) throw std::invalid_argument("ce: reference error is zero for every corruption kind");
  r.mce = sum / static_cast<double>(used);
  return r;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string metrics_csv(std::span<const CeReport> reports) {
  std::string out = "model,kind,CE\n";
  for (const CeReport& r : reports) {
    for (CorruptionKind kind : kAllCorruptions) {
      const auto& v = r.ce[kind_index(kind)];
      if (v) out += r.model_id + "," + std::string(corruption_name(kind)) + "," + format_double(*v) + "\n";
    }
    out += r.model_id + ",mCE," + format_double(r.mce) + "\n";
  }
  return out;
}

namespace {

std::string xml_escape(const std::string& s) {
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

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

}  // namespace

CurveArtifacts severity_curves(std::span<const std::pair<std::string, ErrorGrid>> grids) {
  if (grids.empty()) throw std::invalid_argument("severity_curves: no grids");
  CurveArtifacts out;
  out.csv = "label,kind,t,error\n";
  for (const auto& [label, grid] : grids) {
    out.csv += label + ",clean,0," + format_double(grid.clean_error) + "\n";
    for (CorruptionKind kind : kAllCorruptions)
      for (int t = 1; t <= static_cast<int>(kMaxSeverity); ++t)
        out.csv += label + "," + std::string(corruption_name(kind)) + "," + std::to_string(t) + "," +
                   format_double(grid.at(kind, t)) + "\n";
  }

  constexpr int kCols = 5, kPanelW = 180, kPanelH = 130, kPad = 30, kLegend = 24;
  const int rows = static_cast<int>((kCorruptionCount + kCols - 1) / kCols);
  const int width = kCols * kPanelW, height = rows * kPanelH + kLegend;
  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  for (std::size_t k = 0; k < kCorruptionCount; ++k) {
    const int ox = static_cast<int>(k % kCols) * kPanelW, oy = static_cast<int>(k / kCols) * kPanelH;
    const int x0 = ox + kPad, x1 = ox + kPanelW - 10, y0 = oy + kPanelH - 20, y1 = oy + 20;
    svg << "<g>\n<text x=\"" << ox + kPanelW / 2 << "\" y=\"" << oy + 13 << "\" text-anchor=\"middle\">"
        << corruption_name(kAllCorruptions[k]) << "</text>\n";
    svg << "<rect x=\"" << x0 << "\" y=\"" << y1 << "\" width=\"" << x1 - x0 << "\" height=\"" << y0 - y1
        << "\" fill=\"none\" stroke=\"#999\"/>\n";
    svg << "<text x=\"" << x0 - 3 << "\" y=\"" << y0 << "\" text-anchor=\"end\">0</text>\n";
    svg << "<text x=\"" << x0 - 3 << "\" y=\"" << y1 + 8 << "\" text-anchor=\"end\">1</text>\n";
    for (std::size_t s = 0; s < grids.size(); ++s) {
      const ErrorGrid& g = grids[s].second;
      svg << "<polyline fill=\"none\" stroke=\"" << kPalette[s % std::size(kPalette)] << "\" stroke-width=\"1.5\" points=\"";
      for (int t = 1; t <= static_cast<int>(kMaxSeverity); ++t) {
        const double e = std::clamp(g.at(kAllCorruptions[k], t), 0.0, 1.0);
        const double px = x0 + (x1 - x0) * (t - 1) / 4.0;
        const double py = y0 - (y0 - y1) * e;
        svg << (t > 1 ? " " : "") << px << "," << py;
      }
      svg << "\"/>\n";
    }
    svg << "</g>\n";
  }
  for (std::size_t s = 0; s < grids.size(); ++s) {
    const int lx = 10 + static_cast<int>(s) * 150, ly = rows * kPanelH + 16;
    svg << "<rect x=\"" << lx << "\" y=\"" << ly - 8 << "\" width=\"10\" height=\"10\" fill=\""
        << kPalette[s % std::size(kPalette)] << "\"/><text x=\"" << lx + 14 << "\" y=\"" << ly << "\">"
        << xml_escape(grids[s].first) << " (clean " << format_double(grids[s].second.clean_error) << ")</text>\n";
  }
  svg << "</svg>\n";
  out.svg = svg.str();
  return out;
}

}  // namespace crda
