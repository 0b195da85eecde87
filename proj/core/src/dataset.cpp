#include "crda/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "binary_io.hpp"

namespace crda {

LabeledDataset::LabeledDataset(Tensor images, std::vector<std::uint32_t> labels,
                               std::size_t class_count, std::string domain_tag)
    : images_(std::move(images)),
      labels_(std::move(labels)),
      class_count_(class_count),
      domain_tag_(std::move(domain_tag)),
      label_reads_(std::make_shared<std::atomic<std::size_t>>(0)) {
  if (images_.rank() != 4) {
    throw DimensionError("dataset images must be N x C x H x W, got " + shape_string(images_.shape()));
  }
  if (labels_.size() != images_.dim(0)) {
    throw DimensionError("dataset has " + std::to_string(images_.dim(0)) + " images but " +
                         std::to_string(labels_.size()) + " labels");
  }
  if (class_count_ < 1) throw std::invalid_argument("dataset class count must be positive");
  for (std::uint32_t y : labels_) {
    if (y >= class_count_) {
      throw std::invalid_argument("label " + std::to_string(y) + " >= class count " +
                                  std::to_string(class_count_));
    }
  }
  for (double v : images_.data()) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("dataset pixel outside [0,1]");
  }
}

std::uint32_t LabeledDataset::label(std::size_t i) const {
  label_reads_->fetch_add(1);
  return labels_.at(i);
}

std::vector<std::uint32_t> LabeledDataset::labels(std::span<const std::size_t> indices) const {
  label_reads_->fetch_add(indices.size());
  std::vector<std::uint32_t> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(labels_.at(i));
  return out;
}

std::vector<std::uint32_t> LabeledDataset::all_labels() const {
  label_reads_->fetch_add(labels_.size());
  return labels_;
}

Tensor LabeledDataset::image(std::size_t i) const {
  const std::size_t idx[] = {i};
  return images_.gather_rows(idx).reshaped(image_shape());
}

void DomainPair::validate() const {
  if (source.class_count() != target.class_count()) {
    throw std::invalid_argument("domain pair class counts differ: " +
                                std::to_string(source.class_count()) + " vs " +
                                std::to_string(target.class_count()));
  }
  if (source.image_shape() != target.image_shape()) {
    throw std::invalid_argument("domain pair image shapes differ: " +
                                shape_string(source.image_shape()) + " vs " +
                                shape_string(target.image_shape()));
  }
}

void save_tds(const LabeledDataset& ds, const std::filesystem::path& path) {
  io::Writer w;
  w.bytes("TDS1", 4);
  w.u32(static_cast<std::uint32_t>(ds.size()));
  w.u32(static_cast<std::uint32_t>(ds.channels()));
  w.u32(static_cast<std::uint32_t>(ds.height()));
  w.u32(static_cast<std::uint32_t>(ds.width()));
  w.u32(static_cast<std::uint32_t>(ds.class_count()));
  for (double v : ds.images().data()) w.f32(static_cast<float>(v));
  for (std::uint32_t y : ds.all_labels()) w.u32(y);
  w.write_file(path);
}

LabeledDataset load_tds(const std::filesystem::path& path, std::string domain_tag) {
  io::Reader r(io::read_file(path), path.string());
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, "TDS1", 4) != 0) throw FormatError(path.string() + ": bad magic");
  const std::size_t n = r.u32(), c = r.u32(), h = r.u32(), w = r.u32(), s = r.u32();
  if (n == 0 || c == 0 || h == 0 || w == 0 || s == 0) {
    throw FormatError(path.string() + ": zero dimension in header");
  }
  const std::size_t count = n * c * h * w;
  r.require(count * 4 + n * 4);
  std::vector<double> pixels(count);
  for (double& v : pixels) {
    v = r.f32();
    if (!(v >= 0.0 && v <= 1.0)) throw FormatError(path.string() + ": pixel outside [0,1]");
  }
  std::vector<std::uint32_t> labels(n);
  for (auto& y : labels) {
    y = r.u32();
    if (y >= s) {
      throw FormatError(path.string() + ": label " + std::to_string(y) + " >= S=" + std::to_string(s));
    }
  }
  if (domain_tag.empty()) domain_tag = path.stem().string();
  return LabeledDataset(Tensor({n, c, h, w}, std::move(pixels)), std::move(labels), s,
                        std::move(domain_tag));
}

namespace {

struct PpmImage {
  std::size_t width = 0, height = 0;
  std::vector<unsigned char> rgb;
};

// Skips whitespace and '#' comments, then reads an unsigned decimal token.
std::size_t ppm_token(const std::vector<char>& buf, std::size_t& pos, const std::string& name) {
  while (pos < buf.size()) {
    const char ch = buf[pos];
    if (ch == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(ch))) {
      ++pos;
    } else {
      break;
    }
  }
  std::size_t value = 0;
  bool any = false;
  while (pos < buf.size() && std::isdigit(static_cast<unsigned char>(buf[pos]))) {
    value = value * 10 + static_cast<std::size_t>(buf[pos] - '0');
    ++pos;
    any = true;
  }
  if (!any) throw FormatError(name + ": malformed PPM header");
  return value;
}

PpmImage read_ppm(const std::filesystem::path& path) {
  const std::vector<char> buf = io::read_file(path);
  const std::string name = path.filename().string();
  if (buf.size() < 2 || buf[0] != 'P' || buf[1] != '6') throw FormatError(name + ": not a binary P6 PPM");
  std::size_t pos = 2;
  PpmImage img;
  img.width = ppm_token(buf, pos, name);
  img.height = ppm_token(buf, pos, name);
  const std::size_t maxval = ppm_token(buf, pos, name);
  if (maxval != 255) throw FormatError(name + ": maxval " + std::to_string(maxval) + " != 255");
  ++pos;  // single whitespace byte before the raster
  const std::size_t need = img.width * img.height * 3;
  if (img.width == 0 || img.height == 0 || buf.size() < pos + need) {
    throw FormatError(name + ": truncated PPM raster");
  }
  img.rgb.assign(buf.begin() + static_cast<std::ptrdiff_t>(pos),
                 buf.begin() + static_cast<std::ptrdiff_t>(pos + need));
  return img;
}

}  // namespace

LabeledDataset ingest_ppm_dir(const std::filesystem::path& dir,
                              const std::filesystem::path& labels_file,
                              std::optional<std::size_t> class_count) {
  std::vector<std::string> names;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ppm") {
      names.push_back(entry.path().filename().string());
    }
  }
  std::sort(names.begin(), names.end());
  if (names.empty()) throw FormatError(dir.string() + ": no .ppm files");

  std::ifstream in(labels_file);
  if (!in) throw FormatError("cannot open labels file " + labels_file.string());
  std::map<std::string, std::uint32_t> label_of;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw FormatError(labels_file.string() + ":" + std::to_string(line_no) + ": expected filename<TAB>class");
    }
    const std::string fname = line.substr(0, tab);
    if (!std::binary_search(names.begin(), names.end(), fname)) {
      throw FormatError(labels_file.string() + ":" + std::to_string(line_no) + ": unknown filename " + fname);
    }
    label_of[fname] = static_cast<std::uint32_t>(std::stoul(line.substr(tab + 1)));
  }

  std::vector<double> pixels;
  std::vector<std::uint32_t> labels;
  std::size_t width = 0, height = 0;
  std::uint32_t max_label = 0;
  for (const std::string& fname : names) {
    const auto it = label_of.find(fname);
    if (it == label_of.end()) throw FormatError(fname + ": no entry in labels file");
    const PpmImage img = read_ppm(dir / fname);
    if (labels.empty()) {
      width = img.width;
      height = img.height;
    } else if (img.width != width || img.height != height) {
      throw FormatError(fname + ": size " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                        " differs from " + std::to_string(width) + "x" + std::to_string(height));
    }
    // Interleaved RGB to planar C x H x W.
    const std::size_t base = pixels.size();
    pixels.resize(base + 3 * width * height);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t p = 0; p < width * height; ++p)
        pixels[base + c * width * height + p] = static_cast<double>(img.rgb[p * 3 + c]) / 255.0;
    labels.push_back(it->second);
    max_label = std::max(max_label, it->second);
  }
  const std::size_t s = class_count.value_or(static_cast<std::size_t>(max_label) + 1);
  Tensor images({labels.size(), 3, height, width}, std::move(pixels));
  return LabeledDataset(std::move(images), std::move(labels), s, dir.filename().string());
}

void write_ppm(const Tensor& image, const std::filesystem::path& path) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw DimensionError("write_ppm needs a 3 x H x W image, got " + shape_string(image.shape()));
  }
  const std::size_t h = image.dim(1), w = image.dim(2);
  std::ostringstream header;
  header << "P6\n" << w << ' ' << h << "\n255\n";
  std::string out = header.str();
  for (std::size_t p = 0; p < h * w; ++p)
    for (std::size_t c = 0; c < 3; ++c) {
      const double v = std::clamp(image[c * h * w + p], 0.0, 1.0);
      out.push_back(static_cast<char>(static_cast<unsigned char>(v * 255.0 + 0.5)));
    }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

}  // namespace crda
