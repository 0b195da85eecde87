#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "crda/tensor.hpp"

namespace crda {

/// Malformed or truncated input file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Images N x C x H x W in [0,1] with one class index per image.
///
/// Label reads go through an audit counter shared by every copy of the
/// dataset, so a training loop can be checked for never touching target
/// labels.
class LabeledDataset {
 public:
  LabeledDataset(Tensor images, std::vector<std::uint32_t> labels, std::size_t class_count,
                 std::string domain_tag);

  const Tensor& images() const { return images_; }
  std::size_t size() const { return images_.dim(0); }
  std::size_t channels() const { return images_.dim(1); }
  std::size_t height() const { return images_.dim(2); }
  std::size_t width() const { return images_.dim(3); }
  Shape image_shape() const { return {channels(), height(), width()}; }
  std::size_t class_count() const { return class_count_; }
  const std::string& domain_tag() const { return domain_tag_; }

  /// Audited label access.
  std::uint32_t label(std::size_t i) const;
  std::vector<std::uint32_t> labels(std::span<const std::size_t> indices) const;
  std::vector<std::uint32_t> all_labels() const;

  std::size_t label_reads() const { return label_reads_->load(); }
  void reset_label_audit() const { label_reads_->store(0); }

  Tensor image(std::size_t i) const;
  Tensor batch(std::span<const std::size_t> indices) const { return images_.gather_rows(indices); }

 private:
  Tensor images_;
  std::vector<std::uint32_t> labels_;
  std::size_t class_count_;
  std::string domain_tag_;
  std::shared_ptr<std::atomic<std::size_t>> label_reads_;
};

struct DomainPair {
  LabeledDataset source;
  LabeledDataset target;

  /// Throws std::invalid_argument if class counts or image shapes differ.
  void validate() const;
};

// TDS container, all little-endian:
//   "TDS1" | u32 N, C, H, W, S | N*C*H*W float32 pixels | N u32 labels
void save_tds(const LabeledDataset& ds, const std::filesystem::path& path);
LabeledDataset load_tds(const std::filesystem::path& path, std::string domain_tag = "");

/// Reads every *.ppm (binary P6, maxval 255) in `dir`, sorted by filename.
/// `labels_file` holds UTF-8 lines "filename<TAB>class_index".
LabeledDataset ingest_ppm_dir(const std::filesystem::path& dir,
                              const std::filesystem::path& labels_file,
                              std::optional<std::size_t> class_count = std::nullopt);

/// Writes one C x H x W image (C == 3) as binary P6.
void write_ppm(const Tensor& image, const std::filesystem::path& path);

}  // namespace crda
