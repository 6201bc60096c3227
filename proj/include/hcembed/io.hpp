#pragma once

// File formats.
//
// EMB1 (little-endian):
//   "EMB1" | u32 version=1 | u32 n | u32 d | n*d f32 row-major | u8 has_labels
//   | if has_labels: n i32 labels
// Labels CSV: header "index,label" or "index,label,l1,...,lh"; one row per
//   point in index order.
// GMM JSON: {"k","dim","weights","means","variances"}, floats printed with
//   17 significant digits.
// Dendrogram CSV: header "left,right,height,size"; one row per merge.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hcembed/core.hpp"
#include "hcembed/embed.hpp"

namespace hcembed {

class IoError : public Error {
 public:
  explicit IoError(const std::string& what, std::optional<std::uint64_t> offset = std::nullopt)
      : Error(offset ? what + " (at byte offset " + std::to_string(*offset) + ")" : what),
        offset_(offset) {}
  std::optional<std::uint64_t> offset() const { return offset_; }

 private:
  std::optional<std::uint64_t> offset_;
};

struct Embedding {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<float> values;  // row-major
  std::optional<std::vector<int>> labels;

  Matrix to_matrix() const;
  static Embedding from_matrix(const Matrix& m, std::optional<std::vector<int>> labels = std::nullopt);

  friend bool operator==(const Embedding&, const Embedding&) = default;
};

std::vector<std::uint8_t> encode_embedding(const Embedding& emb);
/// Throws IoError on bad magic/version, truncation (naming the missing byte
/// count), non-finite values or trailing bytes.
Embedding decode_embedding(std::span<const std::uint8_t> bytes);

void write_embedding(const std::filesystem::path& path, const Embedding& emb);
Embedding read_embedding(const std::filesystem::path& path);

struct LabelTable {
  std::vector<int> flat;
  std::optional<LevelLabels> levels;
};

std::string format_labels(const LabelTable& table);
LabelTable parse_labels(const std::string& text);
void write_labels(const std::filesystem::path& path, const LabelTable& table);
LabelTable read_labels(const std::filesystem::path& path);

std::string format_gmm(const GmmParams& gmm);
/// Validates shapes and that weights sum to 1 within 1e-6.
GmmParams parse_gmm(const std::string& text);
void write_gmm(const std::filesystem::path& path, const GmmParams& gmm);
GmmParams read_gmm(const std::filesystem::path& path);

std::string format_dendrogram(const Dendrogram& tree);
Dendrogram parse_dendrogram(const std::string& text);

/// printf("%.17g").
std::string format_double(double v);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace hcembed
