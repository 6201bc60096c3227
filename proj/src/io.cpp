#include "hcembed/io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace hcembed {

namespace {

constexpr std::uint32_t kEmbVersion = 1;
constexpr char kEmbMagic[4] = {'E', 'M', 'B', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void need(std::size_t count, const char* what) const {
    if (bytes_.size() - pos_ < count) {
      throw IoError("EMB1 truncated: " + std::to_string(count - (bytes_.size() - pos_)) +
                        " byte(s) missing while reading " + what,
                    pos_);
    }
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(bytes_[pos_ + b]) << (8 * b);
    pos_ += 4;
    return v;
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return bytes_[pos_++];
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

int parse_int(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError("line " + std::to_string(line) + ": '" + s + "' is not an integer");
  }
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Matrix Embedding::to_matrix() const {
  std::vector<double> data(values.begin(), values.end());
  return Matrix(n, d, std::move(data));
}

Embedding Embedding::from_matrix(const Matrix& m, std::optional<std::vector<int>> labels) {
  Embedding e{m.rows(), m.cols(), {}, std::move(labels)};
  e.values.reserve(m.rows() * m.cols());
  for (double v : m.data()) e.values.push_back(static_cast<float>(v));
  return e;
}

std::vector<std::uint8_t> encode_embedding(const Embedding& emb) {
  if (emb.values.size() != emb.n * emb.d) throw ArgumentError("embedding has wrong value count");
  if (emb.labels && emb.labels->size() != emb.n) throw ArgumentError("embedding has wrong label count");
  std::vector<std::uint8_t> out;
  out.reserve(17 + 4 * emb.values.size() + (emb.labels ? 4 * emb.n : 0));
  out.insert(out.end(), kEmbMagic, kEmbMagic + 4);
  put_u32(out, kEmbVersion);
  put_u32(out, static_cast<std::uint32_t>(emb.n));
  put_u32(out, static_cast<std::uint32_t>(emb.d));
  for (float f : emb.values) put_u32(out, std::bit_cast<std::uint32_t>(f));
  out.push_back(emb.labels ? 1 : 0);
  if (emb.labels) {
    for (int l : *emb.labels) put_u32(out, static_cast<std::uint32_t>(l));
  }
  return out;
}

Embedding decode_embedding(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  in.need(4, "magic");
  if (std::memcmp(bytes.data(), kEmbMagic, 4) != 0) throw IoError("not an EMB1 file: bad magic", 0);
  (void)in.u32("magic");
  const std::size_t version_at = in.pos();
  const std::uint32_t version = in.u32("version");
  if (version != kEmbVersion) {
    throw IoError("unsupported EMB1 version " + std::to_string(version), version_at);
  }
  Embedding emb;
  emb.n = in.u32("point count");
  emb.d = in.u32("dimension");
  const std::uint64_t count = static_cast<std::uint64_t>(emb.n) * emb.d;
  in.need(count * 4, "coordinates");
  emb.values.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::size_t at = in.pos();
    const float f = std::bit_cast<float>(in.u32("coordinates"));
    if (!std::isfinite(f)) throw IoError("EMB1 coordinate " + std::to_string(i) + " is not finite", at);
    emb.values[i] = f;
  }
  const std::size_t flag_at = in.pos();
  const std::uint8_t flag = in.u8("label flag");
  if (flag > 1) throw IoError("EMB1 label flag must be 0 or 1", flag_at);
  if (flag == 1) {
    in.need(static_cast<std::size_t>(emb.n) * 4, "labels");
    std::vector<int> labels(emb.n);
    for (auto& l : labels) l = static_cast<std::int32_t>(in.u32("labels"));
    emb.labels = std::move(labels);
  }
  if (in.remaining() != 0) {
    throw IoError("EMB1 has " + std::to_string(in.remaining()) + " trailing byte(s)", in.pos());
  }
  return emb;
}

void write_embedding(const std::filesystem::path& path, const Embedding& emb) {
  const auto bytes = encode_embedding(emb);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

Embedding read_embedding(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_embedding(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::string format_labels(const LabelTable& table) {
  std::string out = "index,label";
  const std::size_t h = table.levels ? table.levels->levels : 0;
  if (table.levels && table.levels->n != table.flat.size()) {
    throw ArgumentError("level label count does not match flat label count");
  }
  for (std::size_t l = 1; l <= h; ++l) out += ",l" + std::to_string(l);
  out += '\n';
  for (std::size_t i = 0; i < table.flat.size(); ++i) {
    out += std::to_string(i) + ',' + std::to_string(table.flat[i]);
    for (std::size_t l = 0; l < h; ++l) out += ',' + std::to_string(table.levels->at(i, l));
    out += '\n';
  }
  return out;
}

LabelTable parse_labels(const std::string& text) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw IoError("labels CSV is empty");
  const auto header = split(lines[0], ',');
  if (header.size() < 2 || header[0] != "index" || header[1] != "label") {
    throw IoError("labels CSV header must start with 'index,label'");
  }
  const std::size_t h = header.size() - 2;
  for (std::size_t l = 0; l < h; ++l) {
    if (header[2 + l] != "l" + std::to_string(l + 1)) throw IoError("labels CSV header column '" + header[2 + l] + "'");
  }
  LabelTable table;
  LevelLabels levels{0, h, {}};
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = split(lines[r], ',');
    if (cells.size() != header.size()) {
      throw IoError("labels CSV line " + std::to_string(r + 1) + " has " + std::to_string(cells.size()) +
                    " fields, expected " + std::to_string(header.size()));
    }
    if (parse_int(cells[0], r + 1) != static_cast<int>(r - 1)) {
      throw IoError("labels CSV line " + std::to_string(r + 1) + " is out of index order");
    }
    table.flat.push_back(parse_int(cells[1], r + 1));
    for (std::size_t l = 0; l < h; ++l) levels.values.push_back(parse_int(cells[2 + l], r + 1));
  }
  if (h > 0) {
    levels.n = table.flat.size();
    try {
      levels.check_refinement();
    } catch (const ArgumentError& e) {
      throw IoError(std::string("labels CSV: ") + e.what());
    }
    table.levels = std::move(levels);
  }
  return table;
}

void write_labels(const std::filesystem::path& path, const LabelTable& table) {
  write_text(path, format_labels(table));
}

LabelTable read_labels(const std::filesystem::path& path) { return parse_labels(read_text(path)); }

std::string format_gmm(const GmmParams& gmm) {
  auto row = [](std::span<const double> r) {
    std::string s = "[";
    for (std::size_t j = 0; j < r.size(); ++j) s += (j ? ", " : "") + format_double(r[j]);
    return s + "]";
  };
  auto rows = [&](const Matrix& m) {
    std::string s = "[";
    for (std::size_t i = 0; i < m.rows(); ++i) s += std::string(i ? ",\n    " : "\n    ") + row(m.row(i));
    return s + "\n  ]";
  };
  std::string out = "{\n";
  out += "  \"k\": " + std::to_string(gmm.k()) + ",\n";
  out += "  \"dim\": " + std::to_string(gmm.dim()) + ",\n";
  out += "  \"weights\": " + row(gmm.weights) + ",\n";
  out += "  \"means\": " + rows(gmm.means) + ",\n";
  out += "  \"variances\": " + rows(gmm.variances) + "\n";
  out += "}\n";
  return out;
}

GmmParams parse_gmm(const std::string& text) {
  using nlohmann::json;
  GmmParams gmm;
  try {
    const json j = json::parse(text);
    const auto k = j.at("k").get<std::size_t>();
    const auto dim = j.at("dim").get<std::size_t>();
    gmm.weights = j.at("weights").get<std::vector<double>>();
    const auto means = j.at("means").get<std::vector<std::vector<double>>>();
    const auto vars = j.at("variances").get<std::vector<std::vector<double>>>();
    if (gmm.weights.size() != k || means.size() != k || vars.size() != k) {
      throw IoError("gmm JSON: weights/means/variances must each have k=" + std::to_string(k) + " rows");
    }
    const std::size_t vcols = vars.empty() ? 0 : vars.front().size();
    gmm.means = Matrix(k, dim);
    gmm.variances = Matrix(k, vcols);
    for (std::size_t c = 0; c < k; ++c) {
      if (means[c].size() != dim) throw IoError("gmm JSON: mean " + std::to_string(c) + " has wrong length");
      if (vars[c].size() != vcols) throw IoError("gmm JSON: variances are ragged");
      std::copy(means[c].begin(), means[c].end(), gmm.means.row(c).begin());
      std::copy(vars[c].begin(), vars[c].end(), gmm.variances.row(c).begin());
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("gmm JSON: ") + e.what());
  }
  try {
    gmm.validate(1e-6);
  } catch (const ArgumentError& e) {
    throw IoError(std::string("gmm JSON validation failed: ") + e.what());
  }
  return gmm;
}

void write_gmm(const std::filesystem::path& path, const GmmParams& gmm) { write_text(path, format_gmm(gmm)); }

GmmParams read_gmm(const std::filesystem::path& path) { return parse_gmm(read_text(path)); }

std::string format_dendrogram(const Dendrogram& tree) {
  std::string out = "left,right,height,size\n";
  for (const Merge& m : tree.merges()) {
    out += std::to_string(m.left) + ',' + std::to_string(m.right) + ',' + format_double(m.height) + ',' +
           std::to_string(m.size) + '\n';
  }
  return out;
}

Dendrogram parse_dendrogram(const std::string& text) {
  const auto lines = lines_of(text);
  if (lines.empty() || lines[0] != "left,right,height,size") {
    throw IoError("dendrogram CSV header must be 'left,right,height,size'");
  }
  std::vector<Merge> merges;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = split(lines[r], ',');
    if (cells.size() != 4) throw IoError("dendrogram CSV line " + std::to_string(r + 1) + " needs 4 fields");
    try {
      merges.push_back({std::stoull(cells[0]), std::stoull(cells[1]), std::stod(cells[2]), std::stoull(cells[3])});
    } catch (const std::exception&) {
      throw IoError("dendrogram CSV line " + std::to_string(r + 1) + " is malformed");
    }
  }
  const std::size_t n = merges.size() + 1;
  try {
    return Dendrogram(n, std::move(merges));
  } catch (const StructuralError& e) {
    throw IoError(std::string("dendrogram CSV: ") + e.what());
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace hcembed
