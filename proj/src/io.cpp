#include "svdkd/io.hpp"

#include <bit>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "byte_io.hpp"
#include "svdkd/errors.hpp"

namespace svdkd {
namespace {

using detail::ByteReader;
using detail::ByteWriter;
using detail::read_file;
using detail::write_file;

constexpr char kEmb1Magic[4] = {'E', 'M', 'B', '1'};
constexpr std::uint32_t kEmb1Version = 1;
constexpr std::string_view kTagPrefix = "# source_tag=";

void put_matrix(ByteWriter& w, const Matrix& m, Dtype dtype) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (dtype == Dtype::kF64) {
        w.put_f64(m(i, j));
      } else {
        w.put_f32(static_cast<float>(m(i, j)));
      }
    }
  }
}

Matrix take_matrix(ByteReader& r, std::uint64_t rows, std::uint64_t cols, Dtype dtype,
                   const std::string& what) {
  const std::uint64_t width = dtype == Dtype::kF64 ? 8 : 4;
  if (cols != 0 && rows > r.remaining() / width / cols) {
    throw DataError("EMB1 " + what + " declares " + std::to_string(rows) + " rows of " +
                    std::to_string(cols) + " values but the file holds only " +
                    std::to_string(r.remaining() / width / cols) + " complete rows");
  }
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (dtype == Dtype::kF64) {
        m(i, j) = std::bit_cast<double>(r.payload_le<std::uint64_t>(what));
      } else {
        m(i, j) = static_cast<double>(std::bit_cast<float>(r.payload_le<std::uint32_t>(what)));
      }
    }
  }
  return m;
}

std::string meta_json(const std::vector<SampleMeta>& meta) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : meta) {
    arr.push_back({{"id", m.identity_id},
                   {"modality", std::string(to_string(m.modality))},
                   {"sample_id", m.sample_id}});
  }
  return arr.dump();
}

std::vector<SampleMeta> parse_meta_json(const std::string& text, std::uint64_t expected) {
  nlohmann::json arr;
  try {
    arr = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("EMB1 metadata is not valid JSON: ") + e.what());
  }
  if (!arr.is_array()) throw DataError("EMB1 metadata must be a JSON array");
  if (arr.size() != expected) {
    throw DataError("EMB1 metadata has " + std::to_string(arr.size()) + " entries, expected " +
                    std::to_string(expected));
  }
  std::vector<SampleMeta> meta;
  meta.reserve(arr.size());
  for (const auto& obj : arr) {
    try {
      SampleMeta m;
      m.identity_id = obj.at("id").get<std::int64_t>();
      m.modality = parse_modality(obj.at("modality").get<std::string>());
      m.sample_id = obj.at("sample_id").get<std::int64_t>();
      meta.push_back(m);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("EMB1 metadata entry malformed: ") + e.what());
    } catch (const FormatError& e) {
      throw DataError(e.what());
    }
  }
  return meta;
}

void save_emb1(const EmbeddingSet& set, const std::filesystem::path& path, Dtype dtype) {
  ByteWriter w;
  w.put_bytes(kEmb1Magic, sizeof(kEmb1Magic));
  w.put_le<std::uint32_t>(kEmb1Version);
  w.put_le<std::uint64_t>(set.size());
  w.put_le<std::uint32_t>(static_cast<std::uint32_t>(set.dim()));
  w.put_le<std::uint32_t>(static_cast<std::uint32_t>(set.input_dim()));
  w.put_le<std::uint8_t>(static_cast<std::uint8_t>(dtype));
  w.put_le<std::uint8_t>(0);
  put_matrix(w, set.features(), dtype);
  if (set.raw_inputs()) put_matrix(w, *set.raw_inputs(), dtype);
  const std::string meta = meta_json(set.meta());
  w.put_le<std::uint64_t>(meta.size());
  w.put_bytes(meta.data(), meta.size());
  w.put_le<std::uint64_t>(set.source_tag().size());
  w.put_bytes(set.source_tag().data(), set.source_tag().size());
  write_file(path, w.bytes().data(), w.bytes().size());
}

EmbeddingSet load_emb1(const std::filesystem::path& path) {
  ByteReader r(read_file(path));
  char magic[4];
  r.header_bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kEmb1Magic, sizeof(magic)) != 0) {
    throw FormatError(path.string() + ": bad magic, not an EMB1 file");
  }
  const auto version = r.header_le<std::uint32_t>("version");
  if (version != kEmb1Version) {
    throw FormatError(path.string() + ": unsupported EMB1 version " + std::to_string(version));
  }
  const auto n = r.header_le<std::uint64_t>("n");
  const auto d = r.header_le<std::uint32_t>("d");
  const auto d_in = r.header_le<std::uint32_t>("d_in");
  const auto dtype_raw = r.header_le<std::uint8_t>("dtype");
  const auto flags = r.header_le<std::uint8_t>("flags");
  if (dtype_raw > 1) throw FormatError(path.string() + ": unknown dtype " + std::to_string(dtype_raw));
  if (flags != 0) throw FormatError(path.string() + ": reserved flags must be 0");
  const auto dtype = static_cast<Dtype>(dtype_raw);

  Matrix features = take_matrix(r, n, d, dtype, "features");
  std::optional<Matrix> raw;
  if (d_in > 0) raw = take_matrix(r, n, d_in, dtype, "raw_inputs");
  const auto meta_len = r.payload_le<std::uint64_t>("metadata length");
  auto meta = parse_meta_json(r.payload_string(meta_len, "metadata"), n);
  std::string tag;
  if (!r.exhausted()) {
    const auto tag_len = r.payload_le<std::uint64_t>("source tag length");
    tag = r.payload_string(tag_len, "source tag");
  }
  if (!r.exhausted()) throw DataError(path.string() + ": trailing bytes after EMB1 payload");
  return EmbeddingSet(std::move(features), std::move(meta), std::move(raw), std::move(tag));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::int64_t parse_int(const std::string& token, std::size_t line_no) {
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(token.c_str(), &end, 10);
  if (token.empty() || *end != '\0' || errno != 0) {
    throw DataError("CSV line " + std::to_string(line_no) + ": bad integer '" + token + "'");
  }
  return v;
}

double parse_double(const std::string& token, std::size_t line_no) {
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (token.empty() || *end != '\0') {
    throw DataError("CSV line " + std::to_string(line_no) + ": bad number '" + token + "'");
  }
  if (!std::isfinite(v)) {
    throw DataError("CSV line " + std::to_string(line_no) + ": non-finite value '" + token + "'");
  }
  return v;
}

void save_csv(const EmbeddingSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  if (!set.source_tag().empty()) out << kTagPrefix << set.source_tag() << '\n';
  out << "id,modality,sample_id";
  for (std::size_t j = 0; j < set.dim(); ++j) out << ",f" << j;
  for (std::size_t j = 0; j < set.input_dim(); ++j) out << ",x" << j;
  out << '\n';
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << ',' << buf;
  };
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& m = set.meta()[i];
    out << m.identity_id << ',' << to_string(m.modality) << ',' << m.sample_id;
    const auto row = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < set.features().cols(); ++j) put(set.features()(row, j));
    if (set.raw_inputs()) {
      for (Eigen::Index j = 0; j < set.raw_inputs()->cols(); ++j) put((*set.raw_inputs())(row, j));
    }
    out << '\n';
  }
  if (!out) throw IoError("write to " + path.string() + " failed");
}

EmbeddingSet load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::string line;
  std::size_t line_no = 0;
  std::string tag;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty CSV file");
  ++line_no;
  if (line.rfind(kTagPrefix, 0) == 0) {
    tag = line.substr(kTagPrefix.size());
    if (!std::getline(in, line)) throw FormatError(path.string() + ": missing CSV header");
    ++line_no;
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "id" || header[1] != "modality" ||
      header[2] != "sample_id") {
    throw FormatError(path.string() + ": CSV header must start with id,modality,sample_id");
  }
  std::size_t d = 0;
  std::size_t d_in = 0;
  for (std::size_t c = 3; c < header.size(); ++c) {
    const std::string expect_f = "f" + std::to_string(d);
    const std::string expect_x = "x" + std::to_string(d_in);
    if (d_in == 0 && header[c] == expect_f) {
      ++d;
    } else if (header[c] == expect_x) {
      ++d_in;
    } else {
      throw FormatError(path.string() + ": unexpected CSV column '" + header[c] + "'");
    }
  }

  std::vector<SampleMeta> meta;
  std::vector<double> feats;
  std::vector<double> raws;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw DataError(path.string() + ": CSV line " + std::to_string(line_no) + " has " +
                      std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(header.size()));
    }
    SampleMeta m;
    m.identity_id = parse_int(fields[0], line_no);
    try {
      m.modality = parse_modality(fields[1]);
    } catch (const FormatError& e) {
      throw DataError("CSV line " + std::to_string(line_no) + ": " + e.what());
    }
    m.sample_id = parse_int(fields[2], line_no);
    meta.push_back(m);
    for (std::size_t j = 0; j < d; ++j) feats.push_back(parse_double(fields[3 + j], line_no));
    for (std::size_t j = 0; j < d_in; ++j) raws.push_back(parse_double(fields[3 + d + j], line_no));
  }

  const auto n = static_cast<Eigen::Index>(meta.size());
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Matrix features = Eigen::Map<RowMajor>(feats.data(), n, static_cast<Eigen::Index>(d));
  std::optional<Matrix> raw;
  if (d_in > 0) raw = Matrix(Eigen::Map<RowMajor>(raws.data(), n, static_cast<Eigen::Index>(d_in)));
  return EmbeddingSet(std::move(features), std::move(meta), std::move(raw), std::move(tag));
}

}  // namespace

SetFormat format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? SetFormat::kCsv : SetFormat::kEmb1;
}

EmbeddingSet load_embedding_set(const std::filesystem::path& path, SetFormat format) {
  return format == SetFormat::kEmb1 ? load_emb1(path) : load_csv(path);
}

void save_embedding_set(const EmbeddingSet& set, const std::filesystem::path& path,
                        SetFormat format, Dtype dtype) {
  if (format == SetFormat::kEmb1) {
    save_emb1(set, path, dtype);
  } else {
    save_csv(set, path);
  }
}

}  // namespace svdkd
