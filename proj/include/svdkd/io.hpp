#pragma once

#include <filesystem>

#include "svdkd/embedding_set.hpp"

namespace svdkd {

enum class SetFormat { kEmb1, kCsv };

// Payload precision for EMB1 files. Loading always widens to double.
enum class Dtype : std::uint8_t { kF32 = 0, kF64 = 1 };

// EMB1 (little-endian):
//   "EMB1" | u32 version=1 | u64 n | u32 d | u32 d_in | u8 dtype | u8 flags=0
//   | features n*d row-major | raw_inputs n*d_in row-major (iff d_in > 0)
//   | u64 meta_len | meta JSON [{"id":..,"modality":..,"sample_id":..}, ...]
//   | u64 tag_len | source tag UTF-8            (optional trailer)
//
// CSV: optional first line "# source_tag=<tag>", then the header
//   id,modality,sample_id,f0..f{d-1}[,x0..x{d_in-1}]
// and one row per sample, values printed with 17 significant digits.
//
// Errors: FormatError for a malformed header, DataError for truncated
// payloads, non-finite values or inconsistent metadata, IoError when the
// file cannot be opened.
EmbeddingSet load_embedding_set(const std::filesystem::path& path, SetFormat format);
void save_embedding_set(const EmbeddingSet& set, const std::filesystem::path& path,
                        SetFormat format, Dtype dtype = Dtype::kF64);

// Picks the format from the extension: ".csv" is CSV, anything else EMB1.
SetFormat format_for_path(const std::filesystem::path& path);

}  // namespace svdkd
