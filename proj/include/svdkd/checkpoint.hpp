#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "svdkd/student.hpp"

namespace svdkd {

// STU1 (little-endian):
//   "STU1" | u32 version=1 | u64 json_len | JSON config echo
//   | u32 block_count | per block: u32 name_len | name UTF-8 | u64 count | f64[count]
// The JSON holds the model shape, adapter placement and rank, plus whatever
// the caller passes as `extra` (the training config). Blocks follow
// parameter_blocks() order.
void save_student(const StudentModel& model, const std::filesystem::path& path,
                  const nlohmann::json& extra = nlohmann::json::object());

struct LoadedStudent {
  StudentModel model;
  nlohmann::json config;
};

// FormatError for a bad magic/version or block layout mismatch, DataError
// for truncated payloads, IoError if the file cannot be read.
LoadedStudent load_student(const std::filesystem::path& path);

}  // namespace svdkd
