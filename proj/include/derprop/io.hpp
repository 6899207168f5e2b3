#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "derprop/tensor.hpp"
#include "derprop/theory.hpp"

namespace derprop::io {

// DPT layout (all little-endian):
//   "DPT1" | version u8 = 1 | dtype u8 = 0 (f64) | ndim u8 | reserved u8 = 0
//   | dims: ndim x u64 | payload: row-major f64
inline constexpr char kDptMagic[4] = {'D', 'P', 'T', '1'};
inline constexpr std::uint8_t kDptVersion = 1;
inline constexpr std::uint8_t kDptDtypeF64 = 0;

std::vector<char> encode_tensor(const Tensor& t);
Tensor decode_tensor(std::string_view bytes);

void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

// Binary P5 image, maxval 255, value floor(class * 255 / (C - 1)) (0 when C == 1).
std::string encode_pgm(const LabelMap& labels, std::size_t height, std::size_t width);
void export_pgm(const LabelMap& labels, std::size_t height, std::size_t width, const std::filesystem::path& path);

struct PgmImage {
  std::size_t width = 0;
  std::size_t height = 0;
  int maxval = 0;
  std::vector<std::uint8_t> pixels;
};
PgmImage decode_pgm(std::string_view bytes);

nlohmann::json report_to_json(const VerificationReport& r);
std::string report_to_text(const VerificationReport& r);

}  // namespace derprop::io
