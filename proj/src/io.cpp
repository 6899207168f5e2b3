#include "derprop/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "derprop/format.hpp"

namespace derprop::io {

namespace {

void put_u64(std::vector<char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

constexpr std::size_t kHeaderFixed = 8;

}  // namespace

std::vector<char> encode_tensor(const Tensor& t) {
  if (t.ndim() == 0 || t.ndim() > 255) throw FormatError(FormatError::Kind::kBadRank, "DPT: ndim must be in [1, 255]");
  std::vector<char> out(kDptMagic, kDptMagic + 4);
  out.reserve(kHeaderFixed + 8 * t.ndim() + 8 * t.size());
  out.push_back(static_cast<char>(kDptVersion));
  out.push_back(static_cast<char>(kDptDtypeF64));
  out.push_back(static_cast<char>(t.ndim()));
  out.push_back(0);
  for (std::size_t d : t.dims()) put_u64(out, d);
  for (double v : t.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

Tensor decode_tensor(std::string_view bytes) {
  using Kind = FormatError::Kind;
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < kHeaderFixed) {
    throw FormatError(Kind::kTruncatedHeader, "DPT: truncated header, expected at least 8 bytes, got " +
                                                  std::to_string(bytes.size()));
  }
  if (std::memcmp(p, kDptMagic, 4) != 0) {
    throw FormatError(Kind::kBadMagic, "DPT: bad magic '" + std::string(bytes.substr(0, 4)) + "', expected 'DPT1'");
  }
  if (p[4] != kDptVersion)
    throw FormatError(Kind::kUnsupportedVersion, "DPT: unsupported version " + std::to_string(p[4]) + ", expected 1");
  if (p[5] != kDptDtypeF64)
    throw FormatError(Kind::kUnsupportedDtype, "DPT: unsupported dtype " + std::to_string(p[5]) + ", expected 0 (f64)");
  const std::size_t ndim = p[6];
  if (ndim == 0) throw FormatError(Kind::kBadRank, "DPT: ndim must be >= 1");
  if (p[7] != 0) throw FormatError(Kind::kBadReserved, "DPT: reserved byte is " + std::to_string(p[7]) + ", expected 0");
  const std::size_t header = kHeaderFixed + 8 * ndim;
  if (bytes.size() < header) {
    throw FormatError(Kind::kTruncatedHeader, "DPT: truncated dims, expected " + std::to_string(header) +
                                                  " header bytes, got " + std::to_string(bytes.size()));
  }
  std::vector<std::size_t> dims(ndim);
  std::uint64_t count = 1;
  for (std::size_t i = 0; i < ndim; ++i) {
    const std::uint64_t d = get_u64(p + kHeaderFixed + 8 * i);
    if (d == 0) throw FormatError(Kind::kBadRank, "DPT: dim " + std::to_string(i) + " is zero");
    if (count > (std::uint64_t{1} << 60) / d) throw FormatError(Kind::kBadRank, "DPT: dims overflow");
    count *= d;
    dims[i] = static_cast<std::size_t>(d);
  }
  const std::uint64_t expected = 8 * count;
  const std::uint64_t actual = bytes.size() - header;
  if (actual < expected) {
    throw FormatError(Kind::kTruncatedPayload, "DPT: truncated payload, expected " + std::to_string(expected) +
                                                   " bytes, got " + std::to_string(actual));
  }
  if (actual > expected) {
    throw FormatError(Kind::kTrailingBytes, "DPT: " + std::to_string(actual - expected) +
                                                " trailing bytes after payload of " + std::to_string(expected));
  }
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) data[i] = std::bit_cast<double>(get_u64(p + header + 8 * i));
  return Tensor(std::move(dims), std::move(data));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::kIo, "cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(FormatError::Kind::kIo, "cannot open '" + tmp.string() + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw FormatError(FormatError::Kind::kIo, "write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw FormatError(FormatError::Kind::kIo, "cannot rename into '" + path.string() + "'");
  }
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  const std::vector<char> bytes = encode_tensor(t);
  write_file_atomic(path, std::string_view(bytes.data(), bytes.size()));
}

Tensor read_tensor(const std::filesystem::path& path) { return decode_tensor(read_file(path)); }

std::string encode_pgm(const LabelMap& labels, std::size_t height, std::size_t width) {
  if (labels.num_classes > 256)
    throw FormatError(FormatError::Kind::kInvalidArgument, "PGM export supports at most 256 classes, got " +
                                                                std::to_string(labels.num_classes));
  if (labels.num_classes < 1) throw FormatError(FormatError::Kind::kInvalidArgument, "PGM export needs C >= 1");
  if (height * width != labels.m())
    throw FormatError(FormatError::Kind::kInvalidArgument, "PGM export: " + std::to_string(height) + "x" +
                                                                std::to_string(width) + " does not match " +
                                                                std::to_string(labels.m()) + " labels");
  std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  const int c = labels.num_classes;
  for (int k : labels.classes) {
    if (k < 0 || k >= c) throw FormatError(FormatError::Kind::kInvalidArgument, "PGM export: label out of range");
    const int v = c > 1 ? (k * 255) / (c - 1) : 0;
    out.push_back(static_cast<char>(static_cast<unsigned char>(v)));
  }
  return out;
}

void export_pgm(const LabelMap& labels, std::size_t height, std::size_t width, const std::filesystem::path& path) {
  write_file_atomic(path, encode_pgm(labels, height, width));
}

PgmImage decode_pgm(std::string_view bytes) {
  using Kind = FormatError::Kind;
  std::size_t pos = 0;
  auto skip_ws = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> long {
    skip_ws();
    const std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw FormatError(Kind::kTruncatedHeader, "PGM: malformed header");
    return std::stol(std::string(bytes.substr(start, pos - start)));
  };
  if (bytes.size() < 2 || bytes.substr(0, 2) != "P5") throw FormatError(Kind::kBadMagic, "PGM: expected P5 magic");
  pos = 2;
  PgmImage img;
  img.width = static_cast<std::size_t>(read_int());
  img.height = static_cast<std::size_t>(read_int());
  img.maxval = static_cast<int>(read_int());
  if (img.maxval < 1 || img.maxval > 255) throw FormatError(Kind::kUnsupportedDtype, "PGM: maxval must be 1..255");
  ++pos;  // single whitespace before the raster
  const std::size_t n = img.width * img.height;
  if (bytes.size() < pos + n) throw FormatError(Kind::kTruncatedPayload, "PGM: truncated raster");
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
  return img;
}

nlohmann::json report_to_json(const VerificationReport& r) {
  nlohmann::json j;
  j["claim"] = r.claim;
  j["instances"] = r.instances;
  j["violations"] = r.violations;
  if (std::isfinite(r.worst_margin))
    j["worst_margin"] = r.worst_margin;
  else
    j["worst_margin"] = nullptr;
  j["pass"] = r.pass;
  j["notes"] = r.notes;
  return j;
}

std::string report_to_text(const VerificationReport& r) {
  std::string s = std::string(r.pass ? "[PASS] " : "[FAIL] ") + r.claim + "\n";
  s += "  instances=" + std::to_string(r.instances) + " violations=" + std::to_string(r.violations) +
       " worst_margin=" + (std::isfinite(r.worst_margin) ? format_double(r.worst_margin) : std::string("n/a")) + "\n";
  for (const std::string& n : r.notes) s += "  " + n + "\n";
  return s;
}

}  // namespace derprop::io
