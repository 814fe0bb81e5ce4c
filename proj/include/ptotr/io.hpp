#pragma once

#include "ptotr/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace ptotr {

/// Text tensor block:
///
///   DTNS1
///   <order>
///   <dim_1> ... <dim_P>
///   colmajor
///   <values, whitespace separated, column-major>
///
/// Values are written one per line in shortest round-trip form, so text
/// round trips are exact. The binary block is the magic line "DTNSB1", then
/// little-endian uint64 order, uint64 extents and IEEE-754 doubles.
void write_tensor(std::ostream& out, const DenseTensor& t, bool binary = false);
/// Reads one block of either kind. Malformed text throws FormatError naming the line.
DenseTensor read_tensor(std::istream& in);

/// Concatenated blocks; an empty stream is an empty list.
void write_tensor_list(std::ostream& out, const std::vector<DenseTensor>& ts, bool binary = false);
std::vector<DenseTensor> read_tensor_list(std::istream& in);

/// Section file: "CPTENSOR1", "rank R", "covariate_modes Q",
/// "response_modes P", then "weights", "covariate q" and "response p"
/// headers each followed by one text tensor block.
void write_cp(std::ostream& out, const CpTensor& c);
CpTensor read_cp(std::istream& in);

void save_tensor(const std::filesystem::path& path, const DenseTensor& t, bool binary = false);
DenseTensor load_tensor(const std::filesystem::path& path);
void save_tensor_list(const std::filesystem::path& path, const std::vector<DenseTensor>& ts, bool binary = false);
std::vector<DenseTensor> load_tensor_list(const std::filesystem::path& path);
void save_cp(const std::filesystem::path& path, const CpTensor& c);
CpTensor load_cp(const std::filesystem::path& path);

/// Shortest round-trip decimal, independent of the locale.
std::string format_double(double v);

/// Comma-separated rows with a header; fields are never quoted, so they must
/// not contain commas or newlines.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, const std::vector<std::string>& header);

  template <class... Cells>
  void row(const Cells&... cells) {
    std::vector<std::string> fields{to_field(cells)...};
    write_fields(fields);
  }

  static std::string to_field(const std::string& s) { return s; }
  static std::string to_field(const char* s) { return s; }
  static std::string to_field(double v) { return format_double(v); }
  static std::string to_field(bool v) { return v ? "true" : "false"; }
  template <class I>
    requires std::is_integral_v<I>
  static std::string to_field(I v) {
    return std::to_string(v);
  }

 private:
  void write_fields(const std::vector<std::string>& fields);
  std::ostream& out_;
  std::size_t columns_;
};

/// Flat "key = value" file. '#' starts a comment; blank lines are ignored.
/// Keys outside `allowed` and repeated keys are rejected with the line number.
class RunConfig {
 public:
  RunConfig() = default;
  static RunConfig parse(std::istream& in, const std::set<std::string>& allowed);
  static RunConfig load(const std::filesystem::path& path, const std::set<std::string>& allowed);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  const std::map<std::string, std::string>& entries() const noexcept { return values_; }

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, std::size_t> lines_;
};

double parse_double(std::string_view s);
std::uint64_t parse_uint(std::string_view s);
/// Comma-separated unsigned integers, e.g. "2,4,6".
std::vector<std::size_t> parse_size_list(std::string_view s);
std::vector<double> parse_double_list(std::string_view s);

}  // namespace ptotr
