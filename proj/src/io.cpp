#include "ptotr/io.hpp"

#include "ptotr/errors.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace ptotr {

namespace {

constexpr std::string_view kTextMagic = "DTNS1";
constexpr std::string_view kBinaryMagic = "DTNSB1";
constexpr std::string_view kCpMagic = "CPTENSOR1";
constexpr std::string_view kLayout = "colmajor";

// Whitespace-separated tokens with the line each came from.
class Tokens {
 public:
  explicit Tokens(std::istream& in) : in_(in) {}

  bool next(std::string& tok) {
    while (pos_ >= words_.size()) {
      std::string text;
      if (!std::getline(in_, text)) return false;
      ++line_;
      words_.clear();
      pos_ = 0;
      std::istringstream ss(text);
      for (std::string w; ss >> w;) words_.push_back(w);
    }
    tok = words_[pos_++];
    return true;
  }

  std::string expect(std::string_view what) {
    std::string tok;
    if (!next(tok)) throw FormatError("unexpected end of file, expected " + std::string(what), line_ + 1);
    return tok;
  }

  /// Remaining tokens on the current line are an error.
  void end_of_line() {
    if (pos_ < words_.size()) throw FormatError("unexpected token '" + words_[pos_] + "'", line_);
  }

  bool at_end() {
    while (pos_ >= words_.size()) {
      if (in_.peek() == std::char_traits<char>::eof()) return true;
      std::string tok;
      if (!next(tok)) return true;
      --pos_;
    }
    return false;
  }

  std::size_t line() const noexcept { return line_; }

 private:
  std::istream& in_;
  std::vector<std::string> words_;
  std::size_t pos_ = 0;
  std::size_t line_ = 0;
};

std::size_t parse_extent(const std::string& tok, const Tokens& t) {
  std::size_t v = 0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw FormatError("expected a non-negative integer, got '" + tok + "'", t.line());
  }
  return v;
}

DenseTensor read_text_block(Tokens& t) {
  const std::string magic = t.expect("DTNS1");
  if (magic != kTextMagic) throw FormatError("expected DTNS1, got '" + magic + "'", t.line());
  t.end_of_line();
  const std::size_t order = parse_extent(t.expect("order"), t);
  if (order == 0) throw FormatError("tensor order must be >= 1", t.line());
  t.end_of_line();
  Dims dims;
  for (std::size_t k = 0; k < order; ++k) {
    dims.push_back(parse_extent(t.expect("extent"), t));
    if (dims.back() == 0) throw FormatError("tensor extents must be >= 1", t.line());
  }
  t.end_of_line();
  const std::string layout = t.expect("layout tag");
  if (layout != kLayout) throw FormatError("unsupported layout '" + layout + "'", t.line());
  t.end_of_line();
  std::vector<double> values(num_elements(dims));
  for (double& v : values) {
    const std::string tok = t.expect("a tensor value");
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
      throw FormatError("malformed value '" + tok + "'", t.line());
    }
  }
  t.end_of_line();
  return DenseTensor(std::move(dims), std::move(values));
}

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> b{};
  for (std::size_t k = 0; k < 8; ++k) b[k] = static_cast<char>((v >> (8 * k)) & 0xffU);
  out.write(b.data(), 8);
}

std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 8)) throw FormatError("truncated binary tensor", 1);
  std::uint64_t v = 0;
  for (std::size_t k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(b[k]) << (8 * k);
  return v;
}

DenseTensor read_binary_block(std::istream& in) {
  std::string magic;
  if (!std::getline(in, magic) || magic != kBinaryMagic) throw FormatError("expected DTNSB1", 1);
  const std::uint64_t order = get_u64(in);
  if (order == 0 || order > 64) throw FormatError("binary tensor order out of range", 1);
  Dims dims;
  for (std::uint64_t k = 0; k < order; ++k) {
    dims.push_back(static_cast<std::size_t>(get_u64(in)));
    if (dims.back() == 0) throw FormatError("binary tensor extents must be >= 1", 1);
  }
  std::vector<double> values(num_elements(dims));
  for (double& v : values) v = std::bit_cast<double>(get_u64(in));
  return DenseTensor(std::move(dims), std::move(values));
}

bool starts_binary(std::istream& in) {
  const auto pos = in.tellg();
  std::array<char, 6> head{};
  in.read(head.data(), 6);
  const bool binary = in.gcount() == 6 && std::string_view(head.data(), 6) == kBinaryMagic;
  in.clear();
  in.seekg(pos);
  return binary;
}

void write_text_block(std::ostream& out, const DenseTensor& t) {
  out << kTextMagic << '\n' << t.order() << '\n';
  for (std::size_t k = 0; k < t.order(); ++k) out << (k ? " " : "") << t.dims()[k];
  out << '\n' << kLayout << '\n';
  for (double v : t.values()) out << format_double(v) << '\n';
}

template <class T>
void write_file(const std::filesystem::path& path, const T& body, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  body(out);
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return in;
}

}  // namespace

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

void write_tensor(std::ostream& out, const DenseTensor& t, bool binary) {
  if (!binary) {
    write_text_block(out, t);
    return;
  }
  out << kBinaryMagic << '\n';
  put_u64(out, t.order());
  for (std::size_t d : t.dims()) put_u64(out, d);
  for (double v : t.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
}

DenseTensor read_tensor(std::istream& in) {
  if (starts_binary(in)) return read_binary_block(in);
  Tokens t(in);
  DenseTensor out = read_text_block(t);
  if (!t.at_end()) throw FormatError("trailing content after the tensor block", t.line() + 1);
  return out;
}

void write_tensor_list(std::ostream& out, const std::vector<DenseTensor>& ts, bool binary) {
  for (const auto& t : ts) write_tensor(out, t, binary);
}

std::vector<DenseTensor> read_tensor_list(std::istream& in) {
  std::vector<DenseTensor> out;
  if (starts_binary(in)) {
    while (in.peek() != std::char_traits<char>::eof()) out.push_back(read_binary_block(in));
    return out;
  }
  Tokens t(in);
  while (!t.at_end()) out.push_back(read_text_block(t));
  return out;
}

void write_cp(std::ostream& out, const CpTensor& c) {
  c.validate();
  out << kCpMagic << '\n'
      << "rank " << c.rank() << '\n'
      << "covariate_modes " << c.covariate_factors.size() << '\n'
      << "response_modes " << c.response_factors.size() << '\n';
  out << "weights\n";
  write_text_block(out, DenseTensor({c.rank()}, std::vector<double>(c.weights.data(), c.weights.data() + c.weights.size())));
  auto factor = [&](const char* name, std::size_t k, const Matrix& m) {
    out << name << ' ' << k << '\n';
    write_text_block(out, DenseTensor({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())},
                                      std::vector<double>(m.data(), m.data() + m.size())));
  };
  for (std::size_t q = 0; q < c.covariate_factors.size(); ++q) factor("covariate", q + 1, c.covariate_factors[q]);
  for (std::size_t p = 0; p < c.response_factors.size(); ++p) factor("response", p + 1, c.response_factors[p]);
}

CpTensor read_cp(std::istream& in) {
  Tokens t(in);
  if (t.expect("CPTENSOR1") != kCpMagic) throw FormatError("expected CPTENSOR1", t.line());
  t.end_of_line();
  auto keyed = [&](std::string_view key) {
    const std::string k = t.expect(key);
    if (k != key) throw FormatError("expected '" + std::string(key) + "', got '" + k + "'", t.line());
    const std::size_t v = parse_extent(t.expect(key), t);
    t.end_of_line();
    return v;
  };
  const std::size_t rank = keyed("rank");
  const std::size_t nq = keyed("covariate_modes");
  const std::size_t np = keyed("response_modes");
  auto section = [&](std::string_view name, std::size_t index) {
    const std::string k = t.expect(name);
    if (k != name) throw FormatError("expected section '" + std::string(name) + "', got '" + k + "'", t.line());
    if (index > 0 && parse_extent(t.expect("section index"), t) != index) {
      throw FormatError("section index out of order", t.line());
    }
    t.end_of_line();
    const std::size_t header_line = t.line();
    DenseTensor block = read_text_block(t);
    const bool ok = index == 0 ? (block.order() == 1 && block.dims()[0] == rank)
                               : (block.order() == 2 && block.dims()[1] == rank);
    if (!ok) throw FormatError("section '" + std::string(name) + "' has the wrong shape", header_line);
    return block;
  };
  CpTensor c;
  const DenseTensor w = section("weights", 0);
  c.weights = w.vec();
  auto to_matrix = [](const DenseTensor& b) {
    return Matrix(Eigen::Map<const Matrix>(b.values().data(), static_cast<Eigen::Index>(b.dims()[0]),
                                           static_cast<Eigen::Index>(b.dims()[1])));
  };
  for (std::size_t q = 1; q <= nq; ++q) c.covariate_factors.push_back(to_matrix(section("covariate", q)));
  for (std::size_t p = 1; p <= np; ++p) c.response_factors.push_back(to_matrix(section("response", p)));
  if (!t.at_end()) throw FormatError("trailing content after the last section", t.line() + 1);
  try {
    c.validate();
  } catch (const Error& e) {
    throw FormatError(std::string("invalid CP tensor: ") + e.what(), t.line());
  }
  return c;
}

void save_tensor(const std::filesystem::path& path, const DenseTensor& t, bool binary) {
  write_file(path, [&](std::ostream& out) { write_tensor(out, t, binary); }, binary);
}

DenseTensor load_tensor(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_tensor(in);
}

void save_tensor_list(const std::filesystem::path& path, const std::vector<DenseTensor>& ts, bool binary) {
  write_file(path, [&](std::ostream& out) { write_tensor_list(out, ts, binary); }, binary);
}

std::vector<DenseTensor> load_tensor_list(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_tensor_list(in);
}

void save_cp(const std::filesystem::path& path, const CpTensor& c) {
  write_file(path, [&](std::ostream& out) { write_cp(out, c); }, false);
}

CpTensor load_cp(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_cp(in);
}

CsvWriter::CsvWriter(std::ostream& out, const std::vector<std::string>& header) : out_(out), columns_(header.size()) {
  write_fields(header);
}

void CsvWriter::write_fields(const std::vector<std::string>& fields) {
  if (fields.size() != columns_) throw InvalidArgument("CSV row has the wrong number of fields");
  for (std::size_t k = 0; k < fields.size(); ++k) {
    if (fields[k].find_first_of(",\n\r") != std::string::npos) throw InvalidArgument("CSV field contains a separator");
    out_ << (k ? "," : "") << fields[k];
  }
  out_ << '\n';
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

RunConfig RunConfig::parse(std::istream& in, const std::set<std::string>& allowed) {
  RunConfig cfg;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    const auto hash = text.find('#');
    const std::string body = trim(std::string_view(text).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw FormatError("expected 'key = value'", line);
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw FormatError("empty key", line);
    if (!allowed.count(key)) throw FormatError("unknown key '" + key + "'", line);
    if (cfg.values_.count(key)) throw FormatError("key '" + key + "' repeated", line);
    cfg.values_[key] = value;
    cfg.lines_[key] = line;
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path, const std::set<std::string>& allowed) {
  auto in = open_in(path);
  return parse(in, allowed);
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw InvalidArgument("config key '" + key + "' is not set");
  return it->second;
}

double RunConfig::get_double(const std::string& key) const {
  try {
    return parse_double(get(key));
  } catch (const InvalidArgument& e) {
    throw FormatError(e.what(), lines_.at(key));
  }
}

std::uint64_t RunConfig::get_uint(const std::string& key) const {
  try {
    return parse_uint(get(key));
  } catch (const InvalidArgument& e) {
    throw FormatError(e.what(), lines_.at(key));
  }
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw FormatError("expected true or false for '" + key + "'", lines_.at(key));
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw InvalidArgument("expected a number, got '" + std::string(s) + "'");
  }
  return v;
}

std::uint64_t parse_uint(std::string_view s) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw InvalidArgument("expected a non-negative integer, got '" + std::string(s) + "'");
  }
  return v;
}

namespace {

template <class F>
auto parse_list(std::string_view s, F&& one) {
  std::vector<decltype(one(s))> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto end = comma == std::string_view::npos ? s.size() : comma;
    out.push_back(one(trim(s.substr(start, end - start))));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

std::vector<std::size_t> parse_size_list(std::string_view s) {
  return parse_list(s, [](std::string_view v) { return static_cast<std::size_t>(parse_uint(v)); });
}

std::vector<double> parse_double_list(std::string_view s) {
  return parse_list(s, [](std::string_view v) { return parse_double(v); });
}

}  // namespace ptotr
