#include "pesao/util/io.hpp"

#include <array>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <openssl/evp.h>
#include <zlib.h>

namespace pesao::util {

std::string fmt17(double v) { return fmt::format("{:.17g}", v); }

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (ctx_ == nullptr || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) {
      throw std::runtime_error("sha256 init failed");
    }
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx_, data, n); }
  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_, md.data(), &len);
    std::string out;
    for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", md[i]);
    return out;
  }

 private:
  EVP_MD_CTX* ctx_;
};

}  // namespace

std::string sha256_bytes(std::string_view bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string() + " for hashing");
  Sha256 h;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> csv_split(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

GzLineWriter::GzLineWriter(const std::filesystem::path& path)
    : file_(gzopen(path.c_str(), "wb")), path_(path) {
  if (file_ == nullptr) throw std::runtime_error("cannot open " + path.string() + " for writing");
}

GzLineWriter::~GzLineWriter() {
  if (file_ != nullptr) gzclose(file_);
}

void GzLineWriter::write_line(std::string_view line) {
  if (file_ == nullptr) throw std::runtime_error("write to closed log " + path_.string());
  if (gzwrite(file_, line.data(), static_cast<unsigned>(line.size())) !=
          static_cast<int>(line.size()) ||
      gzputc(file_, '\n') != '\n') {
    throw std::runtime_error("write failed for " + path_.string());
  }
}

void GzLineWriter::close() {
  if (file_ == nullptr) return;
  const int rc = gzclose(file_);
  file_ = nullptr;
  if (rc != Z_OK) throw std::runtime_error("close failed for " + path_.string());
}

GzLineReader::GzLineReader(const std::filesystem::path& path)
    : file_(gzopen(path.c_str(), "rb")), path_(path) {
  if (file_ == nullptr) throw std::runtime_error("cannot open " + path.string());
}

GzLineReader::~GzLineReader() {
  if (file_ != nullptr) gzclose(file_);
}

std::optional<std::string> GzLineReader::next() {
  std::string line;
  std::array<char, 4096> buf{};
  bool any = false;
  while (gzgets(file_, buf.data(), static_cast<int>(buf.size())) != nullptr) {
    any = true;
    line += buf.data();
    if (!line.empty() && line.back() == '\n') {
      line.pop_back();
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
  }
  int err = Z_OK;
  gzerror(file_, &err);
  if (err != Z_OK && err != Z_BUF_ERROR) {
    throw std::runtime_error("corrupt gzip stream in " + path_.string());
  }
  if (any) return line;
  return std::nullopt;
}

}  // namespace pesao::util
