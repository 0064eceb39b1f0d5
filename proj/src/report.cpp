#include "spdcal/report.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <memory>

#include "spdcal/keyvalue.hpp"

namespace spdcal {

namespace {

std::string hex(const unsigned char* p, unsigned n) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  for (unsigned i = 0; i < n; ++i) {
    s += digits[p[i] >> 4];
    s += digits[p[i] & 15];
  }
  return s;
}

struct CtxFree {
  void operator()(EVP_MD_CTX* c) const { EVP_MD_CTX_free(c); }
};

class Sha256 {
public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) throw Error("SHA-256 init failed");
  }
  void update(const void* data, std::size_t n) {
    if (EVP_DigestUpdate(ctx_.get(), data, n) != 1) throw Error("SHA-256 update failed");
  }
  std::string finish() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned n = 0;
    if (EVP_DigestFinal_ex(ctx_.get(), md, &n) != 1) throw Error("SHA-256 final failed");
    return hex(md, n);
  }

private:
  std::unique_ptr<EVP_MD_CTX, CtxFree> ctx_;
};

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.finish();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "a readable input file");
  Sha256 h;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) h.update(buf, static_cast<std::size_t>(in.gcount()));
  }
  return h.finish();
}

Report::Report(std::string command) {
  set("report.schema", "spdcal-report/1");
  set("report.command", command);
}

void Report::set(const std::string& key, const std::string& value) {
  auto it = std::find_if(lines_.begin(), lines_.end(), [&](const auto& l) { return l.first == key; });
  if (it != lines_.end()) {
    it->second = value;
  } else {
    lines_.emplace_back(key, value);
  }
}

void Report::set(const std::string& key, double value) { set(key, format_double(value)); }

void Report::set(const std::string& key, const Uncertain& x) {
  set(key, x.value());
  set(key + ".u", x.u());
}

void Report::input(const std::string& name, const std::filesystem::path& path) {
  set("input." + name + ".path", path.string());
  set("input." + name + ".sha256", sha256_file(path));
}

void Report::budget(const debudget::Budget& b) {
  char buf[256];
  for (std::size_t i = 0; i < b.lines.size(); ++i) {
    const auto& l = b.lines[i];
    std::snprintf(buf, sizeof buf, "%s | %c | %.4f | %.2f", l.component.c_str(), l.type, 100.0 * l.relative_u,
                  100.0 * l.variance_share);
    char key[32];
    std::snprintf(key, sizeof key, "budget.%02zu", i + 1);
    set(key, buf);
  }
}

void Report::warnings(const Warnings& w) {
  char key[32];
  for (const auto& s : w) {
    std::snprintf(key, sizeof key, "warning.%02zu", ++n_warnings_);
    set(key, s);
  }
}

std::string Report::to_text() const {
  std::string out;
  for (const auto& [k, v] : lines_) out += k + " = " + v + "\n";
  return out;
}

}  // namespace spdcal
