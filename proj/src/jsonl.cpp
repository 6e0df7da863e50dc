#include "dialogkit/jsonl.hpp"

#include <fnmatch.h>
#include <zlib.h>

#include <algorithm>
#include <filesystem>

#include "dialogkit/util.hpp"

namespace dialogkit {

namespace fs = std::filesystem;

struct LineReader::Impl {
  std::string path;
  gzFile file = nullptr;
  std::string buffer;
  std::size_t pos = 0;
  bool eof = false;
  std::size_t lineno = 0;

  bool fill() {
    if (eof) return false;
    char chunk[1 << 16];
    int n = gzread(file, chunk, sizeof(chunk));
    if (n < 0) {
      int errnum = 0;
      const char* msg = gzerror(file, &errnum);
      throw DataError(path + ": read error: " + (msg ? msg : "unknown"));
    }
    if (n == 0) {
      eof = true;
      return false;
    }
    buffer.append(chunk, static_cast<std::size_t>(n));
    return true;
  }
};

LineReader::LineReader(const std::string& path) : impl_(std::make_unique<Impl>()) {
  impl_->path = path;
  impl_->file = gzopen(path.c_str(), "rb");
  if (impl_->file == nullptr) throw DataError(path + ": cannot open for reading");
}

LineReader::~LineReader() {
  if (impl_ && impl_->file != nullptr) gzclose(impl_->file);
}

LineReader::LineReader(LineReader&&) noexcept = default;
LineReader& LineReader::operator=(LineReader&&) noexcept = default;

bool LineReader::next(std::string& line) {
  auto& s = *impl_;
  while (true) {
    auto nl = s.buffer.find('\n', s.pos);
    if (nl != std::string::npos) {
      line.assign(s.buffer, s.pos, nl - s.pos);
      s.pos = nl + 1;
      if (s.pos > (1u << 20)) {  // compact consumed prefix
        s.buffer.erase(0, s.pos);
        s.pos = 0;
      }
      if (!line.empty() && line.back() == '\r') line.pop_back();
      ++s.lineno;
      return true;
    }
    if (!s.fill()) {
      if (s.pos < s.buffer.size()) {  // final line without newline
        line.assign(s.buffer, s.pos, s.buffer.size() - s.pos);
        s.pos = s.buffer.size();
        if (!line.empty() && line.back() == '\r') line.pop_back();
        ++s.lineno;
        return true;
      }
      return false;
    }
  }
}

const std::string& LineReader::path() const { return impl_->path; }
std::size_t LineReader::line_number() const { return impl_->lineno; }

namespace {

bool has_glob_chars(const std::string& s) {
  return s.find_first_of("*?[") != std::string::npos;
}

}  // namespace

std::vector<std::string> glob_paths(const std::vector<std::string>& patterns) {
  std::vector<std::string> out;
  for (const auto& pat : patterns) {
    if (!has_glob_chars(pat)) {
      if (!fs::exists(pat)) throw DataError(pat + ": no such file");
      out.push_back(pat);
      continue;
    }
    fs::path p(pat);
    fs::path dir = p.parent_path();
    if (dir.empty()) dir = ".";
    std::string name = p.filename().string();
    if (!fs::is_directory(dir)) continue;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_regular_file()) continue;
      std::string fname = entry.path().filename().string();
      if (::fnmatch(name.c_str(), fname.c_str(), 0) == 0) {
        out.push_back(entry.path().string());
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

nlohmann::json parse_json_line(const std::string& line, const std::string& path,
                               std::size_t lineno) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded()) {
    throw DataError(path + ":" + std::to_string(lineno) + ": invalid JSON");
  }
  return j;
}

}  // namespace dialogkit
