#include "dialogkit/pack.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "dialogkit/util.hpp"

namespace dialogkit {

double PackStats::pad_fraction(int max_enc_len, int max_dec_len) const {
  if (samples == 0) return 0.0;
  const double cells =
      static_cast<double>(samples) * static_cast<double>(max_enc_len + max_dec_len);
  return static_cast<double>(enc_pad + dec_pad) / cells;
}

nlohmann::json PackStats::to_json(int max_enc_len, int max_dec_len) const {
  nlohmann::json j;
  j["samples"] = samples;
  j["pairs_in"] = pairs_in;
  j["pairs_packed"] = pairs_packed;
  j["rejected_pairs"] = rejected;
  j["pad_fraction"] = pad_fraction(max_enc_len, max_dec_len);
  j["max_enc_len"] = max_enc_len;
  j["max_dec_len"] = max_dec_len;
  return j;
}

Packer::Packer(int max_enc_len, int max_dec_len, int pad_id)
    : max_enc_len_(max_enc_len), max_dec_len_(max_dec_len), pad_id_(pad_id) {
  if (max_enc_len < 1 || max_dec_len < 1) throw ConfigError("pack lengths must be >= 1");
}

PackedSample Packer::finish() {
  PackedSample s = std::move(current_);
  stats_.enc_pad += static_cast<uint64_t>(max_enc_len_) - s.enc_ids.size();
  stats_.dec_pad += static_cast<uint64_t>(max_dec_len_) - s.dec_ids.size();
  s.enc_ids.resize(static_cast<std::size_t>(max_enc_len_), pad_id_);
  s.dec_ids.resize(static_cast<std::size_t>(max_dec_len_), pad_id_);
  s.enc_seg.resize(static_cast<std::size_t>(max_enc_len_), 0);
  s.dec_seg.resize(static_cast<std::size_t>(max_dec_len_), 0);
  current_ = PackedSample{};
  ++stats_.samples;
  return s;
}

std::optional<PackedSample> Packer::add(const ContextResponsePair& pair) {
  ++stats_.pairs_in;
  const std::size_t c = pair.context_ids.size();
  const std::size_t r = pair.response_ids.size();
  if (c == 0 || r == 0 || c > static_cast<std::size_t>(max_enc_len_) ||
      r > static_cast<std::size_t>(max_dec_len_)) {
    ++stats_.rejected;
    return std::nullopt;
  }

  std::optional<PackedSample> flushed;
  if (current_.k > 0 && (current_.enc_ids.size() + c > static_cast<std::size_t>(max_enc_len_) ||
                         current_.dec_ids.size() + r > static_cast<std::size_t>(max_dec_len_))) {
    flushed = finish();
  }

  const int seg = ++current_.k;
  current_.enc_ids.insert(current_.enc_ids.end(), pair.context_ids.begin(),
                          pair.context_ids.end());
  current_.enc_seg.insert(current_.enc_seg.end(), c, seg);
  current_.dec_ids.insert(current_.dec_ids.end(), pair.response_ids.begin(),
                          pair.response_ids.end());
  current_.dec_seg.insert(current_.dec_seg.end(), r, seg);
  ++stats_.pairs_packed;
  return flushed;
}

std::optional<PackedSample> Packer::flush() {
  if (current_.k == 0) return std::nullopt;
  return finish();
}

std::vector<PackedSample> pack(const std::vector<ContextResponsePair>& pairs,
                               int max_enc_len, int max_dec_len, PackStats* stats) {
  Packer packer(max_enc_len, max_dec_len);
  std::vector<PackedSample> out;
  for (const auto& p : pairs) {
    if (auto s = packer.add(p)) out.push_back(std::move(*s));
  }
  if (auto s = packer.flush()) out.push_back(std::move(*s));
  if (stats) *stats = packer.stats();
  return out;
}

namespace {

inline int seg_at(const std::vector<int32_t>& seg, int i) {
  if (i < 0 || static_cast<std::size_t>(i) >= seg.size()) return 0;
  return seg[static_cast<std::size_t>(i)];
}

}  // namespace

bool enc_self_mask(const PackedSample& s, int i, int j) {
  const int a = seg_at(s.enc_seg, i);
  return a != 0 && a == seg_at(s.enc_seg, j);
}

bool dec_self_mask(const PackedSample& s, int i, int j) {
  const int a = seg_at(s.dec_seg, i);
  return a != 0 && a == seg_at(s.dec_seg, j) && j <= i;
}

bool cross_mask(const PackedSample& s, int i_dec, int j_enc) {
  const int a = seg_at(s.dec_seg, i_dec);
  return a != 0 && a == seg_at(s.enc_seg, j_enc);
}

int relative_bucket(int i, int j, bool bidirectional, int num_buckets, int max_distance) {
  int offset = j - i;
  int bucket = 0;
  int n = num_buckets;
  if (bidirectional) {
    n /= 2;
    if (offset > 0) bucket += n;
    offset = std::abs(offset);
  } else {
    offset = offset < 0 ? -offset : 0;
  }
  const int max_exact = n / 2;
  if (offset < max_exact) return bucket + offset;
  const double v = std::log(static_cast<double>(offset) / max_exact) /
                   std::log(static_cast<double>(max_distance) / max_exact) *
                   (n - max_exact);
  const int large = max_exact + static_cast<int>(v);
  return bucket + std::min(large, n - 1);
}

namespace {

constexpr char kMagic[4] = {'P', 'K', 'S', 'M'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& buf, uint32_t v) {
  buf.push_back(static_cast<char>(v & 0xFF));
  buf.push_back(static_cast<char>((v >> 8) & 0xFF));
  buf.push_back(static_cast<char>((v >> 16) & 0xFF));
  buf.push_back(static_cast<char>((v >> 24) & 0xFF));
}

uint32_t get_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

void put_i32_array(std::string& buf, const std::vector<int32_t>& v) {
  for (int32_t x : v) put_u32(buf, static_cast<uint32_t>(x));
}

}  // namespace

struct PackedWriter::Impl {
  std::ofstream out;
  std::string path;
  int max_enc_len = 0;
  int max_dec_len = 0;
};

PackedWriter::PackedWriter(const std::string& path, int max_enc_len, int max_dec_len)
    : impl_(std::make_unique<Impl>()) {
  impl_->path = path;
  impl_->max_enc_len = max_enc_len;
  impl_->max_dec_len = max_dec_len;
  impl_->out.open(path, std::ios::binary);
  if (!impl_->out) throw DataError(path + ": cannot open for writing");
  std::string header(kMagic, 4);
  put_u32(header, kVersion);
  put_u32(header, static_cast<uint32_t>(max_enc_len));
  put_u32(header, static_cast<uint32_t>(max_dec_len));
  impl_->out.write(header.data(), static_cast<std::streamsize>(header.size()));
}

PackedWriter::~PackedWriter() = default;

void PackedWriter::write(const PackedSample& s) {
  if (s.enc_ids.size() != static_cast<std::size_t>(impl_->max_enc_len) ||
      s.dec_ids.size() != static_cast<std::size_t>(impl_->max_dec_len))
    throw DataError("sample length does not match writer header");
  std::string payload;
  payload.reserve(4u + 16u * s.enc_ids.size());
  put_u32(payload, static_cast<uint32_t>(s.k));
  put_i32_array(payload, s.enc_ids);
  put_i32_array(payload, s.dec_ids);
  put_i32_array(payload, s.enc_seg);
  put_i32_array(payload, s.dec_seg);
  std::string record;
  put_u32(record, static_cast<uint32_t>(payload.size()));
  record += payload;
  impl_->out.write(record.data(), static_cast<std::streamsize>(record.size()));
  if (!impl_->out) throw DataError(impl_->path + ": write failed");
}

void PackedWriter::close() {
  impl_->out.close();
  if (impl_->out.fail()) throw DataError(impl_->path + ": close failed");
}

struct PackedReader::Impl {
  std::ifstream in;
  std::string path;
  int max_enc_len = 0;
  int max_dec_len = 0;
};

PackedReader::PackedReader(const std::string& path) : impl_(std::make_unique<Impl>()) {
  impl_->path = path;
  impl_->in.open(path, std::ios::binary);
  if (!impl_->in) throw DataError(path + ": cannot open for reading");
  unsigned char header[16];
  impl_->in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (impl_->in.gcount() != sizeof(header) || std::memcmp(header, kMagic, 4) != 0)
    throw DataError(path + ": not a packed sample file");
  if (get_u32(header + 4) != kVersion)
    throw DataError(path + ": unsupported version " + std::to_string(get_u32(header + 4)));
  impl_->max_enc_len = static_cast<int>(get_u32(header + 8));
  impl_->max_dec_len = static_cast<int>(get_u32(header + 12));
}

PackedReader::~PackedReader() = default;

int PackedReader::max_enc_len() const { return impl_->max_enc_len; }
int PackedReader::max_dec_len() const { return impl_->max_dec_len; }

bool PackedReader::next(PackedSample& s) {
  unsigned char lenbuf[4];
  impl_->in.read(reinterpret_cast<char*>(lenbuf), 4);
  if (impl_->in.gcount() == 0) return false;
  if (impl_->in.gcount() != 4) throw DataError(impl_->path + ": truncated record length");
  const uint32_t len = get_u32(lenbuf);
  std::vector<unsigned char> payload(len);
  impl_->in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(len));
  if (impl_->in.gcount() != static_cast<std::streamsize>(len))
    throw DataError(impl_->path + ": truncated record");
  const std::size_t want = 4u + 4u * 2u * static_cast<std::size_t>(impl_->max_enc_len) +
                           4u * 2u * static_cast<std::size_t>(impl_->max_dec_len);
  if (len != want) throw DataError(impl_->path + ": record size mismatch");

  const unsigned char* p = payload.data();
  s.k = static_cast<int>(get_u32(p));
  p += 4;
  auto read_arr = [&p](std::vector<int32_t>& v, int n) {
    v.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      v[static_cast<std::size_t>(i)] = static_cast<int32_t>(get_u32(p));
      p += 4;
    }
  };
  read_arr(s.enc_ids, impl_->max_enc_len);
  read_arr(s.dec_ids, impl_->max_dec_len);
  read_arr(s.enc_seg, impl_->max_enc_len);
  read_arr(s.dec_seg, impl_->max_dec_len);
  return true;
}

nlohmann::json packed_sample_to_json(const PackedSample& s) {
  nlohmann::json j;
  j["k"] = s.k;
  j["enc_ids"] = s.enc_ids;
  j["dec_ids"] = s.dec_ids;
  j["enc_seg"] = s.enc_seg;
  j["dec_seg"] = s.dec_seg;
  return j;
}

}  // namespace dialogkit
