#include "serlab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include "serlab/errors.hpp"

namespace serlab {
namespace {

constexpr char kMagic[8] = {'S', 'E', 'R', 'L', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::uint8_t kKindReward = 1;
constexpr std::uint8_t kKindPolicy = 2;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

class Reader {
 public:
  Reader(const std::string& data, const std::string& path)
      : data_(data), path_(path) {}

  void bytes(void* dst, std::size_t n) {
    if (pos_ + n > data_.size()) {
      throw FormatError("truncated checkpoint " + path_);
    }
    std::memcpy(dst, data_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint8_t b[4];
    bytes(b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint8_t b[8];
    bytes(b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  std::uint8_t u8() {
    std::uint8_t b = 0;
    bytes(&b, 1);
    return b;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  bool exhausted() const { return pos_ == data_.size(); }

 private:
  const std::string& data_;
  const std::string& path_;
  std::size_t pos_ = 0;
};

void write_file(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !out.write(data.data(), static_cast<std::streamsize>(data.size()))) {
    throw IoError("cannot write " + path);
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return data;
}

void write_manifest(const std::string& path, const char* kind, int d, int h,
                    std::size_t count, std::uint64_t rng_state) {
  std::string text;
  text += "magic = SERLCKPT\n";
  text += "format_version = " + std::to_string(kFormatVersion) + "\n";
  text += std::string("kind = ") + kind + "\n";
  text += "feature_dim = " + std::to_string(d) + "\n";
  text += "hidden = " + std::to_string(h) + "\n";
  text += "weights = " + std::to_string(count) + "\n";
  text += "rng_state = " + std::to_string(rng_state) + "\n";
  write_file(path + ".manifest.txt", text);
}

void check_header(Reader& r, const std::string& path, std::uint8_t want_kind) {
  char magic[8];
  r.bytes(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) {
    throw FormatError("bad checkpoint magic in " + path);
  }
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion) {
    throw FormatError("unsupported checkpoint version " +
                      std::to_string(version) + " in " + path +
                      " (expected " + std::to_string(kFormatVersion) + ")");
  }
  const std::uint8_t kind = r.u8();
  if (kind != want_kind) {
    throw FormatError("checkpoint " + path + " holds kind " +
                      std::to_string(kind) + ", expected " +
                      std::to_string(want_kind));
  }
}

void check_dim(int got, std::optional<int> expect, const std::string& path) {
  if (expect && *expect != got) {
    throw CompatibilityError("checkpoint " + path + " has feature_dim " +
                             std::to_string(got) +
                             " but the current run uses feature_dim " +
                             std::to_string(*expect));
  }
}

}  // namespace

void save_reward_checkpoint(const std::string& path, const RewardNet& net,
                            std::uint64_t rng_state) {
  std::string out;
  out.append(kMagic, 8);
  put_u32(out, kFormatVersion);
  out.push_back(static_cast<char>(kKindReward));
  put_u32(out, static_cast<std::uint32_t>(net.feature_dim()));
  put_u32(out, static_cast<std::uint32_t>(net.hidden()));
  put_u64(out, net.flat().size());
  for (double w : net.flat()) put_f64(out, w);
  put_u64(out, rng_state);
  write_file(path, out);
  write_manifest(path, "reward", net.feature_dim(), net.hidden(),
                 net.flat().size(), rng_state);
}

LoadedReward load_reward_checkpoint(const std::string& path,
                                    std::optional<int> expect_dim) {
  const std::string data = read_file(path);
  Reader r(data, path);
  check_header(r, path, kKindReward);
  const int d = static_cast<int>(r.u32());
  const int h = static_cast<int>(r.u32());
  if (d < 1 || h < 1) throw FormatError("corrupt dimensions in " + path);
  check_dim(d, expect_dim, path);
  const std::uint64_t count = r.u64();
  if (count != RewardNet::weight_count(d, h)) {
    throw FormatError("weight count mismatch in " + path);
  }
  LoadedReward out{RewardNet(d, h), 0};
  for (double& w : out.params.flat()) w = r.f64();
  out.rng_state = r.u64();
  if (!r.exhausted()) throw FormatError("trailing bytes in " + path);
  return out;
}

void save_policy_checkpoint(const std::string& path, const PolicyParams& policy,
                            std::uint64_t rng_state) {
  std::string out;
  out.append(kMagic, 8);
  put_u32(out, kFormatVersion);
  out.push_back(static_cast<char>(kKindPolicy));
  put_u32(out, static_cast<std::uint32_t>(policy.feature_dim));
  put_u32(out, 0);
  put_u64(out, policy.weights.size());
  for (double w : policy.weights) put_f64(out, w);
  put_u64(out, rng_state);
  write_file(path, out);
  write_manifest(path, "policy", policy.feature_dim, 0, policy.weights.size(),
                 rng_state);
}

LoadedPolicy load_policy_checkpoint(const std::string& path,
                                    std::optional<int> expect_dim) {
  const std::string data = read_file(path);
  Reader r(data, path);
  check_header(r, path, kKindPolicy);
  const int d = static_cast<int>(r.u32());
  r.u32();  // unused hidden slot
  if (d < 1) throw FormatError("corrupt dimensions in " + path);
  check_dim(d, expect_dim, path);
  const std::uint64_t count = r.u64();
  if (count != static_cast<std::uint64_t>(2 * d)) {
    throw FormatError("weight count mismatch in " + path);
  }
  LoadedPolicy out{PolicyParams::zeros(d), 0};
  for (double& w : out.params.weights) w = r.f64();
  out.rng_state = r.u64();
  if (!r.exhausted()) throw FormatError("trailing bytes in " + path);
  return out;
}

}  // namespace serlab
