#include "haptigrasp/weights.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>

#include "haptigrasp/digest.hpp"
#include "haptigrasp/error.hpp"

namespace hg {

namespace {

constexpr char kMagic[4] = {'H', 'G', 'W', '1'};

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

void put_string(std::string& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out += s;
}

class Reader {
 public:
  Reader(const std::string& bytes, std::size_t end) : bytes_(bytes), end_(end) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string get_string() {
    const auto n = get<std::uint64_t>();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void get_raw(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  bool done() const { return pos_ == end_; }

 private:
  void need(std::uint64_t n) const {
    if (n > end_ - pos_) throw CorruptionError("weight file truncated");
  }

  const std::string& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

}  // namespace

const Eigen::MatrixXd& WeightFile::block(const std::string& name) const {
  for (const auto& b : blocks)
    if (b.name == name) return b.value;
  throw FingerprintError("weight file has no block '" + name + "'");
}

std::string weights_to_bytes(const WeightFile& file) {
  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kWeightFormatVersion);
  put_string(out, file.fingerprint);
  put_string(out, file.metadata);
  put<std::uint64_t>(out, file.blocks.size());
  for (const auto& b : file.blocks) {
    put_string(out, b.name);
    put<std::int64_t>(out, b.value.rows());
    put<std::int64_t>(out, b.value.cols());
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = b.value;
    out.append(reinterpret_cast<const char*>(rm.data()), sizeof(double) * rm.size());
  }
  Digest d;
  d.update(out);
  put<std::uint64_t>(out, d.value());
  return out;
}

WeightFile weights_from_bytes(const std::string& bytes, const std::string& expected_fingerprint) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw CorruptionError("not a weight file");
  if (bytes.size() < 8) throw CorruptionError("weight file truncated");
  std::uint32_t version;
  std::memcpy(&version, bytes.data() + 4, sizeof version);
  if (version != kWeightFormatVersion)
    throw VersionError("weight file version " + std::to_string(version) + ", expected " +
                       std::to_string(kWeightFormatVersion));
  if (bytes.size() < 8 + sizeof(std::uint64_t)) throw CorruptionError("weight file truncated");
  const std::size_t body = bytes.size() - sizeof(std::uint64_t);
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body, sizeof stored);
  Digest d;
  d.update(bytes.data(), body);
  if (d.value() != stored) throw CorruptionError("weight file checksum mismatch (truncated or modified)");

  Reader r(bytes, body);
  r.get<std::uint32_t>();
  r.get<std::uint32_t>();
  WeightFile f;
  f.fingerprint = r.get_string();
  f.metadata = r.get_string();
  if (!expected_fingerprint.empty() && f.fingerprint != expected_fingerprint)
    throw FingerprintError("weights are for '" + f.fingerprint + "', expected '" + expected_fingerprint + "'");
  const auto n = r.get<std::uint64_t>();
  for (std::uint64_t k = 0; k < n; ++k) {
    WeightBlock b;
    b.name = r.get_string();
    const auto rows = r.get<std::int64_t>();
    const auto cols = r.get<std::int64_t>();
    if (rows < 0 || cols < 0) throw CorruptionError("negative block shape in '" + b.name + "'");
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
    r.get_raw(rm.data(), sizeof(double) * rm.size());
    b.value = rm;
    f.blocks.push_back(std::move(b));
  }
  if (!r.done()) throw CorruptionError("trailing bytes in weight file");
  return f;
}

void save_weights(const std::string& path, const WeightFile& file) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    const std::string bytes = weights_to_bytes(file);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("short write to " + path);
  }
  std::filesystem::rename(tmp, path);
}

WeightFile load_weights(const std::string& path, const std::string& expected_fingerprint) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError(path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return weights_from_bytes(bytes, expected_fingerprint);
}

WeightFile capture(const nn::ParamList<double>& params, std::string fingerprint, std::string metadata) {
  WeightFile f;
  f.fingerprint = std::move(fingerprint);
  f.metadata = std::move(metadata);
  for (const auto& p : params) f.blocks.push_back({p.name, p.value.get()});
  return f;
}

void restore(nn::ParamList<double>& params, const WeightFile& file) {
  std::map<std::string, const Eigen::MatrixXd*> by_name;
  for (const auto& b : file.blocks) by_name[b.name] = &b.value;
  if (by_name.size() != params.size())
    throw FingerprintError("weight file has " + std::to_string(by_name.size()) + " blocks, model has " +
                           std::to_string(params.size()));
  for (const auto& p : params) {
    const auto it = by_name.find(p.name);
    if (it == by_name.end()) throw FingerprintError("weight file lacks block '" + p.name + "'");
    if (it->second->rows() != p.value.get().rows() || it->second->cols() != p.value.get().cols())
      throw FingerprintError("block '" + p.name + "' has shape " + std::to_string(it->second->rows()) + "x" +
                             std::to_string(it->second->cols()) + ", model expects " +
                             nn::shape_string(p.value.get()));
  }
  for (auto& p : params) p.value.get() = *by_name.at(p.name);
}

}  // namespace hg
