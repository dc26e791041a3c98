#include "vclone/checkpoint.hpp"

#include <boost/crc.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

namespace vclone {

namespace {

constexpr std::string_view kMagic = "VCKP1";

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

void put_string(std::string& out, std::string_view s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, bytes_.data() + pos_, 4);
    pos_ += 4;
    return v;
  }

  std::string string() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }

  void floats(std::vector<float>& out, std::size_t count) {
    need(count * sizeof(float));
    out.resize(count);
    std::memcpy(out.data(), bytes_.data() + pos_, count * sizeof(float));
    pos_ += count * sizeof(float);
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(ErrorCode::io, "checkpoint truncated");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint32_t crc32(std::string_view bytes) {
  boost::crc_32_type crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

std::size_t Tensor::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

Tensor Tensor::scalar(std::string name, double value) {
  return {std::move(name), {}, {static_cast<float>(value)}};
}

Tensor Tensor::from_vector(std::string name, const Vector& v) {
  Tensor t{std::move(name), {static_cast<std::uint32_t>(v.size())}, {}};
  t.data.assign(v.data(), v.data() + v.size());
  return t;
}

Tensor Tensor::from_matrix(std::string name, const Matrix& m) {
  Tensor t{std::move(name),
           {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())},
           {}};
  t.data.resize(static_cast<std::size_t>(m.size()));
  Eigen::Map<Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      t.data.data(), m.rows(), m.cols()) = m.cast<float>();
  return t;
}

double Tensor::to_scalar() const {
  if (!dims.empty() || data.size() != 1) {
    throw Error(ErrorCode::shape_mismatch, "tensor '" + name + "' is not a scalar");
  }
  return data.front();
}

Vector Tensor::to_vector() const {
  if (dims.size() != 1) {
    throw Error(ErrorCode::shape_mismatch, "tensor '" + name + "' is not rank 1");
  }
  return Eigen::Map<const Eigen::VectorXf>(data.data(), dims[0]).cast<double>();
}

Matrix Tensor::to_matrix() const {
  if (dims.size() != 2) {
    throw Error(ErrorCode::shape_mismatch, "tensor '" + name + "' is not rank 2");
  }
  return Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
             data.data(), dims[0], dims[1])
      .cast<double>();
}

void Checkpoint::add(Tensor t) {
  if (contains(t.name)) {
    throw Error(ErrorCode::duplicate_name, "duplicate tensor name '" + t.name + "'");
  }
  if (t.data.size() != t.element_count()) {
    throw Error(ErrorCode::shape_mismatch, "tensor '" + t.name + "' data does not match its dims");
  }
  tensors.push_back(std::move(t));
}

bool Checkpoint::contains(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return true;
  }
  return false;
}

const Tensor& Checkpoint::at(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t;
  }
  throw Error(ErrorCode::invalid_argument,
              "checkpoint of kind '" + kind + "' has no tensor '" + std::string(name) + "'");
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::set<std::string_view> seen;
  std::string out(kMagic);
  put_u32(out, Checkpoint::kVersion);
  put_string(out, ckpt.kind);
  put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    if (!seen.insert(t.name).second) {
      throw Error(ErrorCode::duplicate_name, "duplicate tensor name '" + t.name + "'");
    }
    if (t.data.size() != t.element_count()) {
      throw Error(ErrorCode::shape_mismatch, "tensor '" + t.name + "' data does not match its dims");
    }
    put_string(out, t.name);
    put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) put_u32(out, d);
    out.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * sizeof(float));
  }
  put_u32(out, crc32(out));
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic) {
    throw Error(ErrorCode::bad_magic, "not a checkpoint (bad magic)");
  }
  if (bytes.size() < kMagic.size() + 4) throw Error(ErrorCode::io, "checkpoint truncated");
  const std::string_view body = bytes.substr(0, bytes.size() - 4);
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + body.size(), 4);
  if (crc32(body) != stored) throw Error(ErrorCode::bad_crc, "checkpoint CRC mismatch");

  Reader r(body.substr(kMagic.size()));
  const std::uint32_t version = r.u32();
  if (version != Checkpoint::kVersion) {
    throw Error(ErrorCode::io, "unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.kind = r.string();
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    Tensor t;
    t.name = r.string();
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw Error(ErrorCode::io, "tensor '" + t.name + "' has implausible rank");
    for (std::uint32_t d = 0; d < rank; ++d) t.dims.push_back(r.u32());
    r.floats(t.data, t.element_count());
    ckpt.add(std::move(t));
  }
  if (r.remaining() != 0) throw Error(ErrorCode::io, "trailing bytes after the last tensor");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::io, "short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open checkpoint " + path.string());
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  try {
    return parse_checkpoint(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::string_view expected_kind) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.kind != expected_kind) {
    throw Error(ErrorCode::wrong_kind, path.string() + " holds a '" + ckpt.kind +
                                           "' checkpoint, expected '" + std::string(expected_kind) +
                                           "'");
  }
  return ckpt;
}

}  // namespace vclone
