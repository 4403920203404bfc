#include "colinf/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "colinf/error.hpp"

namespace colinf {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little endian");

namespace {

constexpr char kMagic[8] = {'C', 'O', 'L', 'I', 'N', 'F', 'C', 'K'};

class Writer {
 public:
  explicit Writer(std::ofstream& out) : out_(out) {}
  template <typename T>
  void pod(T v) { out_.write(reinterpret_cast<const char*>(&v), sizeof v); }
  void str(const std::string& s) {
    pod<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void doubles(const double* p, std::size_t n) {
    out_.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
  }
  void matrix(const Matrix& m) {
    pod<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
    pod<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
    doubles(m.data(), static_cast<std::size_t>(m.size()));
  }

 private:
  std::ofstream& out_;
};

class Reader {
 public:
  Reader(std::ifstream& in, std::string path) : in_(in), path_(std::move(path)) {}
  template <typename T>
  T pod() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof v);
    check();
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    if (n > (1u << 20)) throw ParseError(path_ + ": implausible string length");
    std::string s(n, '\0');
    in_.read(s.data(), n);
    check();
    return s;
  }
  Matrix matrix() {
    const auto rows = pod<std::uint64_t>();
    const auto cols = pod<std::uint64_t>();
    if (rows > (1u << 24) || cols > (1u << 24)) throw ParseError(path_ + ": implausible matrix shape");
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    in_.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    check();
    return m;
  }

 private:
  void check() {
    if (!in_) throw ParseError(path_ + ": truncated checkpoint");
  }
  std::ifstream& in_;
  std::string path_;
};

}  // namespace

const DenseParams& Checkpoint::stack(const std::string& name) const {
  for (const auto& [n, p] : stacks)
    if (n == name) return p;
  throw ParseError("checkpoint has no stack named '" + name + "'");
}

const Matrix& Checkpoint::matrix(const std::string& name) const {
  for (const auto& [n, m] : matrices)
    if (n == name) return m;
  throw ParseError("checkpoint has no matrix named '" + name + "'");
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  Writer w(out);
  out.write(kMagic, sizeof kMagic);
  w.pod<std::uint32_t>(Checkpoint::version);
  w.str(ckpt.kind);
  w.pod<std::uint64_t>(ckpt.seed);
  w.pod<std::uint64_t>(ckpt.table.size());
  for (auto v : ckpt.table) w.pod<std::uint64_t>(v);
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(ckpt.stacks.size()));
  for (const auto& [name, params] : ckpt.stacks) {
    w.str(name);
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(params.layers.size()));
    for (const auto& l : params.layers) {
      w.pod<std::uint32_t>(l.activation == Activation::relu ? 1u : 0u);
      w.matrix(l.weight);
      w.matrix(Matrix(l.bias));
    }
  }
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(ckpt.matrices.size()));
  for (const auto& [name, m] : ckpt.matrices) {
    w.str(name);
    w.matrix(m);
  }
  if (!out) throw IoError("failed while writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  Reader r(in, path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw ParseError(path.string() + ": not a checkpoint file");
  const auto version = r.pod<std::uint32_t>();
  if (version != Checkpoint::version)
    throw ParseError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  Checkpoint c;
  c.kind = r.str();
  c.seed = r.pod<std::uint64_t>();
  const auto table_len = r.pod<std::uint64_t>();
  if (table_len > 4096) throw ParseError(path.string() + ": implausible table length");
  for (std::uint64_t i = 0; i < table_len; ++i) c.table.push_back(r.pod<std::uint64_t>());
  const auto n_stacks = r.pod<std::uint32_t>();
  for (std::uint32_t s = 0; s < n_stacks; ++s) {
    std::string name = r.str();
    DenseParams p;
    const auto n_layers = r.pod<std::uint32_t>();
    for (std::uint32_t l = 0; l < n_layers; ++l) {
      DenseLayer layer;
      layer.activation = r.pod<std::uint32_t>() == 1u ? Activation::relu : Activation::identity;
      layer.weight = r.matrix();
      Matrix b = r.matrix();
      if (b.cols() != 1) throw ParseError(path.string() + ": bias is not a column");
      layer.bias = b.col(0);
      p.layers.push_back(std::move(layer));
    }
    p.validate();
    c.stacks.emplace_back(std::move(name), std::move(p));
  }
  const auto n_mats = r.pod<std::uint32_t>();
  for (std::uint32_t m = 0; m < n_mats; ++m) {
    std::string name = r.str();
    c.matrices.emplace_back(std::move(name), r.matrix());
  }
  return c;
}

}  // namespace colinf
