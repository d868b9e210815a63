#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "auxmat/autodiff.hpp"
#include "auxmat/image_io.hpp"
#include "auxmat/optim.hpp"

namespace auxmat::ad {

std::string shape_string(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

GradCheckResult finite_difference_check(const ScalarFn& fn, const std::vector<Tensor64>& inputs, double eps,
                                        const CoordFilter& include) {
  // Fresh leaves so the caller's tensors are untouched.
  std::vector<Tensor64> leaves;
  for (const auto& in : inputs) {
    leaves.push_back(Tensor64::parameter(in.shape(), std::vector<double>(in.value().begin(), in.value().end())));
  }
  const Tensor64 out = fn(leaves);
  if (out.numel() != 1) throw std::invalid_argument("finite_difference_check: fn must return a scalar");
  out.backward();

  GradCheckResult result;
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    const std::vector<double> analytic(leaves[k].grad().begin(), leaves[k].grad().end());
    for (std::size_t i = 0; i < leaves[k].numel(); ++i) {
      if (include && !include(k, i, leaves)) continue;
      auto value = leaves[k].mutable_value();
      const double saved = value[i];
      value[i] = saved + eps;
      const double up = fn(leaves).item();
      value[i] = saved - eps;
      const double down = fn(leaves).item();
      value[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double rel = std::abs(analytic[i] - numeric) /
                         std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
      result.max_rel_error = std::max(result.max_rel_error, rel);
      ++result.checked;
    }
  }
  return result;
}

namespace {

constexpr char kCheckpointMagic[4] = {'C', 'K', 'P', 'T'};

void put_le(std::string& s, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

class Reader {
 public:
  explicit Reader(const std::string& b) : bytes_(b) {}
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw IoError("checkpoint truncated");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const std::vector<NamedTensor>& entries) {
  std::string out(kCheckpointMagic, 4);
  put_le(out, entries.size(), 4);
  for (const auto& [name, t] : entries) {
    if (name.size() > 0xFFFF) throw std::invalid_argument("checkpoint: name too long");
    put_le(out, name.size(), 2);
    out += name;
    put_le(out, static_cast<std::uint64_t>(t.rank()), 1);
    for (int d : t.shape()) put_le(out, static_cast<std::uint32_t>(d), 4);
    for (float v : t.value()) put_le(out, std::bit_cast<std::uint32_t>(v), 4);
  }
  return out;
}

std::vector<NamedTensor> decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) throw IoError("not a CKPT file");
  Reader r(bytes);
  r.take(4);
  const std::uint64_t count = r.le(4);
  std::vector<NamedTensor> out;
  for (std::uint64_t e = 0; e < count; ++e) {
    const std::size_t len = r.le(2);
    std::string name = r.take(len);
    const int rank = static_cast<int>(r.le(1));
    Shape shape;
    for (int d = 0; d < rank; ++d) shape.push_back(static_cast<int>(r.le(4)));
    std::vector<float> data(numel(shape));
    for (float& v : data) v = std::bit_cast<float>(static_cast<std::uint32_t>(r.le(4)));
    out.emplace_back(std::move(name), Tensor::parameter(std::move(shape), std::move(data)));
  }
  if (!r.done()) throw IoError("checkpoint has trailing bytes");
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& entries) {
  const std::string bytes = encode_checkpoint(entries);
  write_atomically(path, [&](std::ostream& out) { out.write(bytes.data(), static_cast<std::streamsize>(bytes.size())); });
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace auxmat::ad
