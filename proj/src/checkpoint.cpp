#include <map>

#include "xlmimo/binary_io.hpp"
#include "xlmimo/gnn_prior.hpp"

namespace xlmimo {

namespace {
constexpr std::uint32_t kCheckpointVersion = 1;
}

void save_checkpoint(const GnnParams& params, const std::string& path) {
  binio::Writer w(path);
  w.bytes("GNNP");
  w.put<std::uint32_t>(kCheckpointVersion);
  std::uint32_t count = 0;
  params.for_each([&](const std::string&, const RealMatrix&) { ++count; });
  w.put<std::uint32_t>(count);
  params.for_each([&](const std::string& name, const RealMatrix& m) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.bytes(name);
    w.put<std::uint32_t>(2);
    w.put<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
    w.put<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) w.put<double>(m(r, c));
    }
  });
  w.finish();
}

GnnParams load_checkpoint(const std::string& path) {
  binio::Reader r(path);
  r.expect_magic("GNNP");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::Format, "unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = r.get<std::uint32_t>();
  std::map<std::string, RealMatrix> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.get<std::uint32_t>();
    if (len > 256) throw Error(ErrorKind::Format, "tensor name too long");
    std::string name = r.bytes(len);
    const auto rank = r.get<std::uint32_t>();
    if (rank != 2) throw Error(ErrorKind::Format, "tensor '" + name + "' has rank " + std::to_string(rank));
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    if (rows > (1u << 20) || cols > (1u << 20)) throw Error(ErrorKind::Format, "tensor '" + name + "' too large");
    RealMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index a = 0; a < m.rows(); ++a) {
      for (Eigen::Index b = 0; b < m.cols(); ++b) m(a, b) = r.get<double>();
    }
    tensors.emplace(std::move(name), std::move(m));
  }

  const auto& in_w = tensors.find("in.w");
  const auto& rd2 = tensors.find("read2.w");
  if (in_w == tensors.end() || rd2 == tensors.end()) throw Error(ErrorKind::Format, "checkpoint lacks core tensors");
  GnnDims dims{in_w->second.rows(), rd2->second.cols(), rd2->second.rows()};
  GnnParams p = GnnParams::zeros(dims);
  p.for_each([&](const std::string& name, RealMatrix& m) {
    const auto it = tensors.find(name);
    if (it == tensors.end()) throw Error(ErrorKind::Format, "checkpoint lacks tensor '" + name + "'");
    if (it->second.rows() != m.rows() || it->second.cols() != m.cols()) {
      throw Error(ErrorKind::Format, "tensor '" + name + "' has the wrong shape");
    }
    m = it->second;
  });
  if (!p.all_finite()) throw Error(ErrorKind::Format, "checkpoint contains non-finite values");
  return p;
}

}  // namespace xlmimo
