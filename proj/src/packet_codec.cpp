#include "ncsmpc/packet_codec.hpp"

#include <bit>
#include <cstring>
#include <string>

namespace ncsmpc {
namespace {

enum : std::uint8_t { kControl = 1, kMeasurement = 2 };

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void vec(const Vec& v) {
    u32(static_cast<std::uint32_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v(i));
  }
  void mat(const Mat& m) {
    u32(static_cast<std::uint32_t>(m.rows()));
    u32(static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) f64(m(i, j));
    }
  }

  std::vector<std::uint8_t> frame(std::uint8_t kind) const {
    std::vector<std::uint8_t> f;
    const auto len = static_cast<std::uint32_t>(out_.size() + 2);
    for (int i = 0; i < 4; ++i) f.push_back(static_cast<std::uint8_t>(len >> (8 * i)));
    f.push_back(kWireVersion);
    f.push_back(kind);
    f.insert(f.end(), out_.begin(), out_.end());
    return f;
  }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& buf, std::size_t pos, std::size_t end)
      : buf_(buf), pos_(pos), end_(end) {}

  std::uint8_t u8() {
    need(1);
    return buf_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf_[pos_++]) << (8 * i);
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  Vec vec() {
    const std::uint32_t n = u32();
    need(std::size_t{8} * n);
    Vec v(n);
    for (std::uint32_t i = 0; i < n; ++i) v(i) = f64();
    return v;
  }
  Mat mat() {
    const std::uint32_t r = u32();
    const std::uint32_t c = u32();
    need(std::size_t{8} * r * c);
    Mat m(r, c);
    for (std::uint32_t i = 0; i < r; ++i) {
      for (std::uint32_t j = 0; j < c; ++j) m(i, j) = f64();
    }
    return m;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t k) const {
    if (end_ - pos_ < k) throw CodecError("truncated packet");
  }
  const std::vector<std::uint8_t>& buf_;
  std::size_t pos_;
  std::size_t end_;
};

Reader open_frame(const std::vector<std::uint8_t>& buf, std::size_t& offset, std::uint8_t kind) {
  Reader header(buf, offset, buf.size());
  const std::uint32_t len = header.u32();
  if (len < 2 || buf.size() - header.pos() < len) throw CodecError("truncated frame");
  const std::size_t end = header.pos() + len;
  Reader r(buf, header.pos(), end);
  const std::uint8_t version = r.u8();
  if (version != kWireVersion) {
    throw CodecError("unsupported wire version " + std::to_string(version));
  }
  if (r.u8() != kind) throw CodecError("unexpected packet kind");
  offset = end;
  return r;
}

}  // namespace

std::vector<std::uint8_t> encode(const ControlPacket& p) {
  Writer w;
  w.u64(p.id);
  w.i64(p.t_pd);
  w.u64(p.i_c_last);
  w.u8(p.err_marker ? 1 : 0);
  w.u64(p.err_marker.value_or(0));
  w.i64(p.source_time);
  w.u32(static_cast<std::uint32_t>(p.X.size()));
  for (const Vec& x : p.X) w.vec(x);
  w.u32(static_cast<std::uint32_t>(p.V.size()));
  for (const Vec& v : p.V) w.vec(v);
  w.u32(static_cast<std::uint32_t>(p.gains.size()));
  for (const Mat& k : p.gains) w.mat(k);
  return w.frame(kControl);
}

std::vector<std::uint8_t> encode(const MeasurementPacket& p) {
  Writer w;
  w.i64(p.t_p);
  w.u64(p.i_p_last);
  w.vec(p.x);
  return w.frame(kMeasurement);
}

ControlPacket decode_control(const std::vector<std::uint8_t>& buf, std::size_t& offset) {
  std::size_t pos = offset;
  Reader r = open_frame(buf, pos, kControl);
  ControlPacket p;
  p.id = r.u64();
  p.t_pd = r.i64();
  p.i_c_last = r.u64();
  const bool has_marker = r.u8() != 0;
  const std::uint64_t marker = r.u64();
  if (has_marker) p.err_marker = marker;
  p.source_time = r.i64();
  for (std::uint32_t k = r.u32(); k > 0; --k) p.X.push_back(r.vec());
  for (std::uint32_t k = r.u32(); k > 0; --k) p.V.push_back(r.vec());
  for (std::uint32_t k = r.u32(); k > 0; --k) p.gains.push_back(r.mat());
  offset = pos;
  return p;
}

MeasurementPacket decode_measurement(const std::vector<std::uint8_t>& buf, std::size_t& offset) {
  std::size_t pos = offset;
  Reader r = open_frame(buf, pos, kMeasurement);
  MeasurementPacket p;
  p.t_p = r.i64();
  p.i_p_last = r.u64();
  p.x = r.vec();
  offset = pos;
  return p;
}

}  // namespace ncsmpc
