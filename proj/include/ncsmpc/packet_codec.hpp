#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "ncsmpc/protocol.hpp"

namespace ncsmpc {

/// Wire format: u32 payload length, u8 version, u8 kind, then little-endian
/// fields. Doubles are IEEE-754 bit patterns, so a round trip is exact.
inline constexpr std::uint8_t kWireVersion = 1;

class CodecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> encode(const ControlPacket& p);
std::vector<std::uint8_t> encode(const MeasurementPacket& p);

/// Decoders consume one frame starting at `offset` and advance it.
ControlPacket decode_control(const std::vector<std::uint8_t>& buf, std::size_t& offset);
MeasurementPacket decode_measurement(const std::vector<std::uint8_t>& buf, std::size_t& offset);

}  // namespace ncsmpc
