#ifndef FASTICARL_QUANTIZATION_HPP
#define FASTICARL_QUANTIZATION_HPP

#include <cstdint>
#include <span>
#include <vector>

namespace fasticarl {

/// Affine quantization parameters: real r maps to code q via r = S * (q - Z).
/// For 16- and 32-bit payloads the parameters are the identity (S=1, Z=0);
/// IEEE conversion handles the scaling there.
struct QuantParams {
    float scale = 1.0f;
    std::int32_t zero_point = 0;
    std::uint8_t bits = 32; // one of {32, 16, 8}
};

/// A quantized vector: `length` codes of `params.bits` bits each, stored as
/// little-endian bytes (1, 2 or 4 bytes per code).
struct QuantizedVector {
    QuantParams params;
    std::uint32_t length = 0;
    std::vector<std::uint8_t> payload;

    std::size_t payload_bytes() const { return payload.size(); }
};

/// Fits affine parameters for the 8-bit path: the value range is widened to
/// include 0 so the zero point is exact, S = (max - min) / 255 and
/// Z = round(-min / S) clamped to [0, 255]. A degenerate range (max == min)
/// falls back to S = 1, Z = clamp(round(-min), 0, 255). 16- and 32-bit
/// parameters are the identity.
QuantParams fit_quant_params(std::span<const float> values, int bits);

/// 8-bit: q = clamp(round(r / S) + Z, 0, 255). 16-bit: IEEE binary16 with
/// round-to-nearest-even. 32-bit: bit copy.
QuantizedVector quantize(std::span<const float> values, const QuantParams& params);

/// Inverse map: 8-bit r = S * (q - Z); 16-bit widens; 32-bit bit copy.
std::vector<float> dequantize(const QuantizedVector& qv);

/// IEEE 754 binary16 conversion, round-to-nearest-even.
std::uint16_t float_to_half(float value);
float half_to_float(std::uint16_t half);

/// Storage accounting for one exemplar set, mirroring the snapshot layout.
/// payload is exactly count * dims * bits/8; metadata is the fixed per-class
/// record header (14 bytes) plus the per-exemplar distance floats and, for
/// 8-bit payloads, the per-exemplar affine parameters.
struct StorageBytes {
    std::uint64_t payload = 0;
    std::uint64_t metadata = 0;
    std::uint64_t total() const { return payload + metadata; }
};

/// Fixed bytes of a per-class snapshot record before the scaling parts.
inline constexpr std::uint64_t kClassRecordHeaderBytes = 14;
/// Serialized size of one per-exemplar QuantParams entry (f32 scale + u8 zero point).
inline constexpr std::uint64_t kQuantParamBytes = 5;

StorageBytes storage_bytes(std::uint64_t count, std::uint64_t dims, int bits);

} // namespace fasticarl

#endif
