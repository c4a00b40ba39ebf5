#include "fasticarl/quantization.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "fasticarl/contracts.hpp"

namespace fasticarl {

namespace {

void append_le(std::vector<std::uint8_t>& out, std::uint32_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

std::uint32_t read_le(const std::uint8_t* p, int bytes) {
    std::uint32_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

} // namespace

std::uint16_t float_to_half(float value) {
    const std::uint32_t bits = std::bit_cast<std::uint32_t>(value);
    const std::uint32_t sign = (bits >> 16) & 0x8000u;
    const std::uint32_t exp = (bits >> 23) & 0xFFu;
    std::uint32_t mant = bits & 0x7FFFFFu;

    if (exp == 0xFFu) { // inf / NaN
        if (mant == 0) return static_cast<std::uint16_t>(sign | 0x7C00u);
        return static_cast<std::uint16_t>(sign | 0x7C00u | 0x200u | (mant >> 13));
    }

    const int e = static_cast<int>(exp) - 127 + 15;
    if (e >= 0x1F) return static_cast<std::uint16_t>(sign | 0x7C00u); // overflow -> inf
    if (e <= 0) {
        if (e < -10) return static_cast<std::uint16_t>(sign); // underflow -> signed zero
        mant |= 0x800000u;                                    // restore implicit bit
        const std::uint32_t shift = static_cast<std::uint32_t>(14 - e); // 14..24
        std::uint32_t half = mant >> shift;
        const std::uint32_t rem = mant & ((1u << shift) - 1u);
        const std::uint32_t halfway = 1u << (shift - 1);
        if (rem > halfway || (rem == halfway && (half & 1u))) ++half;
        // A carry out of the subnormal mantissa lands on exponent 1, which is
        // exactly the right encoding.
        return static_cast<std::uint16_t>(sign | half);
    }

    std::uint32_t half = sign | (static_cast<std::uint32_t>(e) << 10) | (mant >> 13);
    const std::uint32_t rem = mant & 0x1FFFu;
    if (rem > 0x1000u || (rem == 0x1000u && (half & 1u))) ++half; // carry may bump exp
    return static_cast<std::uint16_t>(half);
}

float half_to_float(std::uint16_t half) {
    const std::uint32_t sign = (static_cast<std::uint32_t>(half) & 0x8000u) << 16;
    const std::uint32_t exp = (half >> 10) & 0x1Fu;
    const std::uint32_t mant = half & 0x3FFu;

    if (exp == 0) { // signed zero / subnormal
        const float magnitude = std::ldexp(static_cast<float>(mant), -24);
        return (sign != 0) ? -magnitude : magnitude;
    }
    if (exp == 0x1F) { // inf / NaN
        const std::uint32_t bits = sign | 0x7F800000u | (mant << 13);
        return std::bit_cast<float>(bits);
    }
    const std::uint32_t bits = sign | ((exp - 15 + 127) << 23) | (mant << 13);
    return std::bit_cast<float>(bits);
}

QuantParams fit_quant_params(std::span<const float> values, int bits) {
    check_contract(!values.empty(), "fit_quant_params: empty input");
    check_contract(bits == 32 || bits == 16 || bits == 8, "fit_quant_params: bits must be 32/16/8");
    for (float v : values)
        check_contract(std::isfinite(v), "fit_quant_params: non-finite input");

    QuantParams params;
    params.bits = static_cast<std::uint8_t>(bits);
    if (bits != 8) return params; // identity; IEEE conversion carries the scaling

    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const float vmin = *lo_it, vmax = *hi_it;
    if (vmin == vmax) {
        params.scale = 1.0f;
        params.zero_point = static_cast<std::int32_t>(
            std::clamp(std::lround(-static_cast<double>(vmin)), 0L, 255L));
        return params;
    }
    // Widen the range to contain zero so dequantize(Z) == 0 exactly.
    const double lo = std::min(0.0, static_cast<double>(vmin));
    const double hi = std::max(0.0, static_cast<double>(vmax));
    params.scale = static_cast<float>((hi - lo) / 255.0);
    params.zero_point = static_cast<std::int32_t>(
        std::clamp(std::lround(-lo / static_cast<double>(params.scale)), 0L, 255L));
    return params;
}

QuantizedVector quantize(std::span<const float> values, const QuantParams& params) {
    check_contract(params.scale > 0.0f, "quantize: scale must be positive");
    QuantizedVector qv;
    qv.params = params;
    qv.length = static_cast<std::uint32_t>(values.size());

    switch (params.bits) {
    case 8:
        qv.payload.reserve(values.size());
        for (float r : values) {
            const double q = std::round(static_cast<double>(r) / params.scale) +
                             static_cast<double>(params.zero_point);
            qv.payload.push_back(static_cast<std::uint8_t>(std::clamp(q, 0.0, 255.0)));
        }
        break;
    case 16:
        qv.payload.reserve(values.size() * 2);
        for (float r : values) append_le(qv.payload, float_to_half(r), 2);
        break;
    case 32:
        qv.payload.reserve(values.size() * 4);
        for (float r : values) append_le(qv.payload, std::bit_cast<std::uint32_t>(r), 4);
        break;
    default:
        throw ContractViolation("quantize: bits must be 32/16/8");
    }
    return qv;
}

std::vector<float> dequantize(const QuantizedVector& qv) {
    check_contract(qv.payload.size() ==
                       static_cast<std::size_t>(qv.length) * (qv.params.bits / 8),
                   "dequantize: payload length mismatch");
    std::vector<float> out(qv.length);
    switch (qv.params.bits) {
    case 8:
        for (std::uint32_t i = 0; i < qv.length; ++i)
            out[i] = qv.params.scale *
                     static_cast<float>(static_cast<std::int32_t>(qv.payload[i]) -
                                        qv.params.zero_point);
        break;
    case 16:
        for (std::uint32_t i = 0; i < qv.length; ++i)
            out[i] = half_to_float(static_cast<std::uint16_t>(read_le(&qv.payload[i * 2], 2)));
        break;
    case 32:
        for (std::uint32_t i = 0; i < qv.length; ++i)
            out[i] = std::bit_cast<float>(read_le(&qv.payload[i * 4], 4));
        break;
    default:
        throw ContractViolation("dequantize: bits must be 32/16/8");
    }
    return out;
}

StorageBytes storage_bytes(std::uint64_t count, std::uint64_t dims, int bits) {
    check_contract(bits == 32 || bits == 16 || bits == 8, "storage_bytes: bits must be 32/16/8");
    StorageBytes sb;
    sb.payload = count * dims * static_cast<std::uint64_t>(bits / 8);
    sb.metadata = kClassRecordHeaderBytes + count * sizeof(float); // stored distances
    if (bits == 8) sb.metadata += count * kQuantParamBytes;
    return sb;
}

} // namespace fasticarl
