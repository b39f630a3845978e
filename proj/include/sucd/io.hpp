#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "sucd/field.hpp"

namespace sucd {

struct BadFormat : std::runtime_error {
    explicit BadFormat(const char* what) : std::runtime_error(what) {}
};

inline void write_u64(std::ostream& out, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

inline uint64_t read_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw BadFormat("truncated input");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(b[i]) << (8 * i);
    return v;
}

inline void write_u16(std::ostream& out, uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
    out.write(reinterpret_cast<const char*>(b), 2);
}

inline uint16_t read_u16(std::istream& in) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    if (!in) throw BadFormat("truncated input");
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

// Fixed cell width for elements of the field: enough bytes for any value
// below the order.
inline unsigned cell_bytes(const FieldSpec& spec) {
    unsigned bits = spec.kind() == FieldSpec::Kind::BinaryExtension
                        ? spec.w()
                        : 64 - static_cast<unsigned>(__builtin_clzll((spec.p() - 1) | 1));
    return (bits + 7) / 8;
}

inline void write_cell(std::ostream& out, felem v, unsigned nbytes) {
    unsigned char b[8];
    for (unsigned i = 0; i < nbytes; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), nbytes);
}

inline felem read_cell(std::istream& in, unsigned nbytes) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), nbytes);
    if (!in) throw BadFormat("truncated input");
    felem v = 0;
    for (unsigned i = 0; i < nbytes; ++i) v |= felem(b[i]) << (8 * i);
    return v;
}

inline void write_mpz(std::ostream& out, const mpz_class& v) {
    if (sgn(v) < 0) throw std::invalid_argument("negative mpz");
    size_t nbytes = 0;
    std::vector<unsigned char> buf((mpz_sizeinbase(v.get_mpz_t(), 2) + 7) / 8 + 1);
    mpz_export(buf.data(), &nbytes, -1, 1, 0, 0, v.get_mpz_t());
    write_u64(out, nbytes);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(nbytes));
}

inline mpz_class read_mpz(std::istream& in) {
    const uint64_t nbytes = read_u64(in);
    if (nbytes > (uint64_t{1} << 32)) throw BadFormat("oversized integer");
    std::vector<unsigned char> buf(nbytes);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(nbytes));
    if (nbytes && !in) throw BadFormat("truncated input");
    mpz_class v;
    mpz_import(v.get_mpz_t(), nbytes, -1, 1, 0, 0, buf.data());
    return v;
}

inline void write_field_spec(std::ostream& out, const FieldSpec& spec) {
    write_u64(out, spec.kind() == FieldSpec::Kind::BinaryExtension ? 0 : 1);
    if (spec.kind() == FieldSpec::Kind::BinaryExtension) {
        write_u64(out, spec.w());
        write_u64(out, spec.modulus_poly());
    } else {
        write_u64(out, spec.p());
        write_u64(out, 0);
    }
}

inline FieldSpec read_field_spec(std::istream& in) {
    uint64_t kind = read_u64(in);
    uint64_t a = read_u64(in), b = read_u64(in);
    if (kind == 0) return FieldSpec::binary(static_cast<unsigned>(a), b);
    if (kind == 1) return FieldSpec::prime(a);
    throw BadFormat("unknown field kind");
}

}  // namespace sucd
