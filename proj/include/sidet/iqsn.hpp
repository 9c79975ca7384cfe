#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "sidet/errors.hpp"
#include "sidet/signal_model.hpp"

namespace sidet {

// Snapshot stream file format: magic "IQSN", version u32 LE, M u32 LE,
// snapshot count u64 LE, then count x M little-endian float32 (re, im) pairs.
inline constexpr std::uint32_t kIqsnVersion = 1;

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "IQSN I/O assumes a little-endian host");

template <typename T>
void write_le(std::ostream& os, T value) {
    os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
    T value{};
    is.read(reinterpret_cast<char*>(&value), sizeof(T));
    return value;
}

} // namespace detail

inline void write_iqsn(const std::string& path, const std::vector<Snapshot>& snapshots,
                       std::uint32_t num_elements) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw io_error("write_iqsn: cannot open " + path);
    os.write("IQSN", 4);
    detail::write_le<std::uint32_t>(os, kIqsnVersion);
    detail::write_le<std::uint32_t>(os, num_elements);
    detail::write_le<std::uint64_t>(os, snapshots.size());
    for (const auto& snap : snapshots) {
        if (snap.values.size() != static_cast<Eigen::Index>(num_elements))
            throw std::invalid_argument("write_iqsn: snapshot length mismatch");
        for (Eigen::Index i = 0; i < snap.values.size(); ++i) {
            detail::write_le<float>(os, static_cast<float>(snap.values(i).real()));
            detail::write_le<float>(os, static_cast<float>(snap.values(i).imag()));
        }
    }
    if (!os) throw io_error("write_iqsn: write failed for " + path);
}

struct IqsnFile {
    std::uint32_t num_elements = 0;
    std::vector<Snapshot> snapshots;
};

inline IqsnFile read_iqsn(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("read_iqsn: cannot open " + path);
    std::array<char, 4> magic{};
    is.read(magic.data(), 4);
    if (!is || std::memcmp(magic.data(), "IQSN", 4) != 0)
        throw io_error("read_iqsn: bad magic in " + path);
    const auto version = detail::read_le<std::uint32_t>(is);
    if (version != kIqsnVersion)
        throw io_error("read_iqsn: unsupported version " + std::to_string(version));
    const auto m = detail::read_le<std::uint32_t>(is);
    const auto count = detail::read_le<std::uint64_t>(is);
    if (!is || m == 0) throw io_error("read_iqsn: corrupt header in " + path);

    IqsnFile file;
    file.num_elements = m;
    file.snapshots.reserve(count);
    for (std::uint64_t k = 0; k < count; ++k) {
        Snapshot snap;
        snap.index = k + 1;
        snap.values.resize(m);
        for (std::uint32_t i = 0; i < m; ++i) {
            const float re = detail::read_le<float>(is);
            const float im = detail::read_le<float>(is);
            snap.values(i) = std::complex<double>(re, im);
        }
        if (!is) throw io_error("read_iqsn: truncated payload in " + path);
        file.snapshots.push_back(std::move(snap));
    }
    return file;
}

} // namespace sidet
