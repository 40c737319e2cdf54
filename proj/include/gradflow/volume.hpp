#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace gradflow {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Reading or writing a file failed at the OS level.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Input data or parameters violate a contract (bad header, mismatched dims,
/// parameter out of range).
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

/// Voxel counts along x, y, z. x is the fastest-varying axis in memory.
struct Dims {
    std::size_t nx = 1;
    std::size_t ny = 1;
    std::size_t nz = 1;

    [[nodiscard]] constexpr std::size_t voxels() const noexcept { return nx * ny * nz; }
    [[nodiscard]] constexpr std::size_t operator[](int axis) const noexcept {
        return axis == 0 ? nx : (axis == 1 ? ny : nz);
    }
    [[nodiscard]] constexpr bool contains(long x, long y, long z) const noexcept {
        return x >= 0 && y >= 0 && z >= 0 && static_cast<std::size_t>(x) < nx &&
               static_cast<std::size_t>(y) < ny && static_cast<std::size_t>(z) < nz;
    }
    friend constexpr bool operator==(const Dims&, const Dims&) = default;
};

std::string to_string(const Dims& d);

using Index3 = std::array<std::size_t, 3>;

/// Linear index of (x, y, z, c): ((c*nz + z)*ny + y)*nx + x.
[[nodiscard]] constexpr std::size_t linear_index(const Dims& d, std::size_t x, std::size_t y,
                                                 std::size_t z, std::size_t c = 0) noexcept {
    return ((c * d.nz + z) * d.ny + y) * d.nx + x;
}

/// Inverse of linear_index restricted to one channel.
[[nodiscard]] constexpr Index3 voxel_coords(const Dims& d, std::size_t i) noexcept {
    return {i % d.nx, (i / d.nx) % d.ny, i / (d.nx * d.ny)};
}

// ---------------------------------------------------------------------------
// Element types
// ---------------------------------------------------------------------------

enum class DType : std::uint8_t { float32 = 0, uint8 = 1, uint16 = 2, uint32 = 3 };

[[nodiscard]] constexpr std::size_t dtype_size(DType t) noexcept {
    switch (t) {
        case DType::float32: return 4;
        case DType::uint8:   return 1;
        case DType::uint16:  return 2;
        case DType::uint32:  return 4;
    }
    return 0;
}

[[nodiscard]] std::string_view dtype_name(DType t) noexcept;
/// Accepts "float32", "uint8", "uint16", "uint32" or the numeric code.
[[nodiscard]] DType parse_dtype(std::string_view s);

template <class T> struct dtype_of;
template <> struct dtype_of<float>         { static constexpr DType value = DType::float32; };
template <> struct dtype_of<std::uint8_t>  { static constexpr DType value = DType::uint8; };
template <> struct dtype_of<std::uint16_t> { static constexpr DType value = DType::uint16; };
template <> struct dtype_of<std::uint32_t> { static constexpr DType value = DType::uint32; };

// ---------------------------------------------------------------------------
// Array
// ---------------------------------------------------------------------------

/// Dense multi-channel 3D array stored as [channel][z][y][x].
template <class T>
class Array {
public:
    using value_type = T;

    Array() = default;
    Array(Dims dims, std::size_t channels, T fill = T{})
        : dims_(dims), channels_(channels), data_(check(dims, channels), fill) {}
    Array(Dims dims, std::size_t channels, std::vector<T> data)
        : dims_(dims), channels_(channels), data_(std::move(data)) {
        if (data_.size() != check(dims, channels))
            throw ValidationError("array data length does not match dims and channels");
    }

    [[nodiscard]] const Dims& dims() const noexcept { return dims_; }
    [[nodiscard]] std::size_t channels() const noexcept { return channels_; }
    [[nodiscard]] std::size_t voxels() const noexcept { return dims_.voxels(); }
    [[nodiscard]] static constexpr DType dtype() noexcept { return dtype_of<T>::value; }

    [[nodiscard]] T& operator()(std::size_t x, std::size_t y, std::size_t z, std::size_t c = 0) noexcept {
        return data_[linear_index(dims_, x, y, z, c)];
    }
    [[nodiscard]] const T& operator()(std::size_t x, std::size_t y, std::size_t z,
                                      std::size_t c = 0) const noexcept {
        return data_[linear_index(dims_, x, y, z, c)];
    }

    [[nodiscard]] std::span<T> channel(std::size_t c) noexcept {
        return {data_.data() + c * voxels(), voxels()};
    }
    [[nodiscard]] std::span<const T> channel(std::size_t c) const noexcept {
        return {data_.data() + c * voxels(), voxels()};
    }

    [[nodiscard]] std::span<T> data() noexcept { return data_; }
    [[nodiscard]] std::span<const T> data() const noexcept { return data_; }
    [[nodiscard]] std::vector<T>& storage() noexcept { return data_; }

    friend bool operator==(const Array&, const Array&) = default;

private:
    static std::size_t check(const Dims& d, std::size_t c) {
        if (d.nx == 0 || d.ny == 0 || d.nz == 0 || c == 0)
            throw ValidationError("array dims and channel count must all be >= 1");
        return d.voxels() * c;
    }

    Dims dims_{};
    std::size_t channels_ = 1;
    std::vector<T> data_;
};

// ---------------------------------------------------------------------------
// Domain volumes
// ---------------------------------------------------------------------------

/// Instance labels, one channel. 0 is background, k > 0 is instance k.
class LabelVolume : public Array<std::uint32_t> {
public:
    LabelVolume() = default;
    explicit LabelVolume(Dims dims) : Array(dims, 1, 0u) {}
    explicit LabelVolume(Array<std::uint32_t> a);
};

/// Foreground probability in [0, 1], one channel.
class ForegroundMap : public Array<float> {
public:
    ForegroundMap() = default;
    explicit ForegroundMap(Dims dims, float fill = 0.0f) : Array(dims, 1, fill) {}
    explicit ForegroundMap(Array<float> a);
};

/// Per-axis gradients, channels ordered x, y, z, values in [-1, 1].
class GradientField : public Array<float> {
public:
    GradientField() = default;
    explicit GradientField(Dims dims) : Array(dims, 3, 0.0f) {}
    explicit GradientField(Array<float> a);
};

// ---------------------------------------------------------------------------
// Type-erased volume and the GF3D exchange format
// ---------------------------------------------------------------------------

using AnyArray = std::variant<Array<float>, Array<std::uint8_t>, Array<std::uint16_t>, Array<std::uint32_t>>;

/// A volume of any supported dtype, as read from or written to disk.
class Volume {
public:
    Volume() = default;
    template <class T>
    Volume(Array<T> a) : data_(std::move(a)) {}  // NOLINT(google-explicit-constructor)

    [[nodiscard]] Dims dims() const;
    [[nodiscard]] std::size_t channels() const;
    [[nodiscard]] DType dtype() const;
    [[nodiscard]] const AnyArray& array() const noexcept { return data_; }
    [[nodiscard]] AnyArray& array() noexcept { return data_; }

    template <class T>
    [[nodiscard]] const Array<T>* get_if() const noexcept { return std::get_if<Array<T>>(&data_); }

    /// Raw little-endian payload in [channel][z][y][x] order.
    [[nodiscard]] std::vector<std::byte> bytes() const;

    friend bool operator==(const Volume&, const Volume&) = default;

private:
    AnyArray data_{Array<float>{}};
};

inline constexpr std::size_t kHeaderSize = 20;
inline constexpr std::uint8_t kFormatVersion = 1;

/// Writes the 20-byte GF3D header followed by the raw payload.
void write_volume(const std::filesystem::path& path, const Volume& v);
[[nodiscard]] Volume read_volume(const std::filesystem::path& path);
/// Wraps a headerless little-endian [channel][z][y][x] file.
[[nodiscard]] Volume import_raw(const std::filesystem::path& path, Dims dims, std::size_t channels, DType dtype);

/// Header-only inspection, for `info`.
struct VolumeHeader {
    std::uint8_t version = kFormatVersion;
    DType dtype = DType::float32;
    std::size_t channels = 1;
    Dims dims{};
};
[[nodiscard]] VolumeHeader read_header(const std::filesystem::path& path);

// Conversions between the on-disk volume and domain types. Integer label
// volumes of any width are accepted; float volumes are rejected.
[[nodiscard]] LabelVolume to_labels(const Volume& v);
[[nodiscard]] Array<float> to_float(const Volume& v);
/// Copies `count` channels starting at `first` out of a float array.
[[nodiscard]] Array<float> slice_channels(const Array<float>& a, std::size_t first, std::size_t count);

}  // namespace gradflow
