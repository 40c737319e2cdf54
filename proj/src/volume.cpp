#include "gradflow/volume.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace gradflow {

namespace {

constexpr char kMagic[4] = {'G', 'F', '3', 'D'};

void put_u32(std::byte* p, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) p[i] = static_cast<std::byte>((v >> (8 * i)) & 0xffu);
}

std::uint32_t get_u32(const std::byte* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

// Scalars are stored little-endian; on a big-endian host each element is
// reversed in place.
void to_little_endian(std::span<std::byte> bytes, std::size_t elem) {
    if constexpr (std::endian::native == std::endian::big) {
        for (std::size_t i = 0; i + elem <= bytes.size(); i += elem)
            std::reverse(bytes.begin() + i, bytes.begin() + i + elem);
    } else {
        (void)bytes;
        (void)elem;
    }
}

template <class T>
Array<T> array_from_bytes(Dims dims, std::size_t channels, std::span<std::byte> payload) {
    to_little_endian(payload, sizeof(T));
    std::vector<T> data(dims.voxels() * channels);
    std::memcpy(data.data(), payload.data(), payload.size());
    return Array<T>(dims, channels, std::move(data));
}

Volume volume_from_bytes(DType dtype, Dims dims, std::size_t channels, std::span<std::byte> payload) {
    switch (dtype) {
        case DType::float32: return array_from_bytes<float>(dims, channels, payload);
        case DType::uint8:   return array_from_bytes<std::uint8_t>(dims, channels, payload);
        case DType::uint16:  return array_from_bytes<std::uint16_t>(dims, channels, payload);
        case DType::uint32:  return array_from_bytes<std::uint32_t>(dims, channels, payload);
    }
    throw ValidationError("unsupported dtype");
}

std::vector<std::byte> read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed for '" + path.string() + "'");
    std::vector<std::byte> out(buf.size());
    std::memcpy(out.data(), buf.data(), buf.size());
    return out;
}

VolumeHeader parse_header(std::span<const std::byte> file, const std::filesystem::path& path) {
    const std::string where = " ('" + path.string() + "')";
    if (file.size() < 4 || std::memcmp(file.data(), kMagic, 4) != 0)
        throw ValidationError("not a GF3D file" + where);
    if (file.size() < kHeaderSize) throw ValidationError("size mismatch: truncated header" + where);
    VolumeHeader h;
    h.version = static_cast<std::uint8_t>(file[4]);
    if (h.version != kFormatVersion)
        throw ValidationError("unsupported GF3D version " + std::to_string(h.version) + where);
    const auto code = static_cast<std::uint8_t>(file[5]);
    if (code > 3) throw ValidationError("unsupported dtype code " + std::to_string(code) + where);
    h.dtype = static_cast<DType>(code);
    h.channels = static_cast<std::uint8_t>(file[6]);
    h.dims = {get_u32(file.data() + 8), get_u32(file.data() + 12), get_u32(file.data() + 16)};
    if (h.channels == 0 || h.dims.voxels() == 0)
        throw ValidationError("GF3D header has a zero dimension or channel count" + where);
    return h;
}

}  // namespace

std::string to_string(const Dims& d) {
    std::ostringstream os;
    os << d.nx << 'x' << d.ny << 'x' << d.nz;
    return os.str();
}

std::string_view dtype_name(DType t) noexcept {
    switch (t) {
        case DType::float32: return "float32";
        case DType::uint8:   return "uint8";
        case DType::uint16:  return "uint16";
        case DType::uint32:  return "uint32";
    }
    return "unknown";
}

DType parse_dtype(std::string_view s) {
    if (s == "float32" || s == "0") return DType::float32;
    if (s == "uint8" || s == "1") return DType::uint8;
    if (s == "uint16" || s == "2") return DType::uint16;
    if (s == "uint32" || s == "3") return DType::uint32;
    throw ValidationError("unsupported dtype '" + std::string(s) + "'");
}

LabelVolume::LabelVolume(Array<std::uint32_t> a) : Array(std::move(a)) {
    if (channels() != 1) throw ValidationError("label volume must have exactly 1 channel");
}

ForegroundMap::ForegroundMap(Array<float> a) : Array(std::move(a)) {
    if (channels() != 1) throw ValidationError("foreground map must have exactly 1 channel");
}

GradientField::GradientField(Array<float> a) : Array(std::move(a)) {
    if (channels() != 3) throw ValidationError("gradient field must have exactly 3 channels");
}

Dims Volume::dims() const {
    return std::visit([](const auto& a) { return a.dims(); }, data_);
}

std::size_t Volume::channels() const {
    return std::visit([](const auto& a) { return a.channels(); }, data_);
}

DType Volume::dtype() const {
    return std::visit([](const auto& a) { return a.dtype(); }, data_);
}

std::vector<std::byte> Volume::bytes() const {
    return std::visit(
        [](const auto& a) {
            using T = typename std::decay_t<decltype(a)>::value_type;
            std::vector<std::byte> out(a.data().size() * sizeof(T));
            std::memcpy(out.data(), a.data().data(), out.size());
            to_little_endian(out, sizeof(T));
            return out;
        },
        data_);
}

void write_volume(const std::filesystem::path& path, const Volume& v) {
    const Dims d = v.dims();
    if (v.channels() > 255) throw ValidationError("GF3D supports at most 255 channels");
    if (d.nx > UINT32_MAX || d.ny > UINT32_MAX || d.nz > UINT32_MAX)
        throw ValidationError("GF3D dims must fit in 32 bits");

    std::array<std::byte, kHeaderSize> header{};
    std::memcpy(header.data(), kMagic, 4);
    header[4] = static_cast<std::byte>(kFormatVersion);
    header[5] = static_cast<std::byte>(v.dtype());
    header[6] = static_cast<std::byte>(v.channels());
    header[7] = std::byte{0};
    put_u32(header.data() + 8, static_cast<std::uint32_t>(d.nx));
    put_u32(header.data() + 12, static_cast<std::uint32_t>(d.ny));
    put_u32(header.data() + 16, static_cast<std::uint32_t>(d.nz));

    const auto payload = v.bytes();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(header.data()), header.size());
    out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    out.flush();
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

VolumeHeader read_header(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::array<std::byte, kHeaderSize> buf{};
    in.read(reinterpret_cast<char*>(buf.data()), buf.size());
    return parse_header(std::span<const std::byte>(buf.data(), static_cast<std::size_t>(in.gcount())), path);
}

Volume read_volume(const std::filesystem::path& path) {
    auto file = read_all(path);
    const VolumeHeader h = parse_header(file, path);
    const std::size_t expected = h.channels * h.dims.voxels() * dtype_size(h.dtype);
    const std::size_t actual = file.size() - kHeaderSize;
    if (actual != expected) {
        throw ValidationError("size mismatch in '" + path.string() + "': header implies " +
                              std::to_string(expected) + " data bytes, found " + std::to_string(actual));
    }
    return volume_from_bytes(h.dtype, h.dims, h.channels,
                             std::span<std::byte>(file.data() + kHeaderSize, actual));
}

Volume import_raw(const std::filesystem::path& path, Dims dims, std::size_t channels, DType dtype) {
    if (dims.voxels() == 0 || channels == 0) throw ValidationError("import dims and channels must be >= 1");
    auto file = read_all(path);
    const std::size_t expected = channels * dims.voxels() * dtype_size(dtype);
    if (file.size() != expected) {
        throw ValidationError("size mismatch in '" + path.string() + "': expected " + std::to_string(expected) +
                              " bytes, found " + std::to_string(file.size()));
    }
    return volume_from_bytes(dtype, dims, channels, file);
}

LabelVolume to_labels(const Volume& v) {
    if (v.channels() != 1) throw ValidationError("label volume must have exactly 1 channel");
    return std::visit(
        [](const auto& a) -> LabelVolume {
            using T = typename std::decay_t<decltype(a)>::value_type;
            if constexpr (std::is_same_v<T, float>) {
                throw ValidationError("label volume must have an integer dtype, got float32");
            } else {
                LabelVolume out(a.dims());
                std::copy(a.data().begin(), a.data().end(), out.data().begin());
                return out;
            }
        },
        v.array());
}

Array<float> to_float(const Volume& v) {
    return std::visit(
        [](const auto& a) {
            Array<float> out(a.dims(), a.channels());
            std::transform(a.data().begin(), a.data().end(), out.data().begin(),
                           [](auto x) { return static_cast<float>(x); });
            return out;
        },
        v.array());
}

Array<float> slice_channels(const Array<float>& a, std::size_t first, std::size_t count) {
    if (first + count > a.channels())
        throw ValidationError("requested channels [" + std::to_string(first) + ", " +
                              std::to_string(first + count) + ") of a " + std::to_string(a.channels()) +
                              "-channel volume");
    Array<float> out(a.dims(), count);
    for (std::size_t c = 0; c < count; ++c) {
        auto src = a.channel(first + c);
        std::copy(src.begin(), src.end(), out.channel(c).begin());
    }
    return out;
}

}  // namespace gradflow
