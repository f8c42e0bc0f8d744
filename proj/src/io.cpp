#include "ctseg/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "json.hpp"

namespace ctseg {
namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Accepts "x.ctvol.json", "x.ctvol.raw" or the "x.ctvol" stem.
std::string ctvol_stem(const std::string& path) {
    if (ends_with(path, ".ctvol.json")) return path.substr(0, path.size() - 5);
    if (ends_with(path, ".ctvol.raw")) return path.substr(0, path.size() - 4);
    if (ends_with(path, ".ctvol")) return path;
    return path + ".ctvol";
}

std::size_t dtype_size(VoxelDtype d) {
    switch (d) {
        case VoxelDtype::U8: return 1;
        case VoxelDtype::I16: return 2;
        case VoxelDtype::F32: return 4;
    }
    return 4;
}

std::vector<char> read_all(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open file: " + path);
    f.seekg(0, std::ios::end);
    std::streamoff size = f.tellg();
    f.seekg(0, std::ios::beg);
    std::vector<char> buf(static_cast<std::size_t>(size));
    if (size > 0 && !f.read(buf.data(), size)) throw std::runtime_error("read failure: " + path);
    return buf;
}

template <typename T>
T read_le(const char* p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return v;  // little-endian hosts only; asserted at build time below
}

static_assert(std::endian::native == std::endian::little,
              "volume I/O assumes a little-endian host");

}  // namespace

const char* to_string(VoxelDtype dtype) {
    switch (dtype) {
        case VoxelDtype::U8: return "u8";
        case VoxelDtype::I16: return "i16";
        case VoxelDtype::F32: return "f32";
    }
    return "f32";
}

VoxelDtype dtype_from_string(const std::string& s) {
    if (s == "u8") return VoxelDtype::U8;
    if (s == "i16") return VoxelDtype::I16;
    if (s == "f32") return VoxelDtype::F32;
    throw std::runtime_error("unknown dtype: " + s);
}

void write_volume(const Volume& v, const std::string& path, VoxelDtype dtype,
                  const WriteOptions& opts) {
    v.validate();
    std::string stem = ctvol_stem(path);

    nlohmann::ordered_json header;
    header["dims"] = {v.dims.d, v.dims.h, v.dims.w};
    header["spacing_mm"] = {v.spacing.dz, v.spacing.dy, v.spacing.dx};
    header["dtype"] = to_string(dtype);
    header["order"] = "zyx";
    header["endianness"] = "little";
    header["kind"] = to_string(v.kind);
    if (!opts.meta.empty()) header["meta"] = opts.meta;

    std::ofstream jf(stem + ".json", std::ios::binary);
    if (!jf) throw std::runtime_error("cannot open for writing: " + stem + ".json");
    jf << header.dump(2) << "\n";
    if (!jf) throw std::runtime_error("I/O failure writing: " + stem + ".json");

    std::vector<char> blob(v.data.size() * dtype_size(dtype));
    for (std::size_t i = 0; i < v.data.size(); ++i) {
        float val = v.data[i];
        switch (dtype) {
            case VoxelDtype::U8: {
                if (val != std::floor(val) || val < 0.0f || val > 255.0f)
                    throw std::runtime_error("value not representable as u8");
                blob[i] = static_cast<char>(static_cast<unsigned char>(val));
                break;
            }
            case VoxelDtype::I16: {
                if (val != std::floor(val) || val < -32768.0f || val > 32767.0f)
                    throw std::runtime_error("value not representable as i16");
                std::int16_t s = static_cast<std::int16_t>(val);
                std::memcpy(&blob[i * 2], &s, 2);
                break;
            }
            case VoxelDtype::F32:
                std::memcpy(&blob[i * 4], &val, 4);
                break;
        }
    }
    std::ofstream rf(stem + ".raw", std::ios::binary);
    if (!rf) throw std::runtime_error("cannot open for writing: " + stem + ".raw");
    rf.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!rf) throw std::runtime_error("I/O failure writing: " + stem + ".raw");
}

void write_volume(const Volume& v, const std::string& path, const WriteOptions& opts) {
    write_volume(v, path, v.kind == VolumeKind::Label ? VoxelDtype::U8 : VoxelDtype::F32, opts);
}

ReadResult read_volume(const std::string& path) {
    std::string stem = ctvol_stem(path);

    nlohmann::json header;
    {
        std::ifstream jf(stem + ".json", std::ios::binary);
        if (!jf) throw std::runtime_error("missing volume header: " + stem + ".json");
        try {
            jf >> header;
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error("garbled volume header " + stem + ".json: " + e.what());
        }
    }

    ReadResult result;
    try {
        auto dims = header.at("dims");
        auto spacing = header.at("spacing_mm");
        if (!dims.is_array() || dims.size() != 3 || !spacing.is_array() || spacing.size() != 3)
            throw std::runtime_error("dims and spacing_mm must be 3-element arrays");
        result.volume.dims = {dims[0].get<int>(), dims[1].get<int>(), dims[2].get<int>()};
        result.volume.spacing = {spacing[0].get<double>(), spacing[1].get<double>(),
                                 spacing[2].get<double>()};
        if (header.value("order", "zyx") != std::string("zyx"))
            throw std::runtime_error("unsupported voxel order");
        if (header.value("endianness", "little") != std::string("little"))
            throw std::runtime_error("unsupported endianness");
        VoxelDtype dtype = dtype_from_string(header.at("dtype").get<std::string>());
        result.volume.kind = volume_kind_from_string(header.value("kind", "intensity"));
        if (header.contains("meta"))
            result.meta = header.at("meta").get<std::map<std::string, std::string>>();

        std::vector<char> blob = read_all(stem + ".raw");
        std::size_t expected = result.volume.dims.voxels() * dtype_size(dtype);
        if (blob.size() != expected)
            throw std::runtime_error("blob length mismatch: expected " + std::to_string(expected) +
                                     " bytes, found " + std::to_string(blob.size()));

        result.volume.data.resize(result.volume.dims.voxels());
        for (std::size_t i = 0; i < result.volume.data.size(); ++i) {
            switch (dtype) {
                case VoxelDtype::U8:
                    result.volume.data[i] =
                        static_cast<float>(static_cast<unsigned char>(blob[i]));
                    break;
                case VoxelDtype::I16:
                    result.volume.data[i] = static_cast<float>(read_le<std::int16_t>(&blob[i * 2]));
                    break;
                case VoxelDtype::F32:
                    result.volume.data[i] = read_le<float>(&blob[i * 4]);
                    break;
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("garbled volume header " + stem + ".json: " + e.what());
    }
    result.volume.validate();
    return result;
}

Volume read_nifti(const std::string& path) {
    std::vector<char> bytes = read_all(path);
    if (bytes.size() < 348) throw std::runtime_error("NIfTI file shorter than its 348-byte header");

    // Header layout per the NIfTI-1 standard; only the fields we consume.
    std::int32_t sizeof_hdr = read_le<std::int32_t>(&bytes[0]);
    if (sizeof_hdr != 348)
        throw std::runtime_error("not a little-endian NIfTI-1 file (sizeof_hdr != 348)");

    char magic[4];
    std::memcpy(magic, &bytes[344], 4);
    if (std::memcmp(magic, "ni1\0", 4) == 0)
        throw std::runtime_error("two-file NIfTI (ni1) is unsupported; expected single-file n+1");
    if (std::memcmp(magic, "n+1\0", 4) != 0) throw std::runtime_error("bad NIfTI magic");

    std::int16_t dim[8];
    for (int i = 0; i < 8; ++i) dim[i] = read_le<std::int16_t>(&bytes[40 + 2 * i]);
    if (dim[0] != 3) throw std::runtime_error("only 3D NIfTI volumes are supported (dim[0] != 3)");

    std::int16_t datatype = read_le<std::int16_t>(&bytes[70]);
    std::int16_t bitpix = read_le<std::int16_t>(&bytes[72]);
    VoxelDtype dtype;
    switch (datatype) {
        case 2: dtype = VoxelDtype::U8; break;
        case 4: dtype = VoxelDtype::I16; break;
        case 16: dtype = VoxelDtype::F32; break;
        default:
            throw std::runtime_error("unsupported NIfTI datatype " + std::to_string(datatype));
    }
    if (bitpix != static_cast<std::int16_t>(dtype_size(dtype) * 8))
        throw std::runtime_error("NIfTI bitpix does not match datatype");

    float pixdim[8];
    for (int i = 0; i < 8; ++i) pixdim[i] = read_le<float>(&bytes[76 + 4 * i]);
    float vox_offset = read_le<float>(&bytes[108]);
    if (!(vox_offset >= 348.0f) || vox_offset != std::floor(vox_offset))
        throw std::runtime_error("invalid NIfTI vox_offset");

    Volume v;
    v.dims = {dim[3], dim[2], dim[1]};
    v.spacing = {pixdim[3], pixdim[2], pixdim[1]};
    v.kind = VolumeKind::Intensity;
    if (!v.dims.valid()) throw std::runtime_error("non-positive NIfTI dims");
    if (!v.spacing.valid()) throw std::runtime_error("non-positive NIfTI pixdim");

    std::size_t offset = static_cast<std::size_t>(vox_offset);
    std::size_t expected = v.dims.voxels() * dtype_size(dtype);
    if (bytes.size() < offset + expected)
        throw std::runtime_error("NIfTI data truncated: expected " + std::to_string(expected) +
                                 " bytes at offset " + std::to_string(offset));

    // NIfTI stores x fastest, which matches the zyx-major layout directly.
    v.data.resize(v.dims.voxels());
    const char* p = bytes.data() + offset;
    for (std::size_t i = 0; i < v.data.size(); ++i) {
        switch (dtype) {
            case VoxelDtype::U8: v.data[i] = static_cast<float>(static_cast<unsigned char>(p[i])); break;
            case VoxelDtype::I16: v.data[i] = static_cast<float>(read_le<std::int16_t>(p + i * 2)); break;
            case VoxelDtype::F32: v.data[i] = read_le<float>(p + i * 4); break;
        }
    }
    return v;
}

}  // namespace ctseg
