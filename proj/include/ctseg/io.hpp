#pragma once

#include <map>
#include <string>

#include "ctseg/volume.hpp"

namespace ctseg {

enum class VoxelDtype { U8, I16, F32 };

const char* to_string(VoxelDtype dtype);
VoxelDtype dtype_from_string(const std::string& s);

// Native container: a `.ctvol.json` sidecar describing dims/spacing/dtype
// plus a `.ctvol.raw` little-endian blob in zyx order. Paths may point at
// the sidecar, the blob, or the bare `.ctvol` stem. The optional meta map
// carries free-form provenance strings (e.g. the attention variant a
// prediction was produced with).
struct WriteOptions {
    std::map<std::string, std::string> meta;
};

void write_volume(const Volume& v, const std::string& path, VoxelDtype dtype,
                  const WriteOptions& opts = {});
// Picks u8 for label volumes and f32 otherwise.
void write_volume(const Volume& v, const std::string& path, const WriteOptions& opts = {});

struct ReadResult {
    Volume volume;
    std::map<std::string, std::string> meta;
};

ReadResult read_volume(const std::string& path);

// Minimal single-file uncompressed NIfTI-1 reader: little-endian 348-byte
// header, magic "n+1", datatype u8/i16/f32, strictly 3D. Returns an
// intensity volume with dims (dim[3],dim[2],dim[1]) and spacing
// (pixdim[3],pixdim[2],pixdim[1]).
Volume read_nifti(const std::string& path);

}  // namespace ctseg
