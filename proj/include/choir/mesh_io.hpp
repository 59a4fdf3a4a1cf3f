#pragma once

#include "choir/geometry.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace choir {

// Wavefront OBJ: `v` and `f` records, 1-based indices; polygons are fan-triangulated.
TriangleMesh readObj(std::istream &in);
TriangleMesh readObj(std::string const &path);
void writeObj(std::ostream &out, TriangleMesh const &mesh);
void writeObj(std::string const &path, TriangleMesh const &mesh);

// Vertex-only OBJ files read as point clouds (normals from `vn` records when counts match).
PointCloud readObjPoints(std::string const &path);

// "PCLD" + u32 count + count*3 little-endian f32 positions.
std::vector<std::uint8_t> encodePointCloud(PointCloud const &cloud);
PointCloud decodePointCloud(std::vector<std::uint8_t> const &bytes);
void writePointCloud(std::string const &path, PointCloud const &cloud);
PointCloud readPointCloud(std::string const &path);

std::vector<std::uint8_t> readBytes(std::string const &path);
void writeBytes(std::string const &path, std::vector<std::uint8_t> const &bytes);

} // namespace choir
