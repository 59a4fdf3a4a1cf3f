#pragma once

#include "choir/geometry.hpp"

#include <random>
#include <string>

namespace choir {

enum class ShapeKind { Sphere, Box, Cylinder, Torus };

/// Procedural solid in its own frame.
///   Sphere:   dims = (radius, -, -)
///   Box:      dims = half extents
///   Cylinder: dims = (radius, half height, -), axis z
///   Torus:    dims = (major radius, tube radius, arc angle); arc centred on +x in the xy plane,
///             ends closed by flat caps
struct ShapeSpec
{
  ShapeKind kind = ShapeKind::Sphere;
  Vec3d dims = Vec3d::Zero();
};

std::string toString(ShapeKind kind);
ShapeKind shapeKindFromString(std::string const &name);

/// Closed, outward-wound triangle mesh of the solid.
TriangleMesh shapeMesh(ShapeSpec const &spec);

/// Signed distance to the solid's surface, negative inside.
double signedDistance(ShapeSpec const &spec, Vec3d const &x);

/// Random dimensions at human grasp scale.
ShapeSpec randomShape(ShapeKind kind, std::mt19937_64 &rng);

/// Merges vertices with identical coordinates and drops the resulting unused ones.
TriangleMesh weldVertices(TriangleMesh const &mesh);

} // namespace choir
