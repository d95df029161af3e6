#pragma once

// Triangle meshes and deterministic area-uniform surface sampling.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rollopt/geometry.hpp"

namespace rollopt {

struct TriangleMesh {
  std::vector<Vector3d> vertices;
  std::vector<std::array<int, 3>> faces;
};

// Wavefront OBJ subset: v and f records, 1-based or negative indices,
// polygons fan-triangulated. Throws ConfigError on malformed input.
TriangleMesh load_obj(const std::string& path);
void save_obj(const std::string& path, const TriangleMesh& mesh);

double surface_area(const TriangleMesh& mesh);

// N points, uniform by area: faces chosen via the cumulative-area CDF,
// positions via the sqrt barycentric map. Deterministic in (mesh, n, seed).
std::vector<Vector3d> sample_surface(const TriangleMesh& mesh, int n, uint64_t seed);

// Area-uniform samples on the union surface of a primitive scene, in the
// body frame. Points landing inside another primitive are rejected.
std::vector<Vector3d> sample_scene_surface(const SdfScene& scene, int n, uint64_t seed);

// Subdivided icosahedron (used to generate fingertip assets).
TriangleMesh icosphere(double radius, int subdivisions);

}  // namespace rollopt
