#include "rollopt/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "rollopt/errors.hpp"

namespace rollopt {

TriangleMesh load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open mesh file");
  TriangleMesh mesh;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag)) continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ss >> x >> y >> z))
        throw ConfigError(path + ":" + std::to_string(lineno), "bad vertex record");
      mesh.vertices.emplace_back(x, y, z);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ss >> tok) {
        // "i", "i/t", "i/t/n", "i//n"
        const int v = std::stoi(tok.substr(0, tok.find('/')));
        int resolved = v > 0 ? v - 1 : static_cast<int>(mesh.vertices.size()) + v;
        if (resolved < 0 || resolved >= static_cast<int>(mesh.vertices.size()))
          throw ConfigError(path + ":" + std::to_string(lineno), "face index out of range");
        idx.push_back(resolved);
      }
      if (idx.size() < 3)
        throw ConfigError(path + ":" + std::to_string(lineno), "face needs 3+ vertices");
      for (size_t k = 2; k < idx.size(); ++k)
        mesh.faces.push_back({idx[0], idx[static_cast<int>(k) - 1], idx[k]});
    }
  }
  if (mesh.faces.empty()) throw ConfigError(path, "mesh has no faces");
  return mesh;
}

void save_obj(const std::string& path, const TriangleMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw ConfigError(path, "cannot write mesh file");
  out.precision(9);
  for (const auto& v : mesh.vertices)
    out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& f : mesh.faces)
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

namespace {

double face_area(const TriangleMesh& m, const std::array<int, 3>& f) {
  return 0.5 * (m.vertices[f[1]] - m.vertices[f[0]])
                   .cross(m.vertices[f[2]] - m.vertices[f[0]])
                   .norm();
}

}  // namespace

double surface_area(const TriangleMesh& mesh) {
  double a = 0;
  for (const auto& f : mesh.faces) a += face_area(mesh, f);
  return a;
}

std::vector<Vector3d> sample_surface(const TriangleMesh& mesh, int n, uint64_t seed) {
  std::vector<double> cdf(mesh.faces.size());
  double acc = 0;
  for (size_t i = 0; i < mesh.faces.size(); ++i) {
    acc += face_area(mesh, mesh.faces[i]);
    cdf[i] = acc;
  }
  if (acc <= 0) throw ConfigError("mesh", "zero surface area");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<Vector3d> pts;
  pts.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double pick = uni(rng) * acc;
    const size_t fi = std::lower_bound(cdf.begin(), cdf.end(), pick) - cdf.begin();
    const auto& f = mesh.faces[std::min(fi, mesh.faces.size() - 1)];
    const double r1 = std::sqrt(uni(rng));
    const double r2 = uni(rng);
    pts.push_back((1 - r1) * mesh.vertices[f[0]] + r1 * (1 - r2) * mesh.vertices[f[1]] +
                  r1 * r2 * mesh.vertices[f[2]]);
  }
  return pts;
}

namespace {

double primitive_area(const Primitive& p) {
  switch (p.kind) {
    case PrimitiveKind::Sphere:
      return 4 * M_PI * p.size.x() * p.size.x();
    case PrimitiveKind::Box:
      return 8 * (p.size.x() * p.size.y() + p.size.y() * p.size.z() +
                  p.size.z() * p.size.x());
    case PrimitiveKind::Cylinder:
      return 2 * M_PI * p.size.x() * (2 * p.size.y()) + 2 * M_PI * p.size.x() * p.size.x();
  }
  return 0;
}

Vector3d sample_primitive(const Primitive& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  switch (p.kind) {
    case PrimitiveKind::Sphere: {
      const double z = 2 * uni(rng) - 1;
      const double ph = 2 * M_PI * uni(rng);
      const double s = std::sqrt(std::max(0.0, 1 - z * z));
      return p.size.x() * Vector3d(s * std::cos(ph), s * std::sin(ph), z);
    }
    case PrimitiveKind::Box: {
      const Vector3d& h = p.size;
      const double areas[3] = {h.y() * h.z(), h.z() * h.x(), h.x() * h.y()};
      const double total = areas[0] + areas[1] + areas[2];
      double pick = uni(rng) * total;
      int axis = 0;
      while (axis < 2 && pick > areas[axis]) pick -= areas[axis++];
      const double side = uni(rng) < 0.5 ? -1.0 : 1.0;
      Vector3d v((2 * uni(rng) - 1) * h.x(), (2 * uni(rng) - 1) * h.y(),
                 (2 * uni(rng) - 1) * h.z());
      v[axis] = side * h[axis];
      return v;
    }
    case PrimitiveKind::Cylinder: {
      const double r = p.size.x(), hl = p.size.y();
      const double lateral = 2 * M_PI * r * 2 * hl;
      const double caps = 2 * M_PI * r * r;
      const double ph = 2 * M_PI * uni(rng);
      if (uni(rng) * (lateral + caps) < lateral) {
        return Vector3d(r * std::cos(ph), r * std::sin(ph), (2 * uni(rng) - 1) * hl);
      }
      const double rr = r * std::sqrt(uni(rng));
      const double z = uni(rng) < 0.5 ? -hl : hl;
      return Vector3d(rr * std::cos(ph), rr * std::sin(ph), z);
    }
  }
  return Vector3d::Zero();
}

}  // namespace

std::vector<Vector3d> sample_scene_surface(const SdfScene& scene, int n, uint64_t seed) {
  std::vector<double> cdf(scene.prims.size());
  double acc = 0;
  for (size_t i = 0; i < scene.prims.size(); ++i) {
    acc += primitive_area(scene.prims[i]);
    cdf[i] = acc;
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<Vector3d> pts;
  pts.reserve(n);
  int guard = 0;
  while (static_cast<int>(pts.size()) < n && guard < 100 * n) {
    ++guard;
    const double pick = uni(rng) * acc;
    const size_t pi = std::lower_bound(cdf.begin(), cdf.end(), pick) - cdf.begin();
    const Primitive& prim = scene.prims[std::min(pi, scene.prims.size() - 1)];
    const Vector3d p_body = prim.local.act(sample_primitive(prim, rng));
    // keep only points on the union surface
    if (scene_sdf(scene, Pose::Identity(), p_body, false).phi > -1e-9) pts.push_back(p_body);
  }
  if (static_cast<int>(pts.size()) < n)
    throw ConfigError("object.primitives", "union surface sampling failed (overlap?)");
  return pts;
}

TriangleMesh icosphere(double radius, int subdivisions) {
  const double t = (1 + std::sqrt(5.0)) / 2;
  TriangleMesh m;
  const double verts[12][3] = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0},
                               {0, -1, t}, {0, 1, t},  {0, -1, -t}, {0, 1, -t},
                               {t, 0, -1}, {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : verts) m.vertices.push_back(Vector3d(v[0], v[1], v[2]).normalized());
  m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      m.vertices.push_back((m.vertices[a] + m.vertices[b]).normalized());
      const int idx = static_cast<int>(m.vertices.size()) - 1;
      midpoint[key] = idx;
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(m.faces.size() * 4);
    for (const auto& f : m.faces) {
      const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({ab, f[1], bc});
      next.push_back({ca, bc, f[2]});
      next.push_back({ab, bc, ca});
    }
    m.faces = std::move(next);
  }
  for (auto& v : m.vertices) v *= radius;
  return m;
}

}  // namespace rollopt
