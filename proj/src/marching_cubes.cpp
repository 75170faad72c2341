#include <cstdint>
#include <unordered_map>

#include "mirrorpose/sdf.hpp"

namespace mirrorpose {

namespace {

// Cell corners numbered by position bits; all six tetrahedra share the main
// diagonal 0-6, so every cell splits its faces the same way and adjacent
// cells meet without cracks.
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kTet[6][4] = {{0, 1, 2, 6}, {0, 2, 3, 6}, {0, 3, 7, 6},
                            {0, 7, 4, 6}, {0, 4, 5, 6}, {0, 5, 1, 6}};

struct EdgeKey {
  int64_t a, b;
  bool operator==(const EdgeKey& o) const { return a == o.a && b == o.b; }
};
struct EdgeKeyHash {
  size_t operator()(const EdgeKey& k) const {
    return std::hash<int64_t>()(k.a * 1000003 ^ k.b);
  }
};

}  // namespace

TriMesh marching_cubes(const SdfShape& shape, const Vec3& lo, const Vec3& hi, int resolution) {
  if (resolution < 2) throw std::invalid_argument("marching_cubes: resolution must be >= 2");
  for (int i = 0; i < 3; ++i)
    if (!(hi[i] > lo[i])) throw std::invalid_argument("marching_cubes: empty bounds");
  shape.validate();

  const int n = resolution + 1;  // nodes per axis
  Vec3 cell{(hi.x - lo.x) / resolution, (hi.y - lo.y) / resolution, (hi.z - lo.z) / resolution};
  auto node_pos = [&](int i, int j, int k) {
    return Vec3{lo.x + cell.x * i, lo.y + cell.y * j, lo.z + cell.z * k};
  };
  auto node_id = [&](int i, int j, int k) -> int64_t {
    return (static_cast<int64_t>(k) * n + j) * n + i;
  };

  std::vector<double> val(static_cast<size_t>(n) * n * n);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) val[node_id(i, j, k)] = sdf_eval(shape, node_pos(i, j, k));

  TriMesh mesh;
  std::unordered_map<EdgeKey, int, EdgeKeyHash> edge_vertex;
  std::vector<Vec3> node_cache(8);

  auto vertex_on_edge = [&](int64_t ida, const Vec3& pa, double va, int64_t idb, const Vec3& pb,
                            double vb) {
    EdgeKey key{std::min(ida, idb), std::max(ida, idb)};
    auto it = edge_vertex.find(key);
    if (it != edge_vertex.end()) return it->second;
    double t = va / (va - vb);  // signs differ, denominator nonzero
    Vec3 p = pa + (pb - pa) * t;
    int idx = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back(p);
    edge_vertex.emplace(key, idx);
    return idx;
  };

  double diag = norm(cell);
  for (int k = 0; k < resolution; ++k)
    for (int j = 0; j < resolution; ++j)
      for (int i = 0; i < resolution; ++i) {
        int64_t cid[8];
        double cv[8];
        bool all_pos = true, all_neg = true;
        double closest = kInf;
        for (int c = 0; c < 8; ++c) {
          int ci = i + kCorner[c][0], cj = j + kCorner[c][1], ck = k + kCorner[c][2];
          cid[c] = node_id(ci, cj, ck);
          cv[c] = val[cid[c]];
          node_cache[c] = node_pos(ci, cj, ck);
          all_pos &= cv[c] >= 0;
          all_neg &= cv[c] < 0;
          closest = std::min(closest, std::abs(cv[c]));
        }
        if ((all_pos || all_neg) && closest > 2.0 * diag) continue;

        for (const auto& tet : kTet) {
          int ins[4], outs[4];
          int ni = 0, no = 0;
          for (int m = 0; m < 4; ++m) {
            if (cv[tet[m]] < 0)
              ins[ni++] = tet[m];
            else
              outs[no++] = tet[m];
          }
          if (ni == 0 || ni == 4) continue;

          auto ev = [&](int a, int b) {
            return vertex_on_edge(cid[a], node_cache[a], cv[a], cid[b], node_cache[b], cv[b]);
          };
          Vec3 inward{0, 0, 0}, outward{0, 0, 0};
          for (int m = 0; m < ni; ++m) inward += node_cache[ins[m]];
          for (int m = 0; m < no; ++m) outward += node_cache[outs[m]];
          Vec3 flip_ref = outward / no - inward / ni;

          auto emit = [&](int a, int b, int c) {
            const Vec3 &pa = mesh.vertices[a], &pb = mesh.vertices[b], &pc = mesh.vertices[c];
            Vec3 nrm = cross(pb - pa, pc - pa);
            if (norm2(nrm) < 1e-24) return;  // degenerate sliver
            if (dot(nrm, flip_ref) < 0)
              mesh.triangles.push_back({a, c, b});
            else
              mesh.triangles.push_back({a, b, c});
          };

          if (ni == 1) {
            emit(ev(ins[0], outs[0]), ev(ins[0], outs[1]), ev(ins[0], outs[2]));
          } else if (ni == 3) {
            emit(ev(ins[0], outs[0]), ev(ins[1], outs[0]), ev(ins[2], outs[0]));
          } else {  // quad across the tet
            int v00 = ev(ins[0], outs[0]), v01 = ev(ins[0], outs[1]);
            int v10 = ev(ins[1], outs[0]), v11 = ev(ins[1], outs[1]);
            emit(v00, v01, v11);
            emit(v00, v11, v10);
          }
        }
      }

  // Drop vertices orphaned by sliver filtering.
  std::vector<int> remap(mesh.vertices.size(), -1);
  TriMesh out;
  for (const auto& t : mesh.triangles) {
    std::array<int, 3> nt;
    for (int m = 0; m < 3; ++m) {
      if (remap[t[m]] < 0) {
        remap[t[m]] = static_cast<int>(out.vertices.size());
        out.vertices.push_back(mesh.vertices[t[m]]);
      }
      nt[m] = remap[t[m]];
    }
    out.triangles.push_back(nt);
  }
  out.validate();
  return out;
}

}  // namespace mirrorpose
