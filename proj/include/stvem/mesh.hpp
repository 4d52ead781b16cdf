// Space-time meshes: a polytopal spatial mesh (segments in 1D,
// polygons in 2D) tensorized with a partition of the time interval.
// Every space-time element is a prism K = K_x x I_n; time-like facets
// F = F_x x I_n carry a fixed unit spatial normal.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace stvem {

struct SpatialFacet {
  std::vector<int> verts;       // 1 vertex in 1D, 2 vertices in 2D
  int cell[2] = {-1, -1};       // incident cells; cell[1] = -1 on the boundary
  Eigen::Vector2d normal = Eigen::Vector2d::Zero();   // fixed unit normal n_Fx
  Eigen::Vector2d tangent = Eigen::Vector2d::Zero();  // 2D: unit, verts[0] -> verts[1]
  Eigen::Vector2d barycenter = Eigen::Vector2d::Zero();
  double measure = 1.0;         // 1 for point facets, length in 2D
  double h = 0.0;               // h_Fx
  bool boundary = false;
};

struct SpatialCellGeometry {
  double measure = 0.0;          // |K_x|
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  double diameter = 0.0;         // h_Kx
  std::vector<int> facet_ids;
  std::vector<double> facet_orientation;  // +1 if facet normal points out of the cell
};

class SpatialMesh {
public:
  int dim = 1;
  std::vector<Eigen::Vector2d> vertices;
  std::vector<std::vector<int>> cells;   // vertex lists, CCW in 2D
  std::vector<SpatialFacet> facets;
  std::vector<SpatialCellGeometry> cell_geom;

  int n_cells() const { return static_cast<int>(cells.size()); }
  int n_facets() const { return static_cast<int>(facets.size()); }
  int n_interior_facets() const {
    int n = 0;
    for (const auto& f : facets) n += f.boundary ? 0 : 1;
    return n;
  }
  double max_diameter() const {
    double h = 0.0;
    for (const auto& c : cell_geom) h = std::max(h, c.diameter);
    return h;
  }
  double domain_measure() const {
    double m = 0.0;
    for (const auto& c : cell_geom) m += c.measure;
    return m;
  }
  std::vector<Eigen::Vector2d> cell_vertices(int ic) const {
    std::vector<Eigen::Vector2d> v;
    v.reserve(cells[ic].size());
    for (int iv : cells[ic]) v.push_back(vertices[iv]);
    return v;
  }

  // Fills facets/cell_geom from vertices+cells. h_Fx follows the
  // min-of-neighbours rule on interior facets.
  void finalize();
};

struct TimePartition {
  std::vector<double> knots;   // 0 = t_0 < ... < t_N = T

  int num_slabs() const { return static_cast<int>(knots.size()) - 1; }
  double slab_start(int n) const { return knots[n]; }
  double slab_end(int n) const { return knots[n + 1]; }
  double slab_length(int n) const { return knots[n + 1] - knots[n]; }
  double final_time() const { return knots.back(); }
  double max_length() const {
    double h = 0.0;
    for (int n = 0; n < num_slabs(); ++n) h = std::max(h, slab_length(n));
    return h;
  }
};

struct SpaceTimeMesh {
  SpatialMesh spatial;
  TimePartition time;

  // h_K = sqrt(h_Kx^2 + h_In^2)
  double prism_diameter(int cell, int slab) const {
    const double hx = spatial.cell_geom[cell].diameter;
    const double ht = time.slab_length(slab);
    return std::sqrt(hx * hx + ht * ht);
  }
  double max_diameter() const {
    double h = 0.0;
    for (int n = 0; n < time.num_slabs(); ++n)
      for (int c = 0; c < spatial.n_cells(); ++c)
        h = std::max(h, prism_diameter(c, n));
    return h;
  }
};

//------------------------------------------------------------------------------
// Geometry helpers
//------------------------------------------------------------------------------

namespace detail {

inline double polygon_area2(const std::vector<Eigen::Vector2d>& v) {
  double a2 = 0.0;
  const int n = static_cast<int>(v.size());
  for (int i = 0; i < n; ++i) {
    const auto& p = v[i];
    const auto& q = v[(i + 1) % n];
    a2 += p.x() * q.y() - q.x() * p.y();
  }
  return a2;
}

inline Eigen::Vector2d polygon_centroid(const std::vector<Eigen::Vector2d>& v, double area2) {
  Eigen::Vector2d c(0.0, 0.0);
  const int n = static_cast<int>(v.size());
  for (int i = 0; i < n; ++i) {
    const auto& p = v[i];
    const auto& q = v[(i + 1) % n];
    c += (p.x() * q.y() - q.x() * p.y()) * (p + q);
  }
  return c / (3.0 * area2);
}

inline double polygon_diameter(const std::vector<Eigen::Vector2d>& v) {
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = i + 1; j < v.size(); ++j)
      d = std::max(d, (v[i] - v[j]).norm());
  return d;
}

} // namespace detail

inline void SpatialMesh::finalize() {
  const int nc = n_cells();
  cell_geom.assign(nc, {});

  if (dim == 1) {
    for (int ic = 0; ic < nc; ++ic) {
      const double a = vertices[cells[ic][0]].x();
      const double b = vertices[cells[ic][1]].x();
      if (!(b > a)) throw std::runtime_error("SpatialMesh: degenerate 1D cell " + std::to_string(ic));
      cell_geom[ic].measure = b - a;
      cell_geom[ic].diameter = b - a;
      cell_geom[ic].centroid = Eigen::Vector2d(0.5 * (a + b), 0.0);
    }
    // one point facet per vertex
    std::map<int, std::vector<int>> cells_of_vertex;
    for (int ic = 0; ic < nc; ++ic)
      for (int iv : cells[ic])
        cells_of_vertex[iv].push_back(ic);
    facets.clear();
    for (int iv = 0; iv < static_cast<int>(vertices.size()); ++iv) {
      SpatialFacet f;
      f.verts = {iv};
      const auto& inc = cells_of_vertex[iv];
      if (inc.empty() || inc.size() > 2)
        throw std::runtime_error("SpatialMesh: bad vertex incidence in 1D mesh");
      f.cell[0] = inc[0];
      f.cell[1] = inc.size() == 2 ? inc[1] : -1;
      f.boundary = inc.size() == 1;
      f.normal = Eigen::Vector2d(1.0, 0.0);   // global choice: +x
      f.barycenter = vertices[iv];
      f.measure = 1.0;                        // point facets carry unit measure
      facets.push_back(f);
    }
  } else if (dim == 2) {
    // undirected edge -> facet index
    std::map<std::pair<int, int>, int> edge_ids;
    facets.clear();
    for (int ic = 0; ic < nc; ++ic) {
      const auto& cv = cells[ic];
      const int nv = static_cast<int>(cv.size());
      const auto pts = cell_vertices(ic);
      const double area2 = detail::polygon_area2(pts);
      if (!(area2 > 0.0))
        throw std::runtime_error("SpatialMesh: degenerate or clockwise cell " + std::to_string(ic));
      cell_geom[ic].measure = 0.5 * area2;
      cell_geom[ic].centroid = detail::polygon_centroid(pts, area2);
      cell_geom[ic].diameter = detail::polygon_diameter(pts);
      for (int k = 0; k < nv; ++k) {
        const int a = cv[k], b = cv[(k + 1) % nv];
        const auto key = std::minmax(a, b);
        auto it = edge_ids.find(key);
        if (it == edge_ids.end()) {
          SpatialFacet f;
          f.verts = {key.first, key.second};   // orientation fixed by vertex ids
          f.cell[0] = ic;
          const Eigen::Vector2d d = vertices[key.second] - vertices[key.first];
          f.measure = d.norm();
          if (!(f.measure > 0.0))
            throw std::runtime_error("SpatialMesh: zero-length edge in cell " + std::to_string(ic));
          f.tangent = d / f.measure;
          f.normal = Eigen::Vector2d(f.tangent.y(), -f.tangent.x());
          f.barycenter = 0.5 * (vertices[key.first] + vertices[key.second]);
          edge_ids.emplace(key, static_cast<int>(facets.size()));
          facets.push_back(f);
        } else {
          if (facets[it->second].cell[1] != -1)
            throw std::runtime_error("SpatialMesh: edge shared by more than two cells");
          facets[it->second].cell[1] = ic;
        }
      }
    }
    for (auto& f : facets) f.boundary = (f.cell[1] == -1);
  } else {
    throw std::invalid_argument("SpatialMesh: dim must be 1 or 2");
  }

  // facet h and cell->facet incidence with orientation
  for (int fi = 0; fi < n_facets(); ++fi) {
    auto& f = facets[fi];
    f.h = f.boundary ? cell_geom[f.cell[0]].diameter
                     : std::min(cell_geom[f.cell[0]].diameter, cell_geom[f.cell[1]].diameter);
    for (int side = 0; side < 2; ++side) {
      const int ic = f.cell[side];
      if (ic < 0) continue;
      const Eigen::Vector2d out = f.barycenter - cell_geom[ic].centroid;
      cell_geom[ic].facet_ids.push_back(fi);
      cell_geom[ic].facet_orientation.push_back(out.dot(f.normal) > 0.0 ? 1.0 : -1.0);
    }
  }
}

//------------------------------------------------------------------------------
// Generators
//------------------------------------------------------------------------------

inline SpatialMesh build_cartesian_1d(int num_cells, double a, double b) {
  if (num_cells < 1 || !(b > a))
    throw std::invalid_argument("build_cartesian_1d: need num_cells >= 1 and a < b");
  SpatialMesh mesh;
  mesh.dim = 1;
  for (int i = 0; i <= num_cells; ++i)
    mesh.vertices.emplace_back(a + (b - a) * i / num_cells, 0.0);
  for (int i = 0; i < num_cells; ++i)
    mesh.cells.push_back({i, i + 1});
  mesh.finalize();
  return mesh;
}

struct GeometryReport {
  bool pass = true;
  double star_gamma = 0.0;        // max over cells of h_Kx / rho(centroid)
  int max_facets_per_cell = 0;
  double max_neighbor_ratio = 1.0;
  std::string message;
};

GeometryReport validate_geometry(const SpatialMesh& mesh);

// Structured nx x ny quadrilateral mesh of [ax,bx] x [ay,by]; interior
// vertices are jittered by perturb * min(dx, dy) with a seeded generator.
inline SpatialMesh build_quad_2d(int nx, int ny, double ax, double bx, double ay, double by,
                                 double perturb = 0.0, unsigned seed = 0) {
  if (nx < 1 || ny < 1 || !(bx > ax) || !(by > ay))
    throw std::invalid_argument("build_quad_2d: bad cell counts or rectangle");
  if (perturb < 0.0 || perturb >= 0.3)
    throw std::invalid_argument("build_quad_2d: perturb must lie in [0, 0.3)");
  SpatialMesh mesh;
  mesh.dim = 2;
  const double dx = (bx - ax) / nx, dy = (by - ay) / ny;
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double amp = perturb * std::min(dx, dy);
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) {
      Eigen::Vector2d v(ax + i * dx, ay + j * dy);
      const bool interior = i > 0 && i < nx && j > 0 && j < ny;
      // draw for every vertex so the jitter pattern is independent of which
      // vertices are interior
      const double ux = unit(rng), uy = unit(rng);
      if (interior && amp > 0.0) v += amp * Eigen::Vector2d(ux, uy);
      mesh.vertices.push_back(v);
    }
  auto vid = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      mesh.cells.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)});
  mesh.finalize();
  GeometryReport report = validate_geometry(mesh);
  if (!report.pass)
    throw std::runtime_error("build_quad_2d: perturbation produced an invalid mesh: " + report.message);
  return mesh;
}

inline TimePartition build_time_partition(int num_slabs, double final_time) {
  if (num_slabs < 1 || !(final_time > 0.0))
    throw std::invalid_argument("build_time_partition: need num_slabs >= 1 and T > 0");
  TimePartition part;
  part.knots.resize(num_slabs + 1);
  for (int n = 0; n <= num_slabs; ++n)
    part.knots[n] = final_time * n / num_slabs;
  return part;
}

//------------------------------------------------------------------------------
// Validation: star-shapedness w.r.t. the centroid (G2) and neighbour
// size ratios (G3), reported rather than thrown.
//------------------------------------------------------------------------------

inline GeometryReport validate_geometry(const SpatialMesh& mesh) {
  GeometryReport report;
  for (int ic = 0; ic < mesh.n_cells(); ++ic) {
    const auto& g = mesh.cell_geom[ic];
    report.max_facets_per_cell =
        std::max(report.max_facets_per_cell, static_cast<int>(g.facet_ids.size()));
    if (!(g.measure > 0.0)) {
      report.pass = false;
      report.message = "cell " + std::to_string(ic) + " has nonpositive measure";
      return report;
    }
    if (mesh.dim == 1) {
      report.star_gamma = std::max(report.star_gamma, 2.0); // ball radius = h/2
      continue;
    }
    // distance from centroid to each edge line, signed by outward normal
    double rho = std::numeric_limits<double>::max();
    for (std::size_t k = 0; k < g.facet_ids.size(); ++k) {
      const auto& f = mesh.facets[g.facet_ids[k]];
      const double dist = g.facet_orientation[k] * f.normal.dot(f.barycenter - g.centroid);
      rho = std::min(rho, dist);
    }
    if (!(rho > 1e-12 * g.diameter)) {
      report.pass = false;
      report.message = "cell " + std::to_string(ic) + " is not star-shaped w.r.t. its centroid";
      return report;
    }
    report.star_gamma = std::max(report.star_gamma, g.diameter / rho);
  }
  for (const auto& f : mesh.facets) {
    if (f.boundary) continue;
    const double h0 = mesh.cell_geom[f.cell[0]].diameter;
    const double h1 = mesh.cell_geom[f.cell[1]].diameter;
    report.max_neighbor_ratio =
        std::max({report.max_neighbor_ratio, h0 / h1, h1 / h0});
  }
  return report;
}

//------------------------------------------------------------------------------
// Text dump/load: versioned header, then vertex, cell, and facet tables.
//------------------------------------------------------------------------------

inline void write_mesh(std::ostream& out, const SpatialMesh& mesh) {
  out.precision(17);
  out << "stvem-mesh 1\n";
  out << "dim " << mesh.dim << "\n";
  out << "vertices " << mesh.vertices.size() << "\n";
  for (const auto& v : mesh.vertices) {
    out << v.x();
    if (mesh.dim == 2) out << " " << v.y();
    out << "\n";
  }
  out << "cells " << mesh.cells.size() << "\n";
  for (const auto& c : mesh.cells) {
    out << c.size();
    for (int iv : c) out << " " << iv;
    out << "\n";
  }
  out << "facets " << mesh.facets.size() << "\n";
  for (const auto& f : mesh.facets) {
    out << f.verts.size();
    for (int iv : f.verts) out << " " << iv;
    out << " " << f.cell[0] << " " << f.cell[1]
        << " " << f.normal.x() << " " << f.normal.y() << "\n";
  }
}

inline SpatialMesh read_mesh(std::istream& in) {
  std::string tag;
  int version = 0;
  in >> tag >> version;
  if (tag != "stvem-mesh" || version != 1)
    throw std::runtime_error("read_mesh: unrecognized header");
  SpatialMesh mesh;
  std::size_t count = 0;
  in >> tag >> mesh.dim;
  if (tag != "dim" || (mesh.dim != 1 && mesh.dim != 2))
    throw std::runtime_error("read_mesh: bad dim record");
  in >> tag >> count;
  if (tag != "vertices") throw std::runtime_error("read_mesh: expected vertex table");
  mesh.vertices.resize(count, Eigen::Vector2d::Zero());
  for (auto& v : mesh.vertices) {
    in >> v.x();
    if (mesh.dim == 2) in >> v.y();
  }
  in >> tag >> count;
  if (tag != "cells") throw std::runtime_error("read_mesh: expected cell table");
  mesh.cells.resize(count);
  for (auto& c : mesh.cells) {
    std::size_t nv = 0;
    in >> nv;
    c.resize(nv);
    for (auto& iv : c) in >> iv;
  }
  in >> tag >> count;
  if (tag != "facets") throw std::runtime_error("read_mesh: expected facet table");
  if (!in) throw std::runtime_error("read_mesh: truncated file");
  mesh.finalize();
  // verify the stored facet table against the rebuilt topology
  if (count != mesh.facets.size())
    throw std::runtime_error("read_mesh: facet table does not match cell topology");
  for (auto& f : mesh.facets) {
    std::size_t nv = 0;
    in >> nv;
    if (nv != f.verts.size()) throw std::runtime_error("read_mesh: facet arity mismatch");
    std::vector<int> verts(nv);
    for (auto& iv : verts) in >> iv;
    int c0 = 0, c1 = 0;
    double nx = 0.0, ny = 0.0;
    in >> c0 >> c1 >> nx >> ny;
    if (verts != f.verts || c0 != f.cell[0] || c1 != f.cell[1] ||
        std::abs(nx - f.normal.x()) > 1e-12 || std::abs(ny - f.normal.y()) > 1e-12)
      throw std::runtime_error("read_mesh: facet table does not match cell topology");
  }
  if (!in) throw std::runtime_error("read_mesh: truncated file");
  return mesh;
}

} // namespace stvem
