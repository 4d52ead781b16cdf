// Global numbering of the slab degrees of freedom. Interior time-like
// facet blocks come first (mesh facet order), then bulk blocks, then
// initial-time blocks, element order as in the mesh; boundary facet
// blocks sit in a constrained tail. Sharing one block per interior facet
// enforces the moment-continuity constraints of the nonconforming space
// exactly, and boundary blocks carry the Dirichlet data.

#pragma once

#include "element.hpp"
#include "mesh.hpp"

#include <vector>

namespace stvem {

class GlobalDofMap {
public:
  GlobalDofMap() = default;

  GlobalDofMap(const SpatialMesh& mesh, int degree) : p_(degree), dim_(mesh.dim) {
    n_facet_each_ = dim_poly_space(p_, dim_);
    n_bulk_each_ = dim_poly_space(p_ - 1, dim_ + 1);
    n_bottom_each_ = dim_poly_space(p_, dim_);

    facet_block_.assign(mesh.n_facets(), -1);
    long at = 0;
    for (int fi = 0; fi < mesh.n_facets(); ++fi)
      if (!mesh.facets[fi].boundary) {
        facet_block_[fi] = at;
        at += n_facet_each_;
      }
    bulk_block_.resize(mesh.n_cells());
    for (int ic = 0; ic < mesh.n_cells(); ++ic) {
      bulk_block_[ic] = at;
      at += n_bulk_each_;
    }
    bottom_block_.resize(mesh.n_cells());
    for (int ic = 0; ic < mesh.n_cells(); ++ic) {
      bottom_block_[ic] = at;
      at += n_bottom_each_;
    }
    n_free_ = at;
    for (int fi = 0; fi < mesh.n_facets(); ++fi)
      if (mesh.facets[fi].boundary) {
        facet_block_[fi] = at;
        at += n_facet_each_;
      }
    n_total_ = at;

    // per-cell local-to-global tables
    cell_dofs_.resize(mesh.n_cells());
    for (int ic = 0; ic < mesh.n_cells(); ++ic) {
      const auto& geom = mesh.cell_geom[ic];
      DofLayout layout;
      layout.p = p_;
      layout.dim = dim_;
      layout.n_bulk = n_bulk_each_;
      layout.n_facet_each = n_facet_each_;
      layout.n_facets = static_cast<int>(geom.facet_ids.size());
      layout.n_bottom = n_bottom_each_;
      auto& table = cell_dofs_[ic];
      table.resize(layout.total());
      for (int a = 0; a < layout.n_bulk; ++a)
        table[layout.bulk_offset() + a] = bulk_block_[ic] + a;
      for (int f = 0; f < layout.n_facets; ++f)
        for (int b = 0; b < layout.n_facet_each; ++b)
          table[layout.facet_offset(f) + b] = facet_block_[geom.facet_ids[f]] + b;
      for (int g = 0; g < layout.n_bottom; ++g)
        table[layout.bottom_offset() + g] = bottom_block_[ic] + g;
    }
  }

  int degree() const { return p_; }
  long n_free() const { return n_free_; }
  long n_total() const { return n_total_; }
  long facet_block(int facet) const { return facet_block_[facet]; }
  long bulk_block(int cell) const { return bulk_block_[cell]; }
  long bottom_block(int cell) const { return bottom_block_[cell]; }
  int n_facet_each() const { return n_facet_each_; }
  int n_bulk_each() const { return n_bulk_each_; }
  int n_bottom_each() const { return n_bottom_each_; }
  const std::vector<long>& cell_dofs(int cell) const { return cell_dofs_[cell]; }

private:
  int p_ = 1;
  int dim_ = 1;
  int n_facet_each_ = 0, n_bulk_each_ = 0, n_bottom_each_ = 0;
  long n_free_ = 0, n_total_ = 0;
  std::vector<long> facet_block_, bulk_block_, bottom_block_;
  std::vector<std::vector<long>> cell_dofs_;
};

} // namespace stvem
