// Multi-index bookkeeping for total-degree polynomial spaces in up to
// three variables (two space dimensions plus time).

#pragma once

#include <array>
#include <cassert>
#include <stdexcept>
#include <vector>

namespace stvem {

// Exponent tuple of a monomial; only the first nvars entries are used.
struct MultiIndex {
  std::array<int, 3> e{0, 0, 0};

  int degree() const { return e[0] + e[1] + e[2]; }
};

// dim P_p(R^n) = C(p + n, n)
inline int dim_poly_space(int degree, int num_vars) {
  if (degree < 0 || num_vars < 1)
    throw std::invalid_argument("dim_poly_space: degree >= 0 and num_vars >= 1 required");
  long dim = 1;
  for (int k = 1; k <= num_vars; ++k)
    dim = dim * (degree + k) / k;
  return static_cast<int>(dim);
}

namespace detail {
inline void enumerate_degree(int nvars, int var, int remaining, MultiIndex& mi,
                             std::vector<MultiIndex>& out) {
  if (var == nvars - 1) {
    mi.e[var] = remaining;
    out.push_back(mi);
    mi.e[var] = 0;
    return;
  }
  for (int k = remaining; k >= 0; --k) {
    mi.e[var] = k;
    enumerate_degree(nvars, var + 1, remaining - k, mi, out);
  }
  mi.e[var] = 0;
}
} // namespace detail

// All multi-indices of total degree <= p, graded lexicographic: degrees
// 0, 1, ..., p in order, and within each degree the exponent of the first
// variable decreases first. The first dim P_q(n) entries are exactly the
// indices of degree <= q, for every q <= p.
inline std::vector<MultiIndex> graded_lex_indices(int degree, int nvars) {
  assert(nvars >= 1 && nvars <= 3);
  std::vector<MultiIndex> out;
  out.reserve(dim_poly_space(degree, nvars));
  MultiIndex mi;
  for (int d = 0; d <= degree; ++d)
    detail::enumerate_degree(nvars, 0, d, mi, out);
  return out;
}

} // namespace stvem
