// Scaled monomial bases on prisms, spatial cells, time-like facets, and
// time intervals. Every basis function has the form
//   prod_v ((z_v - c_v) / h_v)^{e_v},   |e| <= p,
// with the center c at the domain barycenter and per-variable scales h,
// so that projector systems stay well conditioned under refinement.

#pragma once

#include "multi_index.hpp"

#include <Eigen/Dense>
#include <stdexcept>

namespace stvem {

enum class DomainKind { Prism, SpatialCell, TimeLikeFacet, TimeInterval };

class ScaledMonomialBasis {
public:
  ScaledMonomialBasis() = default;

  // center/scale hold one entry per variable, in the domain's variable
  // order: prism (x_1..x_d, t); spatial cell (x_1..x_d); time-like facet
  // (arc length, t) in 2+1D or (t) in 1+1D; time interval (t).
  ScaledMonomialBasis(DomainKind kind, int nvars, int degree,
                      const Eigen::Vector3d& center, const Eigen::Vector3d& scale)
      : kind_(kind), nvars_(nvars), degree_(degree), center_(center), scale_(scale),
        exps_(graded_lex_indices(degree, nvars)) {
    for (int v = 0; v < nvars_; ++v)
      if (!(scale_[v] > 0.0))
        throw std::invalid_argument("ScaledMonomialBasis: nonpositive scale");
  }

  DomainKind kind() const { return kind_; }
  int nvars() const { return nvars_; }
  int degree() const { return degree_; }
  int size() const { return static_cast<int>(exps_.size()); }
  const std::vector<MultiIndex>& exponents() const { return exps_; }
  const Eigen::Vector3d& center() const { return center_; }
  const Eigen::Vector3d& scale() const { return scale_; }

  // Values of all basis functions at the given physical points
  // (npts x nvars). Entry (i, j) = m_j(point_i).
  Eigen::MatrixXd eval(const Eigen::MatrixXd& points) const {
    Eigen::MatrixXd scaled = scale_points(points);
    Eigen::MatrixXd vals(points.rows(), size());
    for (int j = 0; j < size(); ++j)
      for (Eigen::Index i = 0; i < points.rows(); ++i)
        vals(i, j) = monomial(scaled.row(i), exps_[j]);
    return vals;
  }

  // Derivative with respect to variable `var` (0-based, physical units).
  Eigen::MatrixXd eval_derivative(const Eigen::MatrixXd& points, int var) const {
    check_var(var);
    Eigen::MatrixXd scaled = scale_points(points);
    Eigen::MatrixXd vals(points.rows(), size());
    for (int j = 0; j < size(); ++j) {
      MultiIndex mi = exps_[j];
      const int k = mi.e[var];
      if (k == 0) {
        vals.col(j).setZero();
        continue;
      }
      mi.e[var] = k - 1;
      const double factor = k / scale_[var];
      for (Eigen::Index i = 0; i < points.rows(); ++i)
        vals(i, j) = factor * monomial(scaled.row(i), mi);
    }
    return vals;
  }

  // Second derivative in variable `var`.
  Eigen::MatrixXd eval_second_derivative(const Eigen::MatrixXd& points, int var) const {
    check_var(var);
    Eigen::MatrixXd scaled = scale_points(points);
    Eigen::MatrixXd vals(points.rows(), size());
    for (int j = 0; j < size(); ++j) {
      MultiIndex mi = exps_[j];
      const int k = mi.e[var];
      if (k < 2) {
        vals.col(j).setZero();
        continue;
      }
      mi.e[var] = k - 2;
      const double factor = k * (k - 1) / (scale_[var] * scale_[var]);
      for (Eigen::Index i = 0; i < points.rows(); ++i)
        vals(i, j) = factor * monomial(scaled.row(i), mi);
    }
    return vals;
  }

  // Spatial Laplacian on a prism/spatial cell with dim_space leading
  // spatial variables.
  Eigen::MatrixXd eval_spatial_laplacian(const Eigen::MatrixXd& points, int dim_space) const {
    Eigen::MatrixXd vals = eval_second_derivative(points, 0);
    for (int v = 1; v < dim_space; ++v)
      vals += eval_second_derivative(points, v);
    return vals;
  }

private:
  void check_var(int var) const {
    if (var < 0 || var >= nvars_)
      throw std::invalid_argument("ScaledMonomialBasis: variable index out of range");
  }

  Eigen::MatrixXd scale_points(const Eigen::MatrixXd& points) const {
    if (points.cols() != nvars_)
      throw std::invalid_argument("ScaledMonomialBasis: point dimension mismatch");
    Eigen::MatrixXd scaled(points.rows(), nvars_);
    for (int v = 0; v < nvars_; ++v)
      scaled.col(v) = (points.col(v).array() - center_[v]) / scale_[v];
    return scaled;
  }

  static double monomial(const Eigen::RowVectorXd& z, const MultiIndex& mi) {
    double val = 1.0;
    for (int v = 0; v < z.size(); ++v)
      for (int k = 0; k < mi.e[v]; ++k)
        val *= z(v);
    return val;
  }

  DomainKind kind_ = DomainKind::Prism;
  int nvars_ = 1;
  int degree_ = 0;
  Eigen::Vector3d center_ = Eigen::Vector3d::Zero();
  Eigen::Vector3d scale_ = Eigen::Vector3d::Ones();
  std::vector<MultiIndex> exps_;
};

} // namespace stvem
