// Copyright 2026 The qphomog Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef QPH_TYPES_HPP
#define QPH_TYPES_HPP

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace qph
{

using Vec2 = Eigen::Vector2d;
using HomogenizedTensor = Eigen::Matrix2d;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using Triplet = Eigen::Triplet<double, int>;

class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

// Thrown when an iterative solve stops short of its tolerance.
class SolverError : public Error
{
public:
  SolverError(const std::string &what, double residual, int iterations)
    : Error(what), residual_(residual), iterations_(iterations)
  {
  }
  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

private:
  double residual_;
  int iterations_;
};

enum class Axis : int
{
  X = 0,
  Y = 1
};

// Accepts 0/1 indices; anything else is an invalid axis.
Axis axis_from_index(int index);
int checked_axis(Axis a);

// Symmetric 2x2 tensor stored as (xx, xy, yy).
struct Sym2
{
  double xx = 0.0;
  double xy = 0.0;
  double yy = 0.0;

  static Sym2 iso(double k) { return {k, 0.0, k}; }
  static Sym2 diag(double kx, double ky) { return {kx, 0.0, ky}; }

  Vec2 apply(const Vec2 &v) const { return {xx * v[0] + xy * v[1], xy * v[0] + yy * v[1]}; }
  double component(int r, int c) const { return r == c ? (r == 0 ? xx : yy) : xy; }
  Eigen::Matrix2d matrix() const
  {
    Eigen::Matrix2d m;
    m << xx, xy, xy, yy;
    return m;
  }
  double min_eig() const
  {
    double m = 0.5 * (xx + yy), d = std::hypot(0.5 * (xx - yy), xy);
    return m - d;
  }
  double max_eig() const
  {
    double m = 0.5 * (xx + yy), d = std::hypot(0.5 * (xx - yy), xy);
    return m + d;
  }
  bool is_spd() const { return xx > 0.0 && xx * yy - xy * xy > 0.0; }
  bool is_zero() const { return xx == 0.0 && xy == 0.0 && yy == 0.0; }

  Sym2 &operator+=(const Sym2 &o)
  {
    xx += o.xx;
    xy += o.xy;
    yy += o.yy;
    return *this;
  }
  friend Sym2 operator+(Sym2 a, const Sym2 &b) { return a += b; }
  friend Sym2 operator-(const Sym2 &a, const Sym2 &b) { return {a.xx - b.xx, a.xy - b.xy, a.yy - b.yy}; }
  friend Sym2 operator*(double s, const Sym2 &a) { return {s * a.xx, s * a.xy, s * a.yy}; }
  friend bool operator==(const Sym2 &a, const Sym2 &b) = default;
};

}  // namespace qph

#endif  // QPH_TYPES_HPP
