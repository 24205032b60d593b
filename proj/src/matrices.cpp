#include "pilotwave/matrices.hpp"

#include <initializer_list>
#include <tuple>

namespace pilotwave {

namespace {

using Entry = std::tuple<int, int, cplx>;  // 1-based row, column

CMat sparse(int n, std::initializer_list<Entry> entries) {
  CMat m = CMat::Zero(n, n);
  for (const auto& [r, c, v] : entries) m(r - 1, c - 1) = v;
  return m;
}

CMat diag(std::initializer_list<double> d) {
  CMat m = CMat::Zero(int(d.size()), int(d.size()));
  int i = 0;
  for (double v : d) m(i, i) = v, ++i;
  return m;
}

const cplx I = kI;

void fill_dkp5(MatrixSet& s) {
  s.gen[0] = sparse(5, {{1, 5, -I}, {5, 1, I}});
  s.gen[1] = sparse(5, {{2, 5, -I}, {5, 2, -I}});
  s.gen[2] = sparse(5, {{3, 5, -I}, {5, 3, -I}});
  s.gen[3] = sparse(5, {{4, 5, -I}, {5, 4, -I}});
  s.gamma_proj = diag({1, 1, 1, 1, 0});
}

void fill_dkp10(MatrixSet& s) {
  s.gen[0] = sparse(10, {{1, 7, -I}, {2, 8, -I}, {3, 9, -I},
                         {7, 1, I}, {8, 2, I}, {9, 3, I}});
  s.gen[1] = sparse(10, {{1, 10, I}, {5, 9, I}, {6, 8, -I},
                         {8, 6, -I}, {9, 5, I}, {10, 1, I}});
  s.gen[2] = sparse(10, {{2, 10, I}, {4, 9, -I}, {6, 7, I},
                         {7, 6, I}, {9, 4, -I}, {10, 2, I}});
  s.gen[3] = sparse(10, {{3, 10, I}, {4, 8, I}, {5, 7, -I},
                         {7, 5, -I}, {8, 4, I}, {10, 3, I}});
  s.gamma_proj = diag({1, 1, 1, 1, 1, 1, 0, 0, 0, 0});
}

void fill_dirac4(MatrixSet& s) {
  const CMat sx = sparse(2, {{1, 2, 1}, {2, 1, 1}});
  const CMat sy = sparse(2, {{1, 2, -I}, {2, 1, I}});
  const CMat sz = sparse(2, {{1, 1, 1}, {2, 2, -1}});
  s.gen[0] = diag({1, 1, -1, -1});
  const CMat* sig[3] = {&sx, &sy, &sz};
  for (int i = 0; i < 3; ++i) {
    CMat g = CMat::Zero(4, 4);
    g.block(0, 2, 2, 2) = *sig[i];
    g.block(2, 0, 2, 2) = -*sig[i];
    s.gen[i + 1] = g;
  }
}

}  // namespace

MatrixKind parse_matrix_kind(const std::string& s) {
  if (s == "dirac4") return MatrixKind::dirac4;
  if (s == "dkp5") return MatrixKind::dkp5;
  if (s == "dkp10") return MatrixKind::dkp10;
  throw Error(ErrorCategory::config, "kind", "unknown matrix kind '" + s + "'");
}

const char* to_string(MatrixKind k) {
  switch (k) {
    case MatrixKind::dirac4: return "dirac4";
    case MatrixKind::dkp5: return "dkp5";
    case MatrixKind::dkp10: return "dkp10";
  }
  return "?";
}

MatrixSet build_matrix_set(MatrixKind kind) {
  MatrixSet s;
  s.kind = kind;
  switch (kind) {
    case MatrixKind::dirac4: s.dim = 4; fill_dirac4(s); break;
    case MatrixKind::dkp5: s.dim = 5; fill_dkp5(s); break;
    case MatrixKind::dkp10: s.dim = 10; fill_dkp10(s); break;
  }
  const CMat id = s.identity();
  for (int i = 0; i < 3; ++i)
    s.beta_tilde[i] = s.gen[0] * s.gen[i + 1] - s.gen[i + 1] * s.gen[0];
  s.eta0 = 2.0 * s.gen[0] * s.gen[0] - id;
  if (kind == MatrixKind::dirac4) {
    for (int i = 0; i < 3; ++i) s.alpha[i] = s.gen[0] * s.gen[i + 1];
    s.gamma_proj = id;
  }
  return s;
}

double algebra_defect(const MatrixSet& m) {
  const CMat id = m.identity();
  double worst = 0.0;
  if (m.kind == MatrixKind::dirac4) {
    for (int mu = 0; mu < 4; ++mu)
      for (int nu = 0; nu < 4; ++nu) {
        const CMat d = m.gen[mu] * m.gen[nu] + m.gen[nu] * m.gen[mu] -
                       2.0 * metric(mu, nu) * id;
        worst = std::max(worst, d.cwiseAbs().maxCoeff());
      }
    return worst;
  }
  for (int mu = 0; mu < 4; ++mu)
    for (int nu = 0; nu < 4; ++nu)
      for (int la = 0; la < 4; ++la) {
        const CMat d = m.gen[mu] * m.gen[nu] * m.gen[la] +
                       m.gen[la] * m.gen[nu] * m.gen[mu] -
                       m.gen[mu] * metric(nu, la) - m.gen[la] * metric(nu, mu);
        worst = std::max(worst, d.cwiseAbs().maxCoeff());
      }
  return worst;
}

double projector_defect(const MatrixSet& m) {
  const CMat& g = m.gamma_proj;
  double worst = (g * g - g).cwiseAbs().maxCoeff();
  if (m.kind == MatrixKind::dirac4) return worst;
  for (int mu = 0; mu < 4; ++mu) {
    const CMat d = g * m.gen[mu] + m.gen[mu] * g - m.gen[mu];
    worst = std::max(worst, d.cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace pilotwave
