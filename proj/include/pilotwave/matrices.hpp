#pragma once

#include "pilotwave/core.hpp"

#include <string>

namespace pilotwave {

enum class MatrixKind { dirac4, dkp5, dkp10 };

MatrixKind parse_matrix_kind(const std::string& s);
const char* to_string(MatrixKind k);

// Generators and derived matrices of a first-order relativistic wave
// equation. For dirac4 the generators are the gamma matrices in the
// Dirac-Pauli representation; for the DKP kinds they are the beta matrices.
struct MatrixSet {
  MatrixKind kind;
  int dim = 0;
  std::array<CMat, 4> gen;        // gamma^mu or beta^mu
  std::array<CMat, 3> beta_tilde; // gen0 gen_i - gen_i gen0
  CMat eta0;                      // 2 gen0^2 - 1
  CMat gamma_proj;                // massless projector (DKP kinds only)
  std::array<CMat, 3> alpha;      // gamma0 gamma^i (dirac4 only)

  CMat identity() const { return CMat::Identity(dim, dim); }
};

MatrixSet build_matrix_set(MatrixKind kind);

// Metric diag(+1, -1, -1, -1).
inline double metric(int mu, int nu) {
  return mu != nu ? 0.0 : (mu == 0 ? 1.0 : -1.0);
}

// Largest entrywise deviation from the defining algebra: the anticommutator
// for dirac4, the trilinear DKP relation otherwise.
double algebra_defect(const MatrixSet& m);
// Largest entrywise deviation of gamma^2 = gamma and gamma b + b gamma = b.
double projector_defect(const MatrixSet& m);

}  // namespace pilotwave
