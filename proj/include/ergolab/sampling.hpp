#pragma once

// Seeded random operators with controlled Jordan structure.

#include <random>
#include <vector>

#include "ergolab/operator.hpp"

namespace ergolab {

using Rng = std::mt19937_64;

/// One Jordan block of the seed matrix.
struct JordanPiece {
  Complex lambda;
  Index size = 1;
};

struct SamplerOptions {
  Index min_dim = 2;
  Index max_dim = 20;
  double interior_radius = 0.9;  ///< |lambda| bound for non-unimodular eigenvalues
  Index max_interior_block = 3;
  bool unimodular = true;        ///< allow eigenvalues on the unit circle
};

/// Q J Q^* with Q Haar-unitary and J block diagonal in Jordan blocks.
struct SampledOperator {
  ComplexMatrix op;
  std::vector<JordanPiece> pieces;
};

/// Haar-distributed unitary: QR of a complex Gaussian matrix with the phases
/// of diag(R) moved into Q.
ComplexMatrix random_unitary(Index dim, Rng& rng);

/// Entries uniform in the disk of the given radius.
ComplexMatrix random_dense(Index dim, double radius, Rng& rng);

/// Unimodular count 0/1/2/3 with probability 0.4/0.3/0.2/0.1, drawn from
/// {1, -1, i, -i, e^{2 pi i/3}} or a random angle at least 0.1 from the ones
/// already chosen; their block sizes are 1, 2 or 3 with probability
/// 0.75/0.2/0.05. The rest of the dimension is filled with interior blocks.
SampledOperator sample_operator(Rng& rng, const SamplerOptions& options = {});

}  // namespace ergolab
