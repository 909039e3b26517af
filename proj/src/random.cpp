#include "diffpac/random.hpp"

namespace diffpac {

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index) {
    std::uint64_t z = master_seed + (index + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

Vector standard_normal_vector(Rng& rng, Eigen::Index dim) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        v(i) = normal(rng);
    }
    return v;
}

void fill_standard_normal(Rng& rng, Matrix& out) {
    std::normal_distribution<double> normal(0.0, 1.0);
    // Row-major fill order so a sample matrix is reproducible row by row.
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        for (Eigen::Index j = 0; j < out.cols(); ++j) {
            out(i, j) = normal(rng);
        }
    }
}

}  // namespace diffpac
