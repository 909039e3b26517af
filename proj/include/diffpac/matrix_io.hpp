#pragma once

#include <iosfwd>
#include <string>

#include "diffpac/linalg.hpp"

namespace diffpac {

// Text fixture format: first line `dim`, then `dim` rows of `dim`
// whitespace-separated decimal reals. A vector is one line of reals.
// A Gaussian fixture is a covariance matrix followed by one mean line.
// Parse failures throw ConfigError.

Matrix read_matrix(std::istream& in);
Matrix read_matrix_file(const std::string& path);
Vector read_vector(std::istream& in);
Vector read_vector_file(const std::string& path);

void write_matrix(std::ostream& out, const Matrix& m);
void write_vector(std::ostream& out, const Vector& v);
std::string matrix_to_string(const Matrix& m);

struct GaussianFixture {
    Matrix covariance;
    Vector mean;
};

GaussianFixture read_gaussian_fixture(std::istream& in);
GaussianFixture read_gaussian_fixture_file(const std::string& path);

}  // namespace diffpac
