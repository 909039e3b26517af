#include "diffpac/matrix_io.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include <fmt/format.h>

#include "diffpac/error.hpp"
#include "diffpac/serialize.hpp"

namespace diffpac {

namespace {

std::vector<double> parse_reals(const std::string& line) {
    std::vector<double> values;
    std::istringstream tokens(line);
    std::string token;
    while (tokens >> token) {
        errno = 0;
        char* end = nullptr;
        const double value = std::strtod(token.c_str(), &end);
        if (end != token.c_str() + token.size() || errno == ERANGE) {
            throw ConfigError(fmt::format("not a real number: '{}'", token));
        }
        values.push_back(value);
    }
    return values;
}

bool next_content_line(std::istream& in, std::string& line) {
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") != std::string::npos) {
            return true;
        }
    }
    return false;
}

std::ifstream open_for_reading(const std::string& path) {
    std::ifstream file(path);
    if (!file) {
        throw ConfigError(fmt::format("cannot open '{}'", path));
    }
    return file;
}

}  // namespace

Matrix read_matrix(std::istream& in) {
    std::string line;
    if (!next_content_line(in, line)) {
        throw ConfigError("matrix: missing dimension line");
    }
    const std::vector<double> header = parse_reals(line);
    if (header.size() != 1 || header[0] < 1 || header[0] != static_cast<long>(header[0])) {
        throw ConfigError(fmt::format("matrix: bad dimension line '{}'", line));
    }
    const auto dim = static_cast<Eigen::Index>(header[0]);
    Matrix m(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        if (!next_content_line(in, line)) {
            throw ConfigError(fmt::format("matrix: expected {} rows, got {}", dim, i));
        }
        const std::vector<double> row = parse_reals(line);
        if (static_cast<Eigen::Index>(row.size()) != dim) {
            throw ConfigError(
                fmt::format("matrix: row {} has {} entries, expected {}", i, row.size(), dim));
        }
        for (Eigen::Index j = 0; j < dim; ++j) {
            m(i, j) = row[static_cast<std::size_t>(j)];
        }
    }
    return m;
}

Matrix read_matrix_file(const std::string& path) {
    std::ifstream file = open_for_reading(path);
    try {
        return read_matrix(file);
    } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("{}: {}", path, e.what()));
    }
}

Vector read_vector(std::istream& in) {
    std::string line;
    if (!next_content_line(in, line)) {
        throw ConfigError("vector: missing line");
    }
    const std::vector<double> values = parse_reals(line);
    if (values.empty()) {
        throw ConfigError("vector: empty");
    }
    return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

Vector read_vector_file(const std::string& path) {
    std::ifstream file = open_for_reading(path);
    try {
        return read_vector(file);
    } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("{}: {}", path, e.what()));
    }
}

void write_matrix(std::ostream& out, const Matrix& m) {
    out << m.rows() << '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            out << (j > 0 ? " " : "") << format_real(m(i, j));
        }
        out << '\n';
    }
}

void write_vector(std::ostream& out, const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out << (i > 0 ? " " : "") << format_real(v(i));
    }
    out << '\n';
}

std::string matrix_to_string(const Matrix& m) {
    std::ostringstream out;
    write_matrix(out, m);
    return out.str();
}

GaussianFixture read_gaussian_fixture(std::istream& in) {
    GaussianFixture fixture;
    fixture.covariance = read_matrix(in);
    fixture.mean = read_vector(in);
    if (fixture.mean.size() != fixture.covariance.rows()) {
        throw ConfigError(fmt::format("gaussian fixture: mean has {} entries, covariance is {}x{}",
                                      fixture.mean.size(), fixture.covariance.rows(),
                                      fixture.covariance.cols()));
    }
    return fixture;
}

GaussianFixture read_gaussian_fixture_file(const std::string& path) {
    std::ifstream file = open_for_reading(path);
    try {
        return read_gaussian_fixture(file);
    } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("{}: {}", path, e.what()));
    }
}

}  // namespace diffpac
