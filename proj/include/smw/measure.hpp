#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "smw/errors.hpp"
#include "smw/rng.hpp"

namespace smw {

// Uniform discrete measure: N atoms in R^d, each carrying mass 1/N. Weights
// are implicit and never stored. Atom i occupies [i*dim, (i+1)*dim) of the
// row-major position buffer. Immutable after construction.
class DiscreteMeasure {
public:
  DiscreteMeasure(std::vector<double> atoms, std::size_t n_atoms, std::size_t dim)
      : atoms_(std::move(atoms)), n_(n_atoms), d_(dim) {
    if (n_ == 0 || d_ == 0) throw ShapeError("measure requires N >= 1 and d >= 1");
    if (atoms_.size() != n_ * d_)
      throw ShapeError("atom buffer holds " + std::to_string(atoms_.size()) +
                       " values, expected " + std::to_string(n_ * d_));
  }

  // 1D measure from a flat list of values.
  static DiscreteMeasure from_values(std::vector<double> values) {
    const std::size_t n = values.size();
    return DiscreteMeasure(std::move(values), n, 1);
  }

  std::size_t n_atoms() const { return n_; }
  std::size_t dim() const { return d_; }
  const std::vector<double>& data() const { return atoms_; }

  std::span<const double> atom(std::size_t i) const {
    return std::span<const double>(atoms_.data() + i * d_, d_);
  }

  // Scalar position of atom i; only meaningful when dim() == 1.
  double value1d(std::size_t i) const { return atoms_[i]; }

private:
  std::vector<double> atoms_;
  std::size_t n_;
  std::size_t d_;
};

namespace detail {

// Structural agreement only (dimension and atom count); finiteness is the
// more expensive scan done by validate_set.
inline void check_aligned(std::span<const DiscreteMeasure> measures) {
  for (std::size_t p = 1; p < measures.size(); ++p) {
    if (measures[p].dim() != measures[0].dim())
      throw DimensionMismatch("measure " + std::to_string(p) + " has dimension " +
                              std::to_string(measures[p].dim()) + ", expected " +
                              std::to_string(measures[0].dim()));
    if (measures[p].n_atoms() != measures[0].n_atoms())
      throw AtomCountMismatch("measure " + std::to_string(p) + " has " +
                              std::to_string(measures[p].n_atoms()) + " atoms, expected " +
                              std::to_string(measures[0].n_atoms()));
  }
}

}  // namespace detail

// Every coordinate must be finite.
inline void validate_measure(const DiscreteMeasure& m) {
  for (double v : m.data())
    if (!std::isfinite(v)) throw NonFinite("measure contains a non-finite coordinate");
}

// Full validation over any list of measures: shared dimension, shared atom
// count, finite coordinates.
inline void validate_set(std::span<const DiscreteMeasure> measures) {
  detail::check_aligned(measures);
  for (const auto& m : measures) validate_measure(m);
}

// Ordered family of P >= 2 measures sharing dimension and atom count (the
// equal-count requirement is what makes transport maps permutations).
// Structural invariants are enforced at construction.
class MeasureSet {
public:
  explicit MeasureSet(std::vector<DiscreteMeasure> measures) : measures_(std::move(measures)) {
    if (measures_.size() < 2) throw ShapeError("a measure set requires P >= 2 members");
    detail::check_aligned(measures_);
  }

  std::size_t p_count() const { return measures_.size(); }
  std::size_t dim() const { return measures_[0].dim(); }
  std::size_t n_atoms() const { return measures_[0].n_atoms(); }

  const DiscreteMeasure& operator[](std::size_t p) const { return measures_[p]; }
  std::span<const DiscreteMeasure> measures() const { return measures_; }

  auto begin() const { return measures_.begin(); }
  auto end() const { return measures_.end(); }

private:
  std::vector<DiscreteMeasure> measures_;
};

inline void validate_set(const MeasureSet& set) { validate_set(set.measures()); }

// Weight vector on the P-simplex: nonnegative entries summing to 1 within
// 1e-12 absolute. Validated at construction.
class SimplexWeights {
public:
  explicit SimplexWeights(std::vector<double> beta) : beta_(std::move(beta)) {
    if (beta_.empty()) throw ShapeError("weight vector is empty");
    double sum = 0.0;
    for (double b : beta_) {
      if (!(b >= 0.0)) throw ShapeError("weights must be nonnegative");
      sum += b;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw ShapeError("weights sum to " + std::to_string(sum) + ", expected 1");
  }

  static SimplexWeights uniform(std::size_t p_count) {
    return SimplexWeights(std::vector<double>(p_count, 1.0 / static_cast<double>(p_count)));
  }

  std::size_t size() const { return beta_.size(); }
  double operator[](std::size_t p) const { return beta_[p]; }
  std::span<const double> values() const { return beta_; }

private:
  std::vector<double> beta_;
};

// Inner product of every atom with a unit direction; atom order is preserved
// (sorting is a separate concern). The direction must be unit length within
// 1e-12.
inline DiscreteMeasure project(const DiscreteMeasure& m, std::span<const double> direction) {
  if (direction.size() != m.dim())
    throw DimensionMismatch("direction has dimension " + std::to_string(direction.size()) +
                            ", measure has " + std::to_string(m.dim()));
  double norm_sq = 0.0;
  for (double c : direction) norm_sq += c * c;
  if (std::abs(std::sqrt(norm_sq) - 1.0) > 1e-12)
    throw NonUnitDirection("direction norm is " + std::to_string(std::sqrt(norm_sq)));

  const std::size_t n = m.n_atoms(), d = m.dim();
  std::vector<double> out(n);
  const double* a = m.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) s += a[i * d + c] * direction[c];
    out[i] = s;
  }
  return DiscreteMeasure(std::move(out), n, 1);
}

// ---------------------------------------------------------------------------
// File formats.
//
// csv:    one atom per row, d comma-separated decimal floats, lines starting
//         with '#' ignored. Written with 17 significant digits, which
//         round-trips doubles exactly.
// binary: magic "SMW1", uint32 N, uint32 d, then N*d little-endian float64
//         row-major.
// ---------------------------------------------------------------------------

enum class MeasureFormat { csv, binary };

namespace detail {

inline void put_u32_le(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

inline std::uint32_t get_u32_le(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw ParseError("truncated binary measure file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f64_le(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  os.write(b, 8);
}

inline double get_f64_le(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw ParseError("truncated binary measure file");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

inline double parse_double(const std::string& field) {
  const char* s = field.c_str();
  char* end = nullptr;
  double v = std::strtod(s, &end);
  if (end == s) throw ParseError("cannot parse '" + field + "' as a number");
  while (*end == ' ' || *end == '\t') ++end;
  if (*end != '\0') throw ParseError("trailing junk after number in '" + field + "'");
  return v;
}

}  // namespace detail

inline void save_measure(const DiscreteMeasure& m, const std::string& path,
                         MeasureFormat format) {
  std::ofstream os(path, format == MeasureFormat::binary
                             ? std::ios::binary | std::ios::trunc
                             : std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");

  if (format == MeasureFormat::binary) {
    os.write("SMW1", 4);
    detail::put_u32_le(os, static_cast<std::uint32_t>(m.n_atoms()));
    detail::put_u32_le(os, static_cast<std::uint32_t>(m.dim()));
    for (double v : m.data()) detail::put_f64_le(os, v);
  } else {
    char buf[64];
    for (std::size_t i = 0; i < m.n_atoms(); ++i) {
      for (std::size_t c = 0; c < m.dim(); ++c) {
        std::snprintf(buf, sizeof(buf), "%.17g", m.data()[i * m.dim() + c]);
        os << (c ? "," : "") << buf;
      }
      os << '\n';
    }
  }
  if (!os) throw IoError("write to '" + path + "' failed");
}

inline DiscreteMeasure load_measure(const std::string& path, MeasureFormat format) {
  std::ifstream is(path, format == MeasureFormat::binary ? std::ios::binary
                                                         : std::ios::in);
  if (!is) throw IoError("cannot open '" + path + "' for reading");

  if (format == MeasureFormat::binary) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "SMW1", 4) != 0)
      throw ParseError("'" + path + "' is not a binary measure file");
    const std::uint32_t n = detail::get_u32_le(is);
    const std::uint32_t d = detail::get_u32_le(is);
    if (n == 0 || d == 0) throw ParseError("binary measure declares zero size");
    std::vector<double> atoms;
    atoms.reserve(static_cast<std::size_t>(n) * d);
    for (std::size_t i = 0; i < static_cast<std::size_t>(n) * d; ++i)
      atoms.push_back(detail::get_f64_le(is));
    return DiscreteMeasure(std::move(atoms), n, d);
  }

  std::vector<double> atoms;
  std::size_t dim = 0, rows = 0;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::size_t fields = 0, start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      std::string field = line.substr(start, comma == std::string::npos ? std::string::npos
                                                                        : comma - start);
      atoms.push_back(detail::parse_double(field));
      ++fields;
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (rows == 0) {
      dim = fields;
    } else if (fields != dim) {
      throw ShapeError("row " + std::to_string(rows) + " of '" + path + "' has " +
                       std::to_string(fields) + " fields, expected " + std::to_string(dim));
    }
    ++rows;
  }
  if (rows == 0) throw ParseError("'" + path + "' contains no data rows");
  return DiscreteMeasure(std::move(atoms), rows, dim);
}

// P measures of N iid draws from isotropic Gaussians N(m_p, sigma^2 I); each
// per-measure mean is drawn uniformly from [-mean_spread, mean_spread]^d.
// Bitwise reproducible from the seed.
inline MeasureSet generate_gaussians(std::size_t p_count, std::size_t n_atoms, std::size_t dim,
                                     double mean_spread, double sigma, std::uint64_t seed) {
  if (p_count < 2) throw ShapeError("a measure set requires P >= 2 members");
  if (n_atoms == 0 || dim == 0) throw ShapeError("counts must be positive");
  if (!(mean_spread >= 0.0) || !(sigma >= 0.0))
    throw std::invalid_argument("mean_spread and sigma must be nonnegative");

  std::vector<DiscreteMeasure> measures;
  measures.reserve(p_count);
  for (std::size_t p = 0; p < p_count; ++p) {
    Rng g(substream(seed, p));
    std::vector<double> mean(dim);
    for (std::size_t c = 0; c < dim; ++c) mean[c] = g.uniform(-mean_spread, mean_spread);
    std::vector<double> atoms(n_atoms * dim);
    for (std::size_t i = 0; i < n_atoms; ++i)
      for (std::size_t c = 0; c < dim; ++c) atoms[i * dim + c] = mean[c] + sigma * g.normal();
    measures.emplace_back(std::move(atoms), n_atoms, dim);
  }
  return MeasureSet(std::move(measures));
}

}  // namespace smw
