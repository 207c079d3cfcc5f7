#ifndef LSMBD_SYNTHDATA_HPP
#define LSMBD_SYNTHDATA_HPP

#include <cmath>
#include <cstdint>
#include <optional>

#include "lsmbd/matrix.hpp"
#include "lsmbd/operators.hpp"
#include "lsmbd/rng.hpp"

namespace lsmbd {

struct DataGenSpec {
  ProblemDims dims;
  std::uint64_t seed = 0;
};

struct Dataset {
  Matrix x;                 // sparse filters, M_x x N
  Matrix y;                 // full measurements, M_y x N
  std::optional<Matrix> z;  // compressed measurements, M_z x N
};

// Gaussian-shaped source s[k] = exp(-6 (k - floor(M_s/2))^2), unit-normalized.
inline Source gen_source(std::size_t m_s) {
  if (m_s == 0) throw ParameterError("gen_source: M_s must be positive");
  Signal s(m_s);
  const double center = std::floor(static_cast<double>(m_s) / 2.0);
  for (std::size_t k = 0; k < m_s; ++k) {
    const double d = static_cast<double>(k) - center;
    s[k] = std::exp(-6.0 * d * d);
  }
  const double nrm = norm2(s);
  for (double& v : s) v /= nrm;
  return Source(std::move(s));
}

// Columns with exactly L nonzeros each: support uniform without replacement
// over {0, ..., M_x-1}, amplitudes i.i.d. Unif(0, 1).
inline Matrix gen_sparse_filters(const ProblemDims& dims, std::size_t count,
                                 Philox& rng) {
  if (dims.l > dims.m_x) throw ParameterError("gen_sparse_filters: L exceeds M_x");
  Matrix x(dims.m_x, count);
  for (std::size_t n = 0; n < count; ++n) {
    const auto support = rng.sample_without_replacement(dims.m_x, dims.l);
    double* c = x.col(n);
    for (std::size_t idx : support) c[idx] = rng.next_double();
  }
  return x;
}

// Noiseless measurements Y = C_s X columnwise; Z = Phi Y when a compression
// filter is supplied. Generation is single-threaded so a seed fully
// determines the dataset.
inline Dataset gen_dataset(const DataGenSpec& spec, const Source& src,
                           const CompressionFilter* hf = nullptr) {
  if (src.length() != spec.dims.m_s)
    throw DimensionError("gen_dataset: source length disagrees with dims");
  if (hf != nullptr && (hf->m_y != spec.dims.m_y || hf->m_z != spec.dims.m_z))
    throw DimensionError("gen_dataset: compression filter disagrees with dims");

  Philox rng(spec.seed);
  Dataset ds;
  ds.x = gen_sparse_filters(spec.dims, spec.dims.n, rng);
  ds.y = Matrix(spec.dims.m_y, spec.dims.n);
  for (std::size_t n = 0; n < spec.dims.n; ++n)
    ds.y.set_col(n, apply_source(src, ds.x.col_vec(n)));
  if (hf != nullptr) {
    Matrix z(spec.dims.m_z, spec.dims.n);
    for (std::size_t n = 0; n < spec.dims.n; ++n)
      z.set_col(n, apply_compression(*hf, ds.y.col_vec(n)));
    ds.z = std::move(z);
  }
  return ds;
}

}  // namespace lsmbd

#endif  // LSMBD_SYNTHDATA_HPP
