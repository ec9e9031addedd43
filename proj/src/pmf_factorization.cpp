#include "mdlpdf/pmf_factorization.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <thread>

#include "mdlpdf/rng.hpp"

namespace mdlpdf {

namespace {

void check_shapes(const PmfModel& model, const DiscretizedDataset& data) {
  if (model.dims() != data.cols())
    fail(ErrorCode::DimensionMismatch, "model has " + std::to_string(model.dims()) + " dimensions, data has " +
                                           std::to_string(data.cols()));
  for (std::size_t n = 0; n < model.dims(); ++n) {
    if (model.factors[n].rows() != data.cardinalities()[n])
      fail(ErrorCode::DimensionMismatch, "factor " + std::to_string(n) + " has " +
                                             std::to_string(model.factors[n].rows()) + " rows, data has " +
                                             std::to_string(data.cardinalities()[n]) + " bins");
    if (model.factors[n].cols() != model.rank())
      fail(ErrorCode::DimensionMismatch, "factor " + std::to_string(n) + " column count differs from rank");
  }
}

/// Splits [0, T) into `threads` contiguous chunks and runs fn(chunk, begin, end).
void for_chunks(std::size_t T, std::size_t threads, const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, T));
  if (threads == 1) {
    fn(0, 0, T);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (std::size_t c = 0; c < threads; ++c) {
    const std::size_t begin = T * c / threads;
    const std::size_t end = T * (c + 1) / threads;
    pool.emplace_back([&fn, c, begin, end] { fn(c, begin, end); });
  }
}

struct LogModel {
  std::vector<double> log_lambda;
  std::vector<Matrix> log_factors;
};

LogModel to_log(const PmfModel& m) {
  LogModel lm;
  lm.log_lambda.resize(m.rank());
  for (std::size_t r = 0; r < m.rank(); ++r) lm.log_lambda[r] = std::log(m.lambda[r]);
  lm.log_factors.reserve(m.dims());
  for (const Matrix& a : m.factors) {
    Matrix la(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t r = 0; r < a.cols(); ++r) la(i, r) = std::log(a(i, r));
    lm.log_factors.push_back(std::move(la));
  }
  return lm;
}

/// log(lambda_r) + sum over observed n of log A_n(x_n, r), for every r.
void component_log_terms(const LogModel& lm, std::span<const std::uint32_t> idx, std::span<const std::uint8_t> obs,
                         std::span<double> out) {
  const std::size_t R = lm.log_lambda.size();
  std::copy(lm.log_lambda.begin(), lm.log_lambda.end(), out.begin());
  for (std::size_t n = 0; n < idx.size(); ++n) {
    if (!obs[n]) continue;
    const auto row = lm.log_factors[n].row(idx[n] - 1);
    for (std::size_t r = 0; r < R; ++r) out[r] += row[r];
  }
}

std::vector<double> flatten(const PmfModel& m) {
  std::vector<double> v(m.lambda);
  for (const Matrix& a : m.factors) v.insert(v.end(), a.data().begin(), a.data().end());
  return v;
}

PmfModel unflatten_like(const PmfModel& shape, std::span<const double> v) {
  PmfModel m;
  std::size_t pos = 0;
  m.lambda.assign(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(shape.rank()));
  pos += shape.rank();
  for (const Matrix& a : shape.factors) {
    Matrix b(a.rows(), a.cols());
    std::copy(v.begin() + static_cast<std::ptrdiff_t>(pos),
              v.begin() + static_cast<std::ptrdiff_t>(pos + b.data().size()), b.data().begin());
    pos += b.data().size();
    m.factors.push_back(std::move(b));
  }
  return m;
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

double negative_log_likelihood(const PmfModel& model, const DiscretizedDataset& data, std::size_t threads) {
  check_shapes(model, data);
  const LogModel lm = to_log(model);
  const std::size_t R = model.rank();
  const std::size_t T = data.rows();
  const std::size_t chunks = std::max<std::size_t>(1, std::min(threads, T));
  std::vector<double> partial(chunks, 0.0);
  for_chunks(T, chunks, [&](std::size_t c, std::size_t begin, std::size_t end) {
    std::vector<double> terms(R);
    double acc = 0.0;
    for (std::size_t t = begin; t < end; ++t) {
      component_log_terms(lm, data.row_indices(t), data.row_mask(t), terms);
      std::sort(terms.begin(), terms.end());
      const double mx = terms.back();
      double s = 0.0;
      for (double l : terms) s += std::exp(l - mx);
      acc -= mx + std::log(s);
    }
    partial[c] = acc;
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

void project_to_simplex(PmfModel& model, double floor) {
  auto fix = [floor](auto&& get, std::size_t count) {
    double sum = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      double& x = get(i);
      if (!(x >= floor)) x = floor;  // also replaces NaN
      sum += x;
    }
    for (std::size_t i = 0; i < count; ++i) get(i) /= sum;
  };
  fix([&](std::size_t r) -> double& { return model.lambda[r]; }, model.lambda.size());
  for (Matrix& a : model.factors)
    for (std::size_t r = 0; r < a.cols(); ++r) fix([&](std::size_t i) -> double& { return a(i, r); }, a.rows());
}

PmfModel em_step(const PmfModel& model, const DiscretizedDataset& data, double floor, std::size_t threads) {
  check_shapes(model, data);
  const LogModel lm = to_log(model);
  const std::size_t R = model.rank();
  const std::size_t N = model.dims();
  const std::size_t T = data.rows();
  const std::size_t chunks = std::max<std::size_t>(1, std::min(threads, T));

  struct Acc {
    std::vector<double> lambda;
    std::vector<Matrix> factors;
  };
  std::vector<Acc> accs(chunks);
  for (auto& a : accs) {
    a.lambda.assign(R, 0.0);
    for (std::size_t n = 0; n < N; ++n) a.factors.emplace_back(model.factors[n].rows(), R, 0.0);
  }

  for_chunks(T, chunks, [&](std::size_t c, std::size_t begin, std::size_t end) {
    Acc& acc = accs[c];
    std::vector<double> q(R);
    for (std::size_t t = begin; t < end; ++t) {
      const auto idx = data.row_indices(t);
      const auto obs = data.row_mask(t);
      component_log_terms(lm, idx, obs, q);
      const double mx = *std::max_element(q.begin(), q.end());
      double s = 0.0;
      for (double& v : q) {
        v = std::exp(v - mx);
        s += v;
      }
      for (std::size_t r = 0; r < R; ++r) {
        q[r] /= s;
        acc.lambda[r] += q[r];
      }
      for (std::size_t n = 0; n < N; ++n) {
        if (!obs[n]) continue;
        auto row = acc.factors[n].row(idx[n] - 1);
        for (std::size_t r = 0; r < R; ++r) row[r] += q[r];
      }
    }
  });

  // Chunk accumulators are reduced in chunk order for a fixed thread count.
  Acc& total = accs[0];
  for (std::size_t c = 1; c < chunks; ++c) {
    for (std::size_t r = 0; r < R; ++r) total.lambda[r] += accs[c].lambda[r];
    for (std::size_t n = 0; n < N; ++n) {
      auto dst = total.factors[n].data();
      auto src = accs[c].factors[n].data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
  }

  PmfModel next;
  next.lambda.resize(R);
  for (std::size_t r = 0; r < R; ++r) next.lambda[r] = total.lambda[r] / static_cast<double>(T);
  for (std::size_t n = 0; n < N; ++n) {
    Matrix a = std::move(total.factors[n]);
    for (std::size_t r = 0; r < R; ++r) {
      double col = 0.0;
      for (std::size_t i = 0; i < a.rows(); ++i) col += a(i, r);
      if (col > 0.0) {
        for (std::size_t i = 0; i < a.rows(); ++i) a(i, r) /= col;
      } else {
        // no observed evidence for this column: keep the previous estimate
        for (std::size_t i = 0; i < a.rows(); ++i) a(i, r) = model.factors[n](i, r);
      }
    }
    next.factors.push_back(std::move(a));
  }
  project_to_simplex(next, floor);
  return next;
}

PmfModel squarem_extrapolate(const PmfModel& theta0, const PmfModel& theta1, const PmfModel& theta2, double alpha) {
  const auto p0 = flatten(theta0);
  const auto p1 = flatten(theta1);
  const auto p2 = flatten(theta2);
  std::vector<double> out(p0.size());
  for (std::size_t i = 0; i < p0.size(); ++i) {
    const double r = p1[i] - p0[i];
    const double v = (p2[i] - p1[i]) - r;
    out[i] = p0[i] - 2.0 * alpha * r + alpha * alpha * v;
  }
  return unflatten_like(theta0, out);
}

SquaremResult squarem_step(const PmfModel& model, const DiscretizedDataset& data, double floor, std::size_t threads) {
  PmfModel theta1 = em_step(model, data, floor, threads);
  PmfModel theta2 = em_step(theta1, data, floor, threads);
  const double nll2 = negative_log_likelihood(theta2, data, threads);

  const auto p0 = flatten(model);
  const auto p1 = flatten(theta1);
  const auto p2 = flatten(theta2);
  std::vector<double> r(p0.size()), v(p0.size());
  for (std::size_t i = 0; i < p0.size(); ++i) {
    r[i] = p1[i] - p0[i];
    v[i] = (p2[i] - p1[i]) - r[i];
  }
  const double nv = norm2(v);
  if (nv == 0.0) return {std::move(theta2), nll2, false, 2};

  double alpha = -norm2(r) / nv;
  if (alpha > -1.0) alpha = -1.0;
  PmfModel candidate = squarem_extrapolate(model, theta1, theta2, alpha);
  project_to_simplex(candidate, floor);
  PmfModel stabilized = em_step(candidate, data, floor, threads);
  const double nll_stab = negative_log_likelihood(stabilized, data, threads);
  if (!(nll_stab <= nll2)) return {std::move(theta2), nll2, false, 3};
  return {std::move(stabilized), nll_stab, true, 3};
}

PmfModel initial_model(std::span<const std::uint32_t> cardinalities, std::size_t rank, std::uint64_t seed,
                       double floor) {
  if (rank < 1) fail(ErrorCode::InvalidArgument, "rank must be at least 1");
  Rng rng(seed);
  PmfModel m;
  m.lambda.assign(rank, 1.0 / static_cast<double>(rank));
  for (std::uint32_t card : cardinalities) {
    Matrix a(card, rank);
    for (std::size_t r = 0; r < rank; ++r) {
      double s = 0.0;
      for (std::size_t i = 0; i < card; ++i) {
        a(i, r) = rng.exponential();
        s += a(i, r);
      }
      for (std::size_t i = 0; i < card; ++i) a(i, r) /= s;
    }
    m.factors.push_back(std::move(a));
  }
  project_to_simplex(m, floor);
  return m;
}

FitResult fit_pmf(const DiscretizedDataset& data, const FitConfig& config) {
  if (config.rank < 1) fail(ErrorCode::InvalidArgument, "rank must be at least 1");
  return fit_pmf(data, config, initial_model(data.cardinalities(), config.rank, config.seed, config.min_prob_floor));
}

FitResult fit_pmf(const DiscretizedDataset& data, const FitConfig& config, PmfModel start) {
  if (!(config.rel_ll_tol > 0.0) || !(config.min_prob_floor > 0.0))
    fail(ErrorCode::InvalidArgument, "tolerances must be positive");
  if (data.rows() == 0) fail(ErrorCode::EmptyInput, "no records to fit");
  check_shapes(start, data);

  FitResult res{std::move(start), {}};
  FitReport& rep = res.report;
  double nll = negative_log_likelihood(res.model, data, config.threads);
  rep.nll_trace.push_back(nll);
  for (std::size_t it = 0; it < config.max_iters; ++it) {
    PmfModel next;
    double next_nll;
    if (config.squarem_enabled) {
      SquaremResult s = squarem_step(res.model, data, config.min_prob_floor, config.threads);
      rep.em_steps_taken += s.em_steps;
      if (!s.accepted) ++rep.fallback_count;
      next = std::move(s.model);
      next_nll = s.nll;
    } else {
      next = em_step(res.model, data, config.min_prob_floor, config.threads);
      ++rep.em_steps_taken;
      next_nll = negative_log_likelihood(next, data, config.threads);
    }
    if (!(next_nll <= nll)) {
      // rounding-level increase at a fixed point: keep the current model
      rep.converged = true;
      break;
    }
    const double rel = std::abs(nll - next_nll) / (1.0 + std::abs(next_nll));
    res.model = std::move(next);
    nll = next_nll;
    rep.nll_trace.push_back(nll);
    ++rep.iterations;
    if (rel < config.rel_ll_tol) {
      rep.converged = true;
      break;
    }
  }
  rep.final_nll = nll;
  validate_pmf(res.model);
  return res;
}

std::vector<double> responsibilities(const PmfModel& model, std::span<const std::uint32_t> record,
                                     std::span<const std::uint8_t> observed) {
  if (record.size() != model.dims() || observed.size() != model.dims())
    fail(ErrorCode::DimensionMismatch, "record length differs from model dimension count");
  for (std::size_t n = 0; n < record.size(); ++n)
    if (observed[n] && (record[n] < 1 || record[n] > model.factors[n].rows()))
      fail(ErrorCode::DimensionMismatch, "record index outside the factor's bin range");
  const std::size_t R = model.rank();
  std::vector<double> q(R);
  for (std::size_t r = 0; r < R; ++r) q[r] = std::log(model.lambda[r]);
  for (std::size_t n = 0; n < record.size(); ++n) {
    if (!observed[n]) continue;
    for (std::size_t r = 0; r < R; ++r) q[r] += std::log(model.factors[n](record[n] - 1, r));
  }
  const double mx = *std::max_element(q.begin(), q.end());
  double s = 0.0;
  for (double& v : q) {
    v = std::exp(v - mx);
    s += v;
  }
  for (double& v : q) v /= s;
  return q;
}

Matrix all_responsibilities(const PmfModel& model, const DiscretizedDataset& data) {
  check_shapes(model, data);
  Matrix out(data.rows(), model.rank());
  for (std::size_t t = 0; t < data.rows(); ++t) {
    const auto q = responsibilities(model, data.row_indices(t), data.row_mask(t));
    std::copy(q.begin(), q.end(), out.row(t).begin());
  }
  return out;
}

std::vector<double> joint_pmf_tensor(const PmfModel& model) {
  std::size_t total = 1;
  for (const Matrix& a : model.factors) total *= a.rows();
  std::vector<double> out(total, 0.0);
  std::vector<std::size_t> idx(model.dims(), 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rem = flat;
    for (std::size_t n = model.dims(); n-- > 0;) {
      idx[n] = rem % model.factors[n].rows();
      rem /= model.factors[n].rows();
    }
    double s = 0.0;
    for (std::size_t r = 0; r < model.rank(); ++r) {
      double p = model.lambda[r];
      for (std::size_t n = 0; n < model.dims(); ++n) p *= model.factors[n](idx[n], r);
      s += p;
    }
    out[flat] = s;
  }
  return out;
}

}  // namespace mdlpdf
