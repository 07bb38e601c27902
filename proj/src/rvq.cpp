#include "neurotok/rvq.hpp"

#include <cmath>
#include <limits>

namespace neurotok {

const char* domain_name(Domain d) { return d == Domain::time ? "time" : "freq"; }

namespace {

int nearest_code(const Codebook& book, const Vecd& query) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int k = 0; k < book.size(); ++k) {
    double d = (query - book.code_vectors.row(k).transpose()).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

Vecd unit(const Vecd& v) {
  double n = v.norm();
  return n > 1e-12 ? Vecd(v / n) : v;
}

}  // namespace

RvqStack make_rvq_stack(int layers, int codebook_size, int code_dim, Domain domain, Rng& rng) {
  if (layers < 1) raise(Err::ShapeMismatch, "rvq stack needs at least one layer");
  if (codebook_size < 2) raise(Err::ShapeMismatch, "codebook needs at least two codes");
  RvqStack stack;
  stack.domain = domain;
  for (int l = 0; l < layers; ++l) {
    Codebook book;
    book.code_vectors.resize(codebook_size, code_dim);
    for (int k = 0; k < codebook_size; ++k) {
      Vecd v(code_dim);
      for (int j = 0; j < code_dim; ++j) v[j] = rng.normal();
      book.code_vectors.row(k) = unit(v).transpose();
    }
    book.scale = Vecd::Ones(codebook_size);
    book.ema_count = Vecd::Ones(codebook_size);
    book.ema_sum = book.code_vectors;
    stack.layers.push_back(std::move(book));
  }
  return stack;
}

QuantizeResult quantize(const RvqStack& stack, const Vecd& embedding) {
  if (!embedding.allFinite()) raise(Err::NonFiniteInput, "embedding contains NaN or Inf");
  if (embedding.size() != stack.dim())
    raise(Err::ShapeMismatch, "embedding dim " + std::to_string(embedding.size()) +
                                  " does not match codebook dim " + std::to_string(stack.dim()));

  QuantizeResult out;
  out.residuals.reserve(stack.depth() + 1);
  out.residuals.push_back(unit(embedding));
  out.quantized = Vecd::Zero(stack.dim());
  for (const Codebook& book : stack.layers) {
    const Vecd& query = out.residuals.back();
    int k = nearest_code(book, query);
    out.codes.push_back(k);
    Vecd code = book.scaled_code(k);
    out.quantized += code;
    out.residuals.push_back(query - code);
  }
  return out;
}

Vecd dequantize(const RvqStack& stack, std::span<const int> codes) {
  if (static_cast<int>(codes.size()) != stack.depth())
    raise(Err::ShapeMismatch, "need one code per layer");
  Vecd acc = Vecd::Zero(stack.dim());
  for (int l = 0; l < stack.depth(); ++l) {
    int k = codes[l];
    if (k < 0 || k >= stack.layers[l].size())
      raise(Err::IndexOutOfRange,
            "code " + std::to_string(k) + " out of range at layer " + std::to_string(l));
    acc += stack.layers[l].scaled_code(k);
  }
  return acc;
}

void ema_update(Codebook& book, const std::vector<std::pair<int, Vecd>>& assignments) {
  const double g = book.decay;
  Vecd counts = Vecd::Zero(book.size());
  Matd sums = Matd::Zero(book.size(), book.dim());
  for (const auto& [k, e] : assignments) {
    if (k < 0 || k >= book.size()) raise(Err::IndexOutOfRange, "assignment code out of range");
    if (!e.allFinite()) raise(Err::NonFiniteInput, "assigned embedding is not finite");
    counts[k] += 1.0;
    sums.row(k) += e.transpose();
  }
  book.ema_count = g * book.ema_count + (1.0 - g) * counts;
  book.ema_sum = g * book.ema_sum + (1.0 - g) * sums;
  for (int k = 0; k < book.size(); ++k) {
    Vecd v = book.ema_sum.row(k).transpose() / (book.ema_count[k] + book.epsilon);
    double n = v.norm();
    if (n > 1e-12) {
      book.code_vectors.row(k) = (v / n).transpose();
      book.scale[k] = n;
    }
    // a code whose moving sum has decayed to zero keeps its direction
  }
}

double commitment_loss(const std::vector<std::vector<Vecd>>& residual_inputs,
                       const std::vector<std::vector<Vecd>>& selected_codes, double beta) {
  if (residual_inputs.size() != selected_codes.size())
    raise(Err::ShapeMismatch, "commitment: item counts differ");
  if (residual_inputs.empty()) return 0.0;
  double acc = 0.0;
  for (size_t i = 0; i < residual_inputs.size(); ++i) {
    if (residual_inputs[i].size() != selected_codes[i].size())
      raise(Err::ShapeMismatch, "commitment: layer counts differ");
    for (size_t l = 0; l < residual_inputs[i].size(); ++l) {
      if (residual_inputs[i][l].size() != selected_codes[i][l].size())
        raise(Err::ShapeMismatch, "commitment: vector dims differ");
      acc += (residual_inputs[i][l] - selected_codes[i][l]).squaredNorm();
    }
  }
  return beta * acc / static_cast<double>(residual_inputs.size());
}

void kmeanspp_seed(Codebook& book, const Matd& data, Rng& rng) {
  const int k_codes = book.size();
  const Eigen::Index n = data.rows();
  if (n == 0) return;
  if (data.cols() != book.dim()) raise(Err::ShapeMismatch, "seed data dim mismatch");

  std::vector<Eigen::Index> chosen;
  chosen.push_back(static_cast<Eigen::Index>(rng.uniform_int(static_cast<int>(n))));
  Vecd dist2(n);
  for (Eigen::Index i = 0; i < n; ++i)
    dist2[i] = (data.row(i) - data.row(chosen[0])).squaredNorm();

  while (static_cast<int>(chosen.size()) < k_codes) {
    double total = dist2.sum();
    Eigen::Index pick;
    if (total <= 1e-18) {
      // all remaining points coincide with chosen seeds
      pick = static_cast<Eigen::Index>(rng.uniform_int(static_cast<int>(n)));
    } else {
      double r = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += dist2[i];
        if (acc >= r) {
          pick = i;
          break;
        }
      }
    }
    chosen.push_back(pick);
    for (Eigen::Index i = 0; i < n; ++i)
      dist2[i] = std::min(dist2[i], (data.row(i) - data.row(pick)).squaredNorm());
  }

  for (int k = 0; k < k_codes; ++k) {
    Vecd seed = data.row(chosen[k]).transpose();
    double norm = seed.norm();
    if (norm < 1e-9) {
      // degenerate seed: spread on a deterministic random direction
      for (int j = 0; j < book.dim(); ++j) seed[j] = rng.normal();
      norm = seed.norm();
    }
    book.code_vectors.row(k) = (seed / norm).transpose();
    book.scale[k] = norm / (1.0 + book.epsilon);
    book.ema_count[k] = 1.0;
    book.ema_sum.row(k) = seed.transpose();
  }
}

Matd prefix_quantized(const RvqStack& stack, const Mati& codes, int prefix) {
  if (prefix < 1 || prefix > stack.depth())
    raise(Err::IndexOutOfRange, "prefix depth out of range");
  Matd acc = Matd::Zero(codes.rows(), stack.dim());
  for (int l = 0; l < prefix; ++l)
    for (Eigen::Index i = 0; i < codes.rows(); ++i)
      acc.row(i) += stack.layers[l].scaled_code(codes(i, l)).transpose();
  return acc;
}

Matd l2_normalize_rows_plain(const Matd& rows) {
  Matd out = rows;
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    double n = std::max(rows.row(r).norm(), 1e-12);
    out.row(r) /= n;
  }
  return out;
}

BatchQuantizeResult quantize_rows(const RvqStack& stack, const Matd& normalized_rows) {
  const Eigen::Index n = normalized_rows.rows();
  BatchQuantizeResult out;
  out.codes.resize(n, stack.depth());
  out.quantized = Matd::Zero(n, stack.dim());
  Matd residual = normalized_rows;
  for (int l = 0; l < stack.depth(); ++l) {
    out.residual_in.push_back(residual);
    const Codebook& book = stack.layers[l];
    for (Eigen::Index i = 0; i < n; ++i) {
      // same explicit distance as quantize() so both paths always agree
      Vecd query = residual.row(i).transpose();
      int best = nearest_code(book, query);
      out.codes(i, l) = best;
      Vecd code = book.scaled_code(best);
      out.quantized.row(i) += code.transpose();
      residual.row(i) -= code.transpose();
    }
  }
  return out;
}

}  // namespace neurotok
