#pragma once

#include "neurotok/common.hpp"
#include "neurotok/rng.hpp"

#include <span>
#include <utility>
#include <vector>

namespace neurotok {

// One EMA-learned codebook. Code vectors live on the unit sphere; n/m carry
// the exponential moving assignment counts and sums that replace gradient
// training. `scale` keeps the magnitude that unit-normalization strips from
// m/(n+eps): searches are directional, but subtraction and reconstruction
// use scale*v so residual magnitudes telescope down instead of bouncing off
// unit-length codes.
struct Codebook {
  Matd code_vectors;  // K×d', unit l2 rows
  Vecd scale;         // K, |m_k/(n_k+eps)|
  Vecd ema_count;     // K
  Matd ema_sum;       // K×d'
  double decay = 0.99;
  double epsilon = 1e-6;

  int size() const { return static_cast<int>(code_vectors.rows()); }
  int dim() const { return static_cast<int>(code_vectors.cols()); }
  Vecd scaled_code(int k) const { return scale[k] * code_vectors.row(k).transpose(); }
};

enum class Domain { time, freq };

const char* domain_name(Domain d);

struct RvqStack {
  std::vector<Codebook> layers;
  Domain domain = Domain::time;

  int depth() const { return static_cast<int>(layers.size()); }
  int dim() const { return layers.empty() ? 0 : layers.front().dim(); }
};

RvqStack make_rvq_stack(int layers, int codebook_size, int code_dim, Domain domain, Rng& rng);

struct QuantizeResult {
  std::vector<int> codes;      // one index per layer
  Vecd quantized;              // sum of selected code vectors
  std::vector<Vecd> residuals; // L+1 entries, residuals[0] = normalized input
};

// Greedy recursion: the first-layer query is the l2-normalized embedding,
// deeper layers search with the raw residual; every layer subtracts the
// stored unit-norm code so normalize(e) - quantized == residuals.back()
// exactly. Ties break toward the lowest code index.
QuantizeResult quantize(const RvqStack& stack, const Vecd& embedding);

Vecd dequantize(const RvqStack& stack, std::span<const int> codes);

// n_k <- g*n_k + (1-g)*count_k; m_k <- g*m_k + (1-g)*sum of assigned
// embeddings; v_k <- m_k/(n_k+eps), re-normalized to unit l2.
void ema_update(Codebook& book, const std::vector<std::pair<int, Vecd>>& assignments);

// beta * sum over items (mean) and layers of squared distance between the
// residual entering layer l and the code selected there. With EMA-only
// codebooks this quantity carries no codebook gradient; the trainer adds an
// encoder-side twin that routes gradients to the encoder.
double commitment_loss(const std::vector<std::vector<Vecd>>& residual_inputs,
                       const std::vector<std::vector<Vecd>>& selected_codes, double beta);

// k-means++ seeding from a data matrix (rows are candidate vectors); layer l
// is meant to be seeded from layer-l residuals of the first batch.
void kmeanspp_seed(Codebook& book, const Matd& data, Rng& rng);

// Discrete code indices for every patch of a grid, per domain and layer.
struct TokenGrid {
  Mati time_codes;  // N×L
  Mati freq_codes;  // N×L

  int size() const { return static_cast<int>(time_codes.rows()); }
  int depth() const { return static_cast<int>(time_codes.cols()); }
};

// --- batch helpers used by the trainers ---

struct BatchQuantizeResult {
  Mati codes;                     // N×L
  Matd quantized;                 // N×d'
  std::vector<Matd> residual_in;  // per layer: N×d' residual entering that layer
};

BatchQuantizeResult quantize_rows(const RvqStack& stack, const Matd& normalized_rows);

// sum of selected code vectors over layers [0, prefix)
Matd prefix_quantized(const RvqStack& stack, const Mati& codes, int prefix);

// rows must already be l2-normalized (first-layer queries)
Matd l2_normalize_rows_plain(const Matd& rows);

}  // namespace neurotok
