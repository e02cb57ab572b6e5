#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssaqn/textproc.hpp"

namespace ssaqn {

struct IndexOutOfVocab : std::out_of_range {
  explicit IndexOutOfVocab(int index)
      : std::out_of_range("token index out of vocabulary: " + std::to_string(index)) {}
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FormatVersionMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Row-major dense matrix of doubles. Vectors are 1 x n matrices.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }
  double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
  std::size_t size() const { return data.size(); }
  void zero() { std::fill(data.begin(), data.end(), 0.0); }
};

struct NetworkConfig {
  int vocab_size = 0;
  int embedding_dim = 16;
  int lstm_dim = 32;
  int dense_dim = 8;

  bool operator==(const NetworkConfig&) const = default;
};

// All SSAQN weights. The embedding and LSTM trunk is shared between the state
// and action branches; only the two dense heads differ.
struct Parameters {
  NetworkConfig config;

  Mat embedding;                      // vocab_size x embedding_dim
  Mat w_i, w_f, w_o, w_g;             // embedding_dim x lstm_dim
  Mat u_i, u_f, u_o, u_g;             // lstm_dim x lstm_dim
  Mat b_i, b_f, b_o, b_g;             // 1 x lstm_dim
  Mat w_state, b_state;               // lstm_dim x dense_dim, 1 x dense_dim
  Mat w_action, b_action;

  explicit Parameters(const NetworkConfig& cfg);
  Parameters() = default;

  std::size_t count() const;

  // Visits every tensor as (name, Mat&) in a fixed order.
  template <class F>
  void for_each(F&& f) {
    f("embedding", embedding);
    f("w_i", w_i), f("w_f", w_f), f("w_o", w_o), f("w_g", w_g);
    f("u_i", u_i), f("u_f", u_f), f("u_o", u_o), f("u_g", u_g);
    f("b_i", b_i), f("b_f", b_f), f("b_o", b_o), f("b_g", b_g);
    f("w_state", w_state), f("b_state", b_state);
    f("w_action", w_action), f("b_action", b_action);
  }
  template <class F>
  void for_each(F&& f) const {
    const_cast<Parameters*>(this)->for_each([&](const char* name, Mat& m) {
      f(name, static_cast<const Mat&>(m));
    });
  }
};

// Embedding and dense kernels Glorot-uniform, recurrent kernels orthogonal,
// biases zero except the forget gate at 1. Deterministic in the seed.
Parameters init_params(const NetworkConfig& config, std::uint64_t seed);

struct LstmGateCache {
  std::vector<double> i, f, o, g, c, tanh_c, h;
};

// One LSTM timestep: i/f/o sigmoid gates, g tanh candidate,
// c = f*c_prev + i*g, h = o*tanh(c).
LstmGateCache lstm_step(const Parameters& params, const double* x_t,
                        const std::vector<double>& h_prev, const std::vector<double>& c_prev);

struct BranchCache {
  std::vector<int> indices;
  std::vector<LstmGateCache> steps;
  std::vector<double> dense_pre;  // pre-tanh dense values
  std::vector<double> out;        // tanh dense output
};

struct ForwardCache {
  BranchCache state;
  BranchCache action;
  double norm_state = 0.0;  // plain L2 norms, guard added at use sites
  double norm_action = 0.0;
  double cs = 0.0;
};

// Shared trunk (embedding + LSTM over the full sequence, PAD steps included)
// followed by the requested dense head.
BranchCache branch_forward(const Parameters& params, const std::vector<int>& indices,
                           const Mat& w_dense, const Mat& b_dense);

// Cosine similarity of the two dense outputs with an additive 1e-8 norm guard.
double cosine_similarity(const std::vector<double>& x, const std::vector<double>& y);

// Full forward pass: both sequences through the shared trunk, state and action
// dense heads, cosine head. Always returns cs in [-1, 1].
std::pair<double, ForwardCache> ssaqn_forward(const Parameters& params,
                                              const std::vector<int>& state_indices,
                                              const std::vector<int>& action_indices);

// Exact gradients of (dloss_dcs * cs) w.r.t. every parameter, accumulated into
// `grads`. Shared tensors collect contributions from both branches; padded
// timesteps backpropagate like any other.
void ssaqn_backward(const Parameters& params, const ForwardCache& cache, double dloss_dcs,
                    Parameters& grads);

struct OptimizerState {
  double rho = 0.9;
  double eps = 1e-7;
  Parameters accum;  // squared-gradient accumulators

  OptimizerState() = default;
  explicit OptimizerState(const NetworkConfig& cfg) : accum(cfg) {}
};

// a <- rho*a + (1-rho)*g^2 ; w <- w - lr*g/(sqrt(a)+eps), element-wise.
void rmsprop_step(Parameters& params, OptimizerState& opt, const Parameters& grads, double lr);

/// Versioned JSON container: config dims, vocabulary tokens, and each tensor as
// shape metadata plus base64-encoded little-endian doubles.
void save_checkpoint(const Parameters& params, const Vocabulary& vocab, const std::string& path);

struct Checkpoint {
  Parameters params;
  Vocabulary vocab;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace ssaqn
