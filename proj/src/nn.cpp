#include "ssaqn/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"

namespace ssaqn {

using nlohmann::json;

namespace {

constexpr double kNormGuard = 1e-8;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng()) / static_cast<double>(std::mt19937_64::max());
}

void glorot_uniform(Mat& m, std::mt19937_64& rng) {
  double limit = std::sqrt(6.0 / (m.rows + m.cols));
  for (auto& v : m.data) v = (2.0 * uniform01(rng) - 1.0) * limit;
}

// Random Gaussian matrix orthonormalised by Gram-Schmidt over rows.
void orthogonal(Mat& m, std::mt19937_64& rng) {
  std::vector<double> gauss(m.size());
  for (std::size_t k = 0; k < gauss.size(); k += 2) {
    double u1 = std::max(uniform01(rng), 1e-12);
    double u2 = uniform01(rng);
    double r = std::sqrt(-2.0 * std::log(u1));
    gauss[k] = r * std::cos(2.0 * M_PI * u2);
    if (k + 1 < gauss.size()) gauss[k + 1] = r * std::sin(2.0 * M_PI * u2);
  }
  std::copy(gauss.begin(), gauss.end(), m.data.begin());
  for (int r = 0; r < m.rows; ++r) {
    double* row = m.row(r);
    for (int p = 0; p < r; ++p) {
      const double* prev = m.row(p);
      double dot = 0.0;
      for (int c = 0; c < m.cols; ++c) dot += row[c] * prev[c];
      for (int c = 0; c < m.cols; ++c) row[c] -= dot * prev[c];
    }
    double norm = 0.0;
    for (int c = 0; c < m.cols; ++c) norm += row[c] * row[c];
    norm = std::sqrt(norm);
    if (norm < 1e-10) {
      // degenerate row, fall back to a unit vector
      for (int c = 0; c < m.cols; ++c) row[c] = (c == r % m.cols) ? 1.0 : 0.0;
    } else {
      for (int c = 0; c < m.cols; ++c) row[c] /= norm;
    }
  }
}

}  // namespace

Parameters::Parameters(const NetworkConfig& cfg) : config(cfg) {
  const int e = cfg.embedding_dim, l = cfg.lstm_dim, d = cfg.dense_dim;
  embedding = Mat(cfg.vocab_size, e);
  w_i = Mat(e, l), w_f = Mat(e, l), w_o = Mat(e, l), w_g = Mat(e, l);
  u_i = Mat(l, l), u_f = Mat(l, l), u_o = Mat(l, l), u_g = Mat(l, l);
  b_i = Mat(1, l), b_f = Mat(1, l), b_o = Mat(1, l), b_g = Mat(1, l);
  w_state = Mat(l, d), b_state = Mat(1, d);
  w_action = Mat(l, d), b_action = Mat(1, d);
}

std::size_t Parameters::count() const {
  std::size_t total = 0;
  for_each([&](const char*, const Mat& m) { total += m.size(); });
  return total;
}

Parameters init_params(const NetworkConfig& config, std::uint64_t seed) {
  Parameters p(config);
  std::mt19937_64 rng(seed);
  glorot_uniform(p.embedding, rng);
  glorot_uniform(p.w_i, rng), glorot_uniform(p.w_f, rng);
  glorot_uniform(p.w_o, rng), glorot_uniform(p.w_g, rng);
  orthogonal(p.u_i, rng), orthogonal(p.u_f, rng);
  orthogonal(p.u_o, rng), orthogonal(p.u_g, rng);
  for (auto& v : p.b_f.data) v = 1.0;  // forget gate bias
  glorot_uniform(p.w_state, rng);
  glorot_uniform(p.w_action, rng);
  return p;
}

LstmGateCache lstm_step(const Parameters& params, const double* x_t,
                        const std::vector<double>& h_prev, const std::vector<double>& c_prev) {
  const int e = params.config.embedding_dim, l = params.config.lstm_dim;
  LstmGateCache s;
  s.i.assign(l, 0.0), s.f.assign(l, 0.0), s.o.assign(l, 0.0), s.g.assign(l, 0.0);
  s.c.assign(l, 0.0), s.tanh_c.assign(l, 0.0), s.h.assign(l, 0.0);

  std::vector<double> a_i(params.b_i.data), a_f(params.b_f.data), a_o(params.b_o.data),
      a_g(params.b_g.data);
  for (int r = 0; r < e; ++r) {
    double x = x_t[r];
    if (x == 0.0) continue;
    const double *wi = params.w_i.row(r), *wf = params.w_f.row(r), *wo = params.w_o.row(r),
                 *wg = params.w_g.row(r);
    for (int k = 0; k < l; ++k) {
      a_i[k] += x * wi[k];
      a_f[k] += x * wf[k];
      a_o[k] += x * wo[k];
      a_g[k] += x * wg[k];
    }
  }
  for (int r = 0; r < l; ++r) {
    double h = h_prev[r];
    if (h == 0.0) continue;
    const double *ui = params.u_i.row(r), *uf = params.u_f.row(r), *uo = params.u_o.row(r),
                 *ug = params.u_g.row(r);
    for (int k = 0; k < l; ++k) {
      a_i[k] += h * ui[k];
      a_f[k] += h * uf[k];
      a_o[k] += h * uo[k];
      a_g[k] += h * ug[k];
    }
  }
  for (int k = 0; k < l; ++k) {
    s.i[k] = sigmoid(a_i[k]);
    s.f[k] = sigmoid(a_f[k]);
    s.o[k] = sigmoid(a_o[k]);
    s.g[k] = std::tanh(a_g[k]);
    s.c[k] = s.f[k] * c_prev[k] + s.i[k] * s.g[k];
    s.tanh_c[k] = std::tanh(s.c[k]);
    s.h[k] = s.o[k] * s.tanh_c[k];
  }
  return s;
}

BranchCache branch_forward(const Parameters& params, const std::vector<int>& indices,
                           const Mat& w_dense, const Mat& b_dense) {
  const int l = params.config.lstm_dim, d = params.config.dense_dim;
  BranchCache cache;
  cache.indices = indices;

  std::vector<double> h(l, 0.0), c(l, 0.0);
  for (int idx : indices) {
    if (idx < 0 || idx >= params.config.vocab_size) throw IndexOutOfVocab(idx);
    LstmGateCache step = lstm_step(params, params.embedding.row(idx), h, c);
    h = step.h;
    c = step.c;
    cache.steps.push_back(std::move(step));
  }

  cache.dense_pre.assign(d, 0.0);
  for (int j = 0; j < d; ++j) cache.dense_pre[j] = b_dense.at(0, j);
  for (int r = 0; r < l; ++r) {
    double hv = h[r];
    if (hv == 0.0) continue;
    const double* w = w_dense.row(r);
    for (int j = 0; j < d; ++j) cache.dense_pre[j] += hv * w[j];
  }
  cache.out.assign(d, 0.0);
  for (int j = 0; j < d; ++j) cache.out[j] = std::tanh(cache.dense_pre[j]);
  return cache;
}

double cosine_similarity(const std::vector<double>& x, const std::vector<double>& y) {
  double dot = 0.0, nx = 0.0, ny = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    dot += x[k] * y[k];
    nx += x[k] * x[k];
    ny += y[k] * y[k];
  }
  return dot / ((std::sqrt(nx) + kNormGuard) * (std::sqrt(ny) + kNormGuard));
}

std::pair<double, ForwardCache> ssaqn_forward(const Parameters& params,
                                              const std::vector<int>& state_indices,
                                              const std::vector<int>& action_indices) {
  ForwardCache cache;
  cache.state = branch_forward(params, state_indices, params.w_state, params.b_state);
  cache.action = branch_forward(params, action_indices, params.w_action, params.b_action);

  double dot = 0.0, nx = 0.0, ny = 0.0;
  for (std::size_t k = 0; k < cache.state.out.size(); ++k) {
    dot += cache.state.out[k] * cache.action.out[k];
    nx += cache.state.out[k] * cache.state.out[k];
    ny += cache.action.out[k] * cache.action.out[k];
  }
  cache.norm_state = std::sqrt(nx);
  cache.norm_action = std::sqrt(ny);
  cache.cs = dot / ((cache.norm_state + kNormGuard) * (cache.norm_action + kNormGuard));
  return {cache.cs, cache};
}

namespace {

// BPTT for one branch; dense-head gradients go to gw/gb, trunk gradients
// accumulate into the shared tensors of `grads`.
void branch_backward(const Parameters& params, const BranchCache& cache,
                     const std::vector<double>& d_out, const Mat& w_dense, Mat& gw, Mat& gb,
                     Parameters& grads) {
  const int e = params.config.embedding_dim, l = params.config.lstm_dim,
            d = params.config.dense_dim;

  std::vector<double> dz(d);
  for (int j = 0; j < d; ++j) dz[j] = d_out[j] * (1.0 - cache.out[j] * cache.out[j]);

  const std::vector<double> zeros(l, 0.0);
  const std::vector<double>& h_final = cache.steps.empty() ? zeros : cache.steps.back().h;

  for (int r = 0; r < l; ++r) {
    double hv = h_final[r];
    double* g = gw.row(r);
    for (int j = 0; j < d; ++j) g[j] += hv * dz[j];
  }
  for (int j = 0; j < d; ++j) gb.at(0, j) += dz[j];

  std::vector<double> dh(l, 0.0), dc(l, 0.0);
  for (int r = 0; r < l; ++r) {
    const double* w = w_dense.row(r);
    for (int j = 0; j < d; ++j) dh[r] += w[j] * dz[j];
  }

  std::vector<double> da_i(l), da_f(l), da_o(l), da_g(l), dh_prev(l), dx(e);
  for (int t = static_cast<int>(cache.steps.size()) - 1; t >= 0; --t) {
    const LstmGateCache& s = cache.steps[t];
    const std::vector<double>& c_prev = (t > 0) ? cache.steps[t - 1].c : zeros;
    const std::vector<double>& h_prev = (t > 0) ? cache.steps[t - 1].h : zeros;
    const double* x_t = params.embedding.row(cache.indices[t]);

    for (int k = 0; k < l; ++k) {
      double d_o = dh[k] * s.tanh_c[k];
      double d_c = dc[k] + dh[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
      double d_i = d_c * s.g[k];
      double d_g = d_c * s.i[k];
      double d_f = d_c * c_prev[k];
      dc[k] = d_c * s.f[k];  // becomes dc_prev
      da_i[k] = d_i * s.i[k] * (1.0 - s.i[k]);
      da_f[k] = d_f * s.f[k] * (1.0 - s.f[k]);
      da_o[k] = d_o * s.o[k] * (1.0 - s.o[k]);
      da_g[k] = d_g * (1.0 - s.g[k] * s.g[k]);
    }

    for (int k = 0; k < l; ++k) {
      grads.b_i.at(0, k) += da_i[k];
      grads.b_f.at(0, k) += da_f[k];
      grads.b_o.at(0, k) += da_o[k];
      grads.b_g.at(0, k) += da_g[k];
    }
    for (int r = 0; r < e; ++r) {
      double x = x_t[r];
      double *gi = grads.w_i.row(r), *gf = grads.w_f.row(r), *go = grads.w_o.row(r),
             *gg = grads.w_g.row(r);
      const double *wi = params.w_i.row(r), *wf = params.w_f.row(r), *wo = params.w_o.row(r),
                   *wg = params.w_g.row(r);
      double acc = 0.0;
      for (int k = 0; k < l; ++k) {
        gi[k] += x * da_i[k];
        gf[k] += x * da_f[k];
        go[k] += x * da_o[k];
        gg[k] += x * da_g[k];
        acc += wi[k] * da_i[k] + wf[k] * da_f[k] + wo[k] * da_o[k] + wg[k] * da_g[k];
      }
      dx[r] = acc;
    }
    for (int r = 0; r < l; ++r) {
      double h = h_prev[r];
      double *gi = grads.u_i.row(r), *gf = grads.u_f.row(r), *go = grads.u_o.row(r),
             *gg = grads.u_g.row(r);
      const double *ui = params.u_i.row(r), *uf = params.u_f.row(r), *uo = params.u_o.row(r),
                   *ug = params.u_g.row(r);
      double acc = 0.0;
      for (int k = 0; k < l; ++k) {
        gi[k] += h * da_i[k];
        gf[k] += h * da_f[k];
        go[k] += h * da_o[k];
        gg[k] += h * da_g[k];
        acc += ui[k] * da_i[k] + uf[k] * da_f[k] + uo[k] * da_o[k] + ug[k] * da_g[k];
      }
      dh_prev[r] = acc;
    }

    double* ge = grads.embedding.row(cache.indices[t]);
    for (int r = 0; r < e; ++r) ge[r] += dx[r];

    dh = dh_prev;
  }
}

}  // namespace

void ssaqn_backward(const Parameters& params, const ForwardCache& cache, double dloss_dcs,
                    Parameters& grads) {
  const int d = params.config.dense_dim;
  const auto& x = cache.state.out;
  const auto& y = cache.action.out;
  double gx = cache.norm_state + kNormGuard;
  double gy = cache.norm_action + kNormGuard;

  std::vector<double> dx(d, 0.0), dy(d, 0.0);
  for (int k = 0; k < d; ++k) {
    dx[k] = dloss_dcs * y[k] / (gx * gy);
    dy[k] = dloss_dcs * x[k] / (gx * gy);
    if (cache.norm_state > 0.0) dx[k] -= dloss_dcs * cache.cs * x[k] / (cache.norm_state * gx);
    if (cache.norm_action > 0.0) dy[k] -= dloss_dcs * cache.cs * y[k] / (cache.norm_action * gy);
  }

  branch_backward(params, cache.state, dx, params.w_state, grads.w_state, grads.b_state, grads);
  branch_backward(params, cache.action, dy, params.w_action, grads.w_action, grads.b_action, grads);
}

void rmsprop_step(Parameters& params, OptimizerState& opt, const Parameters& grads, double lr) {
  std::vector<Mat*> ws, as;
  std::vector<const Mat*> gs;
  params.for_each([&](const char*, Mat& m) { ws.push_back(&m); });
  opt.accum.for_each([&](const char*, Mat& m) { as.push_back(&m); });
  grads.for_each([&](const char*, const Mat& m) { gs.push_back(&m); });
  for (std::size_t t = 0; t < ws.size(); ++t) {
    Mat& w = *ws[t];
    Mat& a = *as[t];
    const Mat& g = *gs[t];
    for (std::size_t k = 0; k < w.size(); ++k) {
      a.data[k] = opt.rho * a.data[k] + (1.0 - opt.rho) * g.data[k] * g.data[k];
      w.data[k] -= lr * g.data[k] / (std::sqrt(a.data[k]) + opt.eps);
    }
  }
}

namespace {

const char kBase64Chars[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const unsigned char* data, std::size_t len) {
  std::string out;
  out.reserve((len + 2) / 3 * 4);
  for (std::size_t i = 0; i < len; i += 3) {
    unsigned int v = data[i] << 16;
    if (i + 1 < len) v |= data[i + 1] << 8;
    if (i + 2 < len) v |= data[i + 2];
    out += kBase64Chars[(v >> 18) & 63];
    out += kBase64Chars[(v >> 12) & 63];
    out += (i + 1 < len) ? kBase64Chars[(v >> 6) & 63] : '=';
    out += (i + 2 < len) ? kBase64Chars[v & 63] : '=';
  }
  return out;
}

std::vector<unsigned char> base64_decode(const std::string& text) {
  std::vector<int> lut(256, -1);
  for (int i = 0; i < 64; ++i) lut[static_cast<unsigned char>(kBase64Chars[i])] = i;
  std::vector<unsigned char> out;
  int buffer = 0, bits = 0;
  for (char c : text) {
    if (c == '=' || c == '\n' || c == '\r') continue;
    int v = lut[static_cast<unsigned char>(c)];
    if (v < 0) throw IoError("invalid base64 payload");
    buffer = (buffer << 6) | v;
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<unsigned char>((buffer >> bits) & 0xff));
    }
  }
  return out;
}

std::string encode_doubles(const std::vector<double>& values) {
  // little-endian IEEE-754 doubles; assumes a little-endian host
  return base64_encode(reinterpret_cast<const unsigned char*>(values.data()),
                       values.size() * sizeof(double));
}

std::vector<double> decode_doubles(const std::string& text, std::size_t expected) {
  std::vector<unsigned char> bytes = base64_decode(text);
  if (bytes.size() != expected * sizeof(double))
    throw ShapeMismatch("tensor payload has wrong size");
  std::vector<double> values(expected);
  std::memcpy(values.data(), bytes.data(), bytes.size());
  return values;
}

}  // namespace

void save_checkpoint(const Parameters& params, const Vocabulary& vocab, const std::string& path) {
  if (vocab.size() != params.config.vocab_size)
    throw ShapeMismatch("vocabulary size does not match embedding rows");
  json j;
  j["format"] = 1;
  j["config"] = {{"vocab_size", params.config.vocab_size},
                 {"embedding_dim", params.config.embedding_dim},
                 {"lstm_dim", params.config.lstm_dim},
                 {"dense_dim", params.config.dense_dim}};
  j["vocab"] = vocab.tokens();
  json tensors = json::object();
  params.for_each([&](const char* name, const Mat& m) {
    tensors[name] = {{"rows", m.rows}, {"cols", m.cols}, {"data", encode_doubles(m.data)}};
  });
  j["tensors"] = tensors;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("failed to write checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();

  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::exception&) {
    throw FormatVersionMismatch("checkpoint is not a valid container: " + path);
  }

  try {
    if (j.value("format", 0) != 1)
      throw FormatVersionMismatch("unsupported checkpoint format version");

    NetworkConfig config;
    config.vocab_size = j.at("config").at("vocab_size").get<int>();
    config.embedding_dim = j.at("config").at("embedding_dim").get<int>();
    config.lstm_dim = j.at("config").at("lstm_dim").get<int>();
    config.dense_dim = j.at("config").at("dense_dim").get<int>();

    Checkpoint ckpt;
    // checkpoint token order is authoritative
    std::string lines;
    for (const auto& t : j.at("vocab").get<std::vector<std::string>>()) lines += t + "\n";
    ckpt.vocab = Vocabulary::deserialize(lines);

    if (ckpt.vocab.size() != config.vocab_size)
      throw ShapeMismatch("vocabulary size does not match config vocab_size");

    ckpt.params = Parameters(config);
    const json& tensors = j.at("tensors");
    ckpt.params.for_each([&](const char* name, Mat& m) {
      if (!tensors.contains(name)) throw ShapeMismatch(std::string("missing tensor: ") + name);
      const json& jt = tensors.at(name);
      if (jt.at("rows").get<int>() != m.rows || jt.at("cols").get<int>() != m.cols)
        throw ShapeMismatch(std::string("shape mismatch for tensor: ") + name);
      try {
        m.data = decode_doubles(jt.at("data").get<std::string>(), m.size());
      } catch (const ShapeMismatch&) {
        throw ShapeMismatch(std::string("shape mismatch for tensor: ") + name);
      }
    });
    return ckpt;
  } catch (const json::exception&) {
    throw FormatVersionMismatch("checkpoint is missing required fields: " + path);
  }
}

}  // namespace ssaqn
