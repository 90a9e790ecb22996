#include "cryptoens/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "cryptoens/errors.hpp"
#include "cryptoens/kernels.hpp"

namespace cryptoens::nn {
namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

bool par(Exec exec, std::size_t n) { return exec == Exec::Parallel && n >= 32; }

}  // namespace

ParamLayout::ParamLayout(const NetShape& s) {
  std::size_t off = 0;
  auto take = [&off](std::size_t rows, std::size_t cols) {
    ParamBlock b{off, rows, cols};
    off += rows * cols;
    return b;
  };
  fc_w = take(s.input_dim, s.fc_units);
  fc_b = take(1, s.fc_units);
  for (std::size_t l = 0; l < s.lstm_layers; ++l) {
    const std::size_t in = l == 0 ? s.fc_units : s.hidden;
    lstm_wx.push_back(take(in, 4 * s.hidden));
    lstm_wh.push_back(take(s.hidden, 4 * s.hidden));
    lstm_b.push_back(take(1, 4 * s.hidden));
  }
  bn_gamma = take(1, s.hidden);
  bn_beta = take(1, s.hidden);
  mu_w = take(s.hidden, s.actions);
  mu_b = take(1, s.actions);
  sigma_w = take(s.hidden, s.actions);
  sigma_b = take(1, s.actions);
  value_w = take(s.hidden, 1);
  value_b = take(1, 1);
  cov_w = take(s.hidden, s.cov_dim());
  cov_b = take(1, s.cov_dim());
  total = off;
}

std::vector<std::pair<std::string, ParamBlock>> ParamLayout::named() const {
  std::vector<std::pair<std::string, ParamBlock>> out{{"fc_w", fc_w}, {"fc_b", fc_b}};
  for (std::size_t l = 0; l < lstm_wx.size(); ++l) {
    const std::string p = "lstm" + std::to_string(l) + "_";
    out.emplace_back(p + "wx", lstm_wx[l]);
    out.emplace_back(p + "wh", lstm_wh[l]);
    out.emplace_back(p + "b", lstm_b[l]);
  }
  out.insert(out.end(), {{"bn_gamma", bn_gamma}, {"bn_beta", bn_beta}, {"mu_w", mu_w},
                         {"mu_b", mu_b}, {"sigma_w", sigma_w}, {"sigma_b", sigma_b},
                         {"value_w", value_w}, {"value_b", value_b}});
  if (cov_w.size() > 0) out.insert(out.end(), {{"cov_w", cov_w}, {"cov_b", cov_b}});
  return out;
}

NetworkWeights::NetworkWeights(const NetShape& s)
    : shape(s),
      layout(s),
      params(layout.total, 0.0),
      bn_running_mean(s.hidden, 0.0),
      bn_running_var(s.hidden, 1.0) {}

NetworkWeights xavier_init(const NetShape& shape, std::uint64_t seed) {
  NetworkWeights w(shape);
  std::mt19937_64 rng(seed);
  auto fill = [&](const ParamBlock& b, std::size_t col_groups) {
    // col_groups > 1 splits the columns into independent gate matrices
    const std::size_t fan_out = b.cols / col_groups;
    const double bound = std::sqrt(6.0 / static_cast<double>(b.rows + fan_out));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (double& v : w.block(b)) v = u(rng);
  };
  const auto& L = w.layout;
  fill(L.fc_w, 1);
  for (std::size_t l = 0; l < shape.lstm_layers; ++l) {
    fill(L.lstm_wx[l], 4);
    fill(L.lstm_wh[l], 4);
  }
  for (double& v : w.block(L.bn_gamma)) v = 1.0;
  fill(L.mu_w, 1);
  fill(L.sigma_w, 1);
  fill(L.value_w, 1);
  if (shape.cov_head) fill(L.cov_w, 1);
  return w;
}

ForwardOutput forward(const NetworkWeights& w, std::span<const double> inputs, std::size_t batch,
                      Mode mode, Exec exec, ForwardTrace* trace) {
  const NetShape& s = w.shape;
  const ParamLayout& L = w.layout;
  if (batch == 0 || inputs.size() != batch * s.seq_len * s.input_dim)
    throw ModelError("forward: input shape mismatch (expected batch x " + std::to_string(s.seq_len) +
                     " x " + std::to_string(s.input_dim) + ")");
  if (w.params.size() != L.total) throw ModelError("forward: weight vector size mismatch");

  const std::size_t B = batch, T = s.seq_len, F = s.fc_units, H = s.hidden, G = 4 * H;
  ForwardTrace local;
  ForwardTrace& tr = trace ? *trace : local;
  tr.mode = mode;
  tr.batch = B;
  if (trace) tr.input.assign(inputs.begin(), inputs.end());

  // FC + sigmoid on every (sample, step) row, then reorder to time-major.
  std::vector<double> fc_rows(B * T * F);
  kernels::matmul(exec, inputs.data(), w.block(L.fc_w).data(), fc_rows.data(), B * T, s.input_dim, F,
                  false);
  kernels::add_row_bias(exec, fc_rows.data(), w.block(L.fc_b).data(), B * T, F);
  tr.fc_out.resize(T * B * F);
  {
    const auto n = static_cast<std::ptrdiff_t>(B);
#pragma omp parallel for schedule(static) if (par(exec, B))
    for (std::ptrdiff_t bi = 0; bi < n; ++bi) {
      const auto b = static_cast<std::size_t>(bi);
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t f = 0; f < F; ++f)
          tr.fc_out[(t * B + b) * F + f] = sigmoid(fc_rows[(b * T + t) * F + f]);
    }
  }

  tr.gates.assign(s.lstm_layers, {});
  tr.cell.assign(s.lstm_layers, {});
  tr.hidden.assign(s.lstm_layers, {});
  std::vector<double> pre(B * G);
  for (std::size_t l = 0; l < s.lstm_layers; ++l) {
    const std::size_t in = l == 0 ? F : H;
    const double* xs = l == 0 ? tr.fc_out.data() : tr.hidden[l - 1].data();
    auto& gates = tr.gates[l];
    auto& cell = tr.cell[l];
    auto& hid = tr.hidden[l];
    gates.resize(T * B * G);
    cell.resize(T * B * H);
    hid.resize(T * B * H);
    const double* wx = w.block(L.lstm_wx[l]).data();
    const double* wh = w.block(L.lstm_wh[l]).data();
    const double* bias = w.block(L.lstm_b[l]).data();
    for (std::size_t t = 0; t < T; ++t) {
      kernels::matmul(exec, xs + t * B * in, wx, pre.data(), B, in, G, false);
      if (t > 0) kernels::matmul(exec, hid.data() + (t - 1) * B * H, wh, pre.data(), B, H, G, true);
      kernels::add_row_bias(exec, pre.data(), bias, B, G);
      const auto n = static_cast<std::ptrdiff_t>(B);
#pragma omp parallel for schedule(static) if (par(exec, B))
      for (std::ptrdiff_t bi = 0; bi < n; ++bi) {
        const auto b = static_cast<std::size_t>(bi);
        const double* a = pre.data() + b * G;
        double* g = gates.data() + (t * B + b) * G;
        double* c = cell.data() + (t * B + b) * H;
        double* h = hid.data() + (t * B + b) * H;
        const double* c_prev = t > 0 ? cell.data() + ((t - 1) * B + b) * H : nullptr;
        for (std::size_t j = 0; j < H; ++j) {
          const double ig = sigmoid(a[j]);
          const double fg = sigmoid(a[H + j]);
          const double cg = std::tanh(a[2 * H + j]);
          const double og = sigmoid(a[3 * H + j]);
          g[j] = ig;
          g[H + j] = fg;
          g[2 * H + j] = cg;
          g[3 * H + j] = og;
          c[j] = (c_prev ? fg * c_prev[j] : 0.0) + ig * cg;
          h[j] = og * std::tanh(c[j]);
        }
      }
    }
  }

  // Batch norm on the final hidden state.
  const double* last = tr.hidden.back().data() + (T - 1) * B * H;
  tr.bn_mean.assign(H, 0.0);
  tr.bn_inv_std.assign(H, 0.0);
  if (mode == Mode::Train) {
    std::vector<double> var(H, 0.0);
    kernels::colsum(exec, last, tr.bn_mean.data(), B, H, false);
    for (double& m : tr.bn_mean) m /= static_cast<double>(B);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t j = 0; j < H; ++j) {
        const double d = last[b * H + j] - tr.bn_mean[j];
        var[j] += d * d;
      }
    for (std::size_t j = 0; j < H; ++j) {
      var[j] /= static_cast<double>(B);
      tr.bn_inv_std[j] = 1.0 / std::sqrt(var[j] + kBatchNormEps);
    }
    tr.bn_var = std::move(var);
  } else {
    tr.bn_var = w.bn_running_var;
    for (std::size_t j = 0; j < H; ++j) {
      tr.bn_mean[j] = w.bn_running_mean[j];
      tr.bn_inv_std[j] = 1.0 / std::sqrt(w.bn_running_var[j] + kBatchNormEps);
    }
  }
  tr.bn_xhat.resize(B * H);
  tr.head_in.resize(B * H);
  {
    const auto gamma = w.block(L.bn_gamma);
    const auto beta = w.block(L.bn_beta);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t j = 0; j < H; ++j) {
        const double xh = (last[b * H + j] - tr.bn_mean[j]) * tr.bn_inv_std[j];
        tr.bn_xhat[b * H + j] = xh;
        tr.head_in[b * H + j] = gamma[j] * xh + beta[j];
      }
  }

  ForwardOutput& out = tr.out;
  out.batch = B;
  const std::size_t D = s.actions, C = s.cov_dim();
  out.mu.resize(B * D);
  out.sigma.resize(B * D);
  out.value.resize(B);
  out.cov.resize(B * C);
  kernels::matmul(exec, tr.head_in.data(), w.block(L.mu_w).data(), out.mu.data(), B, H, D, false);
  kernels::add_row_bias(exec, out.mu.data(), w.block(L.mu_b).data(), B, D);
  for (double& v : out.mu) v = std::tanh(v);
  kernels::matmul(exec, tr.head_in.data(), w.block(L.sigma_w).data(), out.sigma.data(), B, H, D, false);
  kernels::add_row_bias(exec, out.sigma.data(), w.block(L.sigma_b).data(), B, D);
  for (double& v : out.sigma) v = sigmoid(v);
  kernels::matmul(exec, tr.head_in.data(), w.block(L.value_w).data(), out.value.data(), B, H, 1, false);
  kernels::add_row_bias(exec, out.value.data(), w.block(L.value_b).data(), B, 1);
  if (C > 0) {
    kernels::matmul(exec, tr.head_in.data(), w.block(L.cov_w).data(), out.cov.data(), B, H, C, false);
    kernels::add_row_bias(exec, out.cov.data(), w.block(L.cov_b).data(), B, C);
  }
  if (trace) return tr.out;
  return std::move(tr.out);
}

std::vector<double> backward(const NetworkWeights& w, const ForwardTrace& tr,
                             const HeadGradients& up, Exec exec) {
  const NetShape& s = w.shape;
  const ParamLayout& L = w.layout;
  const std::size_t B = tr.batch, T = s.seq_len, F = s.fc_units, H = s.hidden, G = 4 * H;
  const std::size_t D = s.actions, C = s.cov_dim();
  if (B == 0 || tr.input.size() != B * T * s.input_dim || tr.gates.size() != s.lstm_layers)
    throw ModelError("backward: trace does not match the network (was forward called with a trace?)");
  auto check = [B](const std::vector<double>& g, std::size_t dim, const char* name) {
    if (!g.empty() && g.size() != B * dim)
      throw ModelError(std::string("backward: upstream gradient shape mismatch for ") + name);
  };
  check(up.mu, D, "mu");
  check(up.sigma, D, "sigma");
  check(up.value, 1, "value");
  check(up.cov, C, "cov");

  std::vector<double> grad(L.total, 0.0);
  auto gblock = [&grad](const ParamBlock& b) { return grad.data() + b.offset; };

  // Heads.
  std::vector<double> d_head_in(B * H, 0.0);
  auto head = [&](const std::vector<double>& upstream, std::size_t dim, const ParamBlock& wb,
                  const ParamBlock& bb, auto local_derivative) {
    if (upstream.empty() || dim == 0) return;
    std::vector<double> dpre(B * dim);
    for (std::size_t i = 0; i < B * dim; ++i) dpre[i] = upstream[i] * local_derivative(i);
    kernels::matmul_at(exec, tr.head_in.data(), dpre.data(), gblock(wb), B, H, dim, true);
    kernels::colsum(exec, dpre.data(), gblock(bb), B, dim, true);
    kernels::matmul_bt(exec, dpre.data(), w.block(wb).data(), d_head_in.data(), B, dim, H, true);
  };
  head(up.mu, D, L.mu_w, L.mu_b, [&](std::size_t i) { return 1.0 - tr.out.mu[i] * tr.out.mu[i]; });
  head(up.sigma, D, L.sigma_w, L.sigma_b,
       [&](std::size_t i) { return tr.out.sigma[i] * (1.0 - tr.out.sigma[i]); });
  head(up.value, 1, L.value_w, L.value_b, [](std::size_t) { return 1.0; });
  head(up.cov, C, L.cov_w, L.cov_b, [](std::size_t) { return 1.0; });

  // Batch norm.
  std::vector<double> d_last(B * H, 0.0);
  {
    const auto gamma = w.block(L.bn_gamma);
    double* dgamma = gblock(L.bn_gamma);
    double* dbeta = gblock(L.bn_beta);
    std::vector<double> dxhat(B * H);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t j = 0; j < H; ++j) {
        const double dy = d_head_in[b * H + j];
        dgamma[j] += dy * tr.bn_xhat[b * H + j];
        dbeta[j] += dy;
        dxhat[b * H + j] = dy * gamma[j];
      }
    if (tr.mode == Mode::Train) {
      std::vector<double> sum_dx(H, 0.0), sum_dx_xhat(H, 0.0);
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t j = 0; j < H; ++j) {
          sum_dx[j] += dxhat[b * H + j];
          sum_dx_xhat[j] += dxhat[b * H + j] * tr.bn_xhat[b * H + j];
        }
      const double n = static_cast<double>(B);
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t j = 0; j < H; ++j)
          d_last[b * H + j] = tr.bn_inv_std[j] / n *
                              (n * dxhat[b * H + j] - sum_dx[j] - tr.bn_xhat[b * H + j] * sum_dx_xhat[j]);
    } else {
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t j = 0; j < H; ++j) d_last[b * H + j] = dxhat[b * H + j] * tr.bn_inv_std[j];
    }
  }

  // LSTM, top layer first. d_seq holds dL/dh from the layer above for every step.
  std::vector<double> d_seq(T * B * H, 0.0);
  std::copy(d_last.begin(), d_last.end(), d_seq.begin() + (T - 1) * B * H);
  std::vector<double> d_fc(T * B * F, 0.0);
  std::vector<double> dh_next(B * H), dc_next(B * H), da(B * G);
  for (std::size_t li = s.lstm_layers; li-- > 0;) {
    const std::size_t in = li == 0 ? F : H;
    const double* xs = li == 0 ? tr.fc_out.data() : tr.hidden[li - 1].data();
    const auto& gates = tr.gates[li];
    const auto& cell = tr.cell[li];
    const auto& hid = tr.hidden[li];
    std::vector<double> d_in(T * B * in, 0.0);
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    std::fill(dc_next.begin(), dc_next.end(), 0.0);
    for (std::size_t t = T; t-- > 0;) {
      const auto n = static_cast<std::ptrdiff_t>(B);
#pragma omp parallel for schedule(static) if (par(exec, B))
      for (std::ptrdiff_t bi = 0; bi < n; ++bi) {
        const auto b = static_cast<std::size_t>(bi);
        const double* g = gates.data() + (t * B + b) * G;
        const double* c = cell.data() + (t * B + b) * H;
        const double* c_prev = t > 0 ? cell.data() + ((t - 1) * B + b) * H : nullptr;
        const double* dh_up = d_seq.data() + (t * B + b) * H;
        double* dhn = dh_next.data() + b * H;
        double* dcn = dc_next.data() + b * H;
        double* a = da.data() + b * G;
        for (std::size_t j = 0; j < H; ++j) {
          const double ig = g[j], fg = g[H + j], cg = g[2 * H + j], og = g[3 * H + j];
          const double tc = std::tanh(c[j]);
          const double dh = dh_up[j] + dhn[j];
          const double dc = dh * og * (1.0 - tc * tc) + dcn[j];
          a[j] = dc * cg * ig * (1.0 - ig);
          a[H + j] = c_prev ? dc * c_prev[j] * fg * (1.0 - fg) : 0.0;
          a[2 * H + j] = dc * ig * (1.0 - cg * cg);
          a[3 * H + j] = dh * tc * og * (1.0 - og);
          dcn[j] = dc * fg;
        }
      }
      kernels::matmul_at(exec, xs + t * B * in, da.data(), gblock(L.lstm_wx[li]), B, in, G, true);
      if (t > 0)
        kernels::matmul_at(exec, hid.data() + (t - 1) * B * H, da.data(), gblock(L.lstm_wh[li]), B, H, G,
                           true);
      kernels::colsum(exec, da.data(), gblock(L.lstm_b[li]), B, G, true);
      kernels::matmul_bt(exec, da.data(), w.block(L.lstm_wx[li]).data(), d_in.data() + t * B * in, B,
                         G, in, false);
      kernels::matmul_bt(exec, da.data(), w.block(L.lstm_wh[li]).data(), dh_next.data(), B, G, H, false);
    }
    if (li == 0)
      d_fc = std::move(d_in);
    else
      d_seq = std::move(d_in);
  }

  // FC + sigmoid, back to sample-major rows.
  std::vector<double> dpre(B * T * F);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t f = 0; f < F; ++f) {
        const double z = tr.fc_out[(t * B + b) * F + f];
        dpre[(b * T + t) * F + f] = d_fc[(t * B + b) * F + f] * z * (1.0 - z);
      }
  kernels::matmul_at(exec, tr.input.data(), dpre.data(), gblock(L.fc_w), B * T, s.input_dim, F, true);
  kernels::colsum(exec, dpre.data(), gblock(L.fc_b), B * T, F, true);
  return grad;
}

void update_running_stats(NetworkWeights& w, const ForwardTrace& tr, double momentum) {
  const std::size_t H = w.shape.hidden, B = tr.batch;
  std::vector<double> mean = tr.bn_mean, var = tr.bn_var;
  if (tr.mode == Mode::Eval) {
    const double* last = tr.hidden.back().data() + (w.shape.seq_len - 1) * B * H;
    for (std::size_t j = 0; j < H; ++j) {
      double m = 0.0, v = 0.0;
      for (std::size_t b = 0; b < B; ++b) m += last[b * H + j];
      m /= static_cast<double>(B);
      for (std::size_t b = 0; b < B; ++b) v += (last[b * H + j] - m) * (last[b * H + j] - m);
      mean[j] = m;
      var[j] = v / static_cast<double>(B);
    }
  }
  for (std::size_t j = 0; j < H; ++j) {
    if (!w.bn_initialized) {
      w.bn_running_mean[j] = mean[j];
      w.bn_running_var[j] = var[j];
    } else {
      w.bn_running_mean[j] = momentum * w.bn_running_mean[j] + (1.0 - momentum) * mean[j];
      w.bn_running_var[j] = momentum * w.bn_running_var[j] + (1.0 - momentum) * var[j];
    }
  }
  w.bn_initialized = true;
}

}  // namespace cryptoens::nn
