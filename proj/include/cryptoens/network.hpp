#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cryptoens/exec.hpp"

// Actor-critic network: per-timestep FC(sigmoid) -> stacked LSTM -> batch norm on the last
// hidden state -> mean (tanh), std (sigmoid) and value (linear) heads, plus an optional
// linear head for the strict lower triangle of a Cholesky factor.
namespace cryptoens::nn {

struct NetShape {
  std::size_t input_dim = 66;
  std::size_t seq_len = 12;
  std::size_t fc_units = 16;
  std::size_t hidden = 64;
  std::size_t lstm_layers = 2;
  std::size_t actions = 5;
  bool cov_head = false;

  std::size_t cov_dim() const { return cov_head ? actions * (actions - 1) / 2 : 0; }
  bool operator==(const NetShape&) const = default;
};

/// A weight block inside the flat parameter vector, viewed as rows x cols (row-major).
struct ParamBlock {
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const { return rows * cols; }
};

struct ParamLayout {
  ParamBlock fc_w, fc_b;
  std::vector<ParamBlock> lstm_wx, lstm_wh, lstm_b;  // gates ordered [input, forget, cell, output]
  ParamBlock bn_gamma, bn_beta;
  ParamBlock mu_w, mu_b, sigma_w, sigma_b, value_w, value_b, cov_w, cov_b;
  std::size_t total = 0;

  explicit ParamLayout(const NetShape& shape);
  std::vector<std::pair<std::string, ParamBlock>> named() const;
};

struct NetworkWeights {
  NetShape shape;
  ParamLayout layout{shape};
  std::vector<double> params;
  std::vector<double> bn_running_mean;
  std::vector<double> bn_running_var;
  bool bn_initialized = false;

  NetworkWeights() = default;
  explicit NetworkWeights(const NetShape& s);

  std::span<double> block(const ParamBlock& b) { return {params.data() + b.offset, b.size()}; }
  std::span<const double> block(const ParamBlock& b) const {
    return {params.data() + b.offset, b.size()};
  }
};

/// Weights ~ U(+-sqrt(6 / (fan_in + fan_out))) per gate block, biases 0, BN scale 1.
NetworkWeights xavier_init(const NetShape& shape, std::uint64_t seed);

enum class Mode { Train, Eval };

inline constexpr double kBatchNormEps = 1e-5;

struct ForwardOutput {
  std::size_t batch = 0;
  std::vector<double> mu;     // batch x actions, in (-1, 1)
  std::vector<double> sigma;  // batch x actions, in (0, 1)
  std::vector<double> value;  // batch
  std::vector<double> cov;    // batch x cov_dim
};

/// Activations cached by forward() for an exact backward pass. Sequence buffers are
/// time-major: [t][sample][unit].
struct ForwardTrace {
  Mode mode = Mode::Eval;
  std::size_t batch = 0;
  std::vector<double> input;   // batch x seq x input_dim (sample-major, as given)
  std::vector<double> fc_out;  // seq x batch x fc_units
  std::vector<std::vector<double>> gates;  // per layer: seq x batch x 4H (post-activation)
  std::vector<std::vector<double>> cell;   // per layer: seq x batch x H
  std::vector<std::vector<double>> hidden; // per layer: seq x batch x H
  std::vector<double> bn_mean, bn_var, bn_inv_std;  // statistics used for normalization
  std::vector<double> bn_xhat;              // batch x H
  std::vector<double> head_in;              // batch x H (batch-norm output)
  ForwardOutput out;
};

/// `inputs` is batch x seq_len x input_dim. Eval mode normalizes with running statistics
/// (identity before the first training batch), so each row's output is independent of
/// the rest of the batch.
ForwardOutput forward(const NetworkWeights& w, std::span<const double> inputs, std::size_t batch,
                      Mode mode, Exec exec = Exec::Parallel, ForwardTrace* trace = nullptr);

/// Upstream gradients of the loss with respect to the head outputs; an empty vector
/// means zero.
struct HeadGradients {
  std::vector<double> mu, sigma, value, cov;
};

/// Reverse-mode gradient of the loss with respect to every parameter.
std::vector<double> backward(const NetworkWeights& w, const ForwardTrace& trace,
                             const HeadGradients& grads, Exec exec = Exec::Parallel);

/// running = momentum * running + (1 - momentum) * batch; the first call copies the batch
/// statistics. For eval-mode traces the batch statistics are recomputed from the cached
/// last hidden states.
void update_running_stats(NetworkWeights& w, const ForwardTrace& trace, double momentum = 0.9);

}  // namespace cryptoens::nn
