#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gbox/geometry.hpp"
#include "gbox/io_util.hpp"

namespace gbox {

enum class Activation : std::uint32_t { relu = 0, gelu = 1 };

Activation parse_activation(std::string_view name);
std::string_view activation_name(Activation a);

/// One 2-layer MLP: out = w2 * act(w1 * x + b1) + b2.
struct Head {
  Eigen::MatrixXd w1;  // h x k
  Eigen::VectorXd b1;  // h
  Eigen::MatrixXd w2;  // d x h
  Eigen::VectorXd b2;  // d

  bool operator==(const Head&) const = default;
};

/// Center head and offset head mapping an input embedding to a Box. The
/// offset head output passes through softplus so offsets stay positive.
struct ProjectionParams {
  static constexpr std::uint32_t kFormatVersion = 1;

  Head center;
  Head offset;
  int input_dim = 0;   // k
  int hidden_dim = 0;  // h
  int box_dim = 0;     // d
  double dropout = 0.0;
  Activation activation = Activation::relu;
  std::uint64_t config_hash = 0;

  std::size_t parameter_count() const;
  bool operator==(const ProjectionParams&) const = default;
};

/// Fan-in/fan-out uniform weights, zero biases, offset output bias set so that
/// a zero hidden layer yields offsets of 0.5.
ProjectionParams init_params(int k, int h, int d, std::uint64_t rng_seed, double dropout = 0.2,
                             Activation act = Activation::relu);

enum class Mode { train, eval };

struct HeadTrace {
  Eigen::MatrixXd pre;     // h x B, before activation
  Eigen::MatrixXd mask;    // h x B, inverted-dropout scale (0 or 1/(1-p))
  Eigen::MatrixXd hidden;  // h x B, after activation and dropout
  Eigen::MatrixXd out;     // d x B, before softplus (offset head only)
};

/// Cached activations for an exact backward pass.
struct ForwardTrace {
  Eigen::MatrixXd input;  // k x B
  HeadTrace center;
  HeadTrace offset;
};

/// Columns are boxes.
struct BoxBatch {
  Eigen::MatrixXd centers;  // d x B
  Eigen::MatrixXd offsets;  // d x B

  Box<double> box(Eigen::Index col) const { return {centers.col(col), offsets.col(col)}; }
};

struct ForwardResult {
  BoxBatch boxes;
  std::optional<ForwardTrace> trace;  // train mode only
};

/// `inputs` is k x B. Train mode applies dropout drawn from `rng` and returns
/// a trace. Throws DataError on dimension mismatch, DivergenceError on
/// non-finite output.
ForwardResult forward(const ProjectionParams& p, const Eigen::MatrixXd& inputs, Mode mode, Rng* rng = nullptr);

Box<double> forward_eval(const ProjectionParams& p, const Eigen::VectorXd& input);

/// Parameter gradients, same layout as ProjectionParams heads.
struct ParamGrads {
  Head center;
  Head offset;
};

ParamGrads zero_grads(const ProjectionParams& p);

/// Back-propagates d(loss)/d(center) and d(loss)/d(offset) (each d x B).
ParamGrads backward(const ProjectionParams& p, const ForwardTrace& trace, const Eigen::MatrixXd& grad_centers,
                    const Eigen::MatrixXd& grad_offsets);

/// Flattened views in declaration order (center w1,b1,w2,b2 then offset).
Eigen::VectorXd flatten(const ProjectionParams& p);
Eigen::VectorXd flatten(const ParamGrads& g);
void assign_flat(ProjectionParams& p, const Eigen::VectorXd& flat);

std::string serialize_params(const ProjectionParams& p);
/// Throws DataError on bad magic, version mismatch, truncation, or CRC failure.
ProjectionParams deserialize_params(std::string_view bytes);

void save_params(const ProjectionParams& p, const std::filesystem::path& path);

struct ExpectedDims {
  std::optional<int> input_dim;
  std::optional<int> hidden_dim;
  std::optional<int> box_dim;
};

ProjectionParams load_params(const std::filesystem::path& path, const ExpectedDims& expected = {});

double softplus(double x);
double softplus_inverse(double y);

}  // namespace gbox
