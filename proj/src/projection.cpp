#include "gbox/projection.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <numbers>

#include "gbox/errors.hpp"

namespace gbox {
namespace {

double activate(Activation a, double x) {
  if (a == Activation::relu) return x > 0.0 ? x : 0.0;
  return 0.5 * x * std::erfc(-x / std::numbers::sqrt2);
}

double activate_grad(Activation a, double x) {
  if (a == Activation::relu) return x > 0.0 ? 1.0 : 0.0;
  const double cdf = 0.5 * std::erfc(-x / std::numbers::sqrt2);
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void init_head(Head& head, int k, int h, int d, Rng& rng) {
  auto uniform_fill = [&](Eigen::MatrixXd& m, int rows, int cols) {
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    m.resize(rows, cols);
    // Row-major fill so the draw order matches the on-disk layout.
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) m(r, c) = (2.0 * uniform_unit(rng) - 1.0) * bound;
  };
  uniform_fill(head.w1, h, k);
  head.b1 = Eigen::VectorXd::Zero(h);
  uniform_fill(head.w2, d, h);
  head.b2 = Eigen::VectorXd::Zero(d);
}

HeadTrace run_head(const Head& head, const Eigen::MatrixXd& x, Activation act, double dropout, Mode mode, Rng* rng) {
  HeadTrace t;
  t.pre = (head.w1 * x).colwise() + head.b1;
  t.hidden = t.pre.unaryExpr([act](double v) { return activate(act, v); });
  if (mode == Mode::train && dropout > 0.0) {
    const double keep_scale = 1.0 / (1.0 - dropout);
    t.mask.resize(t.pre.rows(), t.pre.cols());
    for (Eigen::Index c = 0; c < t.mask.cols(); ++c)
      for (Eigen::Index r = 0; r < t.mask.rows(); ++r) t.mask(r, c) = uniform_unit(*rng) < dropout ? 0.0 : keep_scale;
    t.hidden = t.hidden.cwiseProduct(t.mask);
  } else {
    t.mask = Eigen::MatrixXd::Ones(t.pre.rows(), t.pre.cols());
  }
  t.out = (head.w2 * t.hidden).colwise() + head.b2;
  return t;
}

void backward_head(const Head& head, const HeadTrace& t, const Eigen::MatrixXd& input, const Eigen::MatrixXd& grad_out,
                   Activation act, Head& grad) {
  grad.w2 = grad_out * t.hidden.transpose();
  grad.b2 = grad_out.rowwise().sum();
  Eigen::MatrixXd grad_hidden = head.w2.transpose() * grad_out;
  grad_hidden = grad_hidden.cwiseProduct(t.mask);
  grad_hidden = grad_hidden.cwiseProduct(t.pre.unaryExpr([act](double v) { return activate_grad(act, v); }));
  grad.w1 = grad_hidden * input.transpose();
  grad.b1 = grad_hidden.rowwise().sum();
}

template <typename Fn>
void for_each_array(const Head& h, Fn&& fn) {
  fn(h.w1);
  fn(h.b1);
  fn(h.w2);
  fn(h.b2);
}

// Row-major traversal of a dense Eigen object.
template <typename M, typename Fn>
void visit_row_major(M& m, Fn&& fn) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) fn(m(r, c));
}

class ByteWriter {
 public:
  template <typename T>
  void put(T value) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    out_.append(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  }
  void raw(std::string_view s) { out_ += s; }
  std::string& str() { return out_; }

 private:
  std::string out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view in) : in_(in) {}
  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > in_.size()) throw DataError("checkpoint is truncated");
    std::array<unsigned char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), in_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    pos_ += sizeof(T);
    return std::bit_cast<T>(bytes);
  }
  std::size_t pos() const { return pos_; }

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

constexpr char kMagic[4] = {'G', 'B', 'X', 'T'};

}  // namespace

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "gelu") return Activation::gelu;
  throw ValidationError("unknown activation '" + std::string(name) + "' (expected relu or gelu)");
}

std::string_view activation_name(Activation a) { return a == Activation::relu ? "relu" : "gelu"; }

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double softplus_inverse(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

std::size_t ProjectionParams::parameter_count() const {
  const auto per_head = static_cast<std::size_t>(input_dim) * hidden_dim + hidden_dim +
                        static_cast<std::size_t>(hidden_dim) * box_dim + box_dim;
  return 2 * per_head;
}

ProjectionParams init_params(int k, int h, int d, std::uint64_t rng_seed, double dropout, Activation act) {
  if (k < 1 || h < 1 || d < 1) throw ValidationError("projection dims must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("dropout must lie in [0, 1)");
  ProjectionParams p;
  p.input_dim = k;
  p.hidden_dim = h;
  p.box_dim = d;
  p.dropout = dropout;
  p.activation = act;
  Rng rng(rng_seed);
  init_head(p.center, k, h, d, rng);
  init_head(p.offset, k, h, d, rng);
  p.offset.b2.setConstant(softplus_inverse(0.5));
  return p;
}

ForwardResult forward(const ProjectionParams& p, const Eigen::MatrixXd& inputs, Mode mode, Rng* rng) {
  if (inputs.rows() != p.input_dim) {
    throw DataError("input dimension " + std::to_string(inputs.rows()) + " does not match model input dimension " +
                    std::to_string(p.input_dim));
  }
  if (mode == Mode::train && p.dropout > 0.0 && rng == nullptr) {
    throw std::invalid_argument("train-mode forward with dropout needs an rng");
  }
  ForwardResult result;
  HeadTrace ct = run_head(p.center, inputs, p.activation, p.dropout, mode, rng);
  HeadTrace ot = run_head(p.offset, inputs, p.activation, p.dropout, mode, rng);
  result.boxes.centers = ct.out;
  result.boxes.offsets = ot.out.unaryExpr([](double v) { return softplus(v); });
  if (!result.boxes.centers.allFinite() || !result.boxes.offsets.allFinite()) {
    throw DivergenceError("projection produced non-finite box parameters");
  }
  // softplus underflows to 0 for very negative inputs; keep offsets positive.
  result.boxes.offsets = result.boxes.offsets.cwiseMax(std::numeric_limits<double>::min());
  if (mode == Mode::train) result.trace = ForwardTrace{inputs, std::move(ct), std::move(ot)};
  return result;
}

Box<double> forward_eval(const ProjectionParams& p, const Eigen::VectorXd& input) {
  auto r = forward(p, input, Mode::eval);
  return r.boxes.box(0);
}

ParamGrads zero_grads(const ProjectionParams& p) {
  ParamGrads g;
  for (Head* h : {&g.center, &g.offset}) {
    h->w1 = Eigen::MatrixXd::Zero(p.hidden_dim, p.input_dim);
    h->b1 = Eigen::VectorXd::Zero(p.hidden_dim);
    h->w2 = Eigen::MatrixXd::Zero(p.box_dim, p.hidden_dim);
    h->b2 = Eigen::VectorXd::Zero(p.box_dim);
  }
  return g;
}

ParamGrads backward(const ProjectionParams& p, const ForwardTrace& trace, const Eigen::MatrixXd& grad_centers,
                    const Eigen::MatrixXd& grad_offsets) {
  const Eigen::Index batch = trace.input.cols();
  if (grad_centers.rows() != p.box_dim || grad_offsets.rows() != p.box_dim || grad_centers.cols() != batch ||
      grad_offsets.cols() != batch || trace.center.pre.rows() != p.hidden_dim) {
    throw std::invalid_argument("backward: gradient shape does not match the forward trace");
  }
  ParamGrads g;
  backward_head(p.center, trace.center, trace.input, grad_centers, p.activation, g.center);
  const Eigen::MatrixXd softplus_grad = trace.offset.out.unaryExpr([](double v) { return sigmoid(v); });
  backward_head(p.offset, trace.offset, trace.input, grad_offsets.cwiseProduct(softplus_grad), p.activation, g.offset);
  return g;
}

Eigen::VectorXd flatten(const ProjectionParams& p) {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(p.parameter_count()));
  Eigen::Index pos = 0;
  for (const Head* h : {&p.center, &p.offset})
    for_each_array(*h, [&](const auto& m) {
      visit_row_major(m, [&](double v) { flat[pos++] = v; });
    });
  return flat;
}

Eigen::VectorXd flatten(const ParamGrads& g) {
  std::size_t count = 0;
  for (const Head* h : {&g.center, &g.offset}) for_each_array(*h, [&](const auto& m) { count += m.size(); });
  Eigen::VectorXd flat(static_cast<Eigen::Index>(count));
  Eigen::Index pos = 0;
  for (const Head* h : {&g.center, &g.offset})
    for_each_array(*h, [&](const auto& m) {
      visit_row_major(m, [&](double v) { flat[pos++] = v; });
    });
  return flat;
}

void assign_flat(ProjectionParams& p, const Eigen::VectorXd& flat) {
  if (flat.size() != static_cast<Eigen::Index>(p.parameter_count())) {
    throw std::invalid_argument("assign_flat: size mismatch");
  }
  Eigen::Index pos = 0;
  auto fill = [&](auto& m) { visit_row_major(m, [&](double& v) { v = flat[pos++]; }); };
  for (Head* h : {&p.center, &p.offset}) {
    fill(h->w1);
    fill(h->b1);
    fill(h->w2);
    fill(h->b2);
  }
}

std::string serialize_params(const ProjectionParams& p) {
  ByteWriter w;
  w.raw(std::string_view(kMagic, 4));
  w.put<std::uint32_t>(ProjectionParams::kFormatVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(p.input_dim));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(p.hidden_dim));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(p.box_dim));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(p.activation));
  w.put<double>(p.dropout);
  w.put<std::uint64_t>(p.config_hash);
  for (double v : flatten(p)) w.put<double>(v);
  w.put<std::uint32_t>(crc32(w.str()));
  return std::move(w.str());
}

ProjectionParams deserialize_params(std::string_view bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw DataError("not a checkpoint (bad magic)");
  ByteReader r(bytes.substr(4));
  const auto version = r.get<std::uint32_t>();
  if (version != ProjectionParams::kFormatVersion) {
    throw DataError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                    std::to_string(ProjectionParams::kFormatVersion) + ")");
  }
  ProjectionParams p;
  p.input_dim = static_cast<int>(r.get<std::uint32_t>());
  p.hidden_dim = static_cast<int>(r.get<std::uint32_t>());
  p.box_dim = static_cast<int>(r.get<std::uint32_t>());
  const auto act = r.get<std::uint32_t>();
  if (act > 1) throw DataError("checkpoint has unknown activation code");
  p.activation = static_cast<Activation>(act);
  p.dropout = r.get<double>();
  p.config_hash = r.get<std::uint64_t>();
  if (p.input_dim < 1 || p.hidden_dim < 1 || p.box_dim < 1) throw DataError("checkpoint has invalid dimensions");
  const std::size_t expected = 4 + 5 * 4 + 8 + 8 + p.parameter_count() * 8 + 4;
  if (bytes.size() != expected) {
    throw DataError("checkpoint is truncated or corrupt (" + std::to_string(bytes.size()) + " bytes, expected " +
                    std::to_string(expected) + ")");
  }
  const std::uint32_t stored = ByteReader(bytes.substr(bytes.size() - 4)).get<std::uint32_t>();
  if (stored != crc32(bytes.substr(0, bytes.size() - 4))) throw DataError("checkpoint checksum mismatch");

  ProjectionParams shaped = init_params(p.input_dim, p.hidden_dim, p.box_dim, 0, 0.0, p.activation);
  shaped.dropout = p.dropout;
  shaped.config_hash = p.config_hash;
  Eigen::VectorXd flat(static_cast<Eigen::Index>(p.parameter_count()));
  for (Eigen::Index i = 0; i < flat.size(); ++i) flat[i] = r.get<double>();
  assign_flat(shaped, flat);
  return shaped;
}

void save_params(const ProjectionParams& p, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_params(p));
}

ProjectionParams load_params(const std::filesystem::path& path, const ExpectedDims& expected) {
  ProjectionParams p = deserialize_params(read_file(path));
  auto check = [](const std::optional<int>& want, int got, const char* name) {
    if (want && *want != got) {
      throw DataError(std::string("checkpoint ") + name + " is " + std::to_string(got) + " but configuration expects " +
                      std::to_string(*want));
    }
  };
  check(expected.input_dim, p.input_dim, "input dimension k");
  check(expected.hidden_dim, p.hidden_dim, "hidden width h");
  check(expected.box_dim, p.box_dim, "box dimension d");
  return p;
}

}  // namespace gbox
