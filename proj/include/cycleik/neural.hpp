#pragma once

// Minimal dense network engine with reverse-mode gradients, the [-1, 1]
// normalizer shared by both IK model kinds, the fixed layout presets and the
// binary model format.
//
// Batches are column-major: each column of an input/output matrix is one
// sample.

#include <Eigen/Dense>

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cycleik/chain.hpp"
#include "cycleik/dataset.hpp"
#include "json.hpp"

namespace cycleik {

class ModelError : public Error {
 public:
  using Error::Error;
};

enum class Activation { Gelu, Tanh, Identity };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::Gelu: return "gelu";
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
  }
  return "?";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "gelu") return Activation::Gelu;
  if (s == "tanh") return Activation::Tanh;
  if (s == "identity") return Activation::Identity;
  throw ModelError("unknown activation '" + s + "'");
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluK = 0.044715;

/// Tanh approximation of the Gaussian error linear unit.
inline double gelu(double x) {
  return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluK * x * x * x)));
}

inline double gelu_grad(double x) {
  const double t = std::tanh(kGeluC * (x + kGeluK * x * x * x));
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluK * x * x);
}

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
  Activation activation = Activation::Gelu;
};

class DenseNet {
 public:
  std::vector<DenseLayer> layers;

  /// `sizes` = input, hidden..., output. The last `tanh_layers` affine layers
  /// use tanh, the rest GELU. Weights are Glorot-uniform, biases zero.
  static DenseNet create(const std::vector<int>& sizes, int tanh_layers, std::uint64_t seed) {
    if (sizes.size() < 2) throw ModelError("a network needs at least input and output sizes");
    const int n_layers = static_cast<int>(sizes.size()) - 1;
    if (tanh_layers < 1 || tanh_layers > std::min(3, n_layers))
      throw ModelError("tanh layer count must be between 1 and 3");
    DenseNet net;
    std::mt19937_64 rng(seed);
    for (int l = 0; l < n_layers; ++l) {
      const int in = sizes[l], out = sizes[l + 1];
      if (in < 1 || out < 1) throw ModelError("layer sizes must be positive");
      DenseLayer layer;
      const double lim = std::sqrt(6.0 / (in + out));
      std::uniform_real_distribution<double> u(-lim, lim);
      layer.weight.resize(out, in);
      for (int r = 0; r < out; ++r)
        for (int c = 0; c < in; ++c) layer.weight(r, c) = u(rng);
      layer.bias = Eigen::VectorXd::Zero(out);
      layer.activation = l >= n_layers - tanh_layers ? Activation::Tanh : Activation::Gelu;
      net.layers.push_back(std::move(layer));
    }
    return net;
  }

  int input_size() const { return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols()); }
  int output_size() const { return layers.empty() ? 0 : static_cast<int>(layers.back().weight.rows()); }

  std::vector<int> layer_sizes() const {
    std::vector<int> s;
    if (layers.empty()) return s;
    s.push_back(input_size());
    for (const auto& l : layers) s.push_back(static_cast<int>(l.weight.rows()));
    return s;
  }

  int tanh_tail() const {
    int k = 0;
    for (auto it = layers.rbegin(); it != layers.rend() && it->activation == Activation::Tanh; ++it) ++k;
    return k;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }

  /// IK layout rule: 1 to 3 trailing tanh layers, GELU everywhere else.
  void validate_ik_layout(int expected_output) const {
    if (layers.empty()) throw ModelError("empty network");
    if (output_size() != expected_output)
      throw ModelError("network output size " + std::to_string(output_size()) + " != dof " +
                       std::to_string(expected_output));
    const int k = tanh_tail();
    if (k < 1 || k > 3) throw ModelError("network must end in 1 to 3 tanh layers");
    for (std::size_t l = 0; l + k < layers.size(); ++l)
      if (layers[l].activation != Activation::Gelu)
        throw ModelError("hidden layers before the tanh tail must be GELU");
    for (std::size_t l = 1; l < layers.size(); ++l)
      if (layers[l].weight.cols() != layers[l - 1].weight.rows())
        throw ModelError("inconsistent layer sizes");
  }

  /// Parameters in file order: per layer, weights row-major then biases.
  std::vector<double> flat_parameters() const {
    std::vector<double> p;
    p.reserve(parameter_count());
    for (const auto& l : layers) {
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) p.push_back(l.weight(r, c));
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) p.push_back(l.bias[r]);
    }
    return p;
  }

  void set_flat_parameters(const std::vector<double>& p) {
    if (p.size() != parameter_count()) throw ModelError("parameter count mismatch");
    std::size_t k = 0;
    for (auto& l : layers) {
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = p[k++];
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias[r] = p[k++];
    }
  }

  bool all_finite() const {
    for (const auto& l : layers)
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }
};

/// Cached per-layer inputs and pre-activations of one forward pass.
struct GradientTape {
  std::vector<Eigen::MatrixXd> inputs;
  std::vector<Eigen::MatrixXd> pre;
  bool consumed = false;
};

struct ForwardResult {
  Eigen::MatrixXd output;
  GradientTape tape;
};

namespace detail {

/// Elementwise tanh through the vectorized exp; absolute error ~1e-16. Scalar
/// std::tanh dominated the cost of a forward pass.
inline Eigen::ArrayXXd batch_tanh(const Eigen::ArrayXXd& x) {
  const Eigen::ArrayXXd t = (-2.0 * x.abs()).exp();
  return x.sign() * (1.0 - t) / (1.0 + t);
}

inline Eigen::ArrayXXd gelu_inner(const Eigen::ArrayXXd& x) { return kGeluC * (x + kGeluK * x.cube()); }

inline void activate(Activation a, const Eigen::MatrixXd& z, Eigen::MatrixXd& out) {
  switch (a) {
    case Activation::Gelu: out = (0.5 * z.array() * (1.0 + batch_tanh(gelu_inner(z.array())))).matrix(); break;
    case Activation::Tanh: out = batch_tanh(z.array()).matrix(); break;
    case Activation::Identity: out = z; break;
  }
}

inline Eigen::ArrayXXd activation_grad(Activation a, const Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::Gelu: {
      const Eigen::ArrayXXd x = z.array(), t = batch_tanh(gelu_inner(x));
      return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t.square()) * kGeluC * (1.0 + 3.0 * kGeluK * x.square());
    }
    case Activation::Tanh: return 1.0 - batch_tanh(z.array()).square();
    case Activation::Identity: break;
  }
  return Eigen::ArrayXXd::Ones(z.rows(), z.cols());
}

inline void check_input(const DenseNet& net, const Eigen::MatrixXd& input) {
  if (net.layers.empty()) throw ModelError("empty network");
  if (input.rows() != net.input_size())
    throw ModelError("input width " + std::to_string(input.rows()) + " != network input size " +
                     std::to_string(net.input_size()));
}

}  // namespace detail

inline ForwardResult forward(const DenseNet& net, const Eigen::MatrixXd& input) {
  detail::check_input(net, input);
  ForwardResult res;
  res.tape.inputs.reserve(net.layers.size());
  res.tape.pre.reserve(net.layers.size());
  Eigen::MatrixXd a = input;
  for (const auto& l : net.layers) {
    Eigen::MatrixXd z = l.weight * a;
    z.colwise() += l.bias;
    res.tape.inputs.push_back(std::move(a));
    detail::activate(l.activation, z, a);
    res.tape.pre.push_back(std::move(z));
  }
  res.output = std::move(a);
  return res;
}

/// Forward pass without recording a tape.
inline Eigen::MatrixXd infer(const DenseNet& net, const Eigen::MatrixXd& input) {
  detail::check_input(net, input);
  Eigen::MatrixXd a = input, z;
  for (const auto& l : net.layers) {
    z.noalias() = l.weight * a;
    z.colwise() += l.bias;
    detail::activate(l.activation, z, a);
  }
  return a;
}

struct NetGradients {
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::VectorXd> bias;
  Eigen::MatrixXd input;

  static NetGradients zeros_like(const DenseNet& net) {
    NetGradients g;
    for (const auto& l : net.layers) {
      g.weight.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
      g.bias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
    }
    return g;
  }

  double squared_norm() const {
    double s = 0.0;
    for (const auto& w : weight) s += w.squaredNorm();
    for (const auto& b : bias) s += b.squaredNorm();
    return s;
  }

  bool all_finite() const {
    for (const auto& w : weight)
      if (!w.allFinite()) return false;
    for (const auto& b : bias)
      if (!b.allFinite()) return false;
    return true;
  }

  void scale(double s) {
    for (auto& w : weight) w *= s;
    for (auto& b : bias) b *= s;
  }

  void add_scaled(const NetGradients& o, double s) {
    for (std::size_t i = 0; i < weight.size(); ++i) {
      weight[i] += s * o.weight[i];
      bias[i] += s * o.bias[i];
    }
  }

  std::vector<double> flat() const {
    std::vector<double> p;
    for (std::size_t i = 0; i < weight.size(); ++i) {
      for (Eigen::Index r = 0; r < weight[i].rows(); ++r)
        for (Eigen::Index c = 0; c < weight[i].cols(); ++c) p.push_back(weight[i](r, c));
      for (Eigen::Index r = 0; r < bias[i].size(); ++r) p.push_back(bias[i][r]);
    }
    return p;
  }
};

/// Reverse pass. Consumes the tape; a second call with the same tape throws.
inline NetGradients backward(const DenseNet& net, GradientTape& tape, const Eigen::MatrixXd& output_grad) {
  if (tape.consumed) throw ModelError("gradient tape already consumed");
  if (tape.pre.size() != net.layers.size()) throw ModelError("gradient tape does not match network");
  tape.consumed = true;
  NetGradients g;
  g.weight.resize(net.layers.size());
  g.bias.resize(net.layers.size());
  Eigen::MatrixXd delta = output_grad;
  for (int l = static_cast<int>(net.layers.size()) - 1; l >= 0; --l) {
    const auto& layer = net.layers[l];
    const Eigen::MatrixXd& z = tape.pre[l];
    if (delta.rows() != z.rows() || delta.cols() != z.cols())
      throw ModelError("output gradient shape does not match forward output");
    if (layer.activation != Activation::Identity) delta.array() *= detail::activation_grad(layer.activation, z);
    g.weight[l].noalias() = delta * tape.inputs[l].transpose();
    g.bias[l] = delta.rowwise().sum();
    Eigen::MatrixXd next;
    next.noalias() = layer.weight.transpose() * delta;
    delta = std::move(next);
  }
  g.input = std::move(delta);
  tape.inputs.clear();
  tape.pre.clear();
  return g;
}

/// Adaptive-moment optimizer (beta1 0.9, beta2 0.999, eps 1e-8).
class Adam {
 public:
  explicit Adam(const DenseNet& net) { reset(net); }

  void reset(const DenseNet& net) {
    m_ = NetGradients::zeros_like(net);
    v_ = NetGradients::zeros_like(net);
    t_ = 0;
  }

  void step(DenseNet& net, const NetGradients& g, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      update(net.layers[l].weight, m_.weight[l], v_.weight[l], g.weight[l], lr, c1, c2);
      update(net.layers[l].bias, m_.bias[l], v_.bias[l], g.bias[l], lr, c1, c2);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  template <typename P, typename G>
  static void update(P& param, G& m, G& v, const G& g, double lr, double c1, double c2) {
    m = kBeta1 * m + (1.0 - kBeta1) * g;
    v.array() = kBeta2 * v.array() + (1.0 - kBeta2) * g.array().square();
    if (lr == 0.0) return;
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + kEps);
  }

  NetGradients m_, v_;
  long t_ = 0;
};

/// Maps the 7-D pose and joint angles onto [-1, 1].
struct Normalizer {
  std::array<double, 7> pose_min{};
  std::array<double, 7> pose_max{};
  Eigen::VectorXd joint_lower;
  Eigen::VectorXd joint_upper;

  /// Position range from the workspace bounds; quaternion components are
  /// already in [-1, 1].
  static Normalizer from(const KinematicChain& chain, const WorkspaceBounds& bounds) {
    bounds.validate();
    Normalizer n;
    for (int i = 0; i < 3; ++i) {
      n.pose_min[i] = bounds.min[i];
      n.pose_max[i] = bounds.max[i];
    }
    for (int i = 3; i < 7; ++i) {
      n.pose_min[i] = -1.0;
      n.pose_max[i] = 1.0;
    }
    n.joint_lower = chain.lower_limits();
    n.joint_upper = chain.upper_limits();
    return n;
  }

  int dof() const { return static_cast<int>(joint_lower.size()); }

  Eigen::Matrix<double, 7, 1> normalize_pose(const Pose& p) const {
    const auto v = p.vector();
    Eigen::Matrix<double, 7, 1> o;
    for (int i = 0; i < 7; ++i) o[i] = 2.0 * (v[i] - pose_min[i]) / (pose_max[i] - pose_min[i]) - 1.0;
    return o;
  }

  Pose denormalize_pose(const Eigen::Ref<const Eigen::VectorXd>& n) const {
    Eigen::Matrix<double, 7, 1> v;
    for (int i = 0; i < 7; ++i) v[i] = pose_min[i] + 0.5 * (n[i] + 1.0) * (pose_max[i] - pose_min[i]);
    return Pose::from_vector(v);
  }

  Eigen::VectorXd normalize_joints(const Eigen::Ref<const Eigen::VectorXd>& q) const {
    return (2.0 * (q - joint_lower).array() / (joint_upper - joint_lower).array() - 1.0).matrix();
  }

  /// Affine map of [-1, 1] onto [lower, upper], clamped so rounding can never
  /// leave the limits.
  Eigen::VectorXd denormalize_joints(const Eigen::Ref<const Eigen::VectorXd>& y) const {
    Eigen::VectorXd q = joint_lower + (0.5 * (y.array() + 1.0) * (joint_upper - joint_lower).array()).matrix();
    return q.cwiseMax(joint_lower).cwiseMin(joint_upper);
  }

  /// d(angle)/d(normalized value) per joint.
  Eigen::VectorXd joint_half_range() const { return 0.5 * (joint_upper - joint_lower); }
};

enum class Workspace { Small, Full };

inline Workspace workspace_from_string(const std::string& s) {
  if (s == "small" || s == "Small") return Workspace::Small;
  if (s == "full" || s == "Full") return Workspace::Full;
  throw ModelError("unknown workspace '" + s + "' (expected small or full)");
}

/// Hyperparameters and layouts found for the two workspaces (full scale).
struct PresetLayout {
  std::vector<int> hidden;
  int tanh_layers;
  int noise_dim;
  int batch_size;
  double learning_rate;
};

inline PresetLayout mlp_layout(Workspace ws) {
  if (ws == Workspace::Small) return {{3380, 2250, 3240, 2270, 1840, 30, 60, 220}, 3, 0, 150, 1.6e-4};
  return {{2200, 2400, 2400, 1900, 250, 220, 30, 380}, 3, 0, 300, 1e-4};
}

inline PresetLayout gan_layout(Workspace ws) {
  if (ws == Workspace::Small) return {{790, 990, 3120, 1630, 300, 1660, 730, 540}, 3, 8, 350, 2.1e-4};
  return {{1180, 1170, 2500, 1290, 700, 970, 440, 770}, 2, 10, 300, 1.9e-4};
}

/// Width scaling for desk-scale runs: max(8, round(factor * w)); factor 1 is
/// the identity.
inline std::vector<int> scale_widths(const std::vector<int>& widths, double factor) {
  if (!(factor > 0.0)) throw ModelError("width factor must be positive");
  std::vector<int> out;
  for (int w : widths)
    out.push_back(factor == 1.0 ? w : std::max(8, static_cast<int>(std::lround(factor * w))));
  return out;
}

inline DenseNet mlp_preset(Workspace ws, int dof, double width_factor = 0.1, std::uint64_t seed = 0) {
  const auto layout = mlp_layout(ws);
  std::vector<int> sizes{7};
  for (int w : scale_widths(layout.hidden, width_factor)) sizes.push_back(w);
  sizes.push_back(dof);
  return DenseNet::create(sizes, layout.tanh_layers, seed);
}

inline std::pair<DenseNet, int> gan_preset(Workspace ws, int dof, double width_factor = 0.1,
                                           std::uint64_t seed = 0) {
  const auto layout = gan_layout(ws);
  std::vector<int> sizes{7 + layout.noise_dim};
  for (int w : scale_widths(layout.hidden, width_factor)) sizes.push_back(w);
  sizes.push_back(dof);
  return {DenseNet::create(sizes, layout.tanh_layers, seed), layout.noise_dim};
}

enum class ModelKind { Mlp, Gan };

inline const char* to_string(ModelKind k) { return k == ModelKind::Mlp ? "mlp" : "gan"; }

/// A trained (or initialized) IK network together with its normalizer.
struct IkModel {
  ModelKind kind = ModelKind::Mlp;
  DenseNet net;
  Normalizer normalizer;
  int noise_dim = 0;
  std::uint64_t seed = 0;

  int dof() const { return normalizer.dof(); }

  /// Network input for `poses` (one per column of the result) with the given
  /// noise block (noise_dim x poses.size(); ignored for MLPs).
  Eigen::MatrixXd build_input(const std::vector<Pose>& poses, const Eigen::MatrixXd& noise = {}) const {
    const Eigen::Index n = static_cast<Eigen::Index>(poses.size());
    Eigen::MatrixXd in(7 + noise_dim, n);
    for (Eigen::Index i = 0; i < n; ++i) in.block<7, 1>(0, i) = normalizer.normalize_pose(poses[i]);
    if (noise_dim > 0) {
      if (noise.rows() != noise_dim || noise.cols() != n) throw ModelError("noise block has wrong shape");
      in.bottomRows(noise_dim) = noise;
    }
    return in;
  }

  /// Joint configurations for `poses` (one per pose).
  std::vector<JointConfig> solve(const std::vector<Pose>& poses, const Eigen::MatrixXd& noise = {}) const {
    const Eigen::MatrixXd y = infer(net, build_input(poses, noise));
    std::vector<JointConfig> out;
    out.reserve(poses.size());
    for (Eigen::Index i = 0; i < y.cols(); ++i) out.push_back(normalizer.denormalize_joints(y.col(i)));
    return out;
  }
};

/// Uniform noise in [-1, 1].
inline Eigen::MatrixXd uniform_noise(int rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd z(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) z(r, c) = u(rng);
  return z;
}

constexpr int kModelFormatVersion = 1;

namespace detail {

inline void write_le_doubles(std::ostream& out, const std::vector<double>& v) {
  for (double d : v) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
  }
}

inline std::vector<double> read_le_doubles(std::istream& in, std::size_t n) {
  std::vector<double> v(n);
  unsigned char b[8];
  for (std::size_t k = 0; k < n; ++k) {
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw ModelError("truncated model file");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    std::memcpy(&v[k], &bits, sizeof bits);
  }
  return v;
}

}  // namespace detail

/// Digest of the parameter blob.
inline std::string parameter_hash(const DenseNet& net) {
  std::ostringstream ss;
  detail::write_le_doubles(ss, net.flat_parameters());
  return hex64(fnv1a64(ss.str()));
}

inline nlohmann::json model_manifest(const IkModel& m) {
  nlohmann::json acts = nlohmann::json::array();
  for (const auto& l : m.net.layers) acts.push_back(to_string(l.activation));
  const auto& n = m.normalizer;
  return {{"format", "cycleik-model"},
          {"version", kModelFormatVersion},
          {"kind", to_string(m.kind)},
          {"layer_sizes", m.net.layer_sizes()},
          {"activations", acts},
          {"noise_dim", m.noise_dim},
          {"rng_seed", m.seed},
          {"parameter_count", m.net.parameter_count()},
          {"normalizer",
           {{"pose_min", n.pose_min},
            {"pose_max", n.pose_max},
            {"joint_lower", std::vector<double>(n.joint_lower.data(), n.joint_lower.data() + n.dof())},
            {"joint_upper", std::vector<double>(n.joint_upper.data(), n.joint_upper.data() + n.dof())}}}};
}

/// One JSON manifest line followed by the little-endian float64 parameter blob.
inline void save_model(const IkModel& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelError("cannot write model file '" + path + "'");
  out << model_manifest(m).dump() << '\n';
  detail::write_le_doubles(out, m.net.flat_parameters());
  if (!out) throw ModelError("failed writing model file '" + path + "'");
}

inline IkModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot open model file '" + path + "'");
  std::string header;
  if (!std::getline(in, header)) throw ModelError("truncated model file");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception&) {
    throw ModelError("model file '" + path + "' has a malformed manifest");
  }
  if (j.value("format", "") != "cycleik-model") throw ModelError("not a cycleik model file");
  if (j.value("version", -1) != kModelFormatVersion)
    throw ModelError("model version mismatch: file has " + j["version"].dump() + ", expected " +
                     std::to_string(kModelFormatVersion));
  try {
    IkModel m;
    m.kind = j.at("kind").get<std::string>() == "gan" ? ModelKind::Gan : ModelKind::Mlp;
    m.noise_dim = j.at("noise_dim").get<int>();
    m.seed = j.at("rng_seed").get<std::uint64_t>();
    const auto sizes = j.at("layer_sizes").get<std::vector<int>>();
    const auto acts = j.at("activations").get<std::vector<std::string>>();
    if (sizes.size() < 2 || acts.size() != sizes.size() - 1) throw ModelError("inconsistent layer description");
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      DenseLayer layer;
      layer.weight.resize(sizes[l + 1], sizes[l]);
      layer.bias.resize(sizes[l + 1]);
      layer.activation = activation_from_string(acts[l]);
      m.net.layers.push_back(std::move(layer));
    }
    const auto& nj = j.at("normalizer");
    m.normalizer.pose_min = nj.at("pose_min").get<std::array<double, 7>>();
    m.normalizer.pose_max = nj.at("pose_max").get<std::array<double, 7>>();
    const auto lo = nj.at("joint_lower").get<std::vector<double>>();
    const auto hi = nj.at("joint_upper").get<std::vector<double>>();
    m.normalizer.joint_lower = Eigen::Map<const Eigen::VectorXd>(lo.data(), static_cast<Eigen::Index>(lo.size()));
    m.normalizer.joint_upper = Eigen::Map<const Eigen::VectorXd>(hi.data(), static_cast<Eigen::Index>(hi.size()));
    const auto count = j.at("parameter_count").get<std::size_t>();
    if (count != m.net.parameter_count()) throw ModelError("parameter count does not match layer sizes");
    m.net.set_flat_parameters(detail::read_le_doubles(in, count));
    if (in.peek() != std::char_traits<char>::eof()) throw ModelError("trailing bytes in model file");
    if (m.net.input_size() != 7 + m.noise_dim) throw ModelError("input size does not match noise_dim");
    m.net.validate_ik_layout(m.normalizer.dof());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(std::string("malformed model manifest: ") + e.what());
  }
}

}  // namespace cycleik
