#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "catvrnn/errors.hpp"

namespace catvrnn {

using Index = Eigen::Index;

/// Row-major dense matrix; vectors are stored as single rows.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// A named learnable array with an optional gradient buffer.
///
/// `shape` has one or two entries; a 1-d tensor of length n is held as a 1 x n
/// matrix so that it broadcasts over batch rows without reshaping.
template <typename Scalar>
struct Tensor {
  std::string name;
  std::vector<Index> shape;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;  // empty when no gradient has been allocated
  bool trainable = true;

  Index size() const { return value.size(); }
  bool has_grad() const { return grad.size() == value.size() && grad.size() > 0; }
};

/// Ordered name -> Tensor map. Iteration follows insertion order.
template <typename Scalar>
class ParamStore {
 public:
  using TensorType = Tensor<Scalar>;

  std::size_t add(std::string name, std::vector<Index> shape) {
    if (shape.empty() || shape.size() > 2) {
      throw ConfigError("tensor '" + name + "' must have one or two dimensions");
    }
    for (Index d : shape) {
      if (d < 1) throw ConfigError("tensor '" + name + "' has a non-positive dimension");
    }
    if (index_.count(name)) throw ConfigError("duplicate tensor name '" + name + "'");
    TensorType t;
    t.name = name;
    t.shape = shape;
    const Index rows = shape.size() == 1 ? 1 : shape[0];
    const Index cols = shape.back();
    t.value = Matrix<Scalar>::Zero(rows, cols);
    index_.emplace(std::move(name), tensors_.size());
    tensors_.push_back(std::move(t));
    return tensors_.size() - 1;
  }

  TensorType& operator[](std::size_t i) { return tensors_[i]; }
  const TensorType& operator[](std::size_t i) const { return tensors_[i]; }

  TensorType& at(std::string_view name) { return tensors_[index_of(name)]; }
  const TensorType& at(std::string_view name) const { return tensors_[index_of(name)]; }

  bool contains(std::string_view name) const { return index_.count(std::string(name)) > 0; }

  std::size_t index_of(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw ConfigError("unknown tensor '" + std::string(name) + "'");
    return it->second;
  }

  std::size_t size() const { return tensors_.size(); }
  auto begin() { return tensors_.begin(); }
  auto end() { return tensors_.end(); }
  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }

  /// Total number of scalar entries across all tensors.
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += static_cast<std::size_t>(t.size());
    return n;
  }

  /// Allocates (or clears) gradient buffers for every trainable tensor.
  void zero_grad() {
    for (auto& t : tensors_) {
      if (t.trainable) {
        t.grad = Matrix<Scalar>::Zero(t.value.rows(), t.value.cols());
      } else {
        t.grad.resize(0, 0);
      }
    }
  }

  void drop_grad() {
    for (auto& t : tensors_) t.grad.resize(0, 0);
  }

 private:
  std::vector<TensorType> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Seeded random source with independent named streams.
///
/// Each stream is a separate Mersenne Twister seeded from (seed, name), so
/// draws on one stream never shift another. Used stream names: "params",
/// "init", "noise", "latent", "sampling", "shuffle", "dropout".
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::mt19937_64& stream(std::string_view name) {
    auto it = streams_.find(name);
    if (it != streams_.end()) return it->second;
    const std::uint64_t h = name_hash(name);
    std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                      static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
    return streams_.emplace(std::string(name), std::mt19937_64(seq)).first->second;
  }

  /// Textual engine state per stream that has been touched.
  std::map<std::string, std::string> state() const {
    std::map<std::string, std::string> out;
    for (const auto& [name, engine] : streams_) {
      std::ostringstream os;
      os << engine;
      out.emplace(name, os.str());
    }
    return out;
  }

  void restore(std::uint64_t seed, const std::map<std::string, std::string>& state) {
    seed_ = seed;
    streams_.clear();
    for (const auto& [name, text] : state) {
      std::mt19937_64 engine;
      std::istringstream is(text);
      is >> engine;
      if (!is) throw FormatError("corrupt rng state for stream '" + name + "'");
      streams_.emplace(name, engine);
    }
  }

  template <typename Scalar>
  Matrix<Scalar> uniform(std::string_view name, Index rows, Index cols, double lo = 0.0,
                         double hi = 1.0) {
    auto& engine = stream(name);
    std::uniform_real_distribution<double> dist(lo, hi);
    Matrix<Scalar> m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(dist(engine));
    return m;
  }

  template <typename Scalar>
  Matrix<Scalar> normal(std::string_view name, Index rows, Index cols) {
    auto& engine = stream(name);
    std::normal_distribution<double> dist(0.0, 1.0);
    Matrix<Scalar> m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(dist(engine));
    return m;
  }

 private:
  static std::uint64_t name_hash(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    return h;
  }

  std::uint64_t seed_;
  std::map<std::string, std::mt19937_64, std::less<>> streams_;
};

}  // namespace catvrnn
