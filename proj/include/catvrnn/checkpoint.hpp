#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "catvrnn/data.hpp"
#include "catvrnn/model.hpp"
#include "catvrnn/training.hpp"

namespace catvrnn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are written in host order, which must be little-endian");

inline constexpr int kCheckpointVersion = 1;

/// A tensor as stored on disk: little-endian scalars in row-major order.
struct RawTensor {
  std::string name;
  std::vector<std::int64_t> shape;
  std::string dtype;  // "f32" or "f64"
  std::string bytes;
};

/// File layout:
///   u64 header_length | header JSON (UTF-8) | tensor blobs | u32 crc32
/// The header carries `format_version`, a `tensors` manifest (name, shape,
/// dtype, offset, nbytes; offsets relative to the body start) and `body_crc32`.
/// The trailing crc32 covers every preceding byte.
struct Container {
  nlohmann::json meta;
  std::vector<RawTensor> tensors;
};

void write_container(const std::filesystem::path& path, const Container& c);
Container read_container(const std::filesystem::path& path);
/// Header only; still verifies the trailing checksum.
nlohmann::json read_container_header(const std::filesystem::path& path);

template <typename Scalar>
std::string dtype_name() {
  if constexpr (std::is_same_v<Scalar, float>) {
    return "f32";
  } else {
    static_assert(std::is_same_v<Scalar, double>, "only float and double are serializable");
    return "f64";
  }
}

template <typename Scalar>
RawTensor to_raw(const std::string& name, const std::vector<Index>& shape, const Matrix<Scalar>& m) {
  RawTensor r;
  r.name = name;
  for (Index d : shape) r.shape.push_back(static_cast<std::int64_t>(d));
  r.dtype = dtype_name<Scalar>();
  r.bytes.resize(static_cast<std::size_t>(m.size()) * sizeof(Scalar));
  std::memcpy(r.bytes.data(), m.data(), r.bytes.size());
  return r;
}

template <typename Scalar>
Matrix<Scalar> from_raw(const RawTensor& r, Index rows, Index cols) {
  if (r.dtype != dtype_name<Scalar>()) {
    throw FormatError("tensor '" + r.name + "' has dtype " + r.dtype + ", expected " +
                      dtype_name<Scalar>());
  }
  if (r.bytes.size() != static_cast<std::size_t>(rows * cols) * sizeof(Scalar)) {
    throw FormatError("tensor '" + r.name + "' has the wrong byte size");
  }
  Matrix<Scalar> m(rows, cols);
  std::memcpy(m.data(), r.bytes.data(), r.bytes.size());
  return m;
}

/// Copies every tensor of `store` from `raw` (matched by name and shape).
/// Extra or missing names are errors.
template <typename Scalar>
void load_store(ParamStore<Scalar>& store, const std::vector<RawTensor>& raw,
                const std::string& prefix = "") {
  std::map<std::string, const RawTensor*> by_name;
  for (const auto& r : raw) {
    if (r.name.rfind(prefix, 0) == 0) by_name.emplace(r.name.substr(prefix.size()), &r);
  }
  if (by_name.size() != store.size()) {
    throw FormatError("checkpoint holds " + std::to_string(by_name.size()) + " '" + prefix +
                      "' tensors, model expects " + std::to_string(store.size()));
  }
  for (auto& t : store) {
    auto it = by_name.find(t.name);
    if (it == by_name.end()) throw FormatError("checkpoint is missing tensor '" + t.name + "'");
    std::vector<std::int64_t> shape(t.shape.begin(), t.shape.end());
    if (it->second->shape != shape) throw FormatError("shape mismatch for tensor '" + t.name + "'");
    t.value = from_raw<Scalar>(*it->second, t.value.rows(), t.value.cols());
  }
}

template <typename Scalar>
void append_store(std::vector<RawTensor>& out, const ParamStore<Scalar>& store,
                  const std::string& prefix = "") {
  for (const auto& t : store) out.push_back(to_raw<Scalar>(prefix + t.name, t.shape, t.value));
}

template <typename Scalar>
struct Checkpoint {
  ModelConfig config;
  CatVrnnParams<Scalar> params;
  std::optional<AdamState<Scalar>> adam;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> rng_state;
  int epoch = 0;
  std::vector<std::string> vocab_tokens;
  nlohmann::json run_config = nlohmann::json::object();
};

template <typename Scalar>
void save_checkpoint(const std::filesystem::path& path, const Checkpoint<Scalar>& ck) {
  Container c;
  c.meta["kind"] = "catvrnn-model";
  c.meta["dtype"] = dtype_name<Scalar>();
  c.meta["config"] = ck.config;
  c.meta["seed"] = ck.seed;
  c.meta["rng_state"] = ck.rng_state;
  c.meta["epoch"] = ck.epoch;
  c.meta["vocab"] = {{"digest", Vocabulary::from_tokens(ck.vocab_tokens).digest()},
                     {"tokens", ck.vocab_tokens}};
  c.meta["run_config"] = ck.run_config;
  append_store(c.tensors, ck.params.store, "param/");
  if (ck.adam) {
    c.meta["adam"] = {{"step", ck.adam->step},
                      {"lr", ck.adam->options.lr},
                      {"beta1", ck.adam->options.beta1},
                      {"beta2", ck.adam->options.beta2},
                      {"eps", ck.adam->options.eps}};
    const auto& store = ck.params.store;
    for (std::size_t i = 0; i < store.size(); ++i) {
      const bool has = i < ck.adam->m.size() && ck.adam->m[i].size() > 0;
      if (!has) continue;
      c.tensors.push_back(to_raw<Scalar>("adam.m/" + store[i].name, store[i].shape, ck.adam->m[i]));
      c.tensors.push_back(to_raw<Scalar>("adam.v/" + store[i].name, store[i].shape, ck.adam->v[i]));
    }
  }
  write_container(path, c);
}

template <typename Scalar>
Checkpoint<Scalar> load_checkpoint(const std::filesystem::path& path) {
  const Container c = read_container(path);
  if (c.meta.value("kind", std::string()) != "catvrnn-model") {
    throw FormatError(path.string() + " is not a model checkpoint");
  }
  if (c.meta.at("dtype").get<std::string>() != dtype_name<Scalar>()) {
    throw FormatError(path.string() + " stores " + c.meta.at("dtype").get<std::string>() +
                      " tensors, requested " + dtype_name<Scalar>());
  }
  Checkpoint<Scalar> ck;
  ck.config = c.meta.at("config").get<ModelConfig>();
  ck.seed = c.meta.at("seed").get<std::uint64_t>();
  ck.rng_state = c.meta.at("rng_state").get<std::map<std::string, std::string>>();
  ck.epoch = c.meta.at("epoch").get<int>();
  ck.vocab_tokens = c.meta.at("vocab").at("tokens").get<std::vector<std::string>>();
  const auto digest = c.meta.at("vocab").at("digest").get<std::string>();
  if (Vocabulary::from_tokens(ck.vocab_tokens).digest() != digest) {
    throw FormatError(path.string() + ": vocabulary digest mismatch");
  }
  if (static_cast<int>(ck.vocab_tokens.size()) != ck.config.vocab_size) {
    throw FormatError(path.string() + ": vocabulary size does not match the model config");
  }
  ck.run_config = c.meta.value("run_config", nlohmann::json::object());

  Rng scratch(0);
  ck.params = make_params<Scalar>(ck.config, scratch);
  std::vector<RawTensor> params, moments;
  for (const auto& r : c.tensors) {
    (r.name.rfind("param/", 0) == 0 ? params : moments).push_back(r);
  }
  load_store(ck.params.store, params, "param/");

  if (c.meta.contains("adam")) {
    const auto& a = c.meta.at("adam");
    AdamState<Scalar> adam;
    adam.step = a.at("step").get<std::int64_t>();
    adam.options = {a.at("lr").get<double>(), a.at("beta1").get<double>(),
                    a.at("beta2").get<double>(), a.at("eps").get<double>()};
    std::map<std::string, const RawTensor*> by_name;
    for (const auto& r : moments) by_name.emplace(r.name, &r);
    const auto& store = ck.params.store;
    adam.m.resize(store.size());
    adam.v.resize(store.size());
    for (std::size_t i = 0; i < store.size(); ++i) {
      auto m = by_name.find("adam.m/" + store[i].name);
      auto v = by_name.find("adam.v/" + store[i].name);
      if (m == by_name.end() || v == by_name.end()) continue;
      adam.m[i] = from_raw<Scalar>(*m->second, store[i].value.rows(), store[i].value.cols());
      adam.v[i] = from_raw<Scalar>(*v->second, store[i].value.rows(), store[i].value.cols());
    }
    ck.adam = std::move(adam);
  }
  return ck;
}

template <typename Scalar>
Checkpoint<Scalar> make_checkpoint(const TrainingState<Scalar>& st, const Vocabulary& vocab,
                                   nlohmann::json run_config = nlohmann::json::object()) {
  Checkpoint<Scalar> ck;
  ck.config = st.config;
  ck.params = st.params;
  ck.adam = st.adam;
  ck.seed = st.rng.seed();
  ck.rng_state = st.rng.state();
  ck.epoch = st.epoch;
  ck.vocab_tokens = vocab.tokens();
  ck.run_config = std::move(run_config);
  return ck;
}

template <typename Scalar>
TrainingState<Scalar> restore_training(const Checkpoint<Scalar>& ck) {
  TrainingState<Scalar> st{ck.config, ck.params, {}, Rng(ck.seed), ck.epoch};
  if (ck.adam) st.adam = *ck.adam;
  st.rng.restore(ck.seed, ck.rng_state);
  return st;
}

/// crc32 of the tensor body, as recorded in the header.
std::string checkpoint_digest(const std::filesystem::path& path);

}  // namespace catvrnn
