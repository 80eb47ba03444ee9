#include <cmath>

#include "catvrnn/model.hpp"

namespace catvrnn {

std::string to_string(InitMode m) {
  switch (m) {
    case InitMode::kZero: return "none";
    case InitMode::kStatic: return "static";
    case InitMode::kAdaptive: return "adaptive";
  }
  return "?";
}

InitMode parse_init_mode(const std::string& s) {
  if (s == "none" || s == "zero") return InitMode::kZero;
  if (s == "static") return InitMode::kStatic;
  if (s == "adaptive") return InitMode::kAdaptive;
  throw ConfigError("unknown init mode '" + s + "' (expected none, static or adaptive)");
}

InitMode ModelConfig::init_for(Phase phase) const {
  if (phase == Phase::kTrain) return init_mode;
  if (eval_init_mode) return *eval_init_mode;
  if (init_mode == InitMode::kZero && num_categories <= 2) return InitMode::kStatic;
  return init_mode;
}

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw ConfigError(std::string(name) + " must be >= 1, got " + std::to_string(v));
  };
  positive(vocab_size, "vocab_size");
  positive(embed_dim, "embed_dim");
  positive(hidden_dim, "hidden_dim");
  positive(latent_dim, "latent_dim");
  positive(num_categories, "num_categories");
  positive(max_len, "max_len");
  positive(encoder_hidden, "encoder_hidden");
  positive(encoder_out, "encoder_out");
  positive(decoder_hidden, "decoder_hidden");
  positive(decoder_out, "decoder_out");
  positive(prior_hidden, "prior_hidden");
  if (vocab_size < 2) throw ConfigError("vocab_size must include PAD and UNK");
  if (!std::isfinite(static_omega)) throw ConfigError("static_omega must be finite");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ConfigError("temperature must be positive");
  }
  const bool static_used = init_mode == InitMode::kStatic || init_for(Phase::kEval) == InitMode::kStatic;
  if (static_used && num_categories > 2) {
    throw ConfigError("static initialization supports at most two categories, K = " +
                      std::to_string(num_categories));
  }
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"vocab_size", c.vocab_size},
                     {"embed_dim", c.embed_dim},
                     {"hidden_dim", c.hidden_dim},
                     {"latent_dim", c.latent_dim},
                     {"num_categories", c.num_categories},
                     {"max_len", c.max_len},
                     {"init_mode", to_string(c.init_mode)},
                     {"eval_init_mode", c.eval_init_mode ? to_string(*c.eval_init_mode) : "same"},
                     {"static_omega", c.static_omega},
                     {"use_kl_term", c.use_kl_term},
                     {"use_feature_extractors", c.use_feature_extractors},
                     {"use_classifier", c.use_classifier},
                     {"mask_padding", c.mask_padding},
                     {"temperature", c.temperature},
                     {"encoder_hidden", c.encoder_hidden},
                     {"encoder_out", c.encoder_out},
                     {"decoder_hidden", c.decoder_hidden},
                     {"decoder_out", c.decoder_out},
                     {"prior_hidden", c.prior_hidden}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  c = ModelConfig{};
  c.vocab_size = j.at("vocab_size").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.hidden_dim = j.at("hidden_dim").get<int>();
  c.latent_dim = j.at("latent_dim").get<int>();
  c.num_categories = j.at("num_categories").get<int>();
  c.max_len = j.at("max_len").get<int>();
  c.init_mode = parse_init_mode(j.at("init_mode").get<std::string>());
  const auto eval = j.value("eval_init_mode", std::string("same"));
  if (eval != "same") c.eval_init_mode = parse_init_mode(eval);
  c.static_omega = j.at("static_omega").get<double>();
  c.use_kl_term = j.at("use_kl_term").get<bool>();
  c.use_feature_extractors = j.at("use_feature_extractors").get<bool>();
  c.use_classifier = j.value("use_classifier", true);
  c.mask_padding = j.value("mask_padding", false);
  c.temperature = j.value("temperature", 1.0);
  c.encoder_hidden = j.at("encoder_hidden").get<int>();
  c.encoder_out = j.at("encoder_out").get<int>();
  c.decoder_hidden = j.at("decoder_hidden").get<int>();
  c.decoder_out = j.at("decoder_out").get<int>();
  c.prior_hidden = j.value("prior_hidden", 256);
}

}  // namespace catvrnn
