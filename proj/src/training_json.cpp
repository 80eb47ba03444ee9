#include "catvrnn/training.hpp"

namespace catvrnn {

void to_json(nlohmann::json& j, const TrainPlan& p) {
  j = nlohmann::json{{"epochs", p.epochs},
                     {"batch_size", p.batch_size},
                     {"lr", p.adam.lr},
                     {"beta1", p.adam.beta1},
                     {"beta2", p.adam.beta2},
                     {"eps", p.adam.eps}};
  if (p.max_grad_norm) j["max_grad_norm"] = *p.max_grad_norm;
}

void from_json(const nlohmann::json& j, TrainPlan& p) {
  p = TrainPlan{};
  p.epochs = j.value("epochs", p.epochs);
  p.batch_size = j.value("batch_size", p.batch_size);
  p.adam.lr = j.value("lr", p.adam.lr);
  p.adam.beta1 = j.value("beta1", p.adam.beta1);
  p.adam.beta2 = j.value("beta2", p.adam.beta2);
  p.adam.eps = j.value("eps", p.adam.eps);
  if (j.contains("max_grad_norm")) p.max_grad_norm = j.at("max_grad_norm").get<double>();
}

void to_json(nlohmann::json& j, const EpochStats& s) {
  j = nlohmann::json{{"epoch", s.epoch},
                     {"gen_nll", s.mean_gen_nll},
                     {"cls_nll", s.mean_cls_nll},
                     {"kl", s.mean_kl},
                     {"total", s.mean_total},
                     {"min_kl", s.min_kl},
                     {"sentences", s.sentences}};
}

}  // namespace catvrnn
