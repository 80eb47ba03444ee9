// catvrnn command-line driver: build-data, train, generate, evaluate, grad-check.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "catvrnn/checkpoint.hpp"
#include "catvrnn/classifier.hpp"
#include "catvrnn/data.hpp"
#include "catvrnn/evaluation.hpp"
#include "catvrnn/grad_suite.hpp"
#include "catvrnn/run_config.hpp"
#include "catvrnn/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace catvrnn;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kDataFailure = 2, kNumericFailure = 3 };

struct ModelFlags {
  std::string init = "static";
  std::string eval_init = "same";
  double omega = 8.5;
  bool kl = false;
  bool feat = false;
  bool no_cls = false;
  bool mask_padding = false;
  int embed = 300;
  int hidden = 256;
  int latent = 128;
  int enc_hidden = 512;
  int enc_out = 256;
  int dec_hidden = 256;
  int dec_out = 300;
  int prior_hidden = 256;
  int max_len = 0;  // 0: longest sentence + 1
  double temperature = 1.0;
};

struct TrainFlags {
  std::string corpus;
  std::string out_dir = "run";
  std::string metrics;
  std::string resume;
  std::string precision = "f64";
  int epochs = 250;
  int batch_size = 64;
  double lr = 1e-3;
  double max_grad_norm = 0.0;
  int save_every = 0;
  int min_freq = 1;
  std::uint64_t seed = 1;
  ModelFlags model;
};

struct GenerateFlags {
  std::string checkpoint;
  std::string output = "-";
  std::string categories;
  std::size_t count = 100;
  std::uint64_t seed = 1;
  double temperature = 0.0;  // 0: keep the checkpoint's value
};

struct ClassifierFlags {
  int embed = 128;
  int maps = 100;
  int epochs = 20;
  int patience = 3;
  int batch = 50;
  double dropout = 0.5;
  double lr = 1e-3;
};

struct EvaluateFlags {
  std::string checkpoint;
  std::string corpus;
  std::string generated;
  std::string classifier;
  std::string save_classifier;
  std::string output = "-";
  bool no_classifier = false;
  std::size_t samples = 5000;
  std::size_t bleu_b_max = 5000;
  int min_freq = 1;
  std::uint64_t seed = 1;
  ClassifierFlags clf;
};

struct BuildDataFlags {
  std::string input;
  std::string output;
  std::string manifest;
  std::string filter_len;
  std::string variant;
  std::size_t per_cell = 1000;
  std::size_t per_product = 2000;
  std::size_t subsample = 0;
  int synthetic = 0;
  std::size_t synthetic_per_cat = 200;
  int synthetic_vocab = 50;
  int synthetic_min_len = 5;
  int synthetic_max_len = 10;
  int min_freq = 1;
  std::uint64_t seed = 1;
};

struct GradCheckFlags {
  double tolerance = 1e-4;
  double step = 1e-5;
  std::size_t max_elements = 0;
  std::uint64_t seed = 7;
  bool corrupt_backward = false;
};

/// Effective option values of the selected subcommand with their source.
json effective_config(const CLI::App& sub, const std::set<std::string>& cli_keys,
                      const std::set<std::string>& file_keys) {
  json j = json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help") continue;
    std::string value;
    if (opt->count() > 0) {
      const auto& r = opt->results();
      value = r.empty() ? "true" : r.back();
    } else {
      value = opt->get_default_str();
      if (value.empty() && opt->get_expected_min() == 0) value = "false";
    }
    auto named = [&](const std::set<std::string>& keys) {
      for (const auto& n : opt->get_lnames()) if (keys.count(n)) return true;
      for (const auto& n : opt->get_snames()) if (keys.count(n)) return true;
      return false;
    };
    const char* source = named(cli_keys) ? "flag" : named(file_keys) ? "file" : "default";
    j[name] = {{"value", value}, {"source", source}};
  }
  return j;
}

void print_precedence(const std::string& command, const json& cfg) {
  std::cerr << "catvrnn " << command << ": effective configuration (flags > file > defaults)\n";
  for (const auto& [k, v] : cfg.items()) {
    std::cerr << "  " << std::left << std::setw(22) << k << " = " << v["value"].get<std::string>()
              << "  [" << v["source"].get<std::string>() << "]\n";
  }
}

json plain_values(const json& cfg) {
  json j = json::object();
  for (const auto& [k, v] : cfg.items()) j[k] = v["value"];
  return j;
}

ModelConfig model_config_from(const ModelFlags& f, const LabeledCorpus& corpus, const Vocabulary& vocab) {
  ModelConfig c;
  c.vocab_size = vocab.size();
  c.num_categories = corpus.num_categories;
  c.embed_dim = f.embed;
  c.hidden_dim = f.hidden;
  c.latent_dim = f.latent;
  c.encoder_hidden = f.enc_hidden;
  c.encoder_out = f.enc_out;
  c.decoder_hidden = f.dec_hidden;
  c.decoder_out = f.dec_out;
  c.prior_hidden = f.prior_hidden;
  c.init_mode = parse_init_mode(f.init);
  if (f.eval_init != "same") c.eval_init_mode = parse_init_mode(f.eval_init);
  c.static_omega = f.omega;
  c.use_kl_term = f.kl;
  c.use_feature_extractors = f.feat;
  c.use_classifier = !f.no_cls;
  c.mask_padding = f.mask_padding;
  c.temperature = f.temperature;
  std::size_t longest = 0;
  for (const auto& s : corpus.sentences) longest = std::max(longest, s.tokens.size());
  c.max_len = f.max_len > 0 ? f.max_len : static_cast<int>(longest) + 1;
  c.validate();
  return c;
}

std::string checkpoint_dtype(const fs::path& p) {
  return read_container_header(p).at("dtype").get<std::string>();
}

void write_text(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << text;
}

// ---------------------------------------------------------------------------

int cmd_build_data(const BuildDataFlags& f, const json& cfg) {
  LabeledCorpus corpus;
  if (f.synthetic > 0) {
    corpus = make_synthetic_corpus(f.synthetic, f.synthetic_per_cat, f.synthetic_vocab,
                                   {f.synthetic_min_len, f.synthetic_max_len}, f.seed);
  } else {
    if (f.input.empty()) throw CLI::RequiredError("--input (or --synthetic K)");
    corpus = load_corpus(f.input);
  }
  if (!f.filter_len.empty()) {
    const auto colon = f.filter_len.find(':');
    if (colon == std::string::npos) throw ConfigError("--filter-len expects MIN:MAX");
    int lo = 0, hi = 0;
    try {
      lo = std::stoi(f.filter_len.substr(0, colon));
      hi = std::stoi(f.filter_len.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("--filter-len expects integers, got '" + f.filter_len + "'");
    }
    corpus = filter_by_length(corpus, lo, hi);
  }
  if (f.subsample > 0) corpus = subsample_per_category(corpus, f.subsample, f.seed);
  if (!f.variant.empty()) {
    if (f.variant.rfind("icq-", 0) == 0) {
      corpus = build_icq_variant(corpus, parse_icq_variant(f.variant.substr(4)), f.per_cell);
    } else if (f.variant.rfind("ica-", 0) == 0) {
      const std::string k = f.variant.substr(4);
      if (k.size() < 2 || k.back() != 'c') throw ConfigError("ICA variant must look like ica-3c");
      corpus = build_ica_series(corpus, std::stoi(k.substr(0, k.size() - 1)), f.per_product);
    } else {
      throw ConfigError("unknown variant '" + f.variant + "' (icq-1c/2c/5c/10c or ica-2c..5c)");
    }
  }
  corpus.validate();
  const Vocabulary vocab = build_vocabulary(corpus, f.min_freq);
  json manifest = corpus_manifest(corpus, vocab);
  manifest["output"] = f.output;
  manifest["seed"] = f.seed;
  manifest["config"] = cfg;
  save_corpus(f.output, corpus, {"seed=" + std::to_string(f.seed), "config=" + plain_values(cfg).dump()});
  const std::string manifest_path = f.manifest.empty() ? f.output + ".manifest.json" : f.manifest;
  write_text(manifest_path, manifest.dump(2) + "\n");
  std::cout << "wrote " << corpus.sentences.size() << " sentences (K = " << corpus.num_categories
            << ") to " << f.output << "\n";
  return kOk;
}

template <typename Scalar>
int run_train(const TrainFlags& f, const json& cfg) {
  LabeledCorpus corpus = load_corpus(f.corpus);
  corpus.validate();
  TrainPlan plan;
  plan.epochs = f.epochs;
  plan.batch_size = f.batch_size;
  plan.adam.lr = f.lr;
  if (f.max_grad_norm > 0.0) plan.max_grad_norm = f.max_grad_norm;
  plan.validate();

  const Vocabulary vocab = build_vocabulary(corpus, f.min_freq);
  TrainingState<Scalar> st;
  if (!f.resume.empty()) {
    const auto ck = load_checkpoint<Scalar>(f.resume);
    if (Vocabulary::from_tokens(ck.vocab_tokens).digest() != vocab.digest()) {
      throw DataError("corpus vocabulary " + vocab.digest() + " does not match checkpoint vocabulary " +
                      Vocabulary::from_tokens(ck.vocab_tokens).digest());
    }
    if (ck.config.num_categories != corpus.num_categories) {
      throw DataError("corpus has K = " + std::to_string(corpus.num_categories) +
                      ", checkpoint expects " + std::to_string(ck.config.num_categories));
    }
    st = restore_training(ck);
    std::cerr << "resuming from " << f.resume << " at epoch " << st.epoch
              << " (model configuration taken from the checkpoint)\n";
  } else {
    st = init_training<Scalar>(model_config_from(f.model, corpus, vocab), plan, f.seed);
  }
  for (const auto& s : corpus.sentences) {
    if (static_cast<int>(s.tokens.size()) > st.config.max_len) {
      throw DataError("sentence longer than max_len = " + std::to_string(st.config.max_len));
    }
  }
  const Batch data = encode_batch(corpus.sentences, vocab, st.config.max_len);

  fs::create_directories(f.out_dir);
  const fs::path metrics = f.metrics.empty() ? fs::path(f.out_dir) / "metrics.jsonl" : fs::path(f.metrics);
  std::ofstream mout(metrics, f.resume.empty() ? std::ios::trunc : std::ios::app);
  if (!mout) throw DataError("cannot write metrics file " + metrics.string());

  json run = plain_values(cfg);
  run["command"] = "train";
  run["model"] = st.config;
  run["plan"] = plan;
  run["seed"] = st.rng.seed();
  std::cerr << "model parameters: " << parameter_count(st.params) << "\n";

  auto save = [&](const fs::path& p) { save_checkpoint(p, make_checkpoint(st, vocab, run)); };
  while (st.epoch < plan.epochs) {
    const EpochStats stats = train_epoch(data, st, plan);
    json line = stats;
    line["seed"] = st.rng.seed();
    mout << line.dump() << "\n";
    mout.flush();
    std::cout << "epoch " << stats.epoch << " gen_nll " << stats.mean_gen_nll << " cls_nll "
              << stats.mean_cls_nll << " kl " << stats.mean_kl << "\n";
    if (f.save_every > 0 && st.epoch % f.save_every == 0) {
      std::ostringstream name;
      name << "epoch-" << std::setw(4) << std::setfill('0') << st.epoch << ".ckpt";
      save(fs::path(f.out_dir) / name.str());
    }
  }
  const fs::path final_path = fs::path(f.out_dir) / "final.ckpt";
  save(final_path);
  std::cout << "final checkpoint " << final_path.string() << " digest " << checkpoint_digest(final_path)
            << "\n";
  return kOk;
}

int cmd_train(const TrainFlags& f, const json& cfg) {
  std::string precision = f.precision;
  if (!f.resume.empty()) precision = checkpoint_dtype(f.resume);
  if (precision == "f32") return run_train<float>(f, cfg);
  if (precision == "f64") return run_train<double>(f, cfg);
  throw ConfigError("--precision must be f32 or f64");
}

std::vector<int> parse_categories(const std::string& list, int K) {
  std::vector<int> out;
  if (list.empty()) {
    for (int c = 0; c < K; ++c) out.push_back(c);
    return out;
  }
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    int c = -1;
    try {
      c = std::stoi(item);
    } catch (const std::exception&) {
      throw ConfigError("bad category '" + item + "'");
    }
    if (c < 0 || c >= K) {
      throw ConfigError("category " + std::to_string(c) + " out of range for K = " + std::to_string(K));
    }
    out.push_back(c);
  }
  return out;
}

template <typename Scalar>
int run_generate(const GenerateFlags& f, const json& cfg) {
  auto ck = load_checkpoint<Scalar>(f.checkpoint);
  if (f.temperature > 0.0) ck.config.temperature = f.temperature;
  const auto cats = parse_categories(f.categories, ck.config.num_categories);
  const Vocabulary vocab = Vocabulary::from_tokens(ck.vocab_tokens);
  Rng rng(f.seed);
  std::ostringstream out;
  json header = plain_values(cfg);
  header.erase("output");  // keeps same-seed files byte-identical wherever they land
  header["model"] = ck.config;
  out << "# seed=" << f.seed << "\n# config=" << header.dump() << "\n";
  for (int c : cats) {
    for (const auto& ids : generate(c, f.count, ck.params, ck.config, rng)) {
      out << c << '\t';
      const auto words = decode(ids, vocab);
      for (std::size_t i = 0; i < words.size(); ++i) out << (i ? " " : "") << words[i];
      out << '\n';
    }
  }
  write_text(f.output, out.str());
  return kOk;
}

int cmd_generate(const GenerateFlags& f, const json& cfg) {
  const auto dtype = checkpoint_dtype(f.checkpoint);
  return dtype == "f32" ? run_generate<float>(f, cfg) : run_generate<double>(f, cfg);
}

template <typename Scalar>
int run_evaluate(const EvaluateFlags& f, const json& cfg) {
  const LabeledCorpus real = load_corpus(f.corpus);
  real.validate();
  std::optional<Checkpoint<Scalar>> ck;
  Vocabulary vocab = build_vocabulary(real, f.min_freq);
  if (!f.checkpoint.empty()) {
    ck = load_checkpoint<Scalar>(f.checkpoint);
    const int min_freq = ck->run_config.contains("min-freq")
                             ? std::stoi(ck->run_config["min-freq"].template get<std::string>())
                             : f.min_freq;
    vocab = build_vocabulary(real, min_freq);
    const auto ck_digest = Vocabulary::from_tokens(ck->vocab_tokens).digest();
    if (ck_digest != vocab.digest()) {
      throw DataError("vocabulary mismatch: checkpoint " + ck_digest + ", corpus " + vocab.digest());
    }
    if (ck->config.num_categories != real.num_categories) {
      throw DataError("checkpoint K does not match the corpus");
    }
  } else if (f.generated.empty()) {
    throw CLI::RequiredError("--checkpoint or --generated");
  }

  std::optional<CnnClassifier> clf;
  json clf_info = nullptr;
  if (!f.no_classifier) {
    if (!f.classifier.empty()) {
      clf = load_classifier(f.classifier, vocab);
    } else {
      ClassifierConfig cc;
      cc.embed_dim = f.clf.embed;
      cc.feature_maps = f.clf.maps;
      cc.max_epochs = f.clf.epochs;
      cc.patience = f.clf.patience;
      cc.batch_size = f.clf.batch;
      cc.dropout = f.clf.dropout;
      cc.lr = f.clf.lr;
      std::size_t longest = 0;
      for (const auto& s : real.sentences) longest = std::max(longest, s.tokens.size());
      cc.max_len = std::max<int>(static_cast<int>(longest), *std::max_element(cc.widths.begin(), cc.widths.end()));
      clf = train_eval_classifier(real, vocab, cc, f.seed);
      if (!f.save_classifier.empty()) save_classifier(f.save_classifier, *clf, vocab);
    }
    clf_info = {{"validation_accuracy", clf->validation_accuracy}, {"config", clf->config}};
    std::cerr << "classifier validation accuracy " << clf->validation_accuracy << "\n";
  }

  EvalOptions opts;
  opts.samples_per_category = f.samples;
  opts.bleu_b_max_references = f.bleu_b_max;
  opts.seed = f.seed;
  MetricsReport report;
  if (!f.generated.empty()) {
    const LabeledCorpus gen = load_corpus(f.generated, real.num_categories, true);
    report = score_generated(gen, real, clf ? &*clf : nullptr, vocab, opts);
    if (ck) {
      Rng rng(f.seed);
      report.perplexity = perplexity(ck->params, ck->config, real.sentences, vocab, rng).perplexity;
      report.validate();
    }
  } else {
    report = eval_report(ck->params, ck->config, vocab, real, clf ? &*clf : nullptr, opts);
  }
  json j = report;
  j["effective_config"] = plain_values(cfg);
  if (ck) j["model"] = ck->config;
  j["classifier"] = clf_info;
  write_text(f.output, j.dump(2) + "\n");
  return kOk;
}

int cmd_evaluate(const EvaluateFlags& f, const json& cfg) {
  if (!f.checkpoint.empty() && checkpoint_dtype(f.checkpoint) == "f32") return run_evaluate<float>(f, cfg);
  return run_evaluate<double>(f, cfg);
}

int cmd_grad_check(const GradCheckFlags& f) {
  GradCheckOptions o;
  o.tolerance = f.tolerance;
  o.step = f.step;
  o.max_elements = f.max_elements;
  o.subsample_seed = f.seed;
  o.corrupt_backward = f.corrupt_backward;
  bool ok = true;
  std::cout << std::left << std::setw(42) << "check" << std::setw(14) << "max_rel_err" << std::setw(9)
            << "checked" << std::setw(8) << "kinks" << "result  worst\n";
  for (const auto& e : run_gradient_suite(o, f.seed)) {
    const auto& r = e.report;
    ok = ok && r.passed;
    std::cout << std::left << std::setw(42) << e.name << std::setw(14) << r.max_rel_error << std::setw(9)
              << r.checked << std::setw(8) << r.skipped_kinks << (r.passed ? "PASS    " : "FAIL    ")
              << r.worst_tensor << "[" << r.worst_index << "]\n";
  }
  std::cout << (ok ? "gradient check passed" : "gradient check FAILED") << " at tolerance " << f.tolerance
            << "\n";
  return ok ? kOk : kNumericFailure;
}

void add_model_flags(CLI::App* c, ModelFlags& m) {
  c->add_option("--init", m.init, "Hidden-state initialization: none, static, adaptive");
  c->add_option("--eval-init", m.eval_init, "Initialization at generation time (same = automatic)");
  c->add_option("--omega", m.omega, "Static initialization magnitude");
  c->add_flag("--kl", m.kl, "Add the conditional prior and KL term");
  c->add_flag("--feat", m.feat, "Add feature extractors before the recurrence");
  c->add_flag("--no-cls", m.no_cls, "Detach the classification head (plain VRNN)");
  c->add_flag("--mask-padding", m.mask_padding, "Score only real tokens plus the first PAD");
  c->add_option("--embed", m.embed, "Embedding size");
  c->add_option("--hidden", m.hidden, "GRU hidden size");
  c->add_option("--latent", m.latent, "Latent size");
  c->add_option("--enc-hidden", m.enc_hidden);
  c->add_option("--enc-out", m.enc_out);
  c->add_option("--dec-hidden", m.dec_hidden);
  c->add_option("--dec-out", m.dec_out);
  c->add_option("--prior-hidden", m.prior_hidden);
  c->add_option("--max-len", m.max_len, "Sequence length T (0 = longest sentence + 1)");
  c->add_option("--temperature", m.temperature, "Sampling temperature");
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> raw(argv, argv + argc);
  std::vector<std::string> file_keys;
  std::vector<std::string> args;
  try {
    args = expand_config_args(raw, &file_keys);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  std::set<std::string> cli_keys;
  for (std::size_t i = 1; i < raw.size(); ++i) {
    if (raw[i].rfind("--", 0) == 0) cli_keys.insert(raw[i].substr(2, raw[i].find('=') - 2));
    if (raw[i].size() == 2 && raw[i][0] == '-') cli_keys.insert(raw[i].substr(1));
  }

  CLI::App app{"CatVRNN: category-steered text generation with a multi-task variational RNN"};
  app.footer("Every command accepts --config FILE with key = value lines (flags > file > defaults).\n"
             "Exit codes: 0 ok, 1 usage, 2 data/format error, 3 numeric failure.");
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();
  app.require_subcommand(1);

  BuildDataFlags bd;
  auto* c_bd = app.add_subcommand("build-data", "Filter, subsample and relabel corpora; writes TSV + manifest");
  c_bd->add_option("--input", bd.input, "Input corpus TSV");
  c_bd->add_option("--output", bd.output, "Output corpus TSV")->required();
  c_bd->add_option("--manifest", bd.manifest, "Manifest path (default OUTPUT.manifest.json)");
  c_bd->add_option("--filter-len", bd.filter_len, "MIN:MAX, keep sentences with MIN <= length <= MAX");
  c_bd->add_option("--variant", bd.variant, "icq-1c|icq-2c|icq-5c|icq-10c|ica-2c..ica-5c");
  c_bd->add_option("--per-cell", bd.per_cell, "ICQ sentences per product x sentiment cell");
  c_bd->add_option("--per-product", bd.per_product, "ICA sentences per product");
  c_bd->add_option("--subsample", bd.subsample, "Keep at most N sentences per category");
  c_bd->add_option("--synthetic", bd.synthetic, "Build a disjoint-vocabulary corpus with K categories");
  c_bd->add_option("--synthetic-per-cat", bd.synthetic_per_cat);
  c_bd->add_option("--synthetic-vocab", bd.synthetic_vocab);
  c_bd->add_option("--synthetic-min-len", bd.synthetic_min_len);
  c_bd->add_option("--synthetic-max-len", bd.synthetic_max_len);
  c_bd->add_option("--min-freq", bd.min_freq);
  c_bd->add_option("--seed", bd.seed);

  TrainFlags tr;
  auto* c_tr = app.add_subcommand("train", "Train a model; writes checkpoints and a JSONL metrics stream");
  c_tr->add_option("--corpus", tr.corpus, "Training corpus TSV")->required();
  c_tr->add_option("--out-dir", tr.out_dir, "Checkpoint directory");
  c_tr->add_option("--metrics", tr.metrics, "Metrics JSONL (default OUT_DIR/metrics.jsonl)");
  c_tr->add_option("--resume", tr.resume, "Continue from a checkpoint");
  c_tr->add_option("--precision", tr.precision, "f32 or f64");
  c_tr->add_option("--epochs", tr.epochs, "Total epochs");
  c_tr->add_option("--batch-size", tr.batch_size);
  c_tr->add_option("--lr", tr.lr);
  c_tr->add_option("--max-grad-norm", tr.max_grad_norm, "Clip gradient norm (0 = off)");
  c_tr->add_option("--save-every", tr.save_every, "Checkpoint every N epochs (0 = final only)");
  c_tr->add_option("--min-freq", tr.min_freq, "Vocabulary frequency cutoff");
  c_tr->add_option("--seed", tr.seed);
  add_model_flags(c_tr, tr.model);

  GenerateFlags ge;
  auto* c_ge = app.add_subcommand("generate", "Sample sentences per category from a checkpoint");
  c_ge->add_option("--checkpoint", ge.checkpoint)->required();
  c_ge->add_option("-n,--count", ge.count, "Sentences per category");
  c_ge->add_option("-c,--categories", ge.categories, "Comma separated ids (default all)");
  c_ge->add_option("-o,--output", ge.output, "Output TSV (- for stdout)");
  c_ge->add_option("--seed", ge.seed);
  c_ge->add_option("--temperature", ge.temperature, "Override sampling temperature (0 keeps the checkpoint value)");

  EvaluateFlags ev;
  auto* c_ev = app.add_subcommand("evaluate", "Category accuracy, perplexity and BLEU report");
  c_ev->add_option("--checkpoint", ev.checkpoint);
  c_ev->add_option("--corpus", ev.corpus, "Real corpus (training set)")->required();
  c_ev->add_option("--generated", ev.generated, "Score an existing generated TSV");
  c_ev->add_option("--classifier", ev.classifier, "Load a trained evaluation classifier");
  c_ev->add_option("--save-classifier", ev.save_classifier);
  c_ev->add_flag("--no-classifier", ev.no_classifier, "Skip category accuracy");
  c_ev->add_option("-n,--samples", ev.samples, "Generated sentences per category");
  c_ev->add_option("--bleu-b-max", ev.bleu_b_max, "Reference cap for backward BLEU (0 = all)");
  c_ev->add_option("--min-freq", ev.min_freq);
  c_ev->add_option("--seed", ev.seed);
  c_ev->add_option("-o,--output", ev.output, "Report JSON (- for stdout)");
  c_ev->add_option("--clf-embed", ev.clf.embed);
  c_ev->add_option("--clf-maps", ev.clf.maps);
  c_ev->add_option("--clf-epochs", ev.clf.epochs);
  c_ev->add_option("--clf-patience", ev.clf.patience);
  c_ev->add_option("--clf-batch", ev.clf.batch);
  c_ev->add_option("--clf-dropout", ev.clf.dropout);
  c_ev->add_option("--clf-lr", ev.clf.lr);

  GradCheckFlags gc;
  auto* c_gc = app.add_subcommand("grad-check", "Finite-difference check of every primitive and the full loss");
  c_gc->add_option("--tolerance", gc.tolerance);
  c_gc->add_option("--step", gc.step);
  c_gc->add_option("--max-elements", gc.max_elements, "Subsample size (0 = all)");
  c_gc->add_option("--seed", gc.seed);
  c_gc->add_flag("--corrupt-backward", gc.corrupt_backward, "Debug: perturb dense-layer gradients");

  std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
  try {
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  const std::set<std::string> file_set(file_keys.begin(), file_keys.end());
  CLI::App* sub = app.get_subcommands().front();
  const json cfg = effective_config(*sub, cli_keys, file_set);
  print_precedence(sub->get_name(), cfg);

  try {
    if (sub == c_bd) return cmd_build_data(bd, cfg);
    if (sub == c_tr) return cmd_train(tr, cfg);
    if (sub == c_ge) return cmd_generate(ge, cfg);
    if (sub == c_ev) return cmd_evaluate(ev, cfg);
    if (sub == c_gc) return cmd_grad_check(gc);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumericFailure;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataFailure;
  }
  return kUsage;
}
