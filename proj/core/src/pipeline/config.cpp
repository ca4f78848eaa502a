#include "memetrn/pipeline/config.hpp"

#include <concepts>
#include <optional>
#include <set>

#include <json.hpp>

#include "memetrn/data/dataset_io.hpp"
#include "memetrn/errors.hpp"
#include "memetrn/text/paraphrase.hpp"

namespace memetrn::pipeline {

namespace {

using json = nlohmann::ordered_json;

// Reads one JSON object, tracking which keys were consumed so leftovers can be
// reported as unknown.
class Reader {
 public:
  Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw InputError("config '" + label() + "' must be an object");
  }

  void read(const char* key, bool& out) {
    if (const json* v = take(key)) {
      if (!v->is_boolean()) fail(key, "a boolean");
      out = v->get<bool>();
    }
  }
  template <std::unsigned_integral T>
    requires(!std::same_as<T, bool>)
  void read(const char* key, T& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_unsigned()) fail(key, "a non-negative integer");
      out = v->get<T>();
    }
  }
  void read(const char* key, int& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_integer()) fail(key, "an integer");
      out = v->get<int>();
    }
  }
  void read(const char* key, double& out) {
    if (const json* v = take(key)) {
      if (!v->is_number()) fail(key, "a number");
      out = v->get<double>();
    }
  }
  void read(const char* key, std::string& out) {
    if (const json* v = take(key)) {
      if (!v->is_string()) fail(key, "a string");
      out = v->get<std::string>();
    }
  }
  void read(const char* key, std::vector<std::string>& out) {
    if (const json* v = take(key)) {
      if (!v->is_array()) fail(key, "an array of strings");
      out.clear();
      for (const json& e : *v) {
        if (!e.is_string()) fail(key, "an array of strings");
        out.push_back(e.get<std::string>());
      }
    }
  }
  void read(const char* key, std::map<std::string, std::vector<std::string>>& out) {
    if (const json* v = take(key)) {
      if (!v->is_object()) fail(key, "an object of string arrays");
      out.clear();
      for (const auto& [word, alts] : v->items()) {
        if (!alts.is_array()) fail(key, "an object of string arrays");
        auto& dst = out[word];
        for (const json& e : alts) {
          if (!e.is_string()) fail(key, "an object of string arrays");
          dst.push_back(e.get<std::string>());
        }
      }
    }
  }

  // Nested object, or nullopt when absent.
  std::optional<Reader> child(const char* key) {
    if (const json* v = take(key)) return Reader(*v, qualified(key));
    return std::nullopt;
  }

  void finish() const {
    for (const auto& [key, value] : node_.items()) {
      if (!seen_.count(key)) throw InputError("unknown config key '" + qualified(key) + "'");
    }
  }

  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string label() const { return path_.empty() ? "<root>" : path_; }

  const json* take(const char* key) {
    seen_.insert(key);
    auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  [[noreturn]] void fail(const char* key, const char* expected) const {
    throw InputError("config key '" + qualified(key) + "' must be " + expected);
  }

  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_world(Reader r, WorldConfig& w) {
  r.read("seed", w.seed);
  r.read("n_samples", w.n_samples);
  std::string rule = to_string(w.rule);
  r.read("rule", rule);
  w.rule = parse_rule(rule);
  r.read("trigger_words", w.trigger_words);
  r.read("benign_words", w.benign_words);
  r.read("synonyms", w.synonyms);
  r.read("min_clauses", w.min_clauses);
  r.read("max_clauses", w.max_clauses);
  r.read("min_clause_words", w.min_clause_words);
  r.read("max_clause_words", w.max_clause_words);
  r.read("concepts", w.concepts);
  r.read("trigger_concepts", w.trigger_concepts);
  r.read("feature_dim", w.feature_dim);
  r.read("prototype_scale", w.prototype_scale);
  r.read("feature_noise", w.feature_noise);
  r.read("regions_per_image", w.regions_per_image);
  r.read("alias_trigger_features", w.alias_trigger_features);
  r.read("label_noise", w.label_noise);
  r.read("train_positive_rate", w.train_positive_rate);
  r.read("dev_fraction", w.dev_fraction);
  r.read("test_fraction", w.test_fraction);
  r.read("caption_images", w.caption_images);
  r.read("references_per_image", w.references_per_image);
  r.read("caption_templates", w.caption_templates);
  r.read("gold_captions", w.gold_captions);
  r.finish();
}

void read_model(Reader r, trn::ModelConfig& m) {
  r.read("d", m.d);
  r.read("heads", m.heads);
  r.read("layers", m.layers);
  r.read("text_layers", m.text_layers);
  r.read("visual_layers", m.visual_layers);
  r.read("co_layers", m.co_layers);
  r.read("dropout", m.dropout);
  r.read("init_std", m.init_std);
  if (auto t = r.child("tokens")) {
    t->read("ocr", m.tokens.ocr);
    t->read("caption", m.tokens.caption);
    t->read("labels", m.tokens.labels);
    t->finish();
  }
  if (auto s = r.child("sequence")) {
    s->read("max_length", m.sequence.max_length);
    s->read("max_regions", m.sequence.max_regions);
    s->finish();
  }
  r.finish();
}

void read_inputs(Reader r, DetectorInputs& in) {
  r.read("use_ocr", in.flags.use_ocr);
  r.read("use_caption", in.flags.use_caption);
  r.read("use_object_labels", in.flags.use_object_labels);
  r.read("use_visual", in.flags.use_visual);
  r.read("use_augmentation", in.use_augmentation);
  r.read("augmentation_diversity", in.augmentation_diversity);
  r.finish();
}

void read_train(Reader r, TrainSchedule& t) {
  r.read("steps", t.steps);
  r.read("batch_size", t.batch_size);
  r.read("lr", t.lr);
  r.read("final_lr", t.final_lr);
  r.read("warmup_steps", t.warmup_steps);
  r.read("clip_norm", t.clip_norm);
  r.read("log_every", t.log_every);
  r.finish();
}

void read_captioner(Reader r, captioner::CaptionerConfig& c, CaptionerSchedule& s) {
  r.read("d", c.d);
  r.read("heads", c.heads);
  r.read("layers", c.layers);
  r.read("max_length", c.max_length);
  r.read("init_std", c.init_std);
  r.read("xe_epochs", s.xe_epochs);
  r.read("scst_epochs", s.scst_epochs);
  r.read("batch_size", s.batch_size);
  r.read("lr", s.lr);
  r.read("final_lr", s.final_lr);
  r.read("scst_lr", s.scst_lr);
  r.read("holdout_fraction", s.holdout_fraction);
  r.read("eval_every", s.eval_every);
  r.read("temperature", s.temperature);
  r.finish();
}

void validate(const RunConfig& cfg) {
  if (cfg.vocab_size <= text::kReservedCount) throw InputError("vocab_size must exceed the reserved tokens");
  if (cfg.train.batch_size == 0) throw InputError("train.batch_size must be positive");
  if (!(cfg.train.lr > 0.0) || cfg.train.final_lr < 0.0) throw InputError("train learning rates must be positive");
  if (cfg.train.clip_norm < 0.0) throw InputError("train.clip_norm must be >= 0");
  if (cfg.inputs.use_augmentation && !text::valid_diversity(cfg.inputs.augmentation_diversity)) {
    throw InputError("inputs.augmentation_diversity must be 2, 5 or 10");
  }
  const auto& s = cfg.caption_train;
  if (s.batch_size == 0) throw InputError("captioner.batch_size must be positive");
  if (s.holdout_fraction < 0.0 || s.holdout_fraction >= 1.0) {
    throw InputError("captioner.holdout_fraction must be in [0, 1)");
  }
  if (!(s.temperature > 0.0)) throw InputError("captioner.temperature must be positive");
  if (!(s.lr > 0.0) || !(s.scst_lr > 0.0) || s.final_lr < 0.0) throw InputError("captioner learning rates must be positive");
  if (cfg.model.d == 0 || cfg.model.heads == 0 || cfg.model.d % cfg.model.heads != 0) {
    throw InputError("model.d must be a positive multiple of model.heads");
  }
  if (cfg.model.dropout < 0.0 || cfg.model.dropout >= 1.0) throw InputError("model.dropout must be in [0, 1)");
  cfg.world.validate();
}

}  // namespace

RunConfig default_run_config() {
  RunConfig cfg;
  cfg.model.feature_dim = cfg.world.feature_dim;
  cfg.captioner.feature_dim = cfg.world.feature_dim;
  return cfg;
}

RunConfig parse_run_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg = default_run_config();
  Reader r(root, "");
  r.read("seed", cfg.seed);
  r.read("vocab_size", cfg.vocab_size);
  std::string variant = trn::to_string(cfg.model.variant);
  r.read("variant", variant);
  cfg.model.variant = trn::parse_variant(variant);
  if (auto w = r.child("world")) read_world(*w, cfg.world);
  if (auto m = r.child("model")) read_model(*m, cfg.model);
  if (auto in = r.child("inputs")) read_inputs(*in, cfg.inputs);
  if (auto t = r.child("train")) read_train(*t, cfg.train);
  if (auto c = r.child("captioner")) read_captioner(*c, cfg.captioner, cfg.caption_train);
  r.finish();
  cfg.model.seed = cfg.seed;
  cfg.captioner.seed = cfg.seed;
  cfg.model.feature_dim = cfg.world.feature_dim;
  cfg.captioner.feature_dim = cfg.world.feature_dim;
  validate(cfg);
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) { return parse_run_config(read_text_file(path)); }

std::string run_config_json(const RunConfig& cfg) {
  const WorldConfig& w = cfg.world;
  json world = {{"seed", w.seed},
                {"n_samples", w.n_samples},
                {"rule", to_string(w.rule)},
                {"trigger_words", w.trigger_words},
                {"benign_words", w.benign_words},
                {"synonyms", w.synonyms},
                {"min_clauses", w.min_clauses},
                {"max_clauses", w.max_clauses},
                {"min_clause_words", w.min_clause_words},
                {"max_clause_words", w.max_clause_words},
                {"concepts", w.concepts},
                {"trigger_concepts", w.trigger_concepts},
                {"feature_dim", w.feature_dim},
                {"prototype_scale", w.prototype_scale},
                {"feature_noise", w.feature_noise},
                {"regions_per_image", w.regions_per_image},
                {"alias_trigger_features", w.alias_trigger_features},
                {"label_noise", w.label_noise},
                {"train_positive_rate", w.train_positive_rate},
                {"dev_fraction", w.dev_fraction},
                {"test_fraction", w.test_fraction},
                {"caption_images", w.caption_images},
                {"references_per_image", w.references_per_image},
                {"caption_templates", w.caption_templates},
                {"gold_captions", w.gold_captions}};
  const trn::ModelConfig& m = cfg.model;
  json model = {{"d", m.d},
                {"heads", m.heads},
                {"layers", m.layers},
                {"text_layers", m.text_layers},
                {"visual_layers", m.visual_layers},
                {"co_layers", m.co_layers},
                {"dropout", m.dropout},
                {"init_std", m.init_std},
                {"tokens", {{"ocr", m.tokens.ocr}, {"caption", m.tokens.caption}, {"labels", m.tokens.labels}}},
                {"sequence", {{"max_length", m.sequence.max_length}, {"max_regions", m.sequence.max_regions}}}};
  const DetectorInputs& in = cfg.inputs;
  json inputs = {{"use_ocr", in.flags.use_ocr},
                 {"use_caption", in.flags.use_caption},
                 {"use_object_labels", in.flags.use_object_labels},
                 {"use_visual", in.flags.use_visual},
                 {"use_augmentation", in.use_augmentation},
                 {"augmentation_diversity", in.augmentation_diversity}};
  const TrainSchedule& t = cfg.train;
  json train = {{"steps", t.steps},       {"batch_size", t.batch_size},     {"lr", t.lr},
                {"final_lr", t.final_lr}, {"warmup_steps", t.warmup_steps}, {"clip_norm", t.clip_norm},
                {"log_every", t.log_every}};
  const auto& c = cfg.captioner;
  const auto& s = cfg.caption_train;
  json cap = {{"d", c.d},
              {"heads", c.heads},
              {"layers", c.layers},
              {"max_length", c.max_length},
              {"init_std", c.init_std},
              {"xe_epochs", s.xe_epochs},
              {"scst_epochs", s.scst_epochs},
              {"batch_size", s.batch_size},
              {"lr", s.lr},
              {"final_lr", s.final_lr},
              {"scst_lr", s.scst_lr},
              {"holdout_fraction", s.holdout_fraction},
              {"eval_every", s.eval_every},
              {"temperature", s.temperature}};
  json root = {{"seed", cfg.seed},
               {"vocab_size", cfg.vocab_size},
               {"variant", trn::to_string(cfg.model.variant)},
               {"world", world},
               {"model", model},
               {"inputs", inputs},
               {"train", train},
               {"captioner", cap}};
  return root.dump(2) + "\n";
}

}  // namespace memetrn::pipeline
