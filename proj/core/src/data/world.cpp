#include "memetrn/data/world.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "memetrn/errors.hpp"
#include "memetrn/numerics/rng.hpp"
#include "memetrn/text/vocab.hpp"

namespace memetrn {
namespace {

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

std::string fill_template(std::string tpl, const std::string& a, const std::string& b) {
  for (auto [key, value] : {std::pair<std::string, std::string>{"{a}", a}, {"{b}", b}}) {
    for (std::size_t pos; (pos = tpl.find(key)) != std::string::npos;) tpl.replace(pos, key.size(), value);
  }
  return tpl;
}

struct ConceptPools {
  std::vector<std::size_t> trigger;
  std::vector<std::size_t> benign;
};

ConceptPools concept_pools(const WorldConfig& cfg) {
  ConceptPools pools;
  const std::set<std::string> trig(cfg.trigger_concepts.begin(), cfg.trigger_concepts.end());
  for (std::size_t i = 0; i < cfg.concepts.size(); ++i) {
    (trig.count(cfg.concepts[i]) ? pools.trigger : pools.benign).push_back(i);
  }
  return pools;
}

// Rows of concepts that share a prototype through aliasing: trigger concept k
// copies benign concept k (mod the benign pool size).
std::vector<std::size_t> prototype_source(const WorldConfig& cfg, const ConceptPools& pools) {
  std::vector<std::size_t> src(cfg.concepts.size());
  for (std::size_t i = 0; i < src.size(); ++i) src[i] = i;
  if (cfg.alias_trigger_features && !pools.benign.empty()) {
    for (std::size_t k = 0; k < pools.trigger.size(); ++k) src[pools.trigger[k]] = pools.benign[k % pools.benign.size()];
  }
  return src;
}

Tensor make_prototypes(const WorldConfig& cfg, const ConceptPools& pools) {
  Rng rng(cfg.seed, Rng::hash("prototypes"));
  Tensor protos({cfg.concepts.size(), cfg.feature_dim});
  for (double& v : protos.data()) v = cfg.prototype_scale * rng.normal();
  const auto src = prototype_source(cfg, pools);
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i] != i) std::copy(protos.row(src[i]).begin(), protos.row(src[i]).end(), protos.row(i).begin());
  }
  for (std::size_t i = 0; i < src.size(); ++i) {
    for (std::size_t j = i + 1; j < src.size(); ++j) {
      if (src[i] == src[j] || src[i] == j || src[j] == i) continue;
      double d2 = 0.0;
      for (std::size_t k = 0; k < cfg.feature_dim; ++k) d2 += std::pow(protos(i, k) - protos(j, k), 2);
      if (std::sqrt(d2) <= 4.0 * cfg.feature_noise) {
        throw InputError("concept prototypes '" + cfg.concepts[i] + "' and '" + cfg.concepts[j] +
                         "' are closer than 4 sigma; raise prototype_scale or feature_dim");
      }
    }
  }
  return protos;
}

std::vector<RegionFeature> make_regions(const WorldConfig& cfg, const Tensor& protos, std::size_t a, std::size_t b,
                                        Rng& rng) {
  std::vector<std::size_t> concept_of(cfg.regions_per_image);
  for (std::size_t r = 0; r < concept_of.size(); ++r) {
    concept_of[r] = r == 0 ? a : r == 1 ? b : (rng.bernoulli(0.5) ? a : b);
  }
  shuffle(concept_of, rng);
  std::vector<RegionFeature> regions;
  for (std::size_t c : concept_of) {
    RegionFeature reg;
    reg.feat.resize(cfg.feature_dim);
    for (std::size_t k = 0; k < cfg.feature_dim; ++k) reg.feat[k] = protos(c, k) + cfg.feature_noise * rng.normal();
    const double x1 = rng.uniform(0.0, 0.7);
    const double y1 = rng.uniform(0.0, 0.7);
    const double x2 = x1 + (1.0 - x1) * rng.uniform(0.2, 1.0);
    const double y2 = y1 + (1.0 - y1) * rng.uniform(0.2, 1.0);
    reg.box = {x1, y1, std::min(x2, 1.0), std::min(y2, 1.0)};
    reg.label = cfg.concepts[c];
    reg.score = rng.uniform(0.5, 1.0);
    regions.push_back(std::move(reg));
  }
  return regions;
}

std::string make_text(const WorldConfig& cfg, bool trigger, Rng& rng) {
  const std::size_t n_clauses = cfg.min_clauses + rng.below(cfg.max_clauses - cfg.min_clauses + 1);
  std::vector<std::vector<std::string>> clauses(n_clauses);
  for (auto& clause : clauses) {
    const std::size_t n_words = cfg.min_clause_words + rng.below(cfg.max_clause_words - cfg.min_clause_words + 1);
    for (std::size_t w = 0; w < n_words; ++w) clause.push_back(cfg.benign_words[rng.below(cfg.benign_words.size())]);
  }
  if (trigger) {
    auto& clause = clauses[rng.below(clauses.size())];
    const std::size_t pos = rng.below(clause.size() + 1);
    clause.insert(clause.begin() + static_cast<std::ptrdiff_t>(pos),
                  cfg.trigger_words[rng.below(cfg.trigger_words.size())]);
  }
  std::string text;
  for (std::size_t c = 0; c < clauses.size(); ++c) {
    if (c) text += ", ";
    for (std::size_t w = 0; w < clauses[c].size(); ++w) {
      if (w) text += ' ';
      text += clauses[c][w];
    }
  }
  return text;
}

std::pair<std::size_t, std::size_t> ordered_pair(const WorldConfig& cfg, std::size_t a, std::size_t b) {
  return cfg.concepts[a] <= cfg.concepts[b] ? std::pair{a, b} : std::pair{b, a};
}

}  // namespace

std::string to_string(PlantedRule rule) { return rule == PlantedRule::And ? "and" : "xor"; }

PlantedRule parse_rule(const std::string& name) {
  if (name == "and" || name == "AND") return PlantedRule::And;
  if (name == "xor" || name == "XOR") return PlantedRule::Xor;
  throw InputError("unknown planted rule '" + name + "' (expected and|xor)");
}

int apply_rule(PlantedRule rule, bool text_trigger, bool visual_trigger) {
  return rule == PlantedRule::And ? (text_trigger && visual_trigger ? 1 : 0) : (text_trigger != visual_trigger ? 1 : 0);
}

WorldConfig WorldConfig::defaults() {
  WorldConfig cfg;
  cfg.trigger_words = {"vermin", "plague", "infest", "swarm", "filthy", "parasite"};
  cfg.benign_words = {"when",  "you",   "finally", "get",   "the",    "weekend", "my",     "friends",
                      "love",  "coffee", "monday",  "morning", "look", "at",      "this",   "happy",
                      "day",   "new",    "best",    "life",  "always", "never",   "again",  "work",
                      "today", "summer", "feeling", "good",  "party",  "time",    "family", "dinner",
                      "music", "game",   "night",   "sunny", "walk",   "beach",   "smile",  "weather"};
  cfg.synonyms = {{"happy", {"glad", "joyful"}},   {"love", {"adore", "enjoy"}},   {"look", {"see", "check"}},
                  {"best", {"greatest", "finest"}}, {"good", {"great", "fine"}},    {"friends", {"pals", "buddies"}},
                  {"finally", {"eventually"}},      {"party", {"celebration"}},    {"walk", {"stroll"}},
                  {"smile", {"grin"}},              {"night", {"evening"}},        {"today", {"now"}}};
  cfg.concepts = {"bird", "boat", "car", "cat", "chair", "clock", "cup", "dog", "horse", "tree"};
  cfg.trigger_concepts = {"clock", "horse"};
  cfg.caption_templates = {"a {a} and a {b}", "a photo of a {a} and a {b}", "there is a {a} with a {b}",
                           "a {a} next to a {b}", "an image showing a {a} and a {b}"};
  return cfg;
}

void WorldConfig::validate() const {
  const std::set<std::string> trig(trigger_words.begin(), trigger_words.end());
  for (const auto& w : benign_words) {
    if (trig.count(w)) throw InputError("word '" + w + "' is in both trigger and benign lexicons");
  }
  for (const auto& [w, alts] : synonyms) {
    if (trig.count(w)) throw InputError("trigger word '" + w + "' has synonyms; triggers must stay fixed");
    for (const auto& a : alts) {
      if (trig.count(a)) throw InputError("synonym '" + a + "' of '" + w + "' is a trigger word");
    }
  }
  if (benign_words.empty()) throw InputError("benign lexicon is empty");
  const std::set<std::string> names(concepts.begin(), concepts.end());
  if (names.size() != concepts.size()) throw InputError("duplicate concept names");
  for (const auto& c : trigger_concepts) {
    if (!names.count(c)) throw InputError("trigger concept '" + c + "' is not a concept");
  }
  if (concepts.size() < 2) throw InputError("need at least two visual concepts");
  if (feature_dim == 0 || regions_per_image == 0) throw InputError("feature_dim and regions_per_image must be > 0");
  if (min_clauses == 0 || min_clauses > max_clauses) throw InputError("invalid clause count range");
  if (min_clause_words == 0 || min_clause_words > max_clause_words) throw InputError("invalid clause word range");
  if (label_noise < 0.0 || label_noise >= 0.5) throw InputError("label_noise must be in [0, 0.5)");
  if (caption_templates.empty()) throw InputError("no caption templates");
  if (references_per_image == 0) throw InputError("references_per_image must be >= 1");
  if (!(feature_noise >= 0.0)) throw InputError("feature_noise must be >= 0");
}

SplitSizes plan_splits(const WorldConfig& cfg) {
  SplitSizes s;
  const double n = static_cast<double>(cfg.n_samples);
  s.dev = static_cast<std::size_t>(std::llround(n * cfg.dev_fraction));
  s.test = static_cast<std::size_t>(std::llround(n * cfg.test_fraction));
  if (s.dev == 0 || s.test == 0 || s.dev % 2 || s.test % 2) {
    throw InputError("n_samples=" + std::to_string(cfg.n_samples) + " gives dev=" + std::to_string(s.dev) +
                     ", test=" + std::to_string(s.test) + "; fully balanced splits need even, nonzero sizes");
  }
  if (s.dev + s.test >= cfg.n_samples) throw InputError("dev + test leave no training samples");
  s.train = cfg.n_samples - s.dev - s.test;
  s.train_positive = static_cast<std::size_t>(std::llround(static_cast<double>(s.train) * cfg.train_positive_rate));
  return s;
}

bool contains_trigger(const std::string& text, const std::vector<std::string>& trigger_words) {
  const std::set<std::string> trig(trigger_words.begin(), trigger_words.end());
  for (const auto& w : text::normalize_words(text)) {
    if (trig.count(w)) return true;
  }
  return false;
}

std::vector<Split> make_splits(const std::vector<MemeSample>& samples, const SplitProportions& proportions,
                               bool balance, std::uint64_t seed) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < samples.size(); ++i) (samples[i].label ? pos : neg).push_back(i);
  Rng rng(seed, Rng::hash("splits"));
  shuffle(pos, rng);
  shuffle(neg, rng);

  std::vector<Split> out(samples.size(), Split::Train);
  const double n = static_cast<double>(samples.size());
  if (balance) {
    const auto even = [](double x) { return 2 * static_cast<std::size_t>(std::llround(x / 2.0)); };
    const std::size_t dev_half = even(n * proportions.dev) / 2;
    const std::size_t test_half = even(n * proportions.test) / 2;
    if (pos.size() < dev_half + test_half || neg.size() < dev_half + test_half) {
      throw InputError("cannot balance dev/test: need " + std::to_string(dev_half + test_half) +
                       " samples per class, have " + std::to_string(pos.size()) + " positive / " +
                       std::to_string(neg.size()) + " negative");
    }
    for (auto* cls : {&pos, &neg}) {
      for (std::size_t k = 0; k < dev_half; ++k) out[(*cls)[k]] = Split::Dev;
      for (std::size_t k = dev_half; k < dev_half + test_half; ++k) out[(*cls)[k]] = Split::Test;
    }
  } else {
    for (auto* cls : {&pos, &neg}) {
      const double m = static_cast<double>(cls->size());
      const auto n_dev = static_cast<std::size_t>(std::llround(m * proportions.dev));
      const auto n_test = static_cast<std::size_t>(std::llround(m * proportions.test));
      for (std::size_t k = 0; k < cls->size(); ++k) {
        out[(*cls)[k]] = k < n_dev ? Split::Dev : k < n_dev + n_test ? Split::Test : Split::Train;
      }
    }
  }
  return out;
}

SyntheticWorld gen_synthetic(const WorldConfig& cfg) {
  cfg.validate();
  const SplitSizes sizes = plan_splits(cfg);
  const ConceptPools pools = concept_pools(cfg);

  SyntheticWorld world;
  world.prototypes = make_prototypes(cfg, pools);

  const bool can_text = !cfg.trigger_words.empty();
  const bool can_visual = !pools.trigger.empty() && !pools.benign.empty();
  const bool can_plain_image = pools.benign.size() >= 2;
  std::vector<std::pair<bool, bool>> feasible;
  for (bool t : {false, true}) {
    for (bool v : {false, true}) {
      if ((t && !can_text) || (v && !can_visual) || (!v && !can_plain_image)) continue;
      feasible.emplace_back(t, v);
    }
  }
  if (feasible.empty()) throw InputError("no feasible (text, visual) indicator combination");
  auto combos_for = [&](int label) {
    std::vector<std::pair<bool, bool>> out;
    for (auto tv : feasible) {
      if (apply_rule(cfg.rule, tv.first, tv.second) == label) out.push_back(tv);
    }
    return out;
  };
  const bool both_classes = !combos_for(0).empty() && !combos_for(1).empty();

  // Labels first so split balance is exact; indicators are then drawn to match.
  std::vector<int> labels(cfg.n_samples, 0);
  if (both_classes) {
    const std::size_t n_pos = sizes.train_positive + sizes.dev / 2 + sizes.test / 2;
    std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_pos), 1);
    Rng label_rng(cfg.seed, Rng::hash("labels"));
    shuffle(labels, label_rng);
  } else {
    world.warning = "rule cannot produce both classes with this lexicon; labels follow the rule unbalanced";
  }

  const Rng meme_root(cfg.seed, Rng::hash("meme"));
  std::vector<MemeSample> all;
  all.reserve(cfg.n_samples);
  for (std::size_t i = 0; i < cfg.n_samples; ++i) {
    Rng rng = meme_root.fork(i);
    Provenance prov;
    prov.rule = cfg.rule;
    char id[16];
    std::snprintf(id, sizeof id, "m%05zu", i);
    prov.id = id;

    std::pair<bool, bool> tv;
    if (both_classes) {
      prov.flipped = rng.bernoulli(cfg.label_noise);
      const auto combos = combos_for(labels[i] ^ (prov.flipped ? 1 : 0));
      tv = combos[rng.below(combos.size())];
    } else {
      tv = feasible[rng.below(feasible.size())];
    }
    prov.text_trigger = tv.first;
    prov.visual_trigger = tv.second;

    std::size_t a, b;
    if (prov.visual_trigger) {
      a = pools.trigger[rng.below(pools.trigger.size())];
      b = pools.benign[rng.below(pools.benign.size())];
    } else {
      a = pools.benign[rng.below(pools.benign.size())];
      do {
        b = pools.benign[rng.below(pools.benign.size())];
      } while (b == a);
    }
    std::tie(a, b) = ordered_pair(cfg, a, b);

    MemeSample s;
    s.id = prov.id;
    s.text = make_text(cfg, prov.text_trigger, rng);
    s.regions = make_regions(cfg, world.prototypes, a, b, rng);
    s.label = prov.label();
    if (cfg.gold_captions) s.caption = fill_template(cfg.caption_templates.front(), cfg.concepts[a], cfg.concepts[b]);
    prov.concepts = {cfg.concepts[a], cfg.concepts[b]};
    all.push_back(std::move(s));
    world.provenance.push_back(std::move(prov));
  }

  const auto assignment =
      make_splits(all, {cfg.dev_fraction, cfg.test_fraction}, both_classes, cfg.seed);
  for (std::size_t i = 0; i < all.size(); ++i) {
    switch (assignment[i]) {
      case Split::Train: world.train.push_back(std::move(all[i])); break;
      case Split::Dev: world.dev.push_back(std::move(all[i])); break;
      case Split::Test: world.test.push_back(std::move(all[i])); break;
    }
  }

  const Rng cap_root(cfg.seed, Rng::hash("captions"));
  for (std::size_t i = 0; i < cfg.caption_images; ++i) {
    Rng rng = cap_root.fork(i);
    std::size_t a = rng.below(cfg.concepts.size()), b;
    do {
      b = rng.below(cfg.concepts.size());
    } while (b == a);
    std::tie(a, b) = ordered_pair(cfg, a, b);
    CaptionSample cs;
    char id[16];
    std::snprintf(id, sizeof id, "c%05zu", i);
    cs.id = id;
    cs.regions = make_regions(cfg, world.prototypes, a, b, rng);
    for (std::size_t r = 0; r < cfg.references_per_image; ++r) {
      cs.references.push_back(
          fill_template(cfg.caption_templates[r % cfg.caption_templates.size()], cfg.concepts[a], cfg.concepts[b]));
    }
    world.captions.push_back(std::move(cs));
  }
  return world;
}

}  // namespace memetrn
