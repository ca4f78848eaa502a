// memetrn: command-line front end for data generation, captioner training,
// detector training, prediction, evaluation and input ablations.
//
// Exit status: 0 on success, 2 on a command-line usage error, 1 when the
// command itself fails (missing files, invalid configuration, bad data).

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include "memetrn/data/dataset_io.hpp"
#include "memetrn/errors.hpp"
#include "memetrn/pipeline/config.hpp"
#include "memetrn/pipeline/pipeline.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace memetrn;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

pipeline::RunConfig resolve_config(const std::string& config_path, const std::optional<fs::path>& data_dir) {
  if (!config_path.empty()) return pipeline::load_run_config(config_path);
  if (data_dir && fs::exists(pipeline::DatasetFiles{*data_dir}.config())) {
    return pipeline::load_run_config(pipeline::DatasetFiles{*data_dir}.config());
  }
  return pipeline::default_run_config();
}

void require_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InputError("data directory '" + dir.string() + "' does not exist");
}

void require_file(const fs::path& file) {
  if (!fs::is_regular_file(file)) throw InputError("file '" + file.string() + "' does not exist");
}

// Line-delimited training log: one {"step","loss","lr"} object per line.
class JsonlLog {
 public:
  explicit JsonlLog(const fs::path& path) : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
  }
  void operator()(const pipeline::LogRecord& r) {
    out_ << json{{"step", r.step}, {"loss", r.loss}, {"lr", r.lr}}.dump() << '\n';
  }

 private:
  std::ofstream out_;
};

void write_json(const fs::path& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

// Memes to process: a single file, or every split present in a directory.
std::vector<std::pair<std::string, fs::path>> meme_inputs(const fs::path& data) {
  std::vector<std::pair<std::string, fs::path>> out;
  if (fs::is_directory(data)) {
    for (const char* split : {"train", "dev", "test"}) {
      const fs::path p = pipeline::DatasetFiles{data}.split(split);
      if (fs::exists(p)) out.emplace_back(split, p);
    }
    if (out.empty()) throw InputError("no train/dev/test .jsonl files in '" + data.string() + "'");
  } else {
    require_file(data);
    out.emplace_back(data.stem().string(), data);
  }
  return out;
}

// -- commands ---------------------------------------------------------------

int cmd_gen_data(const std::string& config, const fs::path& out) {
  const pipeline::RunConfig cfg = resolve_config(config, std::nullopt);
  const SyntheticWorld world = pipeline::write_dataset(cfg, out);
  std::cout << "wrote " << world.train.size() << " train, " << world.dev.size() << " dev, " << world.test.size()
            << " test memes and " << world.captions.size() << " caption images to " << out.string() << "\n";
  if (!world.warning.empty()) std::cerr << "warning: " << world.warning << "\n";
  return 0;
}

int cmd_train_captioner(const std::string& config, const fs::path& data, const fs::path& out, bool scst) {
  require_dir(data);
  const pipeline::RunConfig cfg = resolve_config(config, data);
  const pipeline::DatasetFiles files{data};
  require_file(files.captions());
  const auto images = load_caption_samples(files.captions());
  const text::Vocab vocab = pipeline::dataset_vocab(files, cfg);
  fs::create_directories(out);
  write_text_file(out / "config.json", pipeline::run_config_json(cfg));
  JsonlLog log(out / "train_log.jsonl");
  pipeline::CaptionerReport rep;
  const auto bundle = pipeline::train_captioner(cfg, images, vocab, scst, &rep, std::ref(log));
  pipeline::save_captioner(out / "captioner.ckpt", bundle);

  json epochs = json::array();
  for (const auto& e : rep.epochs) {
    json rec = {{"phase", e.phase}, {"epoch", e.epoch}, {"loss", e.loss}};
    if (e.cider >= 0.0) rec["cider_d"] = e.cider;
    if (e.phase == "scst") rec["skipped_steps"] = e.skipped_steps;
    epochs.push_back(rec);
  }
  write_json(out / "report.json", {{"xe_token_accuracy", rep.xe_token_accuracy},
                                   {"cider_d_after_xe", rep.cider_after_xe},
                                   {"cider_d_after_scst", rep.cider_after_scst},
                                   {"best_cider_d", rep.best_cider},
                                   {"best_phase", rep.best_phase},
                                   {"best_epoch", rep.best_epoch},
                                   {"selection_images", rep.selection_images},
                                   {"epochs", epochs}});
  std::cout << "token accuracy " << rep.xe_token_accuracy << ", best CIDEr-D " << rep.best_cider << " ("
            << rep.best_phase << " epoch " << rep.best_epoch << ")\n";
  return 0;
}

int cmd_caption(const fs::path& model, const fs::path& data, const fs::path& out) {
  require_file(model);
  const auto bundle = pipeline::load_captioner(model);
  const auto inputs = meme_inputs(data);
  fs::create_directories(out);
  captioner::DecodeConfig dc;
  dc.max_length = bundle.model->config().max_length;
  std::size_t failures = 0;
  for (const auto& [name, path] : inputs) {
    std::vector<MemeSample> memes = load_memes(path);
    const auto records = captioner::caption_dataset(memes, *bundle.model, bundle.vocab, dc);
    for (const auto& r : records) {
      if (!r.error.empty()) {
        ++failures;
        std::cerr << "warning: " << name << "/" << r.id << ": " << r.error << "\n";
      }
    }
    save_memes(memes, out / (name + ".jsonl"));
    save_caption_cache(records, out / (name + ".captions.jsonl"));
  }
  if (fs::is_directory(data)) {
    const pipeline::DatasetFiles src{data};
    for (const fs::path& extra : {src.captions(), src.provenance(), src.config()}) {
      if (fs::exists(extra)) fs::copy_file(extra, out / extra.filename(), fs::copy_options::overwrite_existing);
    }
  }
  bundle.vocab.save(out / "vocab.txt");
  std::cout << "captioned " << inputs.size() << " file(s) into " << out.string();
  if (failures) std::cout << " (" << failures << " samples without caption)";
  std::cout << "\n";
  return 0;
}

int cmd_train_detector(const std::string& config, const fs::path& data, const fs::path& out) {
  require_dir(data);
  const pipeline::RunConfig cfg = resolve_config(config, data);
  const pipeline::DatasetFiles files{data};
  require_file(files.split("train"));
  const auto train = load_memes(files.split("train"));
  const text::Vocab vocab = pipeline::dataset_vocab(files, cfg);
  fs::create_directories(out);
  write_text_file(out / "config.json", pipeline::run_config_json(cfg));
  JsonlLog log(out / "train_log.jsonl");
  const pipeline::Detector det = pipeline::train_detector(cfg, train, vocab, std::ref(log));
  pipeline::save_detector(out / "detector.ckpt", det);
  if (fs::exists(files.split("dev"))) {
    const auto dev = load_memes(files.split("dev"));
    const auto preds = pipeline::predict(det, dev);
    save_predictions(preds, out / "dev_predictions.csv");
    const pipeline::Evaluation ev = pipeline::evaluate(preds, dev);
    write_json(out / "metrics.json", {{"split", "dev"}, {"auroc", ev.auroc}, {"accuracy", ev.accuracy}, {"count", ev.count}});
    std::cout << "dev auroc " << ev.auroc << " accuracy " << ev.accuracy << " (" << ev.count << " memes)\n";
  }
  return 0;
}

int cmd_predict(const fs::path& model, const fs::path& data, const fs::path& out) {
  require_file(model);
  const pipeline::Detector det = pipeline::load_detector(model);
  fs::path input = data;
  if (fs::is_directory(data)) input = pipeline::DatasetFiles{data}.split("test");
  require_file(input);
  const auto memes = load_memes(input);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_predictions(pipeline::predict(det, memes), out);
  std::cout << "wrote " << memes.size() << " predictions to " << out.string() << "\n";
  return 0;
}

int cmd_eval(const fs::path& pred, const fs::path& gold, const std::string& out) {
  require_file(pred);
  require_file(gold);
  const pipeline::Evaluation ev = pipeline::evaluate(load_predictions(pred), load_memes(gold));
  char line[128];
  std::snprintf(line, sizeof line, "auroc %.6f\naccuracy %.6f\ncount %zu\n", ev.auroc, ev.accuracy, ev.count);
  std::cout << line;
  if (!out.empty()) write_json(out, {{"auroc", ev.auroc}, {"accuracy", ev.accuracy}, {"count", ev.count}});
  return 0;
}

int cmd_ablate(const std::string& config, const std::string& data, const fs::path& out) {
  std::optional<fs::path> data_dir;
  if (!data.empty()) {
    require_dir(data);
    data_dir = data;
  }
  const pipeline::RunConfig cfg = resolve_config(config, data_dir);
  std::vector<MemeSample> train, dev;
  text::Vocab vocab;
  if (data_dir) {
    const pipeline::DatasetFiles files{*data_dir};
    require_file(files.split("train"));
    require_file(files.split("dev"));
    train = load_memes(files.split("train"));
    dev = load_memes(files.split("dev"));
    vocab = pipeline::dataset_vocab(files, cfg);
  } else {
    SyntheticWorld world = gen_synthetic(cfg.world);
    vocab = pipeline::corpus_vocab(world.train, world.captions, cfg.world, cfg.vocab_size);
    train = std::move(world.train);
    dev = std::move(world.dev);
  }
  fs::create_directories(out);
  write_text_file(out / "config.json", pipeline::run_config_json(cfg));
  const auto rows = pipeline::run_ablation(cfg, train, dev, vocab);
  const std::string table = pipeline::ablation_csv(rows, cfg.model.variant);
  write_text_file(out / "ablation.csv", table);
  std::cout << table;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"memetrn: multimodal hateful-meme detection with a triplet-relation transformer"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "memetrn 0.1.0");

  std::function<int()> run;
  std::string config, data, out, model, pred, gold, metrics_out;
  bool scst = false;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic meme world and write the dataset files");
  gen->add_option("--config", config, "Run configuration (JSON)");
  gen->add_option("--out", out, "Output dataset directory")->required();
  gen->callback([&] { run = [&] { return cmd_gen_data(config, out); }; });

  auto* tc = app.add_subcommand("train-captioner", "Train the caption decoder (XE, then optional SCST)");
  tc->add_option("--config", config, "Run configuration (defaults to <data>/config.json)");
  tc->add_option("--data", data, "Dataset directory")->required();
  tc->add_option("--out", out, "Output directory")->required();
  tc->add_flag("--scst", scst, "Run the self-critical phase after XE");
  tc->callback([&] { run = [&] { return cmd_train_captioner(config, data, out, scst); }; });

  auto* cap = app.add_subcommand("caption", "Fill meme captions with a trained captioner");
  cap->add_option("--model", model, "Captioner checkpoint")->required();
  cap->add_option("--data", data, "Dataset directory or memes .jsonl file")->required();
  cap->add_option("--out", out, "Output directory")->required();
  cap->callback([&] { run = [&] { return cmd_caption(model, data, out); }; });

  auto* td = app.add_subcommand("train-detector", "Train the hateful-meme detector");
  td->add_option("--config", config, "Run configuration (defaults to <data>/config.json)");
  td->add_option("--data", data, "Dataset directory")->required();
  td->add_option("--out", out, "Output directory")->required();
  td->callback([&] { run = [&] { return cmd_train_detector(config, data, out); }; });

  auto* pr = app.add_subcommand("predict", "Write hateful probabilities for a memes file");
  pr->add_option("--model", model, "Detector checkpoint")->required();
  pr->add_option("--data", data, "Memes .jsonl file (or dataset directory: test split)")->required();
  pr->add_option("--out", out, "Prediction CSV")->required();
  pr->callback([&] { run = [&] { return cmd_predict(model, data, out); }; });

  auto* ev = app.add_subcommand("eval", "Print AUROC and accuracy of a prediction file");
  ev->add_option("--pred", pred, "Prediction CSV")->required();
  ev->add_option("--gold", gold, "Memes .jsonl with gold labels")->required();
  ev->add_option("--out", metrics_out, "Also write the metrics as JSON");
  ev->callback([&] { run = [&] { return cmd_eval(pred, gold, metrics_out); }; });

  auto* ab = app.add_subcommand("ablate", "Train the 8 caption/labels/augmentation input combinations");
  ab->add_option("--config", config, "Run configuration (JSON)");
  ab->add_option("--data", data, "Dataset directory (default: generate from the config)");
  ab->add_option("--out", out, "Output directory")->required();
  ab->callback([&] { run = [&] { return cmd_ablate(config, data, out); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    return run();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
