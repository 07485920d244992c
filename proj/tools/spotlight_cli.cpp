// spotlight: command-line driver for corpus building, synthetic data
// generation, training, evaluation, and model introspection.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "spotlight/corpus/pipeline.hpp"
#include "spotlight/io/png_io.hpp"
#include "spotlight/kernels/kernels.hpp"
#include "spotlight/model/model.hpp"
#include "spotlight/numerics/gradcheck.hpp"
#include "spotlight/synth/synth.hpp"
#include "spotlight/train/checkpoint.hpp"
#include "spotlight/train/metrics.hpp"
#include "spotlight/train/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace spotlight;

namespace {

std::uint64_t effective_seed(std::uint64_t flag_seed) {
  if (const char* env = std::getenv("SPOTLIGHT_SEED")) {
    return std::stoull(env);
  }
  return flag_seed;
}

screen::BoundingBox box_from_json(const json& j) {
  return screen::BoundingBox(j.at(0).get<double>(), j.at(1).get<double>(),
                             j.at(2).get<double>(), j.at(3).get<double>());
}

// Everything a training/eval command needs, loaded from a data directory
// produced by `synth generate` or `corpus build`.
struct Bundle {
  screen::Vocabulary vocab;
  std::vector<screen::ExampleRecord> examples;
  train::ScreenSet screens;
  train::TaskData tasks;
};

template <typename T>
void load_split(const fs::path& dir, const std::string& name, train::TaskSplit<T>& split,
                const std::function<T(const json&)>& parse) {
  const std::array<std::pair<const char*, std::vector<T>*>, 3> parts = {
      std::make_pair("train", &split.train), std::make_pair("dev", &split.dev),
      std::make_pair("test", &split.test)};
  for (const auto& [suffix, vec] : parts) {
    const fs::path path = dir / (name + "_" + suffix + ".jsonl");
    if (!fs::exists(path)) continue;
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) vec->push_back(parse(json::parse(line)));
    }
  }
}

Bundle load_bundle(const std::string& dir, const model::SpotlightConfig& cfg) {
  Bundle b;
  b.vocab = screen::Vocabulary::load((fs::path(dir) / "vocab.txt").string());
  const fs::path examples_path = fs::path(dir) / "examples.jsonl";
  if (fs::exists(examples_path)) {
    b.examples = corpus::read_examples(examples_path.string());
  }
  const fs::path images = fs::path(dir) / "images";
  if (fs::exists(images)) {
    for (const auto& entry : fs::directory_iterator(images)) {
      if (entry.path().extension() != ".png") continue;
      b.screens.put(entry.path().stem().string(),
                    screen::preprocess_screenshot(io::read_png(entry.path().string()),
                                                  cfg.image_size, cfg.patch_size));
    }
  }

  load_split<train::GenItem>(dir, "caption", b.tasks.captions, [&](const json& j) {
    return train::GenItem{j.at("screen").get<std::string>(), box_from_json(j.at("box")),
                          screen::tokenize(j.at("text").get<std::string>(), b.vocab)};
  });
  load_split<train::GenItem>(dir, "summary", b.tasks.summaries, [&](const json& j) {
    return train::GenItem{j.at("screen").get<std::string>(),
                          screen::BoundingBox::full_screen(),
                          screen::tokenize(j.at("text").get<std::string>(), b.vocab)};
  });
  load_split<train::GroundItem>(dir, "ground", b.tasks.groundings, [&](const json& j) {
    train::GroundItem item;
    item.screen_id = j.at("screen").get<std::string>();
    item.prompt = screen::tokenize(j.at("command").get<std::string>(), b.vocab);
    for (const auto& c : j.at("candidates")) item.candidates.push_back(box_from_json(c));
    item.gold = j.at("gold").get<int>();
    return item;
  });
  const std::vector<int> tap_prompt = screen::tokenize("is this tappable ?", b.vocab);
  load_split<train::ClsItem>(dir, "tap", b.tasks.taps, [&](const json& j) {
    return train::ClsItem{j.at("screen").get<std::string>(), box_from_json(j.at("box")),
                          tap_prompt, j.at("tappable").get<bool>()};
  });
  return b;
}

void save_state(const std::string& path, const train::ModelState& state,
                const screen::Vocabulary& vocab, int step) {
  train::CheckpointMeta meta;
  meta.config = state.cfg;
  meta.extra["step"] = std::to_string(step);
  meta.extra["vocab_hash"] = std::to_string(vocab.hash());
  train::save_checkpoint(path, meta, state.ps);
}

train::ModelState load_state(const std::string& path, const screen::Vocabulary& vocab) {
  model::ParamStore<float> ps;
  train::CheckpointMeta meta = train::load_checkpoint(path, ps, vocab.hash());
  train::ModelState state(meta.config, ps.seed());
  state.ps = std::move(ps);
  return state;
}

// Shared model-geometry flags for commands that build a model from scratch.
struct ModelFlags {
  model::SpotlightConfig cfg;
  std::string variant = "region_summarizer";

  void attach(CLI::App* cmd) {
    cmd->add_option("--image-size", cfg.image_size, "square input size in pixels");
    cmd->add_option("--patch-size", cfg.patch_size, "vision patch size");
    cmd->add_option("--d-model", cfg.d_model, "model width");
    cmd->add_option("--heads", cfg.n_heads, "attention heads");
    cmd->add_option("--encoder-layers", cfg.encoder_layers, "vision encoder depth");
    cmd->add_option("--summarizer-layers", cfg.summarizer_layers, "region summarizer depth");
    cmd->add_option("--decoder-layers", cfg.decoder_layers, "text decoder depth");
    cmd->add_option("--queries-per-coord", cfg.queries_per_coord,
                    "bbox query rows per coordinate");
    cmd->add_option("--dropout", cfg.dropout, "dropout rate");
    cmd->add_option("--variant", variant,
                    "focus variant: region_summarizer | static_bbox_queries | "
                    "no_bbox_in_kv | joint_bbox_embedding | roi_align | roi_align_as_query");
  }
  model::SpotlightConfig resolve(int vocab_size) {
    cfg.vocab_size = vocab_size;
    cfg.variant = model::focus_variant_from_string(variant);
    cfg.validate();
    return cfg;
  }
};

struct TrainFlags {
  train::TrainConfig tc;
  void attach(CLI::App* cmd) {
    cmd->add_option("--steps", tc.steps, "optimizer steps");
    cmd->add_option("--batch", tc.batch_size, "examples per step");
    cmd->add_option("--lr", tc.opt.peak_lr, "peak learning rate");
    cmd->add_option("--warmup", tc.opt.warmup_steps, "linear warmup steps");
    cmd->add_option("--clip", tc.opt.grad_clip, "global gradient-norm clip (<=0 off)");
    cmd->add_option("--seed", tc.seed, "training seed (SPOTLIGHT_SEED overrides)");
    cmd->add_option("--log-every", tc.log_every, "log interval in steps");
    cmd->add_flag("--freeze-encoder", tc.freeze_encoder,
                  "do not update vision-encoder weights");
  }
  train::TrainConfig resolve(double dropout) {
    tc.seed = effective_seed(tc.seed);
    tc.dropout = dropout;
    return tc;
  }
};

int run(int argc, char** argv) {
  CLI::App app{"Spotlight-style vision-only UI understanding"};
  app.require_subcommand(1);

  if (const char* k = std::getenv("SPOTLIGHT_KERNEL")) {
    kern::set_backend(std::string(k) == "scalar" ? kern::Backend::Scalar
                                                 : kern::Backend::Avx2);
  }

  // --- synth generate -------------------------------------------------------
  auto* synth_cmd = app.add_subcommand("synth", "synthetic UI corpus");
  auto* synth_gen = synth_cmd->add_subcommand("generate", "render a synthetic corpus");
  int synth_screens = 100, synth_examples = 512;
  std::uint64_t synth_seed = 7;
  std::string synth_out = "synth_data";
  synth_gen->add_option("--screens", synth_screens, "number of screens");
  synth_gen->add_option("--examples", synth_examples, "packed pretraining examples");
  synth_gen->add_option("--seed", synth_seed, "generation seed");
  synth_gen->add_option("--out", synth_out, "output directory")->required();

  // --- corpus build / stats -------------------------------------------------
  auto* corpus_cmd = app.add_subcommand("corpus", "real-data corpus pipeline");
  auto* corpus_build = corpus_cmd->add_subcommand("build", "two-pass corpus build");
  corpus::BuildConfig bc;
  std::string mobile_dir, web_dir, corpus_out;
  corpus_build->add_option("--mobile", mobile_dir, "directory of mobile-vh-v1 jsonl + png");
  corpus_build->add_option("--web", web_dir, "directory of web-obj-v1 jsonl + png");
  corpus_build->add_option("--out", corpus_out, "output directory")->required();
  corpus_build->add_option("--examples", bc.n_examples, "packed examples to emit");
  corpus_build->add_option("--target-size", bc.target_size, "square image size");
  corpus_build->add_option("--patch-size", bc.patch_size, "patch size");
  corpus_build->add_option("--web-fraction", bc.web_fraction, "fraction of web batches");
  corpus_build->add_option("--title-weight", bc.title_weight, "title sampling weight");
  corpus_build->add_option("--min-count", bc.filter.min_count, "phrase min count");
  corpus_build->add_option("--seed", bc.seed, "pipeline seed");

  auto* corpus_stats = corpus_cmd->add_subcommand("stats", "per-source tuple statistics");
  std::string stats_dir;
  corpus_stats->add_option("--data", stats_dir, "directory with examples.jsonl + vocab.txt")
      ->required();

  // --- pretrain ---------------------------------------------------------------
  auto* pre = app.add_subcommand("pretrain", "region-text pretraining");
  std::string pre_data, pre_out = "pretrained.ckpt";
  ModelFlags pre_model;
  TrainFlags pre_train;
  pre->add_option("--data", pre_data, "data directory")->required();
  pre->add_option("--out", pre_out, "checkpoint to write");
  pre_model.attach(pre);
  pre_train.attach(pre);

  // --- finetune ----------------------------------------------------------------
  auto* fine = app.add_subcommand("finetune", "single-task fine-tuning");
  std::string fine_data, fine_ckpt, fine_out = "finetuned.ckpt", fine_task = "caption";
  bool from_scratch = false;
  ModelFlags fine_model;
  TrainFlags fine_train;
  fine->add_option("--data", fine_data, "data directory")->required();
  fine->add_option("--ckpt", fine_ckpt, "checkpoint to start from");
  fine->add_option("--out", fine_out, "checkpoint to write");
  fine->add_option("--task", fine_task, "caption | summary | ground | tap");
  fine->add_flag("--from-scratch", from_scratch, "skip pretrained initialization");
  fine_model.attach(fine);
  fine_train.attach(fine);

  // --- multitask ----------------------------------------------------------------
  auto* multi = app.add_subcommand("multitask", "train all four tasks jointly");
  std::string multi_data, multi_ckpt, multi_out = "multitask.ckpt";
  TrainFlags multi_train;
  multi->add_option("--data", multi_data, "data directory")->required();
  multi->add_option("--ckpt", multi_ckpt, "checkpoint to start from")->required();
  multi->add_option("--out", multi_out, "checkpoint to write");
  multi_train.attach(multi);

  // --- eval ----------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a task");
  std::string eval_data, eval_ckpt, eval_task = "caption", eval_split = "test";
  eval_cmd->add_option("--data", eval_data, "data directory")->required();
  eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint to evaluate")->required();
  eval_cmd->add_option("--task", eval_task, "caption | summary | ground | tap");
  eval_cmd->add_option("--split", eval_split, "dev | test");

  // --- fewshot ----------------------------------------------------------------
  auto* few = app.add_subcommand("fewshot", "few-shot captioning from a pretrained model");
  std::string few_data, few_ckpt;
  int few_shots = 4;
  std::uint64_t few_seed = 1;
  few->add_option("--data", few_data, "data directory")->required();
  few->add_option("--ckpt", few_ckpt, "pretrained checkpoint")->required();
  few->add_option("--shots", few_shots, "exemplars per query (0, 4, 8, 16, 32)");
  few->add_option("--seed", few_seed, "shot sampling seed");

  // --- gradcheck ----------------------------------------------------------------
  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  std::string gc_variant = "region_summarizer";
  gc->add_option("--variant", gc_variant, "focus variant to verify");

  // --- attn-export ----------------------------------------------------------------
  auto* attn = app.add_subcommand("attn-export", "dump summarizer attention weights");
  std::string attn_data, attn_ckpt, attn_screen, attn_out = "attention.tsv";
  std::vector<double> attn_box;
  attn->add_option("--data", attn_data, "data directory")->required();
  attn->add_option("--ckpt", attn_ckpt, "checkpoint")->required();
  attn->add_option("--screen", attn_screen, "screen id")->required();
  attn->add_option("--box", attn_box, "region: left top right bottom")
      ->expected(4)
      ->required();
  attn->add_option("--out", attn_out, "TSV file to write");

  CLI11_PARSE(app, argc, argv);

  if (*synth_gen) {
    synth::SynthCorpus corpus =
        synth::generate_corpus(synth_screens, effective_seed(synth_seed), {});
    synth::write_corpus(corpus, synth_out, effective_seed(synth_seed) + 1, synth_examples);
    std::cout << "wrote " << corpus.screens.size() << " screens, " << synth_examples
              << " examples to " << synth_out << "\n";
    return 0;
  }
  if (*corpus_build) {
    bc.seed = effective_seed(bc.seed);
    corpus::build_corpus(mobile_dir, web_dir, corpus_out, bc);
    std::cout << "wrote corpus to " << corpus_out << "\n";
    return 0;
  }
  if (*corpus_stats) {
    const auto examples =
        corpus::read_examples((fs::path(stats_dir) / "examples.jsonl").string());
    const auto vocab =
        screen::Vocabulary::load((fs::path(stats_dir) / "vocab.txt").string());
    std::vector<screen::ScreenObjectTextTuple> tuples;
    for (const auto& ex : examples) {
      for (const auto& slot : ex.slots) {
        if (slot.pad) continue;
        tuples.emplace_back(slot.screen_id, slot.region,
                            screen::detokenize(slot.token_ids, vocab), slot.source);
      }
    }
    std::cout << corpus::stats_to_tsv(corpus::corpus_stats(tuples));
    return 0;
  }

  if (*pre) {
    Bundle b = load_bundle(pre_data, pre_model.cfg);
    model::SpotlightConfig cfg = pre_model.resolve(b.vocab.size());
    train::TrainConfig tc = pre_train.resolve(cfg.dropout);
    train::ModelState state(cfg, tc.seed);
    if (b.examples.empty()) throw std::runtime_error("no examples.jsonl in " + pre_data);
    train::pretrain(state, b.examples, b.screens, tc, &std::cout);
    save_state(pre_out, state, b.vocab, tc.steps);
    std::cout << "saved " << pre_out << "\n";
    return 0;
  }

  const auto run_finetune = [&](train::ModelState& state, const Bundle& b,
                                const train::TrainConfig& tc, const std::string& task) {
    if (task == "caption") {
      train::finetune_generation(state, b.tasks.captions.train, b.screens, tc, &std::cout);
    } else if (task == "summary") {
      train::finetune_generation(state, b.tasks.summaries.train, b.screens, tc, &std::cout);
    } else if (task == "ground") {
      train::finetune_grounding(state, b.tasks.groundings.train, b.screens, tc, &std::cout);
    } else if (task == "tap") {
      train::finetune_classification(state, b.tasks.taps.train, b.screens, tc, &std::cout);
    } else {
      throw std::runtime_error("unknown task '" + task + "'");
    }
  };

  if (*fine) {
    model::SpotlightConfig geom = fine_model.cfg;
    if (!from_scratch) {
      if (fine_ckpt.empty()) throw std::runtime_error("--ckpt or --from-scratch required");
      model::ParamStore<float> tmp;
      geom = train::load_checkpoint(fine_ckpt, tmp).config;
    }
    Bundle b = load_bundle(fine_data, geom);
    std::optional<train::ModelState> state;
    if (!from_scratch) {
      state.emplace(load_state(fine_ckpt, b.vocab));
    } else {
      state.emplace(fine_model.resolve(b.vocab.size()), effective_seed(fine_train.tc.seed));
    }
    train::TrainConfig tc = fine_train.resolve(state->cfg.dropout);
    run_finetune(*state, b, tc, fine_task);
    save_state(fine_out, *state, b.vocab, tc.steps);
    std::cout << "saved " << fine_out << "\n";
    return 0;
  }

  if (*multi) {
    model::SpotlightConfig probe;  // geometry comes from the checkpoint
    train::CheckpointMeta meta;
    {
      model::ParamStore<float> tmp;
      meta = train::load_checkpoint(multi_ckpt, tmp);
    }
    Bundle b = load_bundle(multi_data, meta.config);
    train::ModelState state = load_state(multi_ckpt, b.vocab);
    train::TrainConfig tc = multi_train.resolve(state.cfg.dropout);
    train::multitask(state, b.tasks, b.screens, tc, &std::cout);
    save_state(multi_out, state, b.vocab, tc.steps);
    std::cout << "saved " << multi_out << "\n";
    (void)probe;
    return 0;
  }

  if (*eval_cmd) {
    model::ParamStore<float> tmp;
    train::CheckpointMeta meta = train::load_checkpoint(eval_ckpt, tmp);
    Bundle b = load_bundle(eval_data, meta.config);
    train::ModelState state = load_state(eval_ckpt, b.vocab);
    const bool dev = eval_split == "dev";
    if (eval_task == "caption" || eval_task == "summary") {
      const auto& split = eval_task == "caption" ? b.tasks.captions : b.tasks.summaries;
      const double score = train::eval_generation_cider(
          state, dev ? split.dev : split.test, b.screens, b.vocab);
      std::cout << eval_task << " cider " << score << "\n";
    } else if (eval_task == "ground") {
      const auto& items = dev ? b.tasks.groundings.dev : b.tasks.groundings.test;
      std::cout << "ground accuracy "
                << train::eval_grounding_accuracy(state, items, b.screens) << "\n";
    } else if (eval_task == "tap") {
      const auto& items = dev ? b.tasks.taps.dev : b.tasks.taps.test;
      const auto r = train::eval_classification(state, items, b.screens);
      std::cout << "tap accuracy " << r.accuracy << " f1 " << r.f1 << "\n";
    } else {
      throw std::runtime_error("unknown task '" + eval_task + "'");
    }
    return 0;
  }

  if (*few) {
    model::ParamStore<float> tmp;
    train::CheckpointMeta meta = train::load_checkpoint(few_ckpt, tmp);
    Bundle b = load_bundle(few_data, meta.config);
    train::ModelState state = load_state(few_ckpt, b.vocab);
    const double score = train::eval_generation_cider(
        state, b.tasks.captions.test, b.screens, b.vocab, few_shots,
        &b.tasks.captions.train, effective_seed(few_seed));
    std::cout << "fewshot shots " << few_shots << " cider " << score << "\n";
    return 0;
  }

  if (*gc) {
    // Tiny double-precision model against central differences.
    model::SpotlightConfig cfg;
    cfg.image_size = 32;
    cfg.patch_size = 16;
    cfg.d_model = 8;
    cfg.n_heads = 2;
    cfg.encoder_layers = 1;
    cfg.summarizer_layers = 1;
    cfg.decoder_layers = 1;
    cfg.queries_per_coord = 1;
    cfg.vocab_size = 12;
    cfg.variant = model::focus_variant_from_string(gc_variant);
    cfg.validate();
    model::ParamStore<double> ps(3);

    screen::Image img;
    img.height = img.width = 32;
    img.pixels.assign(32 * 32 * 3, 0.0f);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<float> dist(0.0f, 1.0f);
    for (auto& p : img.pixels) p = dist(rng);
    const screen::Screenshot scr = screen::preprocess_screenshot(img, 32, 16);
    const screen::BoundingBox box(0.1, 0.2, 0.7, 0.9);

    const auto forward = [&]() {
      model::RunState rs;  // dropout off: gradcheck needs determinism
      model::EncodedScreen<double> enc = model::encode_screen(ps, cfg, scr, rs);
      model::TaskTuple<double> tuple{&scr, &enc, box, {8, 9, 10}};
      return model::chunk_loss(ps, cfg, {tuple}, rs);
    };
    forward();  // materialize the parameter set
    num::GradCheckReport report = num::finite_diff_check<double>(
        forward, ps.named(), 1e-5);
    std::cout << "gradcheck variant " << gc_variant << " params "
              << report.per_param.size() << " worst_rel_err " << report.worst << "\n";
    return report.passed(1e-4) ? 0 : 1;
  }

  if (*attn) {
    model::ParamStore<float> tmp;
    train::CheckpointMeta meta = train::load_checkpoint(attn_ckpt, tmp);
    Bundle b = load_bundle(attn_data, meta.config);
    train::ModelState state = load_state(attn_ckpt, b.vocab);
    const screen::Screenshot& scr = b.screens.at(attn_screen);
    const screen::BoundingBox box(attn_box[0], attn_box[1], attn_box[2], attn_box[3]);
    model::RunState rs;
    model::EncodedScreen<float> enc = model::encode_screen(state.ps, state.cfg, scr, rs);
    num::Tensor<float> weights;
    model::extract_focus(state.ps, state.cfg, enc, scr, box, rs, &weights);
    std::ofstream out(attn_out);
    for (int r = 0; r < weights.rows(); ++r) {
      for (int c = 0; c < weights.cols(); ++c) {
        out << (c ? "\t" : "") << weights.val(static_cast<std::size_t>(r) * weights.cols() + c);
      }
      out << "\n";
    }
    std::cout << "wrote " << weights.rows() << "x" << weights.cols() << " attention map to "
              << attn_out << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
