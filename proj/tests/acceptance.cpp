// Acceptance gate: one pass/fail line per criterion, nonzero exit if any
// criterion fails. Heavy criteria share one pretrained checkpoint.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "spotlight/corpus/pipeline.hpp"
#include "spotlight/model/model.hpp"
#include "spotlight/numerics/gradcheck.hpp"
#include "spotlight/screen/preprocess.hpp"
#include "spotlight/train/checkpoint.hpp"
#include "spotlight/train/metrics.hpp"
#include "spotlight/train/trainer.hpp"

using namespace spotlight;
using Clock = std::chrono::steady_clock;

namespace {

const std::string kFixtures = std::string(SPOTLIGHT_SOURCE_DIR) + "/tests/fixtures";
const std::string kCkptPath = "acceptance_pretrain.ckpt";

struct Outcome {
  bool pass = false;
  std::string detail;
};

bool g_all_pass = true;

void report(int id, const Outcome& out, double seconds) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1fs", seconds);
  std::cout << (out.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << out.detail
            << " [" << buf << "]" << std::endl;
  if (!out.pass) g_all_pass = false;
}

void run(int id, const std::function<Outcome()>& fn) {
  const auto t0 = Clock::now();
  Outcome out;
  try {
    out = fn();
  } catch (const std::exception& e) {
    out.pass = false;
    out.detail = std::string("exception: ") + e.what();
  }
  report(id, out, std::chrono::duration<double>(Clock::now() - t0).count());
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

// --------------------------------------------------------------------------
// Small-model helpers (criteria 1-4)
// --------------------------------------------------------------------------

model::SpotlightConfig micro_config(model::FocusVariant v) {
  model::SpotlightConfig cfg;
  cfg.image_size = 8;
  cfg.patch_size = 4;
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.ffn_mult = 2;
  cfg.encoder_layers = 1;
  cfg.summarizer_layers = 2;
  cfg.decoder_layers = 1;
  cfg.queries_per_coord = 1;
  cfg.roi_pool = 2;
  cfg.vocab_size = 12;
  cfg.max_seq_len = 16;
  cfg.max_tuples = 2;
  cfg.variant = v;
  cfg.validate();
  return cfg;
}

screen::Screenshot random_screen(int h, int w, int target, int patch,
                                 std::uint64_t seed) {
  screen::Image img;
  img.height = h;
  img.width = w;
  img.pixels.resize(static_cast<std::size_t>(h) * w * 3);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (auto& p : img.pixels) p = u(rng);
  return screen::preprocess_screenshot(img, target, patch);
}

template <typename S>
model::EncodedScreen<S> random_features(int rows, int d, std::uint64_t seed,
                                        std::vector<std::uint8_t> valid) {
  model::EncodedScreen<S> enc;
  enc.features = num::Tensor<S>::zeros({rows, d});
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (auto& v : *enc.features.data) v = static_cast<S>(dist(rng));
  enc.valid = std::move(valid);
  for (int r = 0; r < rows; ++r) {
    if (!enc.valid[static_cast<std::size_t>(r)]) {
      std::fill(enc.features.mut_ptr() + r * d, enc.features.mut_ptr() + (r + 1) * d, S(0));
    }
  }
  return enc;
}

// Moves weights away from the tiny N(0, 0.02) init; near init, attention is
// almost uniform, q/k gradients are ~1e-9, and central differences lose them
// to floating-point cancellation.
void jitter_params(model::ParamStore<double>& ps, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.2);
  for (auto& p : ps.named()) {
    for (auto& v : *p.tensor.data) v += noise(rng);
  }
}

screen::BoundingBox random_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double x0 = u(rng), x1 = u(rng), y0 = u(rng), y1 = u(rng);
  if (x0 > x1) std::swap(x0, x1);
  if (y0 > y1) std::swap(y0, y1);
  return {x0, y0, x1, y1};
}

// --------------------------------------------------------------------------
// Criterion 1: gradient oracle
// --------------------------------------------------------------------------

Outcome criterion1() {
  const std::vector<model::FocusVariant> variants = {
      model::FocusVariant::RegionSummarizer, model::FocusVariant::StaticBboxQueries,
      model::FocusVariant::NoBboxInKV,       model::FocusVariant::JointBboxEmbedding,
      model::FocusVariant::RoiAlign,         model::FocusVariant::RoiAlignAsQuery};
  double worst_module = 0.0, worst_e2e = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const screen::Screenshot scr = random_screen(8, 8, 8, 4, 100 + seed);
    const screen::BoundingBox box(0.1, 0.2, 0.7, 0.9);

    {  // encoder block
      model::SpotlightConfig cfg = micro_config(model::FocusVariant::RegionSummarizer);
      model::ParamStore<double> ps(seed);
      const auto forward = [&]() {
        model::RunState rs;
        auto enc = model::encode_screen(ps, cfg, scr, rs);
        return num::sum(num::multiply(enc.features, enc.features));
      };
      forward();
      jitter_params(ps, seed);
      worst_module =
          std::max(worst_module, num::finite_diff_check<double>(forward, ps.named(), 1e-5).worst);
    }
    {  // bbox query builders
      model::SpotlightConfig cfg = micro_config(model::FocusVariant::RegionSummarizer);
      for (int joint = 0; joint < 2; ++joint) {
        model::ParamStore<double> ps(seed + 50);
        const auto forward = [&]() {
          num::Tensor<double> q = joint ? model::joint_bbox_queries(ps, cfg, box)
                                        : model::bbox_queries(ps, cfg, box);
          return num::sum(num::multiply(q, q));
        };
        forward();
        jitter_params(ps, seed);
        worst_module = std::max(
            worst_module, num::finite_diff_check<double>(forward, ps.named(), 1e-5).worst);
      }
    }
    for (model::FocusVariant v : variants) {  // summarizer layers per variant
      model::SpotlightConfig cfg = micro_config(v);
      model::ParamStore<double> ps(seed + 7);
      const auto forward = [&]() {
        model::RunState rs;
        auto enc = model::encode_screen(ps, cfg, scr, rs);
        num::Tensor<double> out =
            model::summarize_region(ps, cfg, enc, scr.grid_rows, scr.grid_cols,
                                    scr.to_padded_coords(box), rs);
        return num::sum(num::multiply(out, out));
      };
      forward();
      jitter_params(ps, seed);
      worst_module = std::max(
          worst_module, num::finite_diff_check<double>(forward, ps.named(), 1e-5).worst);
    }
    for (model::FocusVariant v : variants) {  // full caption loss end to end
      model::SpotlightConfig cfg = micro_config(v);
      model::ParamStore<double> ps(seed + 13);
      model::EncodedScreen<double> enc;
      const auto forward = [&]() {
        model::RunState rs;
        enc = model::encode_screen(ps, cfg, scr, rs);
        std::vector<model::TaskTuple<double>> tuples = {
            {&scr, &enc, box, {8, 9}}, {&scr, &enc, {0.0, 0.0, 0.4, 0.4}, {10}}};
        return model::chunk_loss(ps, cfg, tuples, rs);
      };
      forward();
      jitter_params(ps, seed);
      worst_e2e =
          std::max(worst_e2e, num::finite_diff_check<double>(forward, ps.named(), 1e-5).worst);
    }
  }
  Outcome out;
  out.pass = worst_module < 1e-4 && worst_e2e < 1e-3;
  out.detail = "gradient oracle, 10 seeds: worst module rel err " + fmt(worst_module) +
               " (tol 1e-4), worst end-to-end " + fmt(worst_e2e) + " (tol 1e-3)";
  return out;
}

// --------------------------------------------------------------------------
// Criterion 2: summarizer block vs single-head dense reimplementation
// --------------------------------------------------------------------------

std::vector<double> summarizer_oracle(model::ParamStore<double>& ps,
                               const model::SpotlightConfig& cfg,
                               const model::EncodedScreen<double>& enc,
                               const screen::BoundingBox& box) {
  const int d = cfg.d_model;
  const int qn = 4 * cfg.queries_per_coord;
  const auto vec = [](const num::Tensor<double>& t) { return *t.data; };
  const auto gelu = [](double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); };

  const std::vector<double> we = vec(ps.get("focus.bbox.we"));
  const std::vector<double> wx = vec(ps.get("focus.bbox.wx"));
  const std::vector<double> type = vec(ps.get("focus.bbox.type"));
  const double coords[4] = {box.left, box.top, box.right, box.bottom};
  std::vector<double> q(static_cast<std::size_t>(qn) * d, 0.0);
  for (int coord = 0; coord < 4; ++coord) {
    std::vector<double> h(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k) {
      h[static_cast<std::size_t>(k)] = gelu(coords[coord] * we[static_cast<std::size_t>(k)]);
    }
    for (int oc = 0; oc < cfg.queries_per_coord * d; ++oc) {
      double acc = 0.0;
      for (int k = 0; k < d; ++k) {
        acc += h[static_cast<std::size_t>(k)] *
               wx[static_cast<std::size_t>(k) * cfg.queries_per_coord * d + oc];
      }
      const int row = coord * cfg.queries_per_coord + oc / d;
      q[static_cast<std::size_t>(row) * d + oc % d] = acc;
    }
    for (int r = 0; r < cfg.queries_per_coord; ++r) {
      for (int c = 0; c < d; ++c) {
        q[static_cast<std::size_t>(coord * cfg.queries_per_coord + r) * d + c] +=
            type[static_cast<std::size_t>(coord) * d + c];
      }
    }
  }

  const int hn = enc.features.rows();
  for (int l = 0; l < cfg.summarizer_layers; ++l) {
    const std::string p = "focus.sum.l" + std::to_string(l);
    const int kn = hn + qn;
    std::vector<double> kv(static_cast<std::size_t>(kn) * d);
    for (int r = 0; r < hn; ++r) {
      for (int c = 0; c < d; ++c) {
        kv[static_cast<std::size_t>(r) * d + c] =
            enc.features.val(static_cast<std::size_t>(r) * d + c);
      }
    }
    for (int r = 0; r < qn; ++r) {
      for (int c = 0; c < d; ++c) {
        kv[static_cast<std::size_t>(hn + r) * d + c] = q[static_cast<std::size_t>(r) * d + c];
      }
    }
    const auto proj = [&](const std::vector<double>& x, int rows, const std::string& name) {
      const std::vector<double> w = vec(ps.get(name + ".w"));
      const std::vector<double> b = vec(ps.get(name + ".b"));
      std::vector<double> out(static_cast<std::size_t>(rows) * d);
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < d; ++c) {
          double acc = b[static_cast<std::size_t>(c)];
          for (int k = 0; k < d; ++k) {
            acc += x[static_cast<std::size_t>(r) * d + k] *
                   w[static_cast<std::size_t>(k) * d + c];
          }
          out[static_cast<std::size_t>(r) * d + c] = acc;
        }
      }
      return out;
    };
    const auto qp = proj(q, qn, p + ".attn.q");
    const auto kp = proj(kv, kn, p + ".attn.k");
    const auto vp = proj(kv, kn, p + ".attn.v");
    std::vector<double> ctx(static_cast<std::size_t>(qn) * d, 0.0);
    for (int r = 0; r < qn; ++r) {
      std::vector<double> scores(static_cast<std::size_t>(kn), -1e300);
      double mx = -1e300;
      for (int k = 0; k < kn; ++k) {
        if (k < hn && !enc.valid[static_cast<std::size_t>(k)]) continue;
        double s = 0.0;
        for (int c = 0; c < d; ++c) {
          s += qp[static_cast<std::size_t>(r) * d + c] * kp[static_cast<std::size_t>(k) * d + c];
        }
        scores[static_cast<std::size_t>(k)] = s / std::sqrt(static_cast<double>(d));
        mx = std::max(mx, scores[static_cast<std::size_t>(k)]);
      }
      double z = 0.0;
      for (int k = 0; k < kn; ++k) {
        if (k < hn && !enc.valid[static_cast<std::size_t>(k)]) continue;
        z += std::exp(scores[static_cast<std::size_t>(k)] - mx);
      }
      for (int k = 0; k < kn; ++k) {
        if (k < hn && !enc.valid[static_cast<std::size_t>(k)]) continue;
        const double a = std::exp(scores[static_cast<std::size_t>(k)] - mx) / z;
        for (int c = 0; c < d; ++c) {
          ctx[static_cast<std::size_t>(r) * d + c] += a * vp[static_cast<std::size_t>(k) * d + c];
        }
      }
    }
    const auto ao = proj(ctx, qn, p + ".attn.o");
    std::vector<double> y(static_cast<std::size_t>(qn) * d);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = q[i] + ao[i];
    const auto de = proj(y, qn, p + ".dense");
    for (std::size_t i = 0; i < y.size(); ++i) q[i] = y[i] + de[i];
  }
  return q;
}

Outcome criterion2() {
  model::SpotlightConfig cfg = micro_config(model::FocusVariant::RegionSummarizer);
  cfg.n_heads = 1;
  cfg.queries_per_coord = 2;
  std::mt19937_64 rng(9);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    model::ParamStore<double> ps(static_cast<std::uint64_t>(trial));
    std::vector<std::uint8_t> valid(4, 1);
    if (trial % 4 == 0) valid[static_cast<std::size_t>(trial / 4 % 4)] = 0;
    auto enc = random_features<double>(4, cfg.d_model, 200 + trial, valid);
    const screen::BoundingBox box = random_box(rng);
    model::RunState rs;
    num::Tensor<double> got = model::summarize_region(ps, cfg, enc, 2, 2, box, rs);
    const std::vector<double> want = summarizer_oracle(ps, cfg, enc, box);
    for (std::size_t i = 0; i < want.size(); ++i) {
      worst = std::max(worst, std::abs(got.val(i) - want[i]));
    }
  }
  Outcome out;
  out.pass = worst < 1e-10;
  out.detail = "summarizer block, single-head oracle vs dense implementation, 100 cases: max |diff| " +
               fmt(worst) + " (tol 1e-10)";
  return out;
}

// --------------------------------------------------------------------------
// Criterion 3: ROI Align explicit-neighbor oracle
// --------------------------------------------------------------------------

std::vector<double> roi_oracle(const model::EncodedScreen<double>& enc, int rows, int cols,
                               const screen::BoundingBox& box, int pool, bool max_mode) {
  const int d = enc.features.cols();
  std::vector<double> out(static_cast<std::size_t>(pool * pool) * d, 0.0);
  const double bw = (box.right - box.left) / pool;
  const double bh = (box.bottom - box.top) / pool;
  for (int i = 0; i < pool; ++i) {
    for (int j = 0; j < pool; ++j) {
      std::vector<std::vector<double>> samples;
      for (int sy = 0; sy < 2; ++sy) {
        for (int sx = 0; sx < 2; ++sx) {
          const double x = box.left + (j + (sx + 0.5) / 2.0) * bw;
          const double y = box.top + (i + (sy + 0.5) / 2.0) * bh;
          const double u = x * cols - 0.5, v = y * rows - 0.5;
          const int c0 = static_cast<int>(std::floor(u));
          const int r0 = static_cast<int>(std::floor(v));
          std::vector<double> s(static_cast<std::size_t>(rows * cols), 0.0);
          for (int dr = 0; dr < 2; ++dr) {
            for (int dc = 0; dc < 2; ++dc) {
              const int r = std::clamp(r0 + dr, 0, rows - 1);
              const int c = std::clamp(c0 + dc, 0, cols - 1);
              if (!enc.valid[static_cast<std::size_t>(r * cols + c)]) continue;
              s[static_cast<std::size_t>(r * cols + c)] +=
                  (dr == 0 ? 1.0 - (v - r0) : v - r0) * (dc == 0 ? 1.0 - (u - c0) : u - c0);
            }
          }
          samples.push_back(std::move(s));
        }
      }
      std::vector<double> w(static_cast<std::size_t>(rows * cols), 0.0);
      if (max_mode) {
        double best = -1.0;
        for (const auto& s : samples) {
          double mass = 0.0;
          for (double x : s) mass += x;
          if (mass > best) {
            best = mass;
            w = s;
          }
        }
      } else {
        for (const auto& s : samples) {
          for (std::size_t k = 0; k < w.size(); ++k) w[k] += 0.25 * s[k];
        }
      }
      double total = 0.0;
      for (double x : w) total += x;
      if (total <= 0.0) throw num::NumericError("oracle: empty region");
      for (int p = 0; p < rows * cols; ++p) {
        for (int c = 0; c < d; ++c) {
          out[static_cast<std::size_t>(i * pool + j) * d + c] +=
              w[static_cast<std::size_t>(p)] / total *
              enc.features.val(static_cast<std::size_t>(p) * d + c);
        }
      }
    }
  }
  return out;
}

Outcome criterion3() {
  std::mt19937_64 rng(17);
  double worst = 0.0;
  int checked = 0, masked_cases = 0;
  while (checked < 1000) {
    const int grid = checked % 2 == 0 ? 2 : 3;
    const int n = grid * grid;
    std::vector<std::uint8_t> valid(static_cast<std::size_t>(n), 1);
    const bool masked = checked % 3 == 0;
    if (masked) valid[static_cast<std::size_t>(rng() % n)] = 0;
    auto enc = random_features<double>(n, 8, 300 + checked, valid);
    const screen::BoundingBox box = random_box(rng);
    if (box.width() < 1e-3 || box.height() < 1e-3) continue;
    bool counted = false;
    for (bool max_mode : {false, true}) {
      std::vector<double> want;
      try {
        want = roi_oracle(enc, grid, grid, box, 2, max_mode);
      } catch (const num::NumericError&) {
        continue;  // fully masked region; the throw path is tested separately
      }
      num::Tensor<double> got = model::roi_align(
          enc, grid, grid, box, 2,
          max_mode ? model::RoiPoolMode::Max : model::RoiPoolMode::Average);
      for (std::size_t i = 0; i < want.size(); ++i) {
        worst = std::max(worst, std::abs(got.val(i) - want[i]));
      }
      counted = true;
    }
    if (counted) {
      ++checked;
      masked_cases += masked ? 1 : 0;
    }
  }
  Outcome out;
  out.pass = worst < 1e-6 && masked_cases > 200;
  out.detail = "ROI Align vs neighbor-enumeration oracle, 1000 pairs (" +
               std::to_string(masked_cases) + " with masked patches), both modes: max |diff| " +
               fmt(worst) + " (tol 1e-6)";
  return out;
}

// --------------------------------------------------------------------------
// Criterion 4: padding invariance
// --------------------------------------------------------------------------

Outcome criterion4() {
  model::SpotlightConfig cfg;
  cfg.image_size = 64;
  cfg.patch_size = 16;
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.ffn_mult = 2;
  cfg.encoder_layers = 1;
  cfg.summarizer_layers = 1;
  cfg.decoder_layers = 1;
  cfg.queries_per_coord = 1;
  cfg.vocab_size = 16;
  cfg.max_seq_len = 32;
  cfg.max_tuples = 2;
  cfg.beam_size = 3;
  cfg.max_decode_len = 6;
  cfg.validate();
  model::ParamStore<float> ps(3);

  std::mt19937_64 rng(23);
  int failures = 0;
  for (int trial = 0; trial < 100; ++trial) {
    // Non-square content, patch-aligned so the padded area is exactly the
    // masked patch set.
    const int shorter = 16 * (1 + static_cast<int>(rng() % 3));  // 16, 32, 48
    const bool landscape = rng() % 2 == 0;
    screen::Screenshot a = random_screen(landscape ? shorter : 64,
                                         landscape ? 64 : shorter, 64, 16, 400 + trial);
    screen::Screenshot b = a;
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (int r = 0; r < 64; ++r) {
      for (int c = 0; c < 64; ++c) {
        if (r < a.content_height && c < a.content_width) continue;
        for (int ch = 0; ch < 3; ++ch) {
          b.pixels[(static_cast<std::size_t>(r) * 64 + c) * 3 + ch] = u(rng);
        }
      }
    }

    const screen::BoundingBox obj(0.1, 0.2, 0.6, 0.8);
    const auto outputs = [&](const screen::Screenshot& scr) {
      model::RunState rs;
      auto enc = model::encode_screen(ps, cfg, scr, rs);
      model::TaskTuple<float> obj_tuple{&scr, &enc, obj, {}};
      model::TaskTuple<float> full_tuple{&scr, &enc, screen::BoundingBox::full_screen(), {}};
      const std::vector<int> caption = model::generate_text(ps, cfg, {}, obj_tuple);
      const std::vector<int> summary = model::generate_text(ps, cfg, {}, full_tuple);
      const double p_yes = model::classify_yes_probability(ps, cfg, obj_tuple, {8, 9});
      return std::make_tuple(caption, summary, p_yes);
    };
    if (outputs(a) != outputs(b)) ++failures;
  }
  Outcome out;
  out.pass = failures == 0;
  out.detail = "padding invariance over 100 non-square screens: " +
               std::to_string(failures) + " output mismatches (captions, summaries, P(YES))";
  return out;
}

// --------------------------------------------------------------------------
// Shared synthetic-training pipeline (criteria 5-8, 11)
// --------------------------------------------------------------------------

struct Pipeline {
  synth::SynthConfig sc;
  model::SpotlightConfig mc;
  synth::SynthCorpus corpus;
  train::ScreenSet screens;
  train::TaskData data;
  std::vector<screen::ExampleRecord> pretrain_examples;
  double avg_objects = 0.0;
  bool ready = false;
};

Pipeline g_pipe;
train::ModelState* g_caption_model = nullptr;   // criterion 5 single-task caption
train::ModelState* g_ground_model = nullptr;    // criterion 6
train::ModelState* g_tap_model = nullptr;       // criterion 6

std::vector<screen::ExampleRecord> pack_pretrain(
    const std::vector<screen::ScreenObjectTextTuple>& tuples,
    const screen::Vocabulary& vocab, int n_examples, std::uint64_t seed) {
  corpus::TupleSampler sampler(tuples, 0.1);
  corpus::PhraseCounts counts;
  corpus::FilterConfig fc;
  fc.min_count = 1;
  std::mt19937_64 rng(seed);
  std::vector<screen::ExampleRecord> out;
  out.reserve(static_cast<std::size_t>(n_examples));
  for (int i = 0; i < n_examples; ++i) {
    out.push_back(corpus::pack_example(sampler, rng, counts, fc, vocab,
                                       "p" + std::to_string(i), /*max_tuples=*/2));
  }
  return out;
}

void build_pipeline() {
  if (g_pipe.ready) return;
  g_pipe.sc.render_width = 48;
  g_pipe.sc.render_height = 48;
  g_pipe.sc.grid_rows = 3;
  g_pipe.sc.grid_cols = 3;
  g_pipe.sc.min_objects = 2;
  g_pipe.sc.max_objects = 6;
  g_pipe.corpus = synth::generate_corpus(2000, 42, g_pipe.sc);

  g_pipe.mc.image_size = 48;
  g_pipe.mc.patch_size = 16;
  g_pipe.mc.d_model = 64;
  g_pipe.mc.n_heads = 4;
  g_pipe.mc.encoder_layers = 2;
  g_pipe.mc.summarizer_layers = 2;
  g_pipe.mc.decoder_layers = 2;
  g_pipe.mc.queries_per_coord = 2;
  g_pipe.mc.vocab_size = static_cast<int>(g_pipe.corpus.vocab.size());
  g_pipe.mc.max_seq_len = 256;
  g_pipe.mc.max_tuples = 40;
  g_pipe.mc.dropout = 0.0;
  g_pipe.mc.validate();

  g_pipe.screens = train::preprocess_synth_screens(g_pipe.corpus, g_pipe.mc);
  g_pipe.data = train::task_data_from_synth(g_pipe.corpus, g_pipe.corpus.vocab);
  g_pipe.pretrain_examples =
      pack_pretrain(g_pipe.corpus.pretrain_tuples, g_pipe.corpus.vocab, 2000, 6);

  std::size_t total_objects = 0;
  for (const auto& s : g_pipe.corpus.screens) total_objects += s.objects.size();
  g_pipe.avg_objects =
      static_cast<double>(total_objects) / static_cast<double>(g_pipe.corpus.screens.size());
  g_pipe.ready = true;
}

train::TrainConfig train_cfg(int steps, std::uint64_t seed) {
  train::TrainConfig tc;
  tc.batch_size = 16;
  tc.steps = steps;
  tc.seed = seed;
  tc.dropout = 0.0;
  tc.log_every = 200;
  tc.opt.peak_lr = 1e-3;
  tc.opt.warmup_steps = 200;
  return tc;
}

// Lazily encodes screens for evaluation (no tape, eval mode).
struct Encodings {
  std::map<std::string, model::EncodedScreen<float>> cache;

  const model::EncodedScreen<float>& get(train::ModelState& state,
                                         const train::ScreenSet& screens,
                                         const std::string& id) {
    auto it = cache.find(id);
    if (it != cache.end()) return it->second;
    model::RunState rs;
    return cache.emplace(id, model::encode_screen(state.ps, state.cfg, screens.at(id), rs))
        .first->second;
  }
};

double exact_match_accuracy(train::ModelState& state, const std::vector<train::GenItem>& items,
                            const train::ScreenSet& screens, std::size_t cap) {
  Encodings enc;
  std::size_t n = std::min(cap, items.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& item = items[i];
    const auto& e = enc.get(state, screens, item.screen_id);
    model::TaskTuple<float> query{&screens.at(item.screen_id), &e, item.box, {}};
    hits += model::generate_text(state.ps, state.cfg, {}, query) == item.tokens ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

double summary_cider(train::ModelState& state, const std::vector<train::GenItem>& items,
                     const train::ScreenSet& screens, const screen::Vocabulary& vocab,
                     std::size_t cap) {
  std::vector<train::GenItem> few(items.begin(),
                                  items.begin() + static_cast<std::ptrdiff_t>(
                                                      std::min(cap, items.size())));
  return train::eval_generation_cider(state, few, screens, vocab);
}

train::ModelState load_state(const model::SpotlightConfig& cfg) {
  train::ModelState state(cfg, 7);
  train::load_checkpoint(kCkptPath, state.ps);
  return state;
}

// Shuffles object bounding boxes across objects within every screen,
// remapping pretraining tuples and caption items consistently.
struct ShuffledCorpus {
  std::vector<screen::ScreenObjectTextTuple> pretrain_tuples;
  train::TaskSplit<train::GenItem> captions;
};

ShuffledCorpus shuffle_boxes(const Pipeline& pipe, std::uint64_t seed) {
  std::map<std::string, std::vector<std::pair<screen::BoundingBox, screen::BoundingBox>>> remap;
  std::mt19937_64 rng(seed);
  for (const auto& scr : pipe.corpus.screens) {
    std::vector<screen::BoundingBox> boxes;
    for (const auto& o : scr.objects) boxes.push_back(o.box);
    std::vector<screen::BoundingBox> shuffled = boxes;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto& pairs = remap[scr.screen_id];
    for (std::size_t i = 0; i < boxes.size(); ++i) pairs.push_back({boxes[i], shuffled[i]});
  }
  const auto lookup = [&](const std::string& id, const screen::BoundingBox& b) {
    for (const auto& [from, to] : remap.at(id)) {
      if (from == b) return to;
    }
    return b;  // titles / full screens stay put
  };

  ShuffledCorpus out;
  out.pretrain_tuples = pipe.corpus.pretrain_tuples;
  for (auto& t : out.pretrain_tuples) {
    if (!t.region.is_full_screen()) t.region = lookup(t.screen_id, t.region);
  }
  out.captions = pipe.data.captions;
  for (auto* split : {&out.captions.train, &out.captions.dev, &out.captions.test}) {
    for (auto& item : *split) item.box = lookup(item.screen_id, item.box);
  }
  return out;
}

Outcome criterion5() {
  build_pipeline();

  train::ModelState state(g_pipe.mc, 7);
  train::pretrain(state, g_pipe.pretrain_examples, g_pipe.screens, train_cfg(3000, 1));
  {
    train::CheckpointMeta meta;
    meta.config = g_pipe.mc;
    meta.extra["step"] = "3000";
    meta.extra["vocab_hash"] = std::to_string(g_pipe.corpus.vocab.hash());
    train::save_checkpoint(kCkptPath, meta, state.ps);
  }
  train::finetune_generation(state, g_pipe.data.captions.train, g_pipe.screens,
                             train_cfg(1000, 2));
  const double acc =
      exact_match_accuracy(state, g_pipe.data.captions.test, g_pipe.screens, 200);
  g_caption_model = new train::ModelState(state);

  // Identical run with bounding boxes shuffled across objects.
  const ShuffledCorpus shuffled = shuffle_boxes(g_pipe, 77);
  const std::vector<screen::ExampleRecord> shuffled_examples =
      pack_pretrain(shuffled.pretrain_tuples, g_pipe.corpus.vocab, 2000, 6);
  train::ModelState control(g_pipe.mc, 7);
  train::pretrain(control, shuffled_examples, g_pipe.screens, train_cfg(3000, 1));
  train::finetune_generation(control, shuffled.captions.train, g_pipe.screens,
                             train_cfg(1000, 2));
  const double ctrl =
      exact_match_accuracy(control, shuffled.captions.test, g_pipe.screens, 200);

  const double threshold = 1.0 / g_pipe.avg_objects + 0.10;
  Outcome out;
  out.pass = acc >= 0.95 && ctrl <= threshold;
  out.detail = "focus efficacy: caption exact match " + fmt(acc * 100) +
               "% (need >= 95%), shuffled-box control " + fmt(ctrl * 100) +
               "% (need <= " + fmt(threshold * 100) + "%, avg " + fmt(g_pipe.avg_objects) +
               " objects/screen)";
  return out;
}

Outcome criterion6() {
  build_pipeline();
  train::ModelState ground = load_state(g_pipe.mc);
  train::finetune_grounding(ground, g_pipe.data.groundings.train, g_pipe.screens,
                            train_cfg(1000, 3));
  std::vector<train::GroundItem> gtest(
      g_pipe.data.groundings.test.begin(),
      g_pipe.data.groundings.test.begin() +
          static_cast<std::ptrdiff_t>(std::min<std::size_t>(
              100, g_pipe.data.groundings.test.size())));
  const double gacc = train::eval_grounding_accuracy(ground, gtest, g_pipe.screens);
  g_ground_model = new train::ModelState(ground);

  train::ModelState tap = load_state(g_pipe.mc);
  train::finetune_classification(tap, g_pipe.data.taps.train, g_pipe.screens,
                                 train_cfg(1000, 4));
  std::vector<train::ClsItem> ttest(
      g_pipe.data.taps.test.begin(),
      g_pipe.data.taps.test.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(
                                          200, g_pipe.data.taps.test.size())));
  const auto tap_eval = train::eval_classification(tap, ttest, g_pipe.screens);
  g_tap_model = new train::ModelState(tap);

  Outcome out;
  out.pass = gacc >= 0.90 && tap_eval.f1 >= 0.9;
  out.detail = "grounding top-1 " + fmt(gacc * 100) + "% (need >= 90%), tappability F1 " +
               fmt(tap_eval.f1) + " (need >= 0.9, accuracy " + fmt(tap_eval.accuracy * 100) +
               "%)";
  return out;
}

Outcome criterion7() {
  build_pipeline();
  if (!g_caption_model || !g_ground_model || !g_tap_model) {
    return {false, "multi-task parity: single-task checkpoints missing (criteria 5/6 failed)"};
  }

  train::ModelState summary = load_state(g_pipe.mc);
  train::finetune_generation(summary, g_pipe.data.summaries.train, g_pipe.screens,
                             train_cfg(1000, 5));

  train::ModelState multi = load_state(g_pipe.mc);
  train::multitask(multi, g_pipe.data, g_pipe.screens, train_cfg(1000, 6));

  std::vector<train::GroundItem> gtest(
      g_pipe.data.groundings.test.begin(),
      g_pipe.data.groundings.test.begin() +
          static_cast<std::ptrdiff_t>(std::min<std::size_t>(
              100, g_pipe.data.groundings.test.size())));
  std::vector<train::ClsItem> ttest(
      g_pipe.data.taps.test.begin(),
      g_pipe.data.taps.test.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(
                                          200, g_pipe.data.taps.test.size())));

  // All four task scores on a 0-100 scale (CIDEr x10 for presentation).
  const double cap_single =
      exact_match_accuracy(*g_caption_model, g_pipe.data.captions.test, g_pipe.screens, 200) *
      100.0;
  const double cap_multi =
      exact_match_accuracy(multi, g_pipe.data.captions.test, g_pipe.screens, 200) * 100.0;
  const double sum_single = summary_cider(summary, g_pipe.data.summaries.test, g_pipe.screens,
                                          g_pipe.corpus.vocab, 100) *
                            10.0;
  const double sum_multi = summary_cider(multi, g_pipe.data.summaries.test, g_pipe.screens,
                                         g_pipe.corpus.vocab, 100) *
                           10.0;
  const double gnd_single =
      train::eval_grounding_accuracy(*g_ground_model, gtest, g_pipe.screens) * 100.0;
  const double gnd_multi = train::eval_grounding_accuracy(multi, gtest, g_pipe.screens) * 100.0;
  const double tap_single =
      train::eval_classification(*g_tap_model, ttest, g_pipe.screens).f1 * 100.0;
  const double tap_multi = train::eval_classification(multi, ttest, g_pipe.screens).f1 * 100.0;

  const double dc = std::abs(cap_single - cap_multi);
  const double ds = std::abs(sum_single - sum_multi);
  const double dg = std::abs(gnd_single - gnd_multi);
  const double dt = std::abs(tap_single - tap_multi);
  Outcome out;
  out.pass = dc <= 10.0 && ds <= 10.0 && dg <= 10.0 && dt <= 10.0;
  out.detail = "multi-task parity (single vs multi, 0-100 scale): caption " + fmt(cap_single) +
               "/" + fmt(cap_multi) + ", summary " + fmt(sum_single) + "/" + fmt(sum_multi) +
               ", grounding " + fmt(gnd_single) + "/" + fmt(gnd_multi) + ", tappability " +
               fmt(tap_single) + "/" + fmt(tap_multi) + " (all gaps <= 10)";
  return out;
}

Outcome criterion8() {
  build_pipeline();
  train::ModelState state = load_state(g_pipe.mc);  // pretrained only
  std::vector<train::GenItem> items(
      g_pipe.data.captions.test.begin(),
      g_pipe.data.captions.test.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(
                                              4, g_pipe.data.captions.test.size())));
  std::ostringstream scores;
  bool deterministic = true;
  for (int shots : {0, 4, 8, 16, 32}) {
    const double s1 = train::eval_generation_cider(state, items, g_pipe.screens,
                                                   g_pipe.corpus.vocab, shots,
                                                   &g_pipe.data.captions.train, 11);
    const double s2 = train::eval_generation_cider(state, items, g_pipe.screens,
                                                   g_pipe.corpus.vocab, shots,
                                                   &g_pipe.data.captions.train, 11);
    if (s1 != s2 || !std::isfinite(s1)) deterministic = false;
    scores << (shots ? " " : "") << shots << ":" << fmt(s1);
  }
  Outcome out;
  out.pass = deterministic;
  out.detail = std::string("few-shot mechanics: shots {0,4,8,16,32} ran, seeded results ") +
               (deterministic ? "bitwise reproducible" : "NOT reproducible") +
               " (32 shots > pretraining cap of 2 tuples); CIDEr by shots: " + scores.str();
  return out;
}

// --------------------------------------------------------------------------
// Criterion 9: metric correctness
// --------------------------------------------------------------------------

double cider_oracle(const std::vector<std::string>& cands,
                    const std::vector<std::string>& refs) {
  const auto words = [](const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
  };
  const auto ngrams = [&](const std::string& s, int n) {
    std::map<std::string, double> counts;
    const auto ws = words(s);
    for (std::size_t i = 0; i + n <= ws.size(); ++i) {
      std::string key;
      for (int j = 0; j < n; ++j) key += ws[i + j] + "\x1f";
      counts[key] += 1.0;
    }
    return counts;
  };
  const double n_docs = static_cast<double>(refs.size());
  double total = 0.0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    double pair_score = 0.0;
    for (int n = 1; n <= 4; ++n) {
      std::map<std::string, double> df;
      for (const auto& r : refs) {
        for (const auto& [k, v] : ngrams(r, n)) df[k] += 1.0;
      }
      const auto weigh = [&](std::map<std::string, double> tf) {
        for (auto& [k, v] : tf) {
          const double d = df.count(k) ? df[k] : 0.0;
          v *= std::log(n_docs) - std::log(std::max(d, 1.0));
        }
        return tf;
      };
      const auto cv = weigh(ngrams(cands[i], n));
      const auto rv = weigh(ngrams(refs[i], n));
      double dot = 0.0, nc = 0.0, nr = 0.0;
      for (const auto& [k, v] : cv) {
        nc += v * v;
        auto it = rv.find(k);
        if (it != rv.end()) dot += v * it->second;
      }
      for (const auto& [k, v] : rv) nr += v * v;
      if (nc > 0.0 && nr > 0.0) pair_score += dot / (std::sqrt(nc) * std::sqrt(nr));
    }
    total += 10.0 * pair_score / 4.0;
  }
  return total / static_cast<double>(cands.size());
}

Outcome criterion9() {
  std::mt19937_64 rng(29);
  const std::vector<std::string> lexicon = {"red",  "blue", "button", "icon",
                                            "left", "top",  "click",  "screen"};
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> cands, refs;
    std::uniform_int_distribution<int> n_pairs(2, 6), len(1, 7),
        word(0, static_cast<int>(lexicon.size()) - 1);
    const int pairs = n_pairs(rng);
    for (int i = 0; i < pairs; ++i) {
      const auto sentence = [&]() {
        std::string s;
        const int l = len(rng);
        for (int j = 0; j < l; ++j) {
          if (j) s += ' ';
          s += lexicon[static_cast<std::size_t>(word(rng))];
        }
        return s;
      };
      cands.push_back(sentence());
      refs.push_back(sentence());
    }
    worst = std::max(worst, std::abs(train::cider(cands, refs) - cider_oracle(cands, refs)));
  }

  const std::vector<std::string> unique_refs = {"red button top left corner region",
                                                "blue icon bottom right corner zone"};
  const double identical = train::cider(unique_refs, unique_refs);

  const std::vector<int> pred = {1, 1, 0, 0, 1};
  const std::vector<int> gold = {1, 0, 0, 1, 1};
  const bool closed = train::accuracy(pred, gold) == 0.6 &&
                      std::abs(train::f1_score(pred, gold) - 2.0 / 3.0) < 1e-15 &&
                      train::f1_score({0, 0}, {0, 0}) == 0.0;

  Outcome out;
  out.pass = worst < 1e-6 && identical == 10.0 && closed;
  out.detail = "metrics: CIDEr vs brute-force oracle max |diff| " + fmt(worst) +
               " (tol 1e-6), identical-sentence score " + fmt(identical) +
               " (must be exactly 10), accuracy/F1 closed forms " +
               (closed ? "exact" : "WRONG");
  return out;
}

// --------------------------------------------------------------------------
// Criterion 10: pipeline golden files
// --------------------------------------------------------------------------

std::string tuples_to_tsv(const std::vector<screen::ScreenObjectTextTuple>& tuples) {
  std::ostringstream os;
  for (const auto& t : tuples) {
    char box[64];
    std::snprintf(box, sizeof(box), "%.4f\t%.4f\t%.4f\t%.4f", t.region.left, t.region.top,
                  t.region.right, t.region.bottom);
    os << screen::to_string(t.source) << "\t" << box << "\t" << t.text << "\n";
  }
  return os.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw std::runtime_error("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<screen::ScreenObjectTextTuple> mc_tuples(const std::string& prefix, int n,
                                                     bool with_title) {
  std::vector<screen::ScreenObjectTextTuple> out;
  for (int i = 0; i < n; ++i) {
    out.emplace_back(prefix + std::to_string(i), screen::BoundingBox(0.1, 0.1, 0.5, 0.5),
                     prefix + " object " + std::to_string(i), screen::SourceTag::Text);
  }
  if (with_title) {
    out.emplace_back(prefix + "0", screen::BoundingBox::full_screen(),
                     prefix + " page title", screen::SourceTag::Title);
  }
  return out;
}

Outcome criterion10() {
  std::vector<std::string> problems;

  corpus::BuildConfig bc;
  bc.filter.min_count = 1;
  const corpus::BuildOutput mobile = corpus::extract_corpus(kFixtures + "/mobile", "", bc);
  if (tuples_to_tsv(mobile.mobile_tuples) != read_file(kFixtures + "/golden_mobile_tuples.tsv")) {
    problems.push_back("mobile golden tuples differ");
  }
  const corpus::BuildOutput web = corpus::extract_corpus("", kFixtures + "/web", bc);
  if (tuples_to_tsv(web.web_tuples) != read_file(kFixtures + "/golden_web_tuples.tsv")) {
    problems.push_back("web golden tuples differ");
  }
  std::vector<screen::ScreenObjectTextTuple> all = mobile.mobile_tuples;
  all.insert(all.end(), web.web_tuples.begin(), web.web_tuples.end());
  if (corpus::stats_to_tsv(corpus::corpus_stats(all)) !=
      read_file(kFixtures + "/golden_stats.tsv")) {
    problems.push_back("golden stats differ");
  }

  // 9:1 mixing and 1..5 packing, Monte Carlo.
  {
    corpus::TupleSampler webs(mc_tuples("web", 4, true), 0.01);
    corpus::TupleSampler mob(mc_tuples("mob", 4, false), 0.0);
    screen::Vocabulary vocab = screen::build_vocabulary({"web mob object title page"}, 1);
    corpus::MixedStream stream(std::move(webs), std::move(mob), 0.9, corpus::PhraseCounts{},
                               corpus::FilterConfig::defaults(), vocab, 11);
    int web_batches = 0;
    const int n = 2000;
    for (int i = 0; i < n; ++i) {
      stream.next_batch(4);
      web_batches += stream.last_batch_was_web() ? 1 : 0;
    }
    const double frac = static_cast<double>(web_batches) / n;
    if (frac < 0.87 || frac > 0.93) {
      problems.push_back("web batch fraction " + fmt(frac) + " outside [0.87, 0.93]");
    }
  }
  {
    corpus::TupleSampler sampler(mc_tuples("m", 5, false), 0.0);
    corpus::PhraseCounts counts;
    const corpus::FilterConfig fc = corpus::FilterConfig::defaults();
    screen::Vocabulary vocab = screen::build_vocabulary({"m object 0 1 2 3 4"}, 1);
    std::mt19937_64 rng(7);
    std::vector<int> hist(6, 0);
    const int n = 5000;
    for (int i = 0; i < n; ++i) {
      ++hist[static_cast<std::size_t>(
          corpus::pack_example(sampler, rng, counts, fc, vocab, "e", 5).real_count())];
    }
    for (int k = 1; k <= 5; ++k) {
      if (std::abs(hist[static_cast<std::size_t>(k)] - n / 5) > 150) {
        problems.push_back("packing count for k=" + std::to_string(k) + " off: " +
                           std::to_string(hist[static_cast<std::size_t>(k)]));
      }
    }
  }
  {
    const double t = 1e-5;
    for (double f : {1e-5, 1e-4, 1e-3, 0.5, 1.0}) {
      if (std::abs(corpus::subsample_keep_prob(f, t, false) - std::sqrt(t / f)) >= 1e-12) {
        problems.push_back("subsample_keep_prob(" + fmt(f) + ") off closed form");
      }
    }
  }

  Outcome out;
  out.pass = problems.empty();
  if (out.pass) {
    out.detail =
        "pipeline golden files: tuple extraction, stats, 9:1 mixing, 1..5 packing and "
        "subsample closed form all match";
  } else {
    out.detail = "pipeline golden files: ";
    for (std::size_t i = 0; i < problems.size(); ++i) {
      out.detail += (i ? "; " : "") + problems[i];
    }
  }
  return out;
}

// --------------------------------------------------------------------------
// Criterion 11: ablation harness
// --------------------------------------------------------------------------

Outcome criterion11() {
  build_pipeline();
  std::ostringstream rows;
  bool ok = true;
  const std::vector<model::FocusVariant> variants = {
      model::FocusVariant::RegionSummarizer, model::FocusVariant::StaticBboxQueries,
      model::FocusVariant::NoBboxInKV,       model::FocusVariant::JointBboxEmbedding,
      model::FocusVariant::RoiAlign,         model::FocusVariant::RoiAlignAsQuery};
  std::vector<train::GenItem> eval_items(
      g_pipe.data.captions.dev.begin(),
      g_pipe.data.captions.dev.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(
                                             20, g_pipe.data.captions.dev.size())));
  const auto row = [&](const std::string& name, train::ModelState& state,
                       const train::TrainConfig& tc) {
    train::finetune_generation(state, g_pipe.data.captions.train, g_pipe.screens, tc);
    const double score =
        train::eval_generation_cider(state, eval_items, g_pipe.screens, g_pipe.corpus.vocab);
    if (!std::isfinite(score)) ok = false;
    rows << name << "=" << fmt(score) << " ";
  };

  for (model::FocusVariant v : variants) {  // from-scratch rows, all variants
    model::SpotlightConfig cfg = g_pipe.mc;
    cfg.d_model = 32;
    cfg.encoder_layers = 1;
    cfg.summarizer_layers = 1;
    cfg.decoder_layers = 1;
    cfg.variant = v;
    cfg.validate();
    train::ModelState state(cfg, 9);
    row(model::to_string(v) + "(scratch)", state, train_cfg(60, 8));
  }
  {  // freeze-encoder row on the pretrained checkpoint
    train::ModelState state = load_state(g_pipe.mc);
    train::TrainConfig tc = train_cfg(60, 8);
    tc.freeze_encoder = true;
    row("region_summarizer(freeze-enc)", state, tc);
  }

  Outcome out;
  out.pass = ok;
  out.detail = "ablation harness report rows (caption CIDEr, short runs): " + rows.str();
  return out;
}

}  // namespace

int main() {
  run(1, criterion1);
  run(2, criterion2);
  run(3, criterion3);
  run(4, criterion4);
  run(5, criterion5);
  run(6, criterion6);
  run(7, criterion7);
  run(8, criterion8);
  run(9, criterion9);
  run(10, criterion10);
  run(11, criterion11);
  std::remove(kCkptPath.c_str());
  std::cout << (g_all_pass ? "ALL CRITERIA PASSED" : "SOME CRITERIA FAILED") << std::endl;
  return g_all_pass ? 0 : 1;
}
