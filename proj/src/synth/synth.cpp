#include "spotlight/synth/synth.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "spotlight/corpus/pipeline.hpp"
#include "spotlight/io/png_io.hpp"

namespace spotlight::synth {

using json = nlohmann::json;
using screen::BoundingBox;
using screen::Image;

namespace {

constexpr float kBackground = 0.95f;

const std::map<std::string, std::array<float, 3>>& palette() {
  static const std::map<std::string, std::array<float, 3>> kPalette = {
      {"red", {0.85f, 0.10f, 0.10f}},    {"green", {0.10f, 0.70f, 0.15f}},
      {"blue", {0.10f, 0.20f, 0.85f}},   {"yellow", {0.90f, 0.85f, 0.10f}},
      {"magenta", {0.85f, 0.10f, 0.80f}}, {"cyan", {0.10f, 0.80f, 0.85f}}};
  return kPalette;
}

void fill_rect(Image& img, int x0, int y0, int x1, int y1, const std::array<float, 3>& c) {
  for (int r = y0; r < y1; ++r) {
    for (int x = x0; x < x1; ++x) {
      for (int ch = 0; ch < 3; ++ch) img.at(r, x, ch) = c[ch];
    }
  }
}

void fill_circle(Image& img, double cx, double cy, double radius,
                 const std::array<float, 3>& c) {
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - radius)));
  const int x1 = std::min(img.width, static_cast<int>(std::ceil(cx + radius)) + 1);
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - radius)));
  const int y1 = std::min(img.height, static_cast<int>(std::ceil(cy + radius)) + 1);
  for (int r = y0; r < y1; ++r) {
    for (int x = x0; x < x1; ++x) {
      const double dx = x + 0.5 - cx;
      const double dy = r + 0.5 - cy;
      if (dx * dx + dy * dy <= radius * radius) {
        for (int ch = 0; ch < 3; ++ch) img.at(r, x, ch) = c[ch];
      }
    }
  }
}

std::string vertical_word(int row, int rows) {
  if (row * 3 < rows) return "top";
  if (row * 3 < 2 * rows) return "middle";
  return "bottom";
}

std::string horizontal_word(int col, int cols) {
  return col * 2 < cols ? "left" : "right";
}

// Shapes / colors are dealt from cycling shuffled decks so every screen is
// close to balanced (tappability labels and color frequencies).
template <typename T>
class Deck {
 public:
  Deck(std::vector<T> items, std::mt19937_64& rng) : items_(std::move(items)), rng_(rng) {
    std::shuffle(items_.begin(), items_.end(), rng_);
  }
  const T& deal() {
    if (next_ == items_.size()) {
      std::shuffle(items_.begin(), items_.end(), rng_);
      next_ = 0;
    }
    return items_[next_++];
  }

 private:
  std::vector<T> items_;
  std::mt19937_64& rng_;
  std::size_t next_ = 0;
};

}  // namespace

std::string to_string(Shape s) {
  switch (s) {
    case Shape::Button: return "button";
    case Shape::Checkbox: return "checkbox";
    case Shape::Icon: return "icon";
    case Shape::Textfield: return "textfield";
  }
  return "unknown";
}

SynthScreen generate_screen(std::uint64_t seed, const SynthConfig& cfg) {
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ull + 0x7f4a7c15ull);
  const int cells = cfg.grid_rows * cfg.grid_cols;

  SynthScreen scr;
  scr.image.height = cfg.render_height;
  scr.image.width = cfg.render_width;
  scr.image.pixels.assign(static_cast<std::size_t>(cfg.render_height) * cfg.render_width * 3,
                          kBackground);

  std::vector<Shape> shapes = {Shape::Button, Shape::Checkbox, Shape::Icon, Shape::Textfield};
  Deck<Shape> shape_deck(shapes, rng);
  std::vector<std::string> color_names;
  for (const auto& [name, rgb] : palette()) {
    if (std::find(cfg.colors.begin(), cfg.colors.end(), name) != cfg.colors.end()) {
      color_names.push_back(name);
    }
  }
  Deck<std::string> color_deck(color_names, rng);

  const int n = std::uniform_int_distribution<int>(cfg.min_objects, cfg.max_objects)(rng);

  // Retry object placement until every caption on the screen is unique;
  // the grounding task needs command -> object to be a bijection.
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::vector<int> cell_ids(cells);
    for (int i = 0; i < cells; ++i) cell_ids[i] = i;
    std::shuffle(cell_ids.begin(), cell_ids.end(), rng);

    std::vector<SynthObject> objects;
    std::set<std::string> captions;
    bool unique = true;
    for (int i = 0; i < n; ++i) {
      SynthObject obj;
      obj.grid_row = cell_ids[i] / cfg.grid_cols;
      obj.grid_col = cell_ids[i] % cfg.grid_cols;
      obj.shape = shape_deck.deal();
      obj.color = color_deck.deal();
      obj.tappable = obj.shape == Shape::Button || obj.shape == Shape::Checkbox;
      obj.caption = obj.color + " " + to_string(obj.shape) + " " +
                    vertical_word(obj.grid_row, cfg.grid_rows) + " " +
                    horizontal_word(obj.grid_col, cfg.grid_cols);
      obj.command = "click on " + obj.caption;
      if (!captions.insert(obj.caption).second) {
        unique = false;
        break;
      }
      objects.push_back(std::move(obj));
    }
    if (!unique) continue;
    scr.objects = std::move(objects);
    break;
  }
  if (scr.objects.empty()) {
    throw screen::DomainError("generate_screen: could not place unique objects");
  }

  // Rasterize and record tight pixel bounds per object.
  const double cell_w = static_cast<double>(cfg.render_width) / cfg.grid_cols;
  const double cell_h = static_cast<double>(cfg.render_height) / cfg.grid_rows;
  for (auto& obj : scr.objects) {
    const auto& rgb = palette().at(obj.color);
    const int ix0 = static_cast<int>(std::lround(obj.grid_col * cell_w + 0.14 * cell_w));
    const int iy0 = static_cast<int>(std::lround(obj.grid_row * cell_h + 0.14 * cell_h));
    const int ix1 = static_cast<int>(std::lround((obj.grid_col + 1) * cell_w - 0.14 * cell_w));
    const int iy1 = static_cast<int>(std::lround((obj.grid_row + 1) * cell_h - 0.14 * cell_h));
    int bx0 = ix0, by0 = iy0, bx1 = ix1, by1 = iy1;
    switch (obj.shape) {
      case Shape::Button:
        fill_rect(scr.image, ix0, iy0, ix1, iy1, rgb);
        break;
      case Shape::Textfield: {
        const int h = std::max(2, (iy1 - iy0) / 3);
        const int mid = (iy0 + iy1) / 2;
        by0 = mid - h / 2;
        by1 = by0 + h;
        fill_rect(scr.image, ix0, by0, ix1, by1, rgb);
        break;
      }
      case Shape::Icon: {
        const double cx = (ix0 + ix1) / 2.0;
        const double cy = (iy0 + iy1) / 2.0;
        const double radius = std::min(ix1 - ix0, iy1 - iy0) / 2.0;
        fill_circle(scr.image, cx, cy, radius, rgb);
        bx0 = static_cast<int>(std::floor(cx - radius));
        bx1 = static_cast<int>(std::ceil(cx + radius));
        by0 = static_cast<int>(std::floor(cy - radius));
        by1 = static_cast<int>(std::ceil(cy + radius));
        break;
      }
      case Shape::Checkbox: {
        // Plus sign; the center pixel always carries the fill color.
        const int tw = std::max(2, (ix1 - ix0) * 3 / 10);
        const int th = std::max(2, (iy1 - iy0) * 3 / 10);
        const int cx = (ix0 + ix1) / 2;
        const int cy = (iy0 + iy1) / 2;
        fill_rect(scr.image, ix0, cy - th / 2, ix1, cy - th / 2 + th, rgb);
        fill_rect(scr.image, cx - tw / 2, iy0, cx - tw / 2 + tw, iy1, rgb);
        break;
      }
    }
    obj.box = BoundingBox(static_cast<double>(bx0) / cfg.render_width,
                          static_cast<double>(by0) / cfg.render_height,
                          static_cast<double>(bx1) / cfg.render_width,
                          static_cast<double>(by1) / cfg.render_height);
  }

  scr.summary = "screen with " + std::to_string(scr.objects.size()) +
                " objects including a " + scr.objects.front().color + " " +
                to_string(scr.objects.front().shape);
  return scr;
}

std::string detect_color_at_center(const Image& img, const BoundingBox& box,
                                   const SynthConfig& cfg) {
  (void)cfg;
  const int x = std::min(img.width - 1,
                         static_cast<int>((box.left + box.right) / 2.0 * img.width));
  const int y = std::min(img.height - 1,
                         static_cast<int>((box.top + box.bottom) / 2.0 * img.height));
  double best = 1e9;
  std::string best_name;
  for (const auto& [name, rgb] : palette()) {
    double d = 0.0;
    for (int ch = 0; ch < 3; ++ch) {
      const double diff = img.at(y, x, ch) - rgb[ch];
      d += diff * diff;
    }
    if (d < best) {
      best = d;
      best_name = name;
    }
  }
  return best_name;
}

SynthCorpus generate_corpus(int n_screens, std::uint64_t seed, const SynthConfig& cfg) {
  if (n_screens < 10) {
    throw screen::DomainError("generate_corpus: need at least 10 screens");
  }
  SynthCorpus corpus;
  for (int i = 0; i < n_screens; ++i) {
    SynthScreen scr = generate_screen(seed + static_cast<std::uint64_t>(i) * 1000003ull, cfg);
    scr.screen_id = "s" + std::to_string(i);
    corpus.screens.push_back(std::move(scr));
  }

  const int n_train = n_screens * 8 / 10;
  const int n_dev = n_screens / 10;
  for (int i = 0; i < n_screens; ++i) {
    const std::string& id = corpus.screens[i].screen_id;
    if (i < n_train) corpus.train_ids.push_back(id);
    else if (i < n_train + n_dev) corpus.dev_ids.push_back(id);
    else corpus.test_ids.push_back(id);
  }

  std::vector<std::string> vocab_corpus = {"click on", "is this tappable ?"};
  const auto add_screen = [&](const SynthScreen& scr, int split) {
    auto& cap = split == 0 ? corpus.captions.train
                           : (split == 1 ? corpus.captions.dev : corpus.captions.test);
    auto& sum = split == 0 ? corpus.summaries.train
                           : (split == 1 ? corpus.summaries.dev : corpus.summaries.test);
    auto& grd = split == 0 ? corpus.groundings.train
                           : (split == 1 ? corpus.groundings.dev : corpus.groundings.test);
    auto& tap = split == 0 ? corpus.taps.train
                           : (split == 1 ? corpus.taps.dev : corpus.taps.test);
    for (std::size_t oi = 0; oi < scr.objects.size(); ++oi) {
      const auto& obj = scr.objects[oi];
      cap.push_back({scr.screen_id, obj.box, obj.caption});
      GroundingExample g;
      g.screen_id = scr.screen_id;
      g.command = obj.command;
      for (const auto& other : scr.objects) g.candidates.push_back(other.box);
      g.gold_index = static_cast<int>(oi);
      grd.push_back(std::move(g));
      tap.push_back({scr.screen_id, obj.box, obj.tappable});
      vocab_corpus.push_back(obj.caption);
      vocab_corpus.push_back(obj.command);
    }
    sum.push_back({scr.screen_id, scr.summary});
    vocab_corpus.push_back(scr.summary);
    if (split == 0) {
      for (const auto& obj : scr.objects) {
        corpus.pretrain_tuples.emplace_back(scr.screen_id, obj.box, obj.caption,
                                            screen::SourceTag::Text);
      }
      corpus.pretrain_tuples.emplace_back(scr.screen_id, BoundingBox::full_screen(),
                                          scr.summary, screen::SourceTag::Title);
    }
  };
  for (int i = 0; i < n_screens; ++i) {
    add_screen(corpus.screens[i], i < n_train ? 0 : (i < n_train + n_dev ? 1 : 2));
  }

  corpus.vocab = screen::build_vocabulary(vocab_corpus, 1);
  return corpus;
}

void write_corpus(const SynthCorpus& corpus, const std::string& out_dir,
                  std::uint64_t pack_seed, int n_examples, int max_tuples) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "images");
  for (const auto& scr : corpus.screens) {
    io::write_png((fs::path(out_dir) / "images" / (scr.screen_id + ".png")).string(),
                  scr.image);
  }
  corpus.vocab.save((fs::path(out_dir) / "vocab.txt").string());

  corpus::TupleSampler sampler(corpus.pretrain_tuples, 0.1);
  corpus::PhraseCounts no_counts;  // no subsampling for the synthetic corpus
  corpus::FilterConfig fcfg = corpus::FilterConfig::defaults();
  std::mt19937_64 rng(pack_seed);
  std::vector<screen::ExampleRecord> examples;
  for (int i = 0; i < n_examples; ++i) {
    examples.push_back(corpus::pack_example(sampler, rng, no_counts, fcfg, corpus.vocab,
                                            "ex" + std::to_string(i), max_tuples));
  }
  corpus::write_examples((fs::path(out_dir) / "examples.jsonl").string(), examples);

  const auto box_json = [](const BoundingBox& b) {
    return json::array({b.left, b.top, b.right, b.bottom});
  };
  const auto write_split = [&](const std::string& name, const auto& split, auto to_json) {
    const std::array<const char*, 3> suffix = {"train", "dev", "test"};
    const auto* parts0 = &split.train;
    const auto* parts1 = &split.dev;
    const auto* parts2 = &split.test;
    std::array<decltype(parts0), 3> parts = {parts0, parts1, parts2};
    for (int s = 0; s < 3; ++s) {
      std::ofstream out((fs::path(out_dir) / (name + "_" + suffix[s] + ".jsonl")).string());
      for (const auto& ex : *parts[s]) out << to_json(ex).dump() << "\n";
    }
  };
  write_split("caption", corpus.captions, [&](const CaptionExample& e) {
    return json{{"screen", e.screen_id}, {"box", box_json(e.box)}, {"text", e.text}};
  });
  write_split("summary", corpus.summaries, [&](const SummaryExample& e) {
    return json{{"screen", e.screen_id}, {"text", e.text}};
  });
  write_split("ground", corpus.groundings, [&](const GroundingExample& e) {
    json cands = json::array();
    for (const auto& c : e.candidates) cands.push_back(box_json(c));
    return json{{"screen", e.screen_id},
                {"command", e.command},
                {"candidates", cands},
                {"gold", e.gold_index}};
  });
  write_split("tap", corpus.taps, [&](const TapExample& e) {
    return json{{"screen", e.screen_id}, {"box", box_json(e.box)}, {"tappable", e.tappable}};
  });
}

}  // namespace spotlight::synth
