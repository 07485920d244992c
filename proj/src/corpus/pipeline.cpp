#include "spotlight/corpus/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "spotlight/io/png_io.hpp"
#include "spotlight/screen/preprocess.hpp"

namespace spotlight::corpus {

using json = nlohmann::json;
using screen::BoundingBox;
using screen::ExampleRecord;
using screen::ScreenObjectTextTuple;
using screen::SourceTag;

namespace {

BoundingBox parse_box(const json& j, const char* where) {
  if (!j.is_array() || j.size() != 4) {
    throw ParseError(std::string(where) + ": bounds must be a 4-element array");
  }
  try {
    return BoundingBox(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
                       j[3].get<double>());
  } catch (const screen::DomainError& e) {
    throw ParseError(std::string(where) + ": " + e.what());
  }
}

screen::ViewHierarchyNode parse_node(const json& j, int depth) {
  if (depth > 256) throw ParseError("mobile-vh-v1: node nesting too deep");
  screen::ViewHierarchyNode node;
  node.bounds = parse_box(j.at("bounds"), "mobile-vh-v1");
  if (j.contains("text")) node.text = j.at("text").get<std::string>();
  if (j.contains("content_description")) {
    node.content_description = j.at("content_description").get<std::string>();
  }
  if (j.contains("resource_id")) node.resource_id = j.at("resource_id").get<std::string>();
  node.visible = j.value("visible", true);
  if (j.contains("children")) {
    for (const auto& c : j.at("children")) node.children.push_back(parse_node(c, depth + 1));
  }
  return node;
}

}  // namespace

MobileScreenRecord parse_mobile_record(const std::string& json_line) {
  json j;
  try {
    j = json::parse(json_line);
  } catch (const json::exception& e) {
    throw ParseError(std::string("mobile-vh-v1: bad JSON: ") + e.what());
  }
  if (j.value("schema", "") != "mobile-vh-v1") {
    throw ParseError("mobile-vh-v1: missing or wrong schema tag");
  }
  MobileScreenRecord rec;
  rec.screen_id = j.at("screen_id").get<std::string>();
  rec.image_path = j.at("image").get<std::string>();
  rec.root = parse_node(j.at("root"), 0);
  if (j.contains("ocr")) {
    for (const auto& o : j.at("ocr")) {
      rec.ocr.emplace_back(parse_box(o.at("bounds"), "mobile-vh-v1 ocr"),
                           o.at("text").get<std::string>(),
                           o.at("confidence").get<double>(), o.value("line_count", 1));
    }
  }
  return rec;
}

WebPageRecord parse_web_record(const std::string& json_line) {
  json j;
  try {
    j = json::parse(json_line);
  } catch (const json::exception& e) {
    throw ParseError(std::string("web-obj-v1: bad JSON: ") + e.what());
  }
  if (j.value("schema", "") != "web-obj-v1") {
    throw ParseError("web-obj-v1: missing or wrong schema tag");
  }
  WebPageRecord rec;
  rec.screen_id = j.at("screen_id").get<std::string>();
  rec.image_path = j.value("image", "");
  rec.title = j.value("title", "");
  for (const auto& o : j.at("objects")) {
    screen::HtmlObjectRecord obj;
    obj.bounds = parse_box(o.at("bounds"), "web-obj-v1");
    obj.visible = o.value("visible", true);
    for (const auto& [name, value] : o.at("attributes").items()) {
      if (!is_known_html_attribute(name)) {
        throw ParseError("web-obj-v1: unknown HTML attribute '" + name + "'");
      }
      obj.attributes[name] = value.get<std::string>();
    }
    rec.objects.push_back(std::move(obj));
  }
  return rec;
}

// --- sampling ----------------------------------------------------------------

TupleSampler::TupleSampler(std::vector<ScreenObjectTextTuple> tuples, double title_weight)
    : title_weight_(title_weight) {
  // Group per object: same screen and same box.
  std::map<std::pair<std::string, std::array<double, 4>>, std::size_t> index;
  for (auto& t : tuples) {
    ++total_tuples_;
    if (t.source == SourceTag::Title) {
      titles_.push_back(std::move(t));
      continue;
    }
    const auto key = std::make_pair(
        t.screen_id, std::array<double, 4>{t.region.left, t.region.top, t.region.right,
                                           t.region.bottom});
    auto it = index.find(key);
    if (it == index.end()) {
      index.emplace(key, objects_.size());
      objects_.push_back({std::move(t)});
    } else {
      objects_[it->second].push_back(std::move(t));
    }
  }
}

const ScreenObjectTextTuple& TupleSampler::draw(std::mt19937_64& rng,
                                                const PhraseCounts& counts,
                                                const FilterConfig& cfg) const {
  if (empty()) throw ParseError("TupleSampler: no tuples to draw from");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // Rejection loop implements frequency subsampling.
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const ScreenObjectTextTuple* pick = nullptr;
    if (!titles_.empty() && (objects_.empty() || unit(rng) < title_weight_)) {
      pick = &titles_[std::uniform_int_distribution<std::size_t>(0, titles_.size() - 1)(rng)];
    } else {
      const auto& obj =
          objects_[std::uniform_int_distribution<std::size_t>(0, objects_.size() - 1)(rng)];
      pick = &obj[std::uniform_int_distribution<std::size_t>(0, obj.size() - 1)(rng)];
    }
    const double f = counts.frequency(pick->text);
    const double keep =
        f > 0.0 ? subsample_keep_prob(f, cfg.subsample_t, cfg.smoothed_subsample) : 1.0;
    if (unit(rng) < keep) return *pick;
  }
  throw ParseError("TupleSampler: subsampling rejected every draw");
}

ExampleRecord pack_example(const TupleSampler& sampler, std::mt19937_64& rng,
                           const PhraseCounts& counts, const FilterConfig& cfg,
                           const screen::Vocabulary& vocab, const std::string& example_id,
                           int max_tuples) {
  if (sampler.empty()) throw ParseError("pack_example: empty tuple source");
  ExampleRecord ex;
  ex.example_id = example_id;
  const int k = std::uniform_int_distribution<int>(1, max_tuples)(rng);
  for (int i = 0; i < max_tuples; ++i) {
    ExampleRecord::Slot slot;
    if (i < k) {
      const auto& t = sampler.draw(rng, counts, cfg);
      slot.screen_id = t.screen_id;
      slot.region = t.region;
      slot.token_ids = screen::tokenize(t.text, vocab);
      slot.source = t.source;
      slot.pad = false;
    } else {
      slot.pad = true;
    }
    ex.slots.push_back(std::move(slot));
  }
  return ex;
}

MixedStream::MixedStream(TupleSampler web, TupleSampler mobile, double web_fraction,
                         PhraseCounts counts, FilterConfig cfg, screen::Vocabulary vocab,
                         std::uint64_t seed, int max_tuples)
    : web_(std::move(web)),
      mobile_(std::move(mobile)),
      web_fraction_(web_fraction),
      counts_(std::move(counts)),
      cfg_(std::move(cfg)),
      vocab_(std::move(vocab)),
      rng_(seed),
      max_tuples_(max_tuples) {
  if (web_.empty() && mobile_.empty()) {
    throw ParseError("MixedStream: both sources are empty");
  }
}

std::vector<ExampleRecord> MixedStream::next_batch(int batch_size) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  bool use_web = unit(rng_) < web_fraction_;
  if (use_web && web_.empty()) use_web = false;
  if (!use_web && mobile_.empty()) use_web = true;
  last_web_ = use_web;
  const TupleSampler& src = use_web ? web_ : mobile_;
  std::vector<ExampleRecord> batch;
  batch.reserve(batch_size);
  for (int i = 0; i < batch_size; ++i) {
    batch.push_back(pack_example(src, rng_, counts_, cfg_, vocab_,
                                 "b" + std::to_string(counter_) + "_" + std::to_string(i),
                                 max_tuples_));
  }
  ++counter_;
  return batch;
}

// --- stats --------------------------------------------------------------------

std::vector<StatsRow> corpus_stats(const std::vector<ScreenObjectTextTuple>& tuples) {
  static const SourceTag kOrder[] = {
      SourceTag::Text,  SourceTag::AltText,           SourceTag::MiscText,
      SourceTag::Title, SourceTag::ContentDescription, SourceTag::ResourceId,
      SourceTag::Ocr};
  std::map<SourceTag, std::pair<long, long>> agg;  // count, total words
  for (const auto& t : tuples) {
    auto& [count, words] = agg[t.source];
    ++count;
    words += static_cast<long>(screen::split_words(t.text).size());
  }
  std::vector<StatsRow> rows;
  for (SourceTag tag : kOrder) {
    StatsRow row;
    row.source = screen::to_string(tag);
    if (auto it = agg.find(tag); it != agg.end()) {
      row.tuple_count = it->second.first;
      row.avg_words = it->second.first == 0
                          ? 0.0
                          : static_cast<double>(it->second.second) / it->second.first;
    }
    rows.push_back(row);
  }
  return rows;
}

std::string stats_to_tsv(const std::vector<StatsRow>& rows) {
  std::ostringstream os;
  os << "source\ttuples\tavg_word_count\n";
  for (const auto& r : rows) {
    os << r.source << "\t" << r.tuple_count << "\t";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", r.avg_words);
    os << buf << "\n";
  }
  return os.str();
}

// --- spotlight-ex-v1 serialization ---------------------------------------------

namespace {

double round4(double v) { return std::round(v * 10000.0) / 10000.0; }

}  // namespace

std::string example_to_json(const ExampleRecord& ex) {
  json j;
  j["schema"] = "spotlight-ex-v1";
  j["id"] = ex.example_id;
  json slots = json::array();
  for (const auto& s : ex.slots) {
    json js;
    js["pad"] = s.pad;
    if (!s.pad) {
      js["screen"] = s.screen_id;
      js["box"] = {round4(s.region.left), round4(s.region.top), round4(s.region.right),
                   round4(s.region.bottom)};
      js["tokens"] = s.token_ids;
      js["source"] = screen::to_string(s.source);
    }
    slots.push_back(std::move(js));
  }
  j["tuples"] = std::move(slots);
  return j.dump();
}

ExampleRecord example_from_json(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(std::string("spotlight-ex-v1: bad JSON: ") + e.what());
  }
  if (j.value("schema", "") != "spotlight-ex-v1") {
    throw ParseError("spotlight-ex-v1: missing or wrong schema tag");
  }
  ExampleRecord ex;
  ex.example_id = j.at("id").get<std::string>();
  for (const auto& js : j.at("tuples")) {
    ExampleRecord::Slot slot;
    slot.pad = js.at("pad").get<bool>();
    if (!slot.pad) {
      slot.screen_id = js.at("screen").get<std::string>();
      slot.region = parse_box(js.at("box"), "spotlight-ex-v1");
      slot.token_ids = js.at("tokens").get<std::vector<int>>();
      slot.source = screen::source_tag_from_string(js.at("source").get<std::string>());
    }
    ex.slots.push_back(std::move(slot));
  }
  return ex;
}

void write_examples(const std::string& path, const std::vector<ExampleRecord>& examples) {
  std::ofstream out(path);
  if (!out) throw ParseError("write_examples: cannot write " + path);
  for (const auto& ex : examples) out << example_to_json(ex) << "\n";
}

std::vector<ExampleRecord> read_examples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("read_examples: cannot read " + path);
  std::vector<ExampleRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(example_from_json(line));
  }
  return out;
}

// --- two-pass build --------------------------------------------------------------

namespace {

std::vector<std::filesystem::path> sorted_jsonl(const std::string& dir) {
  std::vector<std::filesystem::path> files;
  if (dir.empty() || !std::filesystem::exists(dir)) return files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

screen::Screenshot load_screen(const std::filesystem::path& record_file,
                               const std::string& image_path, const BuildConfig& cfg) {
  const auto full = record_file.parent_path() / image_path;
  return screen::preprocess_screenshot(io::read_png(full.string()), cfg.target_size,
                                       cfg.patch_size);
}

}  // namespace

BuildOutput extract_corpus(const std::string& mobile_dir, const std::string& web_dir,
                           const BuildConfig& cfg) {
  struct LoadedMobile {
    MobileScreenRecord rec;
    screen::Screenshot screen;
  };
  struct LoadedWeb {
    WebPageRecord rec;
    std::optional<screen::Screenshot> screen;
  };
  std::vector<LoadedMobile> mobiles;
  std::vector<LoadedWeb> webs;

  for (const auto& file : sorted_jsonl(mobile_dir)) {
    std::ifstream in(file);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto rec = parse_mobile_record(line);
      auto scr = load_screen(file, rec.image_path, cfg);
      mobiles.push_back({std::move(rec), std::move(scr)});
    }
  }
  for (const auto& file : sorted_jsonl(web_dir)) {
    std::ifstream in(file);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto rec = parse_web_record(line);
      std::optional<screen::Screenshot> scr;
      if (!rec.image_path.empty()) scr = load_screen(file, rec.image_path, cfg);
      webs.push_back({std::move(rec), std::move(scr)});
    }
  }

  // Pass 1: corpus-global phrase counts (min-count rule disabled).
  PhraseCounts counts;
  for (const auto& m : mobiles) {
    for (const auto& t :
         extract_mobile(m.rec.screen_id, m.screen, m.rec.root, m.rec.ocr, cfg.filter, nullptr)) {
      counts.add(t.text);
    }
  }
  for (const auto& w : webs) {
    for (const auto& t :
         extract_web(w.rec.screen_id, w.screen ? &*w.screen : nullptr, w.rec.objects,
                     w.rec.title, cfg.filter, nullptr)) {
      counts.add(t.text);
    }
  }

  // Pass 2: emit with the full rule set.
  BuildOutput out;
  out.counts = counts;
  for (const auto& m : mobiles) {
    auto tuples =
        extract_mobile(m.rec.screen_id, m.screen, m.rec.root, m.rec.ocr, cfg.filter, &counts);
    out.mobile_tuples.insert(out.mobile_tuples.end(), tuples.begin(), tuples.end());
  }
  for (const auto& w : webs) {
    auto tuples = extract_web(w.rec.screen_id, w.screen ? &*w.screen : nullptr,
                              w.rec.objects, w.rec.title, cfg.filter, &counts);
    out.web_tuples.insert(out.web_tuples.end(), tuples.begin(), tuples.end());
  }

  std::vector<std::string> texts;
  for (const auto& t : out.mobile_tuples) texts.push_back(t.text);
  for (const auto& t : out.web_tuples) texts.push_back(t.text);
  out.vocab = screen::build_vocabulary(texts, cfg.vocab_min_count);
  return out;
}

void build_corpus(const std::string& mobile_dir, const std::string& web_dir,
                  const std::string& out_dir, const BuildConfig& cfg) {
  BuildOutput extracted = extract_corpus(mobile_dir, web_dir, cfg);
  std::filesystem::create_directories(out_dir);

  MixedStream stream(TupleSampler(extracted.web_tuples, cfg.title_weight),
                     TupleSampler(extracted.mobile_tuples, 0.0), cfg.web_fraction,
                     extracted.counts, cfg.filter, extracted.vocab, cfg.seed,
                     cfg.max_tuples);
  std::vector<ExampleRecord> examples;
  while (static_cast<int>(examples.size()) < cfg.n_examples) {
    for (auto& ex : stream.next_batch(cfg.batch_size)) {
      if (static_cast<int>(examples.size()) >= cfg.n_examples) break;
      ex.example_id = "ex" + std::to_string(examples.size());
      examples.push_back(std::move(ex));
    }
  }
  write_examples((std::filesystem::path(out_dir) / "examples.jsonl").string(), examples);
  extracted.vocab.save((std::filesystem::path(out_dir) / "vocab.txt").string());

  std::vector<ScreenObjectTextTuple> all = extracted.mobile_tuples;
  all.insert(all.end(), extracted.web_tuples.begin(), extracted.web_tuples.end());
  std::ofstream stats((std::filesystem::path(out_dir) / "stats.tsv").string());
  stats << stats_to_tsv(corpus_stats(all));
}

}  // namespace spotlight::corpus
