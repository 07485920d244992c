#pragma once

// Model hyperparameters plus the focus-region variant switch. The config
// serializes to sorted key=value lines so checkpoints are self-describing.

#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

namespace spotlight::model {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// How region features reach the decoder.
//   RegionSummarizer  - bounding-box queries cross-attend over encoder output
//                       concatenated with the queries themselves.
//   StaticBboxQueries - learned queries; the bbox embedding only joins the
//                       key/value set.
//   NoBboxInKV        - bbox queries attend over encoder output alone.
//   JointBboxEmbedding- all four coordinates share one embedding MLP.
//   RoiAlign          - pooled patch features, no summarizer.
//   RoiAlignAsQuery   - pooled patch features used as summarizer queries.
enum class FocusVariant {
  RegionSummarizer,
  StaticBboxQueries,
  NoBboxInKV,
  JointBboxEmbedding,
  RoiAlign,
  RoiAlignAsQuery,
};

std::string to_string(FocusVariant v);
FocusVariant focus_variant_from_string(const std::string& s);

struct SpotlightConfig {
  int image_size = 112;
  int patch_size = 16;
  int d_model = 64;
  int n_heads = 4;
  int ffn_mult = 4;
  int encoder_layers = 2;
  int summarizer_layers = 2;
  int decoder_layers = 2;
  int queries_per_coord = 2;  // n in the bbox-query construction; 4n rows total
  int roi_pool = 2;           // pooled grid side for the RoiAlign variants
  int vocab_size = 0;         // set when the vocabulary is known
  int max_seq_len = 160;      // decoder position table
  int max_tuples = 40;        // tuple-position table (covers 32-shot prompts)
  int max_decode_len = 64;
  int beam_size = 5;
  double dropout = 0.1;
  FocusVariant variant = FocusVariant::RegionSummarizer;

  int n_patches() const { return (image_size / patch_size) * (image_size / patch_size); }
  int patch_dim() const { return patch_size * patch_size * 3; }
  int n_region_tokens() const {
    return (variant == FocusVariant::RoiAlign || variant == FocusVariant::RoiAlignAsQuery)
               ? roi_pool * roi_pool
               : 4 * queries_per_coord;
  }

  void validate() const;
  std::string serialize() const;
  static SpotlightConfig deserialize(const std::string& text);
};

inline std::string to_string(FocusVariant v) {
  switch (v) {
    case FocusVariant::RegionSummarizer: return "region_summarizer";
    case FocusVariant::StaticBboxQueries: return "static_bbox_queries";
    case FocusVariant::NoBboxInKV: return "no_bbox_in_kv";
    case FocusVariant::JointBboxEmbedding: return "joint_bbox_embedding";
    case FocusVariant::RoiAlign: return "roi_align";
    case FocusVariant::RoiAlignAsQuery: return "roi_align_as_query";
  }
  throw ConfigError("unknown focus variant value");
}

inline FocusVariant focus_variant_from_string(const std::string& s) {
  if (s == "region_summarizer") return FocusVariant::RegionSummarizer;
  if (s == "static_bbox_queries") return FocusVariant::StaticBboxQueries;
  if (s == "no_bbox_in_kv") return FocusVariant::NoBboxInKV;
  if (s == "joint_bbox_embedding") return FocusVariant::JointBboxEmbedding;
  if (s == "roi_align") return FocusVariant::RoiAlign;
  if (s == "roi_align_as_query") return FocusVariant::RoiAlignAsQuery;
  throw ConfigError("unknown focus variant '" + s + "'");
}

inline void SpotlightConfig::validate() const {
  if (image_size <= 0 || patch_size <= 0 || image_size % patch_size != 0) {
    throw ConfigError("image_size must be a positive multiple of patch_size");
  }
  if (d_model <= 0 || n_heads <= 0 || d_model % n_heads != 0) {
    throw ConfigError("d_model must be a positive multiple of n_heads");
  }
  if (encoder_layers < 0 || summarizer_layers < 1 || decoder_layers < 1) {
    throw ConfigError("layer counts out of range");
  }
  if (queries_per_coord < 1) throw ConfigError("queries_per_coord must be >= 1");
  if (roi_pool < 1) throw ConfigError("roi_pool must be >= 1");
  if (vocab_size < 8) throw ConfigError("vocab_size must cover the reserved tokens");
  if (max_seq_len < 2 || max_tuples < 1 || max_decode_len < 1 || beam_size < 1) {
    throw ConfigError("sequence/beam limits out of range");
  }
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
}

inline std::string SpotlightConfig::serialize() const {
  std::ostringstream os;
  os << "beam_size=" << beam_size << "\n"
     << "d_model=" << d_model << "\n"
     << "decoder_layers=" << decoder_layers << "\n"
     << "dropout=" << dropout << "\n"
     << "encoder_layers=" << encoder_layers << "\n"
     << "ffn_mult=" << ffn_mult << "\n"
     << "image_size=" << image_size << "\n"
     << "max_decode_len=" << max_decode_len << "\n"
     << "max_seq_len=" << max_seq_len << "\n"
     << "max_tuples=" << max_tuples << "\n"
     << "n_heads=" << n_heads << "\n"
     << "patch_size=" << patch_size << "\n"
     << "queries_per_coord=" << queries_per_coord << "\n"
     << "roi_pool=" << roi_pool << "\n"
     << "summarizer_layers=" << summarizer_layers << "\n"
     << "variant=" << to_string(variant) << "\n"
     << "vocab_size=" << vocab_size << "\n";
  return os.str();
}

inline SpotlightConfig SpotlightConfig::deserialize(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("bad config line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const auto geti = [&](const std::string& k) {
    auto it = kv.find(k);
    if (it == kv.end()) throw ConfigError("config key '" + k + "' missing");
    return std::stoi(it->second);
  };
  SpotlightConfig c;
  c.beam_size = geti("beam_size");
  c.d_model = geti("d_model");
  c.decoder_layers = geti("decoder_layers");
  c.dropout = std::stod(kv.at("dropout"));
  c.encoder_layers = geti("encoder_layers");
  c.ffn_mult = geti("ffn_mult");
  c.image_size = geti("image_size");
  c.max_decode_len = geti("max_decode_len");
  c.max_seq_len = geti("max_seq_len");
  c.max_tuples = geti("max_tuples");
  c.n_heads = geti("n_heads");
  c.patch_size = geti("patch_size");
  c.queries_per_coord = geti("queries_per_coord");
  c.roi_pool = geti("roi_pool");
  c.summarizer_layers = geti("summarizer_layers");
  if (kv.find("variant") == kv.end()) throw ConfigError("config key 'variant' missing");
  c.variant = focus_variant_from_string(kv.at("variant"));
  c.vocab_size = geti("vocab_size");
  c.validate();
  return c;
}

}  // namespace spotlight::model
