#include "spotlight/corpus/extract.hpp"

#include <algorithm>
#include <cmath>

namespace spotlight::corpus {

using screen::BoundingBox;
using screen::Screenshot;
using screen::ScreenObjectTextTuple;
using screen::SourceTag;
using screen::ViewHierarchyNode;

const std::vector<std::string>& known_html_attributes() {
  static const std::vector<std::string> kAttrs = {
      "text",       "alt-text",  "aria-label", "title",     "placeholder",
      "data-icon",  "data-service", "data-caption", "uk-icon", "data-hint",
      "data-svg",   "data-social",  "uk-tooltip",   "voq-icon"};
  return kAttrs;
}

bool is_known_html_attribute(const std::string& name) {
  const auto& attrs = known_html_attributes();
  return std::find(attrs.begin(), attrs.end(), name) != attrs.end();
}

bool region_is_uniform_color(const Screenshot& screen, const BoundingBox& box,
                             double eps) {
  const BoundingBox padded = screen.to_padded_coords(
      box.clamp_min_extent(1.0 / screen.content_width, 1.0 / screen.content_height));
  const int x0 = std::clamp(static_cast<int>(std::floor(padded.left * screen.size)), 0, screen.size - 1);
  const int y0 = std::clamp(static_cast<int>(std::floor(padded.top * screen.size)), 0, screen.size - 1);
  const int x1 = std::clamp(static_cast<int>(std::ceil(padded.right * screen.size)), x0 + 1, screen.size);
  const int y1 = std::clamp(static_cast<int>(std::ceil(padded.bottom * screen.size)), y0 + 1, screen.size);

  float lo[3] = {2.0f, 2.0f, 2.0f};
  float hi[3] = {-1.0f, -1.0f, -1.0f};
  for (int r = y0; r < y1; ++r) {
    for (int c = x0; c < x1; ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        const float v = screen.pixels[(static_cast<std::size_t>(r) * screen.size + c) * 3 + ch];
        lo[ch] = std::min(lo[ch], v);
        hi[ch] = std::max(hi[ch], v);
      }
    }
  }
  const float spread = std::max({hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]});
  return spread <= static_cast<float>(eps);
}

namespace {

void walk_leaves(const ViewHierarchyNode& node, int depth, int max_depth,
                 std::vector<const ViewHierarchyNode*>& leaves) {
  if (depth > max_depth) {
    throw ParseError("extract_mobile: view hierarchy deeper than " +
                     std::to_string(max_depth) + " levels");
  }
  if (node.is_leaf()) {
    leaves.push_back(&node);
    return;
  }
  for (const auto& child : node.children) {
    walk_leaves(child, depth + 1, max_depth, leaves);
  }
}

void try_emit(const std::string& screen_id, const BoundingBox& box,
              const std::string& raw_text, SourceTag tag, const FilterConfig& cfg,
              const PhraseCounts* counts, std::vector<ScreenObjectTextTuple>& out) {
  const FilterResult res = filter_text(raw_text, counts, cfg);
  if (res.accepted()) out.emplace_back(screen_id, box, *res.text, tag);
}

}  // namespace

std::vector<ScreenObjectTextTuple> extract_mobile(
    const std::string& screen_id, const Screenshot& screen,
    const ViewHierarchyNode& root, const std::vector<screen::OcrRecord>& ocr,
    const FilterConfig& cfg, const PhraseCounts* counts) {
  std::vector<const ViewHierarchyNode*> leaves;
  walk_leaves(root, 0, cfg.max_hierarchy_depth, leaves);

  std::vector<ScreenObjectTextTuple> out;
  for (const auto* leaf : leaves) {
    if (!leaf->visible) continue;
    if (region_is_uniform_color(screen, leaf->bounds, cfg.uniform_color_epsilon)) continue;
    if (leaf->text) {
      try_emit(screen_id, leaf->bounds, *leaf->text, SourceTag::Text, cfg, counts, out);
    }
    if (leaf->content_description) {
      try_emit(screen_id, leaf->bounds, *leaf->content_description,
               SourceTag::ContentDescription, cfg, counts, out);
    }
    if (leaf->resource_id) {
      try_emit(screen_id, leaf->bounds, *leaf->resource_id, SourceTag::ResourceId, cfg,
               counts, out);
    }
  }
  for (const auto& rec : ocr) {
    if (rec.confidence < cfg.ocr_min_confidence) continue;
    if (rec.line_count != 1) continue;
    if (region_is_uniform_color(screen, rec.bounds, cfg.uniform_color_epsilon)) continue;
    try_emit(screen_id, rec.bounds, rec.text, SourceTag::Ocr, cfg, counts, out);
  }
  return out;
}

std::vector<ScreenObjectTextTuple> extract_web(
    const std::string& screen_id, const Screenshot* screen,
    const std::vector<screen::HtmlObjectRecord>& records, const std::string& page_title,
    const FilterConfig& cfg, const PhraseCounts* counts) {
  std::vector<ScreenObjectTextTuple> out;
  for (const auto& rec : records) {
    if (!rec.visible) continue;
    if (screen != nullptr &&
        region_is_uniform_color(*screen, rec.bounds, cfg.uniform_color_epsilon)) {
      continue;
    }
    for (const auto& [name, value] : rec.attributes) {
      if (!is_known_html_attribute(name)) {
        throw ParseError("extract_web: unknown HTML attribute '" + name + "'");
      }
      SourceTag tag = SourceTag::MiscText;
      if (name == "text") tag = SourceTag::Text;
      else if (name == "alt-text") tag = SourceTag::AltText;
      try_emit(screen_id, rec.bounds, value, tag, cfg, counts, out);
    }
  }
  try_emit(screen_id, BoundingBox::full_screen(), page_title, SourceTag::Title, cfg,
           counts, out);
  return out;
}

}  // namespace spotlight::corpus
