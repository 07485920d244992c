#pragma once

#include <string>
#include <vector>

#include "spotlight/corpus/filter.hpp"
#include "spotlight/screen/types.hpp"

namespace spotlight::corpus {

struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// HTML attributes admissible on a web object record; anything else is
// rejected when the record is parsed.
bool is_known_html_attribute(const std::string& name);
const std::vector<std::string>& known_html_attributes();

// Max per-channel pixel spread over the cropped region <= eps.
bool region_is_uniform_color(const screen::Screenshot& screen,
                             const screen::BoundingBox& box, double eps);

// One tuple per (visible leaf x populated attribute) that passes
// filter_text, plus qualifying single-line OCR records. `counts == nullptr`
// skips the corpus-global min-count rule.
std::vector<screen::ScreenObjectTextTuple> extract_mobile(
    const std::string& screen_id, const screen::Screenshot& screen,
    const screen::ViewHierarchyNode& root, const std::vector<screen::OcrRecord>& ocr,
    const FilterConfig& cfg, const PhraseCounts* counts);

// Tuples tagged text / alt_text / misc_text per attribute, plus one
// full-screen title tuple when the page title passes filtering. The screen
// may be null (no uniform-color check possible then).
std::vector<screen::ScreenObjectTextTuple> extract_web(
    const std::string& screen_id, const screen::Screenshot* screen,
    const std::vector<screen::HtmlObjectRecord>& records, const std::string& page_title,
    const FilterConfig& cfg, const PhraseCounts* counts);

}  // namespace spotlight::corpus
