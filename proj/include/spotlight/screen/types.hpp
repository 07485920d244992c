#pragma once

// Core screen-domain types shared by the pipeline, the generator and the
// model. Everything here is immutable after construction.

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace spotlight::screen {

struct DomainError : std::runtime_error {
  explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

// Normalized [left, top, right, bottom] against the original (pre-padding)
// content extent. (0, 0, 1, 1) is the whole screen. Degenerate boxes with
// zero width or height are accepted; clamp_min_extent() widens them before
// model use.
struct BoundingBox {
  double left = 0.0, top = 0.0, right = 1.0, bottom = 1.0;

  BoundingBox() = default;
  BoundingBox(double l, double t, double r, double b)
      : left(l), top(t), right(r), bottom(b) {
    if (!(0.0 <= l && l <= r && r <= 1.0) || !(0.0 <= t && t <= b && b <= 1.0)) {
      throw DomainError("BoundingBox: invalid coordinates [" + std::to_string(l) +
                        ", " + std::to_string(t) + ", " + std::to_string(r) + ", " +
                        std::to_string(b) + "]");
    }
  }

  static BoundingBox full_screen() { return {0.0, 0.0, 1.0, 1.0}; }

  bool is_full_screen() const {
    return left == 0.0 && top == 0.0 && right == 1.0 && bottom == 1.0;
  }

  double width() const { return right - left; }
  double height() const { return bottom - top; }

  BoundingBox clamp_min_extent(double min_w, double min_h) const {
    BoundingBox out = *this;
    if (out.width() < min_w) {
      const double c = std::clamp((left + right) / 2.0, min_w / 2.0, 1.0 - min_w / 2.0);
      out.left = c - min_w / 2.0;
      out.right = c + min_w / 2.0;
    }
    if (out.height() < min_h) {
      const double c = std::clamp((top + bottom) / 2.0, min_h / 2.0, 1.0 - min_h / 2.0);
      out.top = c - min_h / 2.0;
      out.bottom = c + min_h / 2.0;
    }
    return out;
  }

  bool operator==(const BoundingBox&) const = default;
};

// Raw RGB image, row-major, 3 floats per pixel in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> pixels;  // height * width * 3

  float at(int r, int c, int ch) const { return pixels[(r * width + c) * 3 + ch]; }
  float& at(int r, int c, int ch) { return pixels[(r * width + c) * 3 + ch]; }
};

// A preprocessed square screenshot: aspect-preserving resize, zero-filled
// padding, plus a patch-granularity mask of which cells hold real content.
struct Screenshot {
  int size = 0;        // height == width
  int patch_size = 0;
  int grid_rows = 0, grid_cols = 0;
  int content_width = 0, content_height = 0;  // pixels of real content
  std::vector<float> pixels;                  // size * size * 3
  std::vector<std::uint8_t> valid_mask;       // grid_rows * grid_cols

  int num_patches() const { return grid_rows * grid_cols; }
  bool patch_valid(int r, int c) const { return valid_mask[r * grid_cols + c] != 0; }

  // Remaps a content-normalized box onto the padded square's [0,1]^2.
  BoundingBox to_padded_coords(const BoundingBox& b) const {
    const double sx = static_cast<double>(content_width) / size;
    const double sy = static_cast<double>(content_height) / size;
    return {b.left * sx, b.top * sy, b.right * sx, b.bottom * sy};
  }
};

enum class SourceTag { Text, AltText, MiscText, Title, ContentDescription, ResourceId, Ocr };

std::string to_string(SourceTag tag);
SourceTag source_tag_from_string(const std::string& s);

// The universal training/eval record: a screen, a focus region, and the
// text the model should associate with it.
struct ScreenObjectTextTuple {
  std::string screen_id;
  std::shared_ptr<const Screenshot> screen;  // may be null until images load
  BoundingBox region;
  std::string text;
  SourceTag source = SourceTag::Text;

  ScreenObjectTextTuple() = default;
  ScreenObjectTextTuple(std::string id, BoundingBox box, std::string txt, SourceTag tag)
      : screen_id(std::move(id)), region(box), text(std::move(txt)), source(tag) {
    if (text.empty()) throw DomainError("ScreenObjectTextTuple: empty text");
    if (source == SourceTag::Title && !region.is_full_screen()) {
      throw DomainError("ScreenObjectTextTuple: title tuples must cover the full screen");
    }
  }
};

// 1..K tuples; padding slots are flagged and excluded from the loss.
struct ExampleRecord {
  struct Slot {
    std::string screen_id;
    BoundingBox region;
    std::vector<int> token_ids;
    SourceTag source = SourceTag::Text;
    bool pad = false;
  };
  std::string example_id;
  std::vector<Slot> slots;

  int real_count() const {
    int n = 0;
    for (const auto& s : slots) n += s.pad ? 0 : 1;
    return n;
  }
};

struct ViewHierarchyNode {
  BoundingBox bounds;
  std::optional<std::string> text;
  std::optional<std::string> content_description;
  std::optional<std::string> resource_id;
  bool visible = true;
  std::vector<ViewHierarchyNode> children;

  bool is_leaf() const { return children.empty(); }
};

struct HtmlObjectRecord {
  BoundingBox bounds;
  std::map<std::string, std::string> attributes;
  bool visible = true;
};

struct OcrRecord {
  BoundingBox bounds;
  std::string text;
  double confidence = 0.0;
  int line_count = 1;

  OcrRecord() = default;
  OcrRecord(BoundingBox b, std::string t, double conf, int lines)
      : bounds(b), text(std::move(t)), confidence(conf), line_count(lines) {
    if (confidence < 0.0 || confidence > 1.0) {
      throw DomainError("OcrRecord: confidence outside [0, 1]");
    }
    if (line_count < 1) throw DomainError("OcrRecord: line_count must be positive");
  }
};

}  // namespace spotlight::screen
