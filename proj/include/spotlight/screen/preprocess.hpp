#pragma once

#include "spotlight/screen/types.hpp"

namespace spotlight::screen {

// Aspect-preserving bilinear resize into the top-left of a target_size
// square; the padded remainder is zero-filled and the patch-level valid
// mask marks every cell fully or partially covered by content.
Screenshot preprocess_screenshot(const Image& raw, int target_size, int patch_size);

}  // namespace spotlight::screen
