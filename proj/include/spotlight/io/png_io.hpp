#pragma once

#include <string>

#include "spotlight/screen/types.hpp"

namespace spotlight::io {

screen::Image read_png(const std::string& path);
void write_png(const std::string& path, const screen::Image& img);

}  // namespace spotlight::io
