#pragma once

#include <map>
#include <string>

#include "pano/image.hpp"

namespace pano {

// 8-bit RGB files. Values are quantized with round(v*255) on write and
// divided by 255 on read.
void save_png(const ErpImage& img, const std::string& path);
ErpImage load_png(const std::string& path);

void save_ppm(const ErpImage& img, const std::string& path);
ErpImage load_ppm(const std::string& path);

// picks the format from the extension (.png or .ppm)
void save_image(const ErpImage& img, const std::string& path);
ErpImage load_image(const std::string& path);

// plain-text key-value sidecar ("key = value" per line)
void save_sidecar(const std::string& path, const std::map<std::string, std::string>& kv);
std::map<std::string, std::string> load_sidecar(const std::string& path);

}  // namespace pano
