#pragma once

#include <string>
#include <vector>

namespace fedleak {

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

std::string fmt_g17(double v);

void write_text_file(const std::string& path, const std::string& content);

// sha256sum-compatible manifest of the given files (paths relative to dir),
// sorted by path, written to dir/manifest.txt.
void write_manifest(const std::string& dir,
                    std::vector<std::string> relative_paths);

}  // namespace fedleak
