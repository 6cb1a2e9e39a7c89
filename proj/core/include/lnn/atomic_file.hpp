#pragma once

#include <string>
#include <string_view>

namespace lnn {

// Writes to "<path>.tmp.<pid>" in the same directory, flushes, then renames
// over path, so readers never observe a partially written file.
void write_file_atomic(const std::string& path, std::string_view contents);

std::string read_file(const std::string& path);

}  // namespace lnn
