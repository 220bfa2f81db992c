#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "obcl/tensor.hpp"

namespace obcl {

/// Textual key -> tensor map with declared shapes and a versioned header.
/// Values are written as C99 hexfloats, so round-trips are bit-exact.
void save_checkpoint(std::ostream& os, const std::vector<std::pair<std::string, Tensor>>& entries);
void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor>>& entries);

std::vector<std::pair<std::string, Tensor>> load_checkpoint(std::istream& is);
std::vector<std::pair<std::string, Tensor>> load_checkpoint(const std::string& path);

}  // namespace obcl
