#pragma once

#include <string>

#include "npr/reference.hpp"

namespace npr {

/// CSV layout: header "t\x, x_0, ..., x_{nx-1}", then one row per time
/// "t_i, u(t_i, x_0), ...".  Doubles are written shortest-round-trip.
void write_field_csv(const std::string& path, const FieldGrid& g);  // throws IoError
FieldGrid read_field_csv(const std::string& path);                  // throws IoError

/// 8-bit grayscale P5 heatmap (row 0 = t 0 at the top), linear value-to-gray
/// over [min, max]; the actual range lands in "<path>.range.txt".
void write_pgm_heatmap(const std::string& path, const FieldGrid& g);  // throws IoError

}  // namespace npr
