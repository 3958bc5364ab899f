#include "npr/field_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string_view>
#include <system_error>
#include <vector>

#include "npr/errors.hpp"

namespace npr {

namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

double parse_double(std::string_view s, const std::string& path) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw IoError("malformed number '" + std::string(s) + "' in " + path);
  return v;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace

void write_field_csv(const std::string& path, const FieldGrid& g) {
  std::string out;
  out.reserve(static_cast<std::size_t>(g.nt + 1) * (static_cast<std::size_t>(g.nx) + 1) * 12);
  out += "t\\x";
  for (int j = 0; j < g.nx; ++j) {
    out += ", ";
    append_double(out, g.x_vals[static_cast<std::size_t>(j)]);
  }
  out += '\n';
  for (int i = 0; i < g.nt; ++i) {
    append_double(out, g.t_vals[static_cast<std::size_t>(i)]);
    for (int j = 0; j < g.nx; ++j) {
      out += ", ";
      append_double(out, g.at(i, j));
    }
    out += '\n';
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed for " + path);
}

FieldGrid read_field_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw IoError("empty field file " + path);
  const auto header = split_commas(line);
  if (header.size() < 3) throw IoError("field header needs at least two x columns in " + path);

  FieldGrid g;
  g.nx = static_cast<int>(header.size()) - 1;
  g.x_vals.reserve(static_cast<std::size_t>(g.nx));
  for (std::size_t c = 1; c < header.size(); ++c) g.x_vals.push_back(parse_double(header[c], path));

  while (std::getline(f, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_commas(line);
    if (static_cast<int>(cells.size()) != g.nx + 1)
      throw IoError("row with " + std::to_string(cells.size()) + " cells, expected " +
                    std::to_string(g.nx + 1) + " in " + path);
    g.t_vals.push_back(parse_double(cells[0], path));
    for (std::size_t c = 1; c < cells.size(); ++c) g.values.push_back(parse_double(cells[c], path));
  }
  g.nt = static_cast<int>(g.t_vals.size());
  if (g.nt < 1) throw IoError("field file has no data rows: " + path);
  return g;
}

void write_pgm_heatmap(const std::string& path, const FieldGrid& g) {
  const auto [lo_it, hi_it] = std::minmax_element(g.values.begin(), g.values.end());
  const double lo = *lo_it, hi = *hi_it;
  const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;

  std::string out = "P5\n" + std::to_string(g.nx) + " " + std::to_string(g.nt) + "\n255\n";
  out.reserve(out.size() + g.values.size());
  for (double v : g.values) {
    const int gray = hi > lo ? static_cast<int>(std::lround((v - lo) * scale)) : 128;
    out.push_back(static_cast<char>(std::clamp(gray, 0, 255)));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed for " + path);

  std::string side;
  side += "min ";
  append_double(side, lo);
  side += "\nmax ";
  append_double(side, hi);
  side += '\n';
  std::ofstream s(path + ".range.txt", std::ios::binary);
  if (!s) throw IoError("cannot open " + path + ".range.txt for writing");
  s.write(side.data(), static_cast<std::streamsize>(side.size()));
  if (!s) throw IoError("write failed for " + path + ".range.txt");
}

}  // namespace npr
