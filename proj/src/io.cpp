/* Copyright 2026 clpose contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 */

#include "clpose/io.hpp"

#include <charconv>
#include <cctype>
#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "clpose/error.hpp"

namespace clpose {

namespace {

constexpr size_t kHeaderBytes = 64;

struct RawHeader {
  char magic[4] = {0, 0, 0, 0};
  uint32_t side = 0;
  uint32_t count = 0;
  uint32_t extra[2] = {0, 0};  // format-specific
  char reserved[kHeaderBytes - 4 - 4 * sizeof(uint32_t)] = {};
};
static_assert(sizeof(RawHeader) == kHeaderBytes);

void write_header(std::ofstream& f, const char* magic, uint32_t side, uint32_t count,
                  uint32_t e0 = 0, uint32_t e1 = 0)
{
  RawHeader h;
  std::memcpy(h.magic, magic, 4);
  h.side = side;
  h.count = count;
  h.extra[0] = e0;
  h.extra[1] = e1;
  f.write(reinterpret_cast<const char*>(&h), sizeof(h));
}

RawHeader read_header(std::ifstream& f, const char* magic, const std::string& path)
{
  RawHeader h;
  f.read(reinterpret_cast<char*>(&h), sizeof(h));
  if (!f) throw input_error("io", "failed to read header of " + path);
  if (std::memcmp(h.magic, magic, 4) != 0)
    throw input_error("io", "bad magic in " + path + " (expected " + std::string(magic, 4) + ")");
  return h;
}

std::ofstream open_out(const std::string& path, bool binary)
{
  std::ofstream f(path, binary ? std::ios::binary : std::ios::out);
  if (!f) throw input_error("io", "cannot open " + path + " for writing");
  return f;
}

std::ifstream open_in(const std::string& path, bool binary)
{
  std::ifstream f(path, binary ? std::ios::binary : std::ios::in);
  if (!f) throw input_error("io", "cannot open " + path);
  return f;
}

void write_f32(std::ofstream& f, const std::vector<double>& v)
{
  std::vector<float> buf(v.begin(), v.end());
  f.write(reinterpret_cast<const char*>(buf.data()), buf.size() * sizeof(float));
}

std::vector<double> read_f32(std::ifstream& f, size_t count, const std::string& path)
{
  std::vector<float> buf(count);
  f.read(reinterpret_cast<char*>(buf.data()), count * sizeof(float));
  if (!f) throw input_error("io", "truncated data in " + path);
  return {buf.begin(), buf.end()};
}

std::string trim(const std::string& s)
{
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& s, const std::string& what)
{
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw input_error("io", "cannot parse number '" + s + "' for " + what);
  }
}

}  // namespace

std::string format_double(double v)
{
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void save_volume(const std::string& path, const Volume& vol)
{
  auto f = open_out(path, true);
  write_header(f, "CPV1", static_cast<uint32_t>(vol.side), 1);
  write_f32(f, vol.v);
  if (!f) throw input_error("io", "failed writing " + path);
}

Volume load_volume(const std::string& path)
{
  auto f = open_in(path, true);
  const RawHeader h = read_header(f, "CPV1", path);
  Volume vol(static_cast<int>(h.side));
  vol.v = read_f32(f, static_cast<size_t>(h.side) * h.side * h.side, path);
  return vol;
}

void save_stack(const std::string& path, const ProjectionStack& stack)
{
  auto f = open_out(path, true);
  write_header(f, "CPS1", static_cast<uint32_t>(stack.side), static_cast<uint32_t>(stack.n));
  for (const auto& img : stack.images) write_f32(f, img.v);
  if (!f) throw input_error("io", "failed writing " + path);

  auto meta = open_out(path + ".meta", false);
  meta << "n: " << stack.n << "\n";
  meta << "side: " << stack.side << "\n";
  meta << "snr: " << format_double(stack.snr) << "\n";
  meta << "seed: " << stack.seed << "\n";
  for (size_t k = 0; k < stack.true_rotations.size(); ++k) {
    meta << "rot_" << k << ":";
    const auto& m = stack.true_rotations[k].m;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) meta << " " << format_double(m(r, c));
    meta << "\n";
  }
  for (size_t k = 0; k < stack.true_shifts.size(); ++k)
    meta << "shift_" << k << ": " << format_double(stack.true_shifts[k].x()) << " "
         << format_double(stack.true_shifts[k].y()) << "\n";
}

ProjectionStack load_stack(const std::string& path)
{
  auto f = open_in(path, true);
  const RawHeader h = read_header(f, "CPS1", path);
  ProjectionStack stack;
  stack.side = static_cast<int>(h.side);
  stack.n = static_cast<int>(h.count);
  stack.images.reserve(stack.n);
  for (int k = 0; k < stack.n; ++k) {
    Image img(stack.side);
    img.v = read_f32(f, static_cast<size_t>(stack.side) * stack.side, path);
    stack.images.push_back(std::move(img));
  }

  const KeyValues kv = parse_kv_file(path + ".meta");
  std::vector<Eigen::Matrix3d> rots(stack.n, Eigen::Matrix3d::Identity());
  std::vector<bool> has_rot(stack.n, false);
  std::vector<Eigen::Vector2d> shifts(stack.n, Eigen::Vector2d::Zero());
  std::vector<bool> has_shift(stack.n, false);
  for (const auto& [key, value] : kv) {
    if (key == "snr") stack.snr = parse_double(value, "snr");
    else if (key == "seed") stack.seed = static_cast<uint64_t>(std::stoull(value));
    else if (key.rfind("rot_", 0) == 0) {
      const int k = std::stoi(key.substr(4));
      if (k < 0 || k >= stack.n) throw input_error("io", "rotation index out of range in meta");
      std::istringstream ss(value);
      Eigen::Matrix3d m;
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
          if (!(ss >> m(r, c))) throw input_error("io", "bad rotation row in meta");
      rots[k] = m;
      has_rot[k] = true;
    } else if (key.rfind("shift_", 0) == 0) {
      const int k = std::stoi(key.substr(6));
      if (k < 0 || k >= stack.n) throw input_error("io", "shift index out of range in meta");
      std::istringstream ss(value);
      if (!(ss >> shifts[k].x() >> shifts[k].y())) throw input_error("io", "bad shift in meta");
      has_shift[k] = true;
    }
  }
  if (std::all_of(has_rot.begin(), has_rot.end(), [](bool b) { return b; }) && stack.n > 0) {
    stack.true_rotations.reserve(stack.n);
    for (const auto& m : rots) stack.true_rotations.push_back(Rotation{m});
  }
  if (std::all_of(has_shift.begin(), has_shift.end(), [](bool b) { return b; }) && stack.n > 0)
    stack.true_shifts = shifts;
  return stack;
}

void save_polar(const std::string& path, const PolarStack& pol)
{
  auto f = open_out(path, true);
  write_header(f, "CPP1", static_cast<uint32_t>(pol.src_side), static_cast<uint32_t>(pol.n),
               static_cast<uint32_t>(pol.n_theta), static_cast<uint32_t>(pol.n_r));
  const double params[3] = {pol.rmax, pol.fmin, pol.corrected ? 1.0 : 0.0};
  f.write(reinterpret_cast<const char*>(params), sizeof(params));
  std::vector<float> buf;
  buf.reserve(pol.rays.size() * 2);
  for (const auto& z : pol.rays) {
    buf.push_back(static_cast<float>(z.real()));
    buf.push_back(static_cast<float>(z.imag()));
  }
  f.write(reinterpret_cast<const char*>(buf.data()), buf.size() * sizeof(float));
  if (!f) throw input_error("io", "failed writing " + path);
}

PolarStack load_polar(const std::string& path)
{
  auto f = open_in(path, true);
  const RawHeader h = read_header(f, "CPP1", path);
  double params[3];
  f.read(reinterpret_cast<char*>(params), sizeof(params));
  if (!f) throw input_error("io", "truncated polar dump " + path);
  PolarStack pol;
  pol.src_side = static_cast<int>(h.side);
  pol.n = static_cast<int>(h.count);
  pol.n_theta = static_cast<int>(h.extra[0]);
  pol.n_r = static_cast<int>(h.extra[1]);
  pol.rmax = params[0];
  pol.fmin = params[1];
  pol.corrected = params[2] != 0.0;
  pol.freq.resize(pol.n_r);
  const double df = (pol.rmax - pol.fmin) / (pol.n_r - 1);
  for (int j = 0; j < pol.n_r; ++j) pol.freq[j] = pol.fmin + df * j;
  const size_t total = static_cast<size_t>(pol.n) * pol.n_theta * pol.n_r;
  std::vector<float> buf(total * 2);
  f.read(reinterpret_cast<char*>(buf.data()), buf.size() * sizeof(float));
  if (!f) throw input_error("io", "truncated polar dump " + path);
  pol.rays.resize(total);
  for (size_t i = 0; i < total; ++i) pol.rays[i] = {buf[2 * i], buf[2 * i + 1]};
  return pol;
}

void save_rotations(const std::string& path, const std::vector<Rotation>& rots)
{
  auto f = open_out(path, false);
  for (const auto& rot : rots) {
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) f << (r + c > 0 ? " " : "") << format_double(rot.m(r, c));
    f << "\n";
  }
}

std::vector<Rotation> load_rotations(const std::string& path)
{
  auto f = open_in(path, false);
  std::vector<Rotation> out;
  std::string line;
  while (std::getline(f, line)) {
    line = trim(line);
    if (line.empty()) continue;
    std::istringstream ss(line);
    Eigen::Matrix3d m;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        if (!(ss >> m(r, c))) throw input_error("io", "bad rotation line in " + path);
    out.push_back(Rotation{m});
  }
  return out;
}

void save_shifts(const std::string& path, const std::vector<Eigen::Vector2d>& shifts)
{
  auto f = open_out(path, false);
  for (const auto& s : shifts) f << format_double(s.x()) << " " << format_double(s.y()) << "\n";
}

std::vector<Eigen::Vector2d> load_shifts(const std::string& path)
{
  auto f = open_in(path, false);
  std::vector<Eigen::Vector2d> out;
  std::string line;
  while (std::getline(f, line)) {
    line = trim(line);
    if (line.empty()) continue;
    std::istringstream ss(line);
    Eigen::Vector2d s;
    if (!(ss >> s.x() >> s.y())) throw input_error("io", "bad shift line in " + path);
    out.push_back(s);
  }
  return out;
}

KeyValues parse_kv_text(const std::string& text)
{
  KeyValues out;
  std::istringstream stream(text);
  std::string line;
  while (std::getline(stream, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) throw input_error("io", "expected 'key: value' in '" + line + "'");
    out.emplace_back(trim(line.substr(0, colon)), trim(line.substr(colon + 1)));
  }
  return out;
}

KeyValues parse_kv_file(const std::string& path)
{
  auto f = open_in(path, false);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_kv_text(ss.str());
}

}  // namespace clpose
