#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "mirrorpose/scene.hpp"

namespace mirrorpose {

namespace {

constexpr float kDepthSentinel = 1e30f;

// Reads one whitespace-delimited token, skipping '#' comment lines.
std::string pnm_token(std::istream& in, const std::string& path) {
  std::string tok;
  for (;;) {
    int c = in.get();
    if (c == EOF) throw std::runtime_error(path + ": truncated header");
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
}

int pnm_int(std::istream& in, const std::string& path, const char* what) {
  std::string tok = pnm_token(in, path);
  try {
    size_t used = 0;
    int v = std::stoi(tok, &used);
    if (used != tok.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw std::runtime_error(path + ": bad " + what + " '" + tok + "'");
  }
}

bool host_little_endian() {
  uint16_t probe = 1;
  uint8_t b;
  std::memcpy(&b, &probe, 1);
  return b == 1;
}

}  // namespace

SoftImage load_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  std::string magic = pnm_token(f, path);
  if (magic != "P5") throw std::runtime_error(path + ": expected P5, got '" + magic + "'");
  int w = pnm_int(f, path, "width");
  int h = pnm_int(f, path, "height");
  int maxval = pnm_int(f, path, "maxval");
  if (w <= 0 || h <= 0) throw std::runtime_error(path + ": bad dimensions");
  if (maxval != 255) throw std::runtime_error(path + ": maxval must be 255");
  std::vector<uint8_t> raw(static_cast<size_t>(w) * h);
  f.read(reinterpret_cast<char*>(raw.data()), raw.size());
  if (f.gcount() != static_cast<std::streamsize>(raw.size()))
    throw std::runtime_error(path + ": truncated pixel data");
  SoftImage img(w, h);
  for (size_t i = 0; i < raw.size(); ++i) img.values[i] = raw[i] >= 128 ? 1.0 : 0.0;
  return img;
}

void save_pgm(const std::string& path, const SoftImage& img) {
  if (img.width <= 0 || img.height <= 0) throw std::invalid_argument("save_pgm: empty image");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  f << "P5\n" << img.width << " " << img.height << "\n255\n";
  std::vector<uint8_t> raw(img.values.size());
  for (size_t i = 0; i < raw.size(); ++i) {
    double v = img.values[i];
    if (!std::isfinite(v) || v < 0.0 || v > 1.0)
      throw std::invalid_argument("save_pgm: value outside [0,1]");
    raw[i] = static_cast<uint8_t>(std::lround(v * 255.0));
  }
  f.write(reinterpret_cast<const char*>(raw.data()), raw.size());
  if (!f) throw std::runtime_error("short write to '" + path + "'");
}

DepthMap load_pfm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  std::string magic = pnm_token(f, path);
  if (magic != "Pf") throw std::runtime_error(path + ": expected Pf, got '" + magic + "'");
  int w = pnm_int(f, path, "width");
  int h = pnm_int(f, path, "height");
  std::string scale_tok = pnm_token(f, path);
  double scale = 0;
  try {
    scale = std::stod(scale_tok);
  } catch (...) {
    throw std::runtime_error(path + ": bad scale '" + scale_tok + "'");
  }
  if (scale == 0) throw std::runtime_error(path + ": zero scale");
  if (w <= 0 || h <= 0) throw std::runtime_error(path + ": bad dimensions");
  bool file_le = scale < 0;
  std::vector<float> raw(static_cast<size_t>(w) * h);
  f.read(reinterpret_cast<char*>(raw.data()), raw.size() * sizeof(float));
  if (f.gcount() != static_cast<std::streamsize>(raw.size() * sizeof(float)))
    throw std::runtime_error(path + ": truncated pixel data");
  if (file_le != host_little_endian()) {
    for (float& v : raw) {
      uint32_t u;
      std::memcpy(&u, &v, 4);
      u = __builtin_bswap32(u);
      std::memcpy(&v, &u, 4);
    }
  }
  DepthMap d(w, h);
  // PFM stores rows bottom to top.
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float v = raw[static_cast<size_t>(h - 1 - y) * w + x];
      if (!std::isfinite(v)) throw std::runtime_error(path + ": non-finite sample");
      d.values[static_cast<size_t>(y) * w + x] = v >= kDepthSentinel ? kInf : v;
    }
  return d;
}

void save_pfm(const std::string& path, const DepthMap& depth) {
  if (depth.width <= 0 || depth.height <= 0) throw std::invalid_argument("save_pfm: empty map");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  f << "Pf\n" << depth.width << " " << depth.height << "\n"
    << (host_little_endian() ? "-1.0" : "1.0") << "\n";
  std::vector<float> raw(depth.values.size());
  for (int y = 0; y < depth.height; ++y)
    for (int x = 0; x < depth.width; ++x) {
      double v = depth.values[static_cast<size_t>(y) * depth.width + x];
      float out;
      if (v == kInf) out = kDepthSentinel;
      else if (std::isfinite(v) && v >= 0) out = static_cast<float>(v);
      else throw std::invalid_argument("save_pfm: depth must be finite nonnegative or +inf");
      raw[static_cast<size_t>(depth.height - 1 - y) * depth.width + x] = out;
    }
  f.write(reinterpret_cast<const char*>(raw.data()), raw.size() * sizeof(float));
  if (!f) throw std::runtime_error("short write to '" + path + "'");
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    out.push_back(c);
    if (c == '"') out.push_back('"');
  }
  out.push_back('"');
  return out;
}

std::vector<std::string> csv_split(const std::string& line, const std::string& path, int lineno) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else
          quoted = false;
      } else
        cur.push_back(c);
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c == '\r') {
      // tolerated before newline
    } else
      cur.push_back(c);
  }
  if (quoted)
    throw std::runtime_error(path + ":" + std::to_string(lineno) + ": unterminated quote");
  out.push_back(cur);
  return out;
}

}  // namespace

void save_csv(const std::string& path, const std::vector<std::string>& header,
              const std::vector<std::vector<std::string>>& rows) {
  if (header.empty()) throw std::invalid_argument("save_csv: empty header");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  auto put_row = [&](const std::vector<std::string>& row) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) f << ",";
      f << csv_field(row[i]);
    }
    f << "\r\n";
  };
  put_row(header);
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw std::invalid_argument("save_csv: row width differs from header");
    put_row(row);
  }
  if (!f) throw std::runtime_error("short write to '" + path + "'");
}

std::vector<std::pair<std::string, Vec3>> load_joints_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  std::vector<std::pair<std::string, Vec3>> joints;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto fields = csv_split(line, path, lineno);
    if (fields.size() != 4)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 4 columns");
    if (lineno == 1) {
      if (fields[0] != "joint" || fields[1] != "x" || fields[2] != "y" || fields[3] != "z")
        throw std::runtime_error(path + ": expected header joint,x,y,z");
      continue;
    }
    Vec3 p;
    for (int k = 0; k < 3; ++k) {
      try {
        size_t used = 0;
        p[k] = std::stod(fields[k + 1], &used);
        if (used != fields[k + 1].size()) throw std::invalid_argument("");
      } catch (...) {
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad number '" +
                                 fields[k + 1] + "'");
      }
    }
    joints.emplace_back(fields[0], p);
  }
  if (joints.empty()) throw std::runtime_error(path + ": no joint rows");
  return joints;
}

void save_joints_csv(const std::string& path,
                     const std::vector<std::pair<std::string, Vec3>>& joints) {
  std::vector<std::vector<std::string>> rows;
  char buf[64];
  for (const auto& [name, p] : joints) {
    std::vector<std::string> row{name};
    for (int k = 0; k < 3; ++k) {
      std::snprintf(buf, sizeof(buf), "%.17g", p[k]);
      row.emplace_back(buf);
    }
    rows.push_back(std::move(row));
  }
  save_csv(path, {"joint", "x", "y", "z"}, rows);
}

}  // namespace mirrorpose
