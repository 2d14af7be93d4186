#pragma once

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstdio>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mrfup/errors.hpp"
#include "mrfup/features.hpp"
#include "mrfup/geometry.hpp"

namespace mrfup::io {

/// Single-channel float raster, row-major with row 0 at the top.
struct FloatImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  float& at(int row, int col) { return data[static_cast<std::size_t>(row) * width + col]; }
  float at(int row, int col) const { return data[static_cast<std::size_t>(row) * width + col]; }
};

namespace detail {

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

/// Next whitespace-delimited header token, skipping '#' comments.
inline std::string header_token(std::istream& in, const std::filesystem::path& path) {
  std::string tok;
  char ch = 0;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(ch);
  }
  if (tok.empty()) throw IoError("truncated header in '" + path.string() + "'");
  return tok;
}

inline int header_int(std::istream& in, const std::filesystem::path& path) {
  const std::string t = header_token(in, path);
  try {
    std::size_t pos = 0;
    const int v = std::stoi(t, &pos);
    if (pos != t.size() || v <= 0) throw std::invalid_argument(t);
    return v;
  } catch (const std::exception&) {
    throw IoError("bad header field '" + t + "' in '" + path.string() + "'");
  }
}

inline std::uint32_t byteswap32(std::uint32_t v) {
  return ((v & 0xFF) << 24) | ((v & 0xFF00) << 8) | ((v >> 8) & 0xFF00) | (v >> 24);
}

}  // namespace detail

/// Writes a grayscale PFM: "Pf", dimensions, scale -1.0 (little endian),
/// then float32 rows from bottom to top.
inline void write_pfm(const std::filesystem::path& path, const FloatImage& img) {
  auto out = detail::open_out(path);
  out << "Pf\n" << img.width << " " << img.height << "\n-1.0\n";
  std::vector<std::uint32_t> row(static_cast<std::size_t>(img.width));
  for (int r = img.height - 1; r >= 0; --r) {
    for (int c = 0; c < img.width; ++c) {
      std::uint32_t bits;
      const float v = img.at(r, c);
      std::memcpy(&bits, &v, sizeof bits);
      if constexpr (std::endian::native == std::endian::big) bits = detail::byteswap32(bits);
      row[static_cast<std::size_t>(c)] = bits;
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(std::uint32_t)));
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

/// Reads a grayscale PFM of either endianness.
inline FloatImage read_pfm(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  const std::string magic = detail::header_token(in, path);
  if (magic != "Pf") throw IoError("'" + path.string() + "' is not a grayscale PFM");
  FloatImage img;
  img.width = detail::header_int(in, path);
  img.height = detail::header_int(in, path);
  const std::string scale_tok = detail::header_token(in, path);
  double scale = 0.0;
  try {
    scale = std::stod(scale_tok);
  } catch (const std::exception&) {
    throw IoError("bad PFM scale in '" + path.string() + "'");
  }
  if (scale == 0.0) throw IoError("PFM scale must be non-zero in '" + path.string() + "'");
  const bool little = scale < 0.0;
  const bool swap = little != (std::endian::native == std::endian::little);
  img.data.resize(static_cast<std::size_t>(img.width) * img.height);
  std::vector<std::uint32_t> row(static_cast<std::size_t>(img.width));
  for (int r = img.height - 1; r >= 0; --r) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(std::uint32_t)));
    if (!in) throw IoError("truncated PFM data in '" + path.string() + "'");
    for (int c = 0; c < img.width; ++c) {
      std::uint32_t bits = row[static_cast<std::size_t>(c)];
      if (swap) bits = detail::byteswap32(bits);
      float v;
      std::memcpy(&v, &bits, sizeof v);
      img.at(r, c) = v;
    }
  }
  return img;
}

/// Invalid pixels become NaN.
inline FloatImage to_image(const DepthField& d) {
  FloatImage img{d.grid.width(), d.grid.height(), {}};
  img.data.resize(d.grid.size());
  for (std::size_t i = 0; i < d.grid.size(); ++i) {
    img.data[i] = d.valid[i] ? static_cast<float>(d.depths[i])
                             : std::numeric_limits<float>::quiet_NaN();
  }
  return img;
}

/// Non-finite or non-positive samples become invalid.
inline DepthField to_depth_field(const FloatImage& img) {
  DepthField d(ImageGrid(img.width, img.height));
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const float v = img.data[i];
    d.valid[i] = std::isfinite(v) && v > 0.0f;
    d.depths[i] = d.valid[i] ? v : 0.0;
  }
  return d;
}

/// 8-bit raster with 1 (PGM) or 3 (PPM) channels.
struct ByteImage {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<std::uint8_t> data;
};

/// Reads binary or ASCII PPM/PGM (P2, P3, P5, P6) with maxval <= 255.
inline ByteImage read_pnm(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  const std::string magic = detail::header_token(in, path);
  ByteImage img;
  bool ascii = false;
  if (magic == "P6") img.channels = 3;
  else if (magic == "P5") img.channels = 1;
  else if (magic == "P3") img.channels = 3, ascii = true;
  else if (magic == "P2") img.channels = 1, ascii = true;
  else throw IoError("'" + path.string() + "' is not a PPM/PGM raster");
  img.width = detail::header_int(in, path);
  img.height = detail::header_int(in, path);
  const int maxval = detail::header_int(in, path);
  if (maxval > 255) throw IoError("only 8-bit rasters are supported: '" + path.string() + "'");
  const std::size_t count = static_cast<std::size_t>(img.width) * img.height * img.channels;
  img.data.resize(count);
  if (ascii) {
    for (std::size_t k = 0; k < count; ++k) {
      int v = 0;
      if (!(in >> v)) throw IoError("truncated raster data in '" + path.string() + "'");
      img.data[k] = static_cast<std::uint8_t>(std::clamp(v * 255 / maxval, 0, 255));
    }
  } else {
    in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(count));
    if (!in) throw IoError("truncated raster data in '" + path.string() + "'");
    if (maxval != 255) {
      for (auto& v : img.data) v = static_cast<std::uint8_t>(std::min(255, v * 255 / maxval));
    }
  }
  return img;
}

inline void write_pnm(const std::filesystem::path& path, const ByteImage& img) {
  auto out = detail::open_out(path);
  out << (img.channels == 3 ? "P6" : "P5") << "\n"
      << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

/// RGB raster plus optional single-channel certainty raster, scaled to [0,1].
inline FeatureImage load_features(const std::filesystem::path& rgb_path,
                                  const std::optional<std::filesystem::path>& certainty_path) {
  const ByteImage rgb = read_pnm(rgb_path);
  FeatureImage f(ImageGrid(rgb.width, rgb.height));
  for (std::size_t i = 0; i < f.grid.size(); ++i) {
    if (rgb.channels == 3) {
      f.rgb[i] = Vec3(rgb.data[3 * i], rgb.data[3 * i + 1], rgb.data[3 * i + 2]) / 255.0;
    } else {
      f.rgb[i] = Vec3::Constant(rgb.data[i] / 255.0);
    }
  }
  if (certainty_path) {
    const ByteImage cert = read_pnm(*certainty_path);
    if (cert.width != rgb.width || cert.height != rgb.height) {
      throw ConfigError("certainty raster '" + certainty_path->string() +
                        "' does not match the RGB raster size");
    }
    for (std::size_t i = 0; i < f.grid.size(); ++i) {
      f.certainty[i] = cert.data[i * cert.channels] / 255.0;
    }
  }
  return f;
}

inline ByteImage rgb_to_bytes(const FeatureImage& f) {
  ByteImage img{f.grid.width(), f.grid.height(), 3, {}};
  img.data.resize(f.grid.size() * 3);
  for (std::size_t i = 0; i < f.grid.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      img.data[3 * i + c] = static_cast<std::uint8_t>(std::lround(std::clamp(f.rgb[i](c), 0.0, 1.0) * 255.0));
    }
  }
  return img;
}

inline ByteImage certainty_to_bytes(const FeatureImage& f) {
  ByteImage img{f.grid.width(), f.grid.height(), 1, {}};
  img.data.resize(f.grid.size());
  for (std::size_t i = 0; i < f.grid.size(); ++i) {
    img.data[i] = static_cast<std::uint8_t>(std::lround(std::clamp(f.certainty[i], 0.0, 1.0) * 255.0));
  }
  return img;
}

/// Point with optional attributes, as stored in PLY files.
struct CloudPoint {
  Vec3 position = Vec3::Zero();
  std::optional<Vec3> normal;
  std::optional<Eigen::Matrix<std::uint8_t, 3, 1>> color;
  std::optional<double> variance;
};

/// Reads the vertex element of an ASCII PLY file. x, y, z are required;
/// nx/ny/nz, red/green/blue and variance are picked up when present.
inline std::vector<CloudPoint> read_ply(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0) {
    throw IoError("'" + path.string() + "' is not a PLY file");
  }
  std::size_t vertex_count = 0;
  bool in_vertex = false;
  bool seen_vertex = false;
  std::vector<std::string> props;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "ascii") throw IoError("only ASCII PLY is supported: '" + path.string() + "'");
    } else if (kw == "element") {
      std::string name;
      std::size_t count = 0;
      ls >> name >> count;
      in_vertex = name == "vertex";
      if (in_vertex) {
        vertex_count = count;
        seen_vertex = true;
      } else if (!seen_vertex) {
        throw IoError("PLY vertex element must come first in '" + path.string() + "'");
      }
    } else if (kw == "property") {
      std::string type, name;
      ls >> type;
      if (type == "list") {
        std::string a, b;
        ls >> a >> b;
      }
      ls >> name;
      if (in_vertex) props.push_back(name);
    } else if (kw == "end_header") {
      break;
    }
  }
  if (!seen_vertex) throw IoError("PLY without vertex element: '" + path.string() + "'");
  auto find = [&](const char* name) -> int {
    for (std::size_t k = 0; k < props.size(); ++k)
      if (props[k] == name) return static_cast<int>(k);
    return -1;
  };
  const int ix = find("x"), iy = find("y"), iz = find("z");
  if (ix < 0 || iy < 0 || iz < 0) throw IoError("PLY lacks x/y/z: '" + path.string() + "'");
  const int inx = find("nx"), iny = find("ny"), inz = find("nz");
  const int ir = find("red"), ig = find("green"), ib = find("blue");
  const int iv = find("variance");

  std::vector<CloudPoint> pts;
  pts.reserve(vertex_count);
  std::vector<double> vals(props.size());
  for (std::size_t k = 0; k < vertex_count; ++k) {
    if (!std::getline(in, line)) throw IoError("truncated PLY body in '" + path.string() + "'");
    std::istringstream ls(line);
    for (auto& v : vals) {
      std::string tok;
      if (!(ls >> tok)) throw IoError("short PLY vertex line in '" + path.string() + "'");
      v = std::strtod(tok.c_str(), nullptr);
      if (tok == "nan" || tok == "NaN") v = std::numeric_limits<double>::quiet_NaN();
    }
    CloudPoint p;
    p.position = Vec3(vals[ix], vals[iy], vals[iz]);
    if (inx >= 0 && iny >= 0 && inz >= 0) {
      const Vec3 n(vals[inx], vals[iny], vals[inz]);
      if (n.allFinite() && n.norm() > 0.0) p.normal = n.normalized();
    }
    if (ir >= 0 && ig >= 0 && ib >= 0) {
      p.color = Eigen::Matrix<std::uint8_t, 3, 1>(static_cast<std::uint8_t>(vals[ir]),
                                                  static_cast<std::uint8_t>(vals[ig]),
                                                  static_cast<std::uint8_t>(vals[ib]));
    }
    if (iv >= 0) p.variance = vals[iv];
    pts.push_back(p);
  }
  return pts;
}

/// ASCII PLY with properties x y z nx ny nz red green blue variance.
/// Missing normals are written as 0 0 0, missing variance as nan.
inline void write_ply(const std::filesystem::path& path, const std::vector<CloudPoint>& pts) {
  auto out = detail::open_out(path);
  out << "ply\nformat ascii 1.0\nelement vertex " << pts.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "property float nx\nproperty float ny\nproperty float nz\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "property float variance\nend_header\n";
  char buf[256];
  for (const auto& p : pts) {
    const Vec3 n = p.normal.value_or(Vec3::Zero());
    const auto c = p.color.value_or(Eigen::Matrix<std::uint8_t, 3, 1>::Zero());
    const double var = p.variance.value_or(std::numeric_limits<double>::quiet_NaN());
    std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g %.7g %.7g %.7g %u %u %u ", p.position.x(),
                  p.position.y(), p.position.z(), n.x(), n.y(), n.z(), unsigned{c(0)},
                  unsigned{c(1)}, unsigned{c(2)});
    out << buf;
    if (std::isfinite(var)) {
      std::snprintf(buf, sizeof buf, "%.9g\n", var);
      out << buf;
    } else {
      out << "nan\n";
    }
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace mrfup::io
