#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "seeground/error.hpp"
#include "seeground/scene_model.hpp"

namespace seeground {
namespace {

enum class ScalarType { int8, uint8, int16, uint16, int32, uint32, float32, float64 };

std::optional<ScalarType> scalar_type_from(std::string_view name) {
  if (name == "char" || name == "int8") return ScalarType::int8;
  if (name == "uchar" || name == "uint8") return ScalarType::uint8;
  if (name == "short" || name == "int16") return ScalarType::int16;
  if (name == "ushort" || name == "uint16") return ScalarType::uint16;
  if (name == "int" || name == "int32") return ScalarType::int32;
  if (name == "uint" || name == "uint32") return ScalarType::uint32;
  if (name == "float" || name == "float32") return ScalarType::float32;
  if (name == "double" || name == "float64") return ScalarType::float64;
  return std::nullopt;
}

std::size_t byte_width(ScalarType t) {
  switch (t) {
    case ScalarType::int8:
    case ScalarType::uint8: return 1;
    case ScalarType::int16:
    case ScalarType::uint16: return 2;
    case ScalarType::int32:
    case ScalarType::uint32:
    case ScalarType::float32: return 4;
    case ScalarType::float64: return 8;
  }
  return 0;
}

struct Property {
  std::string name;
  ScalarType type = ScalarType::float32;
  bool is_list = false;
  ScalarType count_type = ScalarType::uint8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;
};

struct Header {
  PlyEncoding encoding = PlyEncoding::ascii;
  std::vector<Element> elements;
  std::size_t body_offset = 0;
};

[[noreturn]] void fail(const std::string& what, std::size_t offset) {
  throw Error(Errc::parse, "ply: " + what + " at byte " + std::to_string(offset));
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

Header parse_header(std::string_view bytes) {
  Header h;
  std::size_t pos = 0;
  bool saw_format = false;
  bool first = true;
  while (true) {
    const std::size_t eol = bytes.find('\n', pos);
    if (eol == std::string_view::npos) fail("malformed header (no end_header)", pos);
    const std::string_view line = bytes.substr(pos, eol - pos);
    const auto tok = split_ws(line);
    const std::size_t line_start = pos;
    pos = eol + 1;
    if (first) {
      if (tok.size() != 1 || tok[0] != "ply") fail("malformed header (missing 'ply' magic)", line_start);
      first = false;
      continue;
    }
    if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "end_header") break;
    if (tok[0] == "format") {
      if (tok.size() != 3 || tok[2] != "1.0") fail("malformed header (bad format line)", line_start);
      if (tok[1] == "ascii") {
        h.encoding = PlyEncoding::ascii;
      } else if (tok[1] == "binary_little_endian") {
        h.encoding = PlyEncoding::binary_little_endian;
      } else {
        fail("malformed header (unsupported format '" + std::string(tok[1]) + "')", line_start);
      }
      saw_format = true;
    } else if (tok[0] == "element") {
      if (tok.size() != 3) fail("malformed header (bad element line)", line_start);
      Element e;
      e.name = std::string(tok[1]);
      auto [ptr, ec] = std::from_chars(tok[2].data(), tok[2].data() + tok[2].size(), e.count);
      if (ec != std::errc() || ptr != tok[2].data() + tok[2].size())
        fail("malformed header (bad element count)", line_start);
      h.elements.push_back(std::move(e));
    } else if (tok[0] == "property") {
      if (h.elements.empty()) fail("malformed header (property before element)", line_start);
      Property p;
      if (tok.size() == 5 && tok[1] == "list") {
        auto ct = scalar_type_from(tok[2]);
        auto it = scalar_type_from(tok[3]);
        if (!ct || !it) fail("malformed header (unknown list type)", line_start);
        p.is_list = true;
        p.count_type = *ct;
        p.type = *it;
        p.name = std::string(tok[4]);
      } else if (tok.size() == 3) {
        auto t = scalar_type_from(tok[1]);
        if (!t) fail("malformed header (unknown property type '" + std::string(tok[1]) + "')", line_start);
        p.type = *t;
        p.name = std::string(tok[2]);
      } else {
        fail("malformed header (bad property line)", line_start);
      }
      h.elements.back().properties.push_back(std::move(p));
    } else {
      fail("malformed header (unknown keyword '" + std::string(tok[0]) + "')", line_start);
    }
  }
  if (!saw_format) fail("malformed header (missing format line)", 0);
  h.body_offset = pos;
  return h;
}

double read_binary(std::string_view bytes, std::size_t& pos, ScalarType t) {
  const std::size_t w = byte_width(t);
  if (pos + w > bytes.size()) fail("truncated payload", pos);
  const char* p = bytes.data() + pos;
  pos += w;
  switch (t) {
    case ScalarType::int8: { std::int8_t v; std::memcpy(&v, p, 1); return v; }
    case ScalarType::uint8: { std::uint8_t v; std::memcpy(&v, p, 1); return v; }
    case ScalarType::int16: { std::int16_t v; std::memcpy(&v, p, 2); return v; }
    case ScalarType::uint16: { std::uint16_t v; std::memcpy(&v, p, 2); return v; }
    case ScalarType::int32: { std::int32_t v; std::memcpy(&v, p, 4); return v; }
    case ScalarType::uint32: { std::uint32_t v; std::memcpy(&v, p, 4); return v; }
    case ScalarType::float32: { float v; std::memcpy(&v, p, 4); return v; }
    case ScalarType::float64: { double v; std::memcpy(&v, p, 8); return v; }
  }
  return 0.0;
}

class AsciiCursor {
 public:
  explicit AsciiCursor(std::string_view bytes, std::size_t pos) : bytes_(bytes), pos_(pos) {}

  double next(ScalarType t) {
    while (pos_ < bytes_.size() && std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
    if (pos_ >= bytes_.size()) fail("truncated payload", pos_);
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
    const std::string token(bytes_.substr(start, pos_ - start));
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (end != token.c_str() + token.size()) fail("malformed value '" + token + "'", start);
    // Round through the declared storage type so ascii and binary agree.
    if (t == ScalarType::float32) return static_cast<double>(static_cast<float>(v));
    return v;
  }

  std::size_t pos() const { return pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_;
};

int find_property(const Element& e, std::string_view name) {
  for (std::size_t i = 0; i < e.properties.size(); ++i)
    if (e.properties[i].name == name && !e.properties[i].is_list) return static_cast<int>(i);
  return -1;
}

}  // namespace

PointCloud parse_ply(std::string_view bytes) {
  const Header h = parse_header(bytes);

  const Element* vertex = nullptr;
  for (const auto& e : h.elements)
    if (e.name == "vertex") vertex = &e;
  if (!vertex) fail("missing vertex element", 0);

  std::array<int, 3> xyz{};
  const std::array<std::string_view, 3> xyz_names{"x", "y", "z"};
  for (int k = 0; k < 3; ++k) {
    xyz[k] = find_property(*vertex, xyz_names[k]);
    if (xyz[k] < 0) fail("missing coordinate property '" + std::string(xyz_names[k]) + "'", 0);
  }
  std::array<int, 3> rgb{};
  const std::array<std::string_view, 3> rgb_names{"red", "green", "blue"};
  for (int k = 0; k < 3; ++k) {
    rgb[k] = find_property(*vertex, rgb_names[k]);
    if (rgb[k] < 0) fail("missing color property '" + std::string(rgb_names[k]) + "'", 0);
    if (vertex->properties[rgb[k]].type != ScalarType::uint8)
      fail("color property '" + std::string(rgb_names[k]) + "' must be uchar", 0);
  }

  std::vector<Vec3> points;
  std::vector<Rgb> colors;
  points.reserve(vertex->count);
  colors.reserve(vertex->count);

  std::size_t pos = h.body_offset;
  AsciiCursor ascii(bytes, pos);
  std::vector<double> row;
  for (const auto& e : h.elements) {
    const bool keep = (&e == vertex);
    row.assign(e.properties.size(), 0.0);
    for (std::size_t n = 0; n < e.count; ++n) {
      for (std::size_t k = 0; k < e.properties.size(); ++k) {
        const Property& p = e.properties[k];
        if (h.encoding == PlyEncoding::ascii) {
          if (p.is_list) {
            const double count = ascii.next(p.count_type);
            if (count < 0) fail("negative list length", ascii.pos());
            for (std::size_t i = 0; i < static_cast<std::size_t>(count); ++i) ascii.next(p.type);
          } else {
            row[k] = ascii.next(p.type);
          }
        } else {
          if (p.is_list) {
            const double count = read_binary(bytes, pos, p.count_type);
            if (count < 0) fail("negative list length", pos);
            const std::size_t skip = static_cast<std::size_t>(count) * byte_width(p.type);
            if (pos + skip > bytes.size()) fail("truncated payload", pos);
            pos += skip;
          } else {
            row[k] = read_binary(bytes, pos, p.type);
          }
        }
      }
      if (keep) {
        points.emplace_back(row[xyz[0]], row[xyz[1]], row[xyz[2]]);
        colors.push_back(Rgb{static_cast<std::uint8_t>(row[rgb[0]]), static_cast<std::uint8_t>(row[rgb[1]]),
                             static_cast<std::uint8_t>(row[rgb[2]])});
      }
    }
  }

  try {
    return PointCloud(std::move(points), std::move(colors));
  } catch (const Error& e) {
    throw Error(Errc::parse, std::string("ply: ") + e.what());
  }
}

std::string encode_ply(const PointCloud& cloud, PlyEncoding encoding) {
  std::ostringstream out;
  out << "ply\n"
      << "format " << (encoding == PlyEncoding::ascii ? "ascii" : "binary_little_endian") << " 1.0\n"
      << "element vertex " << cloud.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "end_header\n";
  const auto& pts = cloud.points();
  const auto& cols = cloud.colors();
  if (encoding == PlyEncoding::ascii) {
    char buf[128];
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g %u %u %u\n", static_cast<float>(pts[i].x()),
                    static_cast<float>(pts[i].y()), static_cast<float>(pts[i].z()), cols[i].r, cols[i].g,
                    cols[i].b);
      out << buf;
    }
  } else {
    static_assert(sizeof(float) == 4);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      char rec[15];
      for (int k = 0; k < 3; ++k) {
        const float f = static_cast<float>(pts[i][k]);
        std::memcpy(rec + 4 * k, &f, 4);
      }
      rec[12] = static_cast<char>(cols[i].r);
      rec[13] = static_cast<char>(cols[i].g);
      rec[14] = static_cast<char>(cols[i].b);
      out.write(rec, sizeof rec);
    }
  }
  return out.str();
}

PointCloud load_point_cloud(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open point cloud '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_ply(bytes);
}

void save_point_cloud(const PointCloud& cloud, const std::filesystem::path& path, PlyEncoding encoding) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write point cloud '" + path.string() + "'");
  const std::string bytes = encode_ply(cloud, encoding);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::io, "short write to '" + path.string() + "'");
}

}  // namespace seeground
