#include "patchgraph/GraphIo.hpp"

#include "patchgraph/Error.hpp"

#include "json.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace patchgraph {

using ordered_json = nlohmann::ordered_json;

std::string graph_to_json(const RoadGraph& g)
{
  ordered_json doc;
  doc["image_size"] = g.image_size;
  doc["width"] = g.width;
  ordered_json nodes = ordered_json::array();
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    ordered_json node;
    node["id"] = i;
    node["x"] = g.nodes[i].pos.x;
    node["y"] = g.nodes[i].pos.y;
    if (g.nodes[i].patch) node["patch"] = *g.nodes[i].patch;
    nodes.push_back(std::move(node));
  }
  doc["nodes"] = std::move(nodes);
  ordered_json edges = ordered_json::array();
  for (const RoadEdge& e : g.edges) {
    ordered_json edge;
    edge["a"] = e.a;
    edge["b"] = e.b;
    if (!e.poly.empty()) {
      ordered_json poly = ordered_json::array();
      for (Point p : e.poly) poly.push_back({p.x, p.y});
      edge["poly"] = std::move(poly);
    }
    edges.push_back(std::move(edge));
  }
  doc["edges"] = std::move(edges);
  return doc.dump() + "\n";
}

namespace {

template <typename T>
T get_field(const nlohmann::json& obj, const char* key)
{
  if (!obj.is_object() || !obj.contains(key)) {
    throw DataError(std::string("graph JSON: missing field '") + key + "'");
  }
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw DataError(std::string("graph JSON: field '") + key + "' has the wrong type");
  }
}

} // namespace

RoadGraph graph_from_json(const std::string& text)
{
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("graph JSON: ") + e.what());
  }
  RoadGraph g;
  g.image_size = get_field<std::uint32_t>(doc, "image_size");
  g.width = doc.contains("width") ? get_field<double>(doc, "width") : 15.0;

  const auto& nodes = doc.contains("nodes") ? doc.at("nodes") : nlohmann::json::array();
  if (!nodes.is_array()) throw DataError("graph JSON: 'nodes' must be an array");
  g.nodes.resize(nodes.size());
  std::vector<bool> seen(nodes.size(), false);
  for (const auto& node : nodes) {
    const auto id = get_field<std::uint64_t>(node, "id");
    if (id >= nodes.size() || seen[id]) throw DataError("graph JSON: node ids must be dense and unique");
    seen[id] = true;
    g.nodes[id].pos = {get_field<double>(node, "x"), get_field<double>(node, "y")};
    if (node.contains("patch")) g.nodes[id].patch = get_field<std::uint32_t>(node, "patch");
  }

  const auto& edges = doc.contains("edges") ? doc.at("edges") : nlohmann::json::array();
  if (!edges.is_array()) throw DataError("graph JSON: 'edges' must be an array");
  for (const auto& edge : edges) {
    RoadEdge e{get_field<std::uint32_t>(edge, "a"), get_field<std::uint32_t>(edge, "b"), {}};
    if (edge.contains("poly")) {
      for (const auto& pt : get_field<nlohmann::json>(edge, "poly")) {
        if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number() || !pt[1].is_number()) {
          throw DataError("graph JSON: polyline points must be [x, y] pairs");
        }
        e.poly.push_back({pt[0].get<double>(), pt[1].get<double>()});
      }
    }
    g.edges.push_back(std::move(e));
  }
  validate(g);
  return g;
}

void write_graph(const std::filesystem::path& path, const RoadGraph& g)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << graph_to_json(g);
  if (!out) throw DataError("failed writing " + path.string());
}

RoadGraph read_graph(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return graph_from_json(buf.str());
}

void write_pgm(std::ostream& out, const SegMask& mask)
{
  out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
  std::vector<char> bytes(mask.values.size());
  std::transform(mask.values.begin(), mask.values.end(), bytes.begin(), [](float v) {
    const float c = std::clamp(v, 0.0f, 1.0f);
    return static_cast<char>(static_cast<unsigned char>(std::lround(c * 255.0f)));
  });
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

namespace {

std::uint64_t read_header_int(std::istream& in)
{
  int c = in.get();
  for (;;) {
    while (c != EOF && std::isspace(c)) c = in.get();
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
      continue;
    }
    break;
  }
  if (c == EOF || !std::isdigit(c)) throw DataError("PGM: malformed header");
  std::uint64_t v = 0;
  while (c != EOF && std::isdigit(c)) {
    v = v * 10 + static_cast<std::uint64_t>(c - '0');
    if (v > (1u << 30)) throw DataError("PGM: header value too large");
    c = in.get();
  }
  if (c == EOF || !std::isspace(c)) throw DataError("PGM: malformed header");
  return v;
}

} // namespace

SegMask read_pgm(std::istream& in)
{
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || magic[1] != '5') throw DataError("PGM: expected binary P5 magic");
  const auto w = read_header_int(in);
  const auto h = read_header_int(in);
  const auto maxval = read_header_int(in);
  if (w == 0 || h == 0) throw DataError("PGM: empty image");
  if (maxval == 0 || maxval > 255) throw DataError("PGM: only 8-bit maxval is supported");
  SegMask mask(static_cast<std::uint32_t>(w), static_cast<std::uint32_t>(h));
  std::vector<unsigned char> bytes(mask.values.size());
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) throw DataError("PGM: truncated pixel data");
  for (std::size_t k = 0; k < bytes.size(); ++k) {
    mask.values[k] = std::min(1.0f, static_cast<float>(bytes[k]) / static_cast<float>(maxval));
  }
  return mask;
}

void write_pgm(const std::filesystem::path& path, const SegMask& mask)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_pgm(out, mask);
  if (!out) throw DataError("failed writing " + path.string());
}

SegMask read_pgm(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  return read_pgm(in);
}

} // namespace patchgraph
