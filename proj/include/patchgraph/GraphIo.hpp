#pragma once

#include "patchgraph/Geometry.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace patchgraph {

// Road graph JSON:
//   {"image_size":u32,"width":f,"nodes":[{"id":u32,"x":f,"y":f[,"patch":u32]}],
//    "edges":[{"a":u32,"b":u32[,"poly":[[x,y],...]]}]}
// Keys are written in that order; doubles use shortest round-trip form.
std::string graph_to_json(const RoadGraph& g);
RoadGraph graph_from_json(const std::string& text);
void write_graph(const std::filesystem::path& path, const RoadGraph& g);
RoadGraph read_graph(const std::filesystem::path& path);

// Binary PGM (P5) with maxval 255: 0 background, 255 road.
void write_pgm(std::ostream& out, const SegMask& mask);
SegMask read_pgm(std::istream& in);
void write_pgm(const std::filesystem::path& path, const SegMask& mask);
SegMask read_pgm(const std::filesystem::path& path);

} // namespace patchgraph
