#pragma once

// Conforming P1 meshes on intervals (d = 1) and triangulated rectangles (d = 2),
// with boundary facets tagged for the displacement (D1/N1) and phase-field
// (D2/N2) boundary conditions.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "phasefrac/errors.hpp"

namespace phasefrac {

enum class Face { Left, Right, Bottom, Top };

inline std::string to_string(Face f) {
  switch (f) {
    case Face::Left: return "left";
    case Face::Right: return "right";
    case Face::Bottom: return "bottom";
    case Face::Top: return "top";
  }
  return "?";
}

inline Face face_from_string(const std::string& s) {
  if (s == "left") return Face::Left;
  if (s == "right") return Face::Right;
  if (s == "bottom") return Face::Bottom;
  if (s == "top") return Face::Top;
  throw ConfigError("unknown boundary face '" + s + "'");
}

enum class Tag : std::uint8_t { D1 = 1, D2 = 2, N1 = 4, N2 = 8 };

/// Bit set over {D1, D2, N1, N2}.
class TagSet {
 public:
  constexpr TagSet() = default;
  constexpr TagSet(std::initializer_list<Tag> tags) {
    for (Tag t : tags) bits_ |= static_cast<std::uint8_t>(t);
  }

  constexpr bool has(Tag t) const { return (bits_ & static_cast<std::uint8_t>(t)) != 0; }
  constexpr void add(Tag t) { bits_ |= static_cast<std::uint8_t>(t); }
  constexpr bool operator==(const TagSet&) const = default;

  /// Exactly one tag of each complementary pair.
  constexpr bool consistent() const {
    return has(Tag::D1) != has(Tag::N1) && has(Tag::D2) != has(Tag::N2);
  }

 private:
  std::uint8_t bits_ = 0;
};

inline Tag tag_from_string(const std::string& s) {
  if (s == "D1") return Tag::D1;
  if (s == "D2") return Tag::D2;
  if (s == "N1") return Tag::N1;
  if (s == "N2") return Tag::N2;
  throw ConfigError("unknown boundary tag '" + s + "'");
}

using Point = std::array<double, 2>;
using BoundarySpec = std::map<Face, TagSet>;

struct Facet {
  std::array<int, 2> nodes{};
  int node_count = 1;  // 1 in 1D (an endpoint), 2 in 2D (an edge)
  Face face = Face::Left;
  TagSet tags;
};

struct Mesh {
  int dim = 1;
  std::vector<Point> nodes;
  std::vector<std::array<int, 3>> elements;  // only the first dim+1 entries are used
  std::vector<Facet> facets;
  Point origin{0.0, 0.0};
  Point extents{1.0, 0.0};

  int nodes_per_element() const { return dim + 1; }
  int node_count() const { return static_cast<int>(nodes.size()); }
  int element_count() const { return static_cast<int>(elements.size()); }

  double element_measure(int e) const {
    const auto& el = elements[e];
    if (dim == 1) return nodes[el[1]][0] - nodes[el[0]][0];
    const Point& a = nodes[el[0]];
    const Point& b = nodes[el[1]];
    const Point& c = nodes[el[2]];
    return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
  }

  double facet_measure(const Facet& f) const {
    if (f.node_count == 1) return 1.0;
    const Point& a = nodes[f.nodes[0]];
    const Point& b = nodes[f.nodes[1]];
    return std::hypot(b[0] - a[0], b[1] - a[1]);
  }

  /// Gradients of the barycentric shape functions, constant on element e.
  std::array<Point, 3> shape_gradients(int e) const {
    const auto& el = elements[e];
    std::array<Point, 3> g{};
    if (dim == 1) {
      double h = element_measure(e);
      g[0] = {-1.0 / h, 0.0};
      g[1] = {1.0 / h, 0.0};
      return g;
    }
    const Point& a = nodes[el[0]];
    const Point& b = nodes[el[1]];
    const Point& c = nodes[el[2]];
    double twice_area = 2.0 * element_measure(e);
    g[0] = {(b[1] - c[1]) / twice_area, (c[0] - b[0]) / twice_area};
    g[1] = {(c[1] - a[1]) / twice_area, (a[0] - c[0]) / twice_area};
    g[2] = {(a[1] - b[1]) / twice_area, (b[0] - a[0]) / twice_area};
    return g;
  }

  /// Sorted node indices lying on a facet carrying `tag`.
  std::vector<int> tagged_nodes(Tag tag) const {
    std::set<int> s;
    for (const auto& f : facets)
      if (f.tags.has(tag))
        for (int i = 0; i < f.node_count; ++i) s.insert(f.nodes[i]);
    return {s.begin(), s.end()};
  }

  std::vector<bool> tagged_mask(Tag tag) const {
    std::vector<bool> m(nodes.size(), false);
    for (int i : tagged_nodes(tag)) m[i] = true;
    return m;
  }

  double total_measure() const {
    double s = 0.0;
    for (int e = 0; e < element_count(); ++e) s += element_measure(e);
    return s;
  }

  /// Throws ConfigError on non-positive elements, bad indices or bad tags.
  void validate() const {
    if (dim != 1 && dim != 2) throw ConfigError("mesh dimension must be 1 or 2");
    const int n = node_count();
    for (int e = 0; e < element_count(); ++e) {
      for (int i = 0; i < nodes_per_element(); ++i)
        if (elements[e][i] < 0 || elements[e][i] >= n)
          throw ConfigError("element " + std::to_string(e) + " has an out-of-range node");
      if (!(element_measure(e) > 0.0))
        throw ConfigError("element " + std::to_string(e) + " has non-positive measure");
    }
    for (const auto& f : facets) {
      for (int i = 0; i < f.node_count; ++i)
        if (f.nodes[i] < 0 || f.nodes[i] >= n)
          throw ConfigError("boundary facet has an out-of-range node");
      if (!f.tags.consistent())
        throw ConfigError("boundary facet on face '" + to_string(f.face) +
                          "' must carry exactly one of D1/N1 and one of D2/N2");
    }
  }
};

/// Same tag set on every face of a dim-dimensional box.
inline BoundarySpec uniform_boundary(int dim, TagSet tags) {
  BoundarySpec spec{{Face::Left, tags}, {Face::Right, tags}};
  if (dim == 2) {
    spec[Face::Bottom] = tags;
    spec[Face::Top] = tags;
  }
  return spec;
}

/// Uniform grid on [0, extents[0]] (x [0, extents[1]]). In 2D every cell is
/// split along its (lower-left, upper-right) diagonal into two counter-clockwise
/// triangles.
inline Mesh build_structured_mesh(int dim, const std::vector<double>& extents,
                                  const std::vector<int>& cells, const BoundarySpec& boundary) {
  if (dim != 1 && dim != 2) throw ConfigError("mesh dimension must be 1 or 2");
  if (static_cast<int>(extents.size()) != dim || static_cast<int>(cells.size()) != dim)
    throw ConfigError("extents and cells must have one entry per axis");
  for (int a = 0; a < dim; ++a) {
    if (!(extents[a] > 0.0)) throw ConfigError("mesh extents must be positive");
    if (cells[a] < 1) throw ConfigError("mesh needs at least one cell per axis");
  }
  std::vector<Face> faces{Face::Left, Face::Right};
  if (dim == 2) {
    faces.push_back(Face::Bottom);
    faces.push_back(Face::Top);
  }
  for (const auto& [face, tags] : boundary)
    if (std::find(faces.begin(), faces.end(), face) == faces.end())
      throw ConfigError("face '" + to_string(face) + "' does not exist in " +
                        std::to_string(dim) + "D");
  auto tags_of = [&](Face f) {
    auto it = boundary.find(f);
    if (it == boundary.end() || !it->second.consistent())
      throw ConfigError("face '" + to_string(f) +
                        "' must carry exactly one of D1/N1 and one of D2/N2");
    return it->second;
  };

  Mesh m;
  m.dim = dim;
  m.extents = {extents[0], dim == 2 ? extents[1] : 0.0};
  if (dim == 1) {
    const int nx = cells[0];
    for (int i = 0; i <= nx; ++i) m.nodes.push_back({extents[0] * i / nx, 0.0});
    for (int i = 0; i < nx; ++i) m.elements.push_back({i, i + 1, -1});
    m.facets.push_back({{0, -1}, 1, Face::Left, tags_of(Face::Left)});
    m.facets.push_back({{nx, -1}, 1, Face::Right, tags_of(Face::Right)});
    return m;
  }
  const int nx = cells[0];
  const int ny = cells[1];
  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      m.nodes.push_back({extents[0] * i / nx, extents[1] * j / ny});
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      m.elements.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      m.elements.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  for (int i = 0; i < nx; ++i) {
    m.facets.push_back({{id(i, 0), id(i + 1, 0)}, 2, Face::Bottom, tags_of(Face::Bottom)});
    m.facets.push_back({{id(i, ny), id(i + 1, ny)}, 2, Face::Top, tags_of(Face::Top)});
  }
  for (int j = 0; j < ny; ++j) {
    m.facets.push_back({{id(0, j), id(0, j + 1)}, 2, Face::Left, tags_of(Face::Left)});
    m.facets.push_back({{id(nx, j), id(nx, j + 1)}, 2, Face::Right, tags_of(Face::Right)});
  }
  return m;
}

}  // namespace phasefrac
