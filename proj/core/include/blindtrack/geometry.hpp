#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace blindtrack {

/// Integer pixel coordinate.
struct Point {
  int x = 0;
  int y = 0;

  friend bool operator==(const Point&, const Point&) = default;
  friend auto operator<=>(const Point&, const Point&) = default;
};

/// Relative pointer movement.
struct Delta {
  int dx = 0;
  int dy = 0;

  friend bool operator==(const Delta&, const Delta&) = default;
  Delta operator+(const Delta& o) const { return {dx + o.dx, dy + o.dy}; }
  Delta operator-() const { return {-dx, -dy}; }
};

/// Axis-aligned rectangle covering the half-open pixel span
/// [x, x + w) x [y, y + h).
struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  int right() const { return x + w; }
  int bottom() const { return y + h; }
  bool empty() const { return w <= 0 || h <= 0; }
  std::int64_t area() const { return empty() ? 0 : std::int64_t{w} * h; }
  bool contains(Point p) const {
    return p.x >= x && p.x < x + w && p.y >= y && p.y < y + h;
  }
  bool contains(const Rect& r) const {
    return r.empty() || (r.x >= x && r.y >= y && r.right() <= right() &&
                         r.bottom() <= bottom());
  }
  bool intersects(const Rect& r) const {
    return !empty() && !r.empty() && r.x < right() && x < r.right() &&
           r.y < bottom() && y < r.bottom();
  }
  Point center() const { return {x + w / 2, y + h / 2}; }

  friend bool operator==(const Rect&, const Rect&) = default;
  friend auto operator<=>(const Rect&, const Rect&) = default;
};

/// Exact union of pairwise-disjoint rectangles.
///
/// Stored in canonical band form: the y axis is cut into maximal bands in
/// which the set of covered x spans is constant, adjacent bands with equal
/// span sets are merged, and spans inside a band are sorted and coalesced.
/// Two regions covering the same point set therefore have identical rect
/// lists, so structural equality is point-set equality.
class Region {
 public:
  Region() = default;

  static Region from_rect(const Rect& r);
  static Region from_point(Point p);
  /// Union of arbitrary (possibly overlapping) rectangles.
  static Region from_rects(std::span<const Rect> rects);

  bool empty() const { return rects_.empty(); }
  std::int64_t area() const;
  Rect bounding_box() const;
  bool contains(Point p) const;
  /// True when every pixel of the region lies inside `r`.
  bool within(const Rect& r) const;
  bool intersects(const Rect& r) const;

  /// Canonical rect list sorted by (y, x).
  const std::vector<Rect>& rects() const { return rects_; }

  Region unite(const Region& o) const;
  Region intersect(const Region& o) const;
  Region intersect(const Rect& r) const;
  Region subtract(const Region& o) const;
  Region subtract(std::span<const Rect> holes) const;
  /// Image of the region under p -> clamp(p + d, screen), clamping each
  /// axis independently, as a pointer does at the screen edges.
  Region translate_clip(Delta d, const Rect& screen) const;
  /// Plain translation without clipping.
  Region translated(Delta d) const;

  /// "x,y,w,h;x,y,w,h;..." in canonical order. Empty region -> "".
  std::string serialize() const;
  static Region parse(const std::string& text);

  friend bool operator==(const Region&, const Region&) = default;

 private:
  explicit Region(std::vector<Rect> canonical) : rects_(std::move(canonical)) {}

  std::vector<Rect> rects_;
};

Region translate_clip(const Region& r, Delta d, const Rect& screen);
Region intersect(const Region& r, const Rect& rect);
Region subtract(const Region& r, std::span<const Rect> holes);
std::int64_t area(const Region& r);

/// Launch-accuracy criterion: the region is no larger than `rect` and its
/// bounding box fits inside a window of the rect's size, so one correction
/// vector can move every candidate position into the rect.
bool fits_within(const Region& r, const Rect& rect);

}  // namespace blindtrack
