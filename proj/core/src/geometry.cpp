#include "blindtrack/geometry.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace blindtrack {
namespace {

using Span = std::pair<int, int>;  // [first, second)
using Spans = std::vector<Span>;

struct Band {
  int y0;
  int y1;
  Spans spans;
};

std::vector<Band> to_bands(const std::vector<Rect>& rects) {
  std::vector<Band> bands;
  for (const Rect& r : rects) {
    if (bands.empty() || bands.back().y0 != r.y) {
      bands.push_back({r.y, r.bottom(), {}});
    }
    bands.back().spans.emplace_back(r.x, r.right());
  }
  return bands;
}

// Coalesces vertically adjacent bands with equal spans and flattens.
std::vector<Rect> from_bands(std::vector<Band> bands) {
  std::vector<Band> merged;
  for (Band& b : bands) {
    if (b.spans.empty() || b.y0 >= b.y1) continue;
    if (!merged.empty() && merged.back().y1 == b.y0 &&
        merged.back().spans == b.spans) {
      merged.back().y1 = b.y1;
    } else {
      merged.push_back(std::move(b));
    }
  }
  std::vector<Rect> out;
  for (const Band& b : merged) {
    for (const Span& s : b.spans) {
      out.push_back({s.first, b.y0, s.second - s.first, b.y1 - b.y0});
    }
  }
  return out;
}

// Sorts and merges overlapping or touching spans.
Spans normalize(Spans spans) {
  std::sort(spans.begin(), spans.end());
  Spans out;
  for (const Span& s : spans) {
    if (s.first >= s.second) continue;
    if (!out.empty() && s.first <= out.back().second) {
      out.back().second = std::max(out.back().second, s.second);
    } else {
      out.push_back(s);
    }
  }
  return out;
}

enum class Op { kUnion, kIntersect, kSubtract };

bool apply(Op op, bool a, bool b) {
  switch (op) {
    case Op::kUnion:
      return a || b;
    case Op::kIntersect:
      return a && b;
    case Op::kSubtract:
      return a && !b;
  }
  return false;
}

Spans combine(const Spans& a, const Spans& b, Op op) {
  std::vector<int> xs;
  xs.reserve(2 * (a.size() + b.size()));
  for (const Span& s : a) {
    xs.push_back(s.first);
    xs.push_back(s.second);
  }
  for (const Span& s : b) {
    xs.push_back(s.first);
    xs.push_back(s.second);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

  Spans out;
  std::size_t ia = 0;
  std::size_t ib = 0;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    const int lo = xs[i];
    const int hi = xs[i + 1];
    while (ia < a.size() && a[ia].second <= lo) ++ia;
    while (ib < b.size() && b[ib].second <= lo) ++ib;
    const bool in_a = ia < a.size() && a[ia].first <= lo;
    const bool in_b = ib < b.size() && b[ib].first <= lo;
    if (!apply(op, in_a, in_b)) continue;
    if (!out.empty() && out.back().second == lo) {
      out.back().second = hi;
    } else {
      out.emplace_back(lo, hi);
    }
  }
  return out;
}

std::vector<Rect> boolean_op(const std::vector<Rect>& lhs,
                             const std::vector<Rect>& rhs, Op op) {
  const std::vector<Band> a = to_bands(lhs);
  const std::vector<Band> b = to_bands(rhs);
  std::vector<int> ys;
  for (const Band& band : a) {
    ys.push_back(band.y0);
    ys.push_back(band.y1);
  }
  for (const Band& band : b) {
    ys.push_back(band.y0);
    ys.push_back(band.y1);
  }
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());

  static const Spans kNone;
  std::vector<Band> out;
  std::size_t ia = 0;
  std::size_t ib = 0;
  for (std::size_t i = 0; i + 1 < ys.size(); ++i) {
    const int lo = ys[i];
    const int hi = ys[i + 1];
    while (ia < a.size() && a[ia].y1 <= lo) ++ia;
    while (ib < b.size() && b[ib].y1 <= lo) ++ib;
    const Spans& sa = (ia < a.size() && a[ia].y0 <= lo) ? a[ia].spans : kNone;
    const Spans& sb = (ib < b.size() && b[ib].y0 <= lo) ? b[ib].spans : kNone;
    out.push_back({lo, hi, combine(sa, sb, op)});
  }
  return from_bands(std::move(out));
}

int clamp_to(int v, int lo, int hi_inclusive) {
  return std::clamp(v, lo, hi_inclusive);
}

}  // namespace

Region Region::from_rect(const Rect& r) {
  if (r.empty()) return {};
  return Region({r});
}

Region Region::from_point(Point p) { return from_rect({p.x, p.y, 1, 1}); }

Region Region::from_rects(std::span<const Rect> rects) {
  std::vector<int> ys;
  for (const Rect& r : rects) {
    if (r.empty()) continue;
    ys.push_back(r.y);
    ys.push_back(r.bottom());
  }
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
  std::vector<Band> bands;
  for (std::size_t i = 0; i + 1 < ys.size(); ++i) {
    Spans spans;
    for (const Rect& r : rects) {
      if (r.empty()) continue;
      if (r.y <= ys[i] && r.bottom() >= ys[i + 1]) {
        spans.emplace_back(r.x, r.right());
      }
    }
    bands.push_back({ys[i], ys[i + 1], normalize(std::move(spans))});
  }
  return Region(from_bands(std::move(bands)));
}

std::int64_t Region::area() const {
  std::int64_t total = 0;
  for (const Rect& r : rects_) total += r.area();
  return total;
}

Rect Region::bounding_box() const {
  if (rects_.empty()) return {};
  int x0 = rects_.front().x;
  int x1 = rects_.front().right();
  const int y0 = rects_.front().y;
  const int y1 = rects_.back().bottom();
  for (const Rect& r : rects_) {
    x0 = std::min(x0, r.x);
    x1 = std::max(x1, r.right());
  }
  return {x0, y0, x1 - x0, y1 - y0};
}

bool Region::contains(Point p) const {
  return std::any_of(rects_.begin(), rects_.end(),
                     [p](const Rect& r) { return r.contains(p); });
}

bool Region::within(const Rect& r) const {
  return std::all_of(rects_.begin(), rects_.end(),
                     [&r](const Rect& m) { return r.contains(m); });
}

bool Region::intersects(const Rect& r) const {
  return std::any_of(rects_.begin(), rects_.end(),
                     [&r](const Rect& m) { return m.intersects(r); });
}

Region Region::unite(const Region& o) const {
  if (o.empty()) return *this;
  if (empty()) return o;
  return Region(boolean_op(rects_, o.rects_, Op::kUnion));
}

Region Region::intersect(const Region& o) const {
  if (empty() || o.empty()) return {};
  return Region(boolean_op(rects_, o.rects_, Op::kIntersect));
}

Region Region::intersect(const Rect& r) const {
  if (r.empty() || empty()) return {};
  if (within(r)) return *this;
  return intersect(from_rect(r));
}

Region Region::subtract(const Region& o) const {
  if (empty() || o.empty()) return *this;
  return Region(boolean_op(rects_, o.rects_, Op::kSubtract));
}

Region Region::subtract(std::span<const Rect> holes) const {
  std::vector<Rect> hits;
  for (const Rect& h : holes) {
    if (intersects(h)) hits.push_back(h);
  }
  if (hits.empty()) return *this;
  return subtract(from_rects(hits));
}

Region Region::translate_clip(Delta d, const Rect& screen) const {
  if (empty() || screen.empty()) return {};
  const int xmax = screen.right() - 1;
  const int ymax = screen.bottom() - 1;
  std::vector<Rect> images;
  images.reserve(rects_.size());
  bool clipped = false;
  for (const Rect& r : rects_) {
    const int x0 = clamp_to(r.x + d.dx, screen.x, xmax);
    const int x1 = clamp_to(r.right() - 1 + d.dx, screen.x, xmax);
    const int y0 = clamp_to(r.y + d.dy, screen.y, ymax);
    const int y1 = clamp_to(r.bottom() - 1 + d.dy, screen.y, ymax);
    const Rect image{x0, y0, x1 - x0 + 1, y1 - y0 + 1};
    clipped = clipped || image.w != r.w || image.h != r.h;
    images.push_back(image);
  }
  // A pure shift preserves canonical form; clamping may create overlaps.
  if (!clipped) return Region(std::move(images));
  return from_rects(images);
}

Region Region::translated(Delta d) const {
  std::vector<Rect> out = rects_;
  for (Rect& r : out) {
    r.x += d.dx;
    r.y += d.dy;
  }
  return Region(std::move(out));
}

std::string Region::serialize() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < rects_.size(); ++i) {
    const Rect& r = rects_[i];
    if (i) os << ';';
    os << r.x << ',' << r.y << ',' << r.w << ',' << r.h;
  }
  return os.str();
}

Region Region::parse(const std::string& text) {
  std::vector<Rect> rects;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find(';', pos);
    if (end == std::string::npos) end = text.size();
    int v[4] = {0, 0, 0, 0};
    const char* p = text.data() + pos;
    const char* stop = text.data() + end;
    for (int k = 0; k < 4; ++k) {
      auto [next, ec] = std::from_chars(p, stop, v[k]);
      if (ec != std::errc{}) throw std::invalid_argument("bad region: " + text);
      p = next;
      if (k < 3) {
        if (p == stop || *p != ',') throw std::invalid_argument("bad region: " + text);
        ++p;
      }
    }
    if (p != stop) throw std::invalid_argument("bad region: " + text);
    rects.push_back({v[0], v[1], v[2], v[3]});
    pos = end + 1;
  }
  return from_rects(rects);
}

Region translate_clip(const Region& r, Delta d, const Rect& screen) {
  return r.translate_clip(d, screen);
}

Region intersect(const Region& r, const Rect& rect) { return r.intersect(rect); }

Region subtract(const Region& r, std::span<const Rect> holes) {
  return r.subtract(holes);
}

std::int64_t area(const Region& r) { return r.area(); }

bool fits_within(const Region& r, const Rect& rect) {
  if (r.empty()) return true;
  const Rect box = r.bounding_box();
  return r.area() <= rect.area() && box.w <= rect.w && box.h <= rect.h;
}

}  // namespace blindtrack
