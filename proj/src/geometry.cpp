#include "sbrl/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sbrl/errors.hpp"

namespace sbrl {

namespace {
constexpr double kMinSegmentLength = 1e-9;
}

int ArcLengthCurve::num_segments() const {
  if (points_.size() < 2) return 0;
  return closed_ ? static_cast<int>(points_.size())
                 : static_cast<int>(points_.size()) - 1;
}

double ArcLengthCurve::normalize_s(double s) const {
  if (closed_) {
    s = std::fmod(s, total_length_);
    if (s < 0.0) s += total_length_;
    return s;
  }
  return std::clamp(s, 0.0, total_length_);
}

void ArcLengthCurve::segment(int i, Vec2* a, Vec2* b, double* s0,
                             double* len) const {
  const int n = static_cast<int>(points_.size());
  *a = points_[i];
  *b = points_[(i + 1) % n];
  *s0 = cum_s_[i];
  const double s1 = (i + 1 < n) ? cum_s_[i + 1] : total_length_;
  *len = s1 - *s0;
}

Vec2 ArcLengthCurve::position_at(double s) const {
  s = normalize_s(s);
  // Find segment containing s.
  const int nseg = num_segments();
  int lo = static_cast<int>(std::upper_bound(cum_s_.begin(), cum_s_.end(), s) -
                            cum_s_.begin()) -
           1;
  lo = std::clamp(lo, 0, nseg - 1);
  Vec2 a, b;
  double s0, len;
  segment(lo, &a, &b, &s0, &len);
  const double u = std::clamp((s - s0) / len, 0.0, 1.0);
  return a + u * (b - a);
}

Vec2 ArcLengthCurve::tangent_at(double s) const {
  s = normalize_s(s);
  const int nseg = num_segments();
  int lo = static_cast<int>(std::upper_bound(cum_s_.begin(), cum_s_.end(), s) -
                            cum_s_.begin()) -
           1;
  lo = std::clamp(lo, 0, nseg - 1);
  Vec2 a, b;
  double s0, len;
  segment(lo, &a, &b, &s0, &len);
  return (b - a) / len;
}

Vec2 ArcLengthCurve::normal_at(double s) const {
  const Vec2 t = tangent_at(s);
  return Vec2(-t.y(), t.x());
}

Projection ArcLengthCurve::project_segment_range(
    const Vec2& point, const std::vector<int>& segs) const {
  Projection best;
  double best_d2 = std::numeric_limits<double>::infinity();
  bool first = true;
  for (int i : segs) {
    Vec2 a, b;
    double s0, len;
    segment(i, &a, &b, &s0, &len);
    const Vec2 d = b - a;
    const double u = std::clamp((point - a).dot(d) / (len * len), 0.0, 1.0);
    const Vec2 foot = a + u * d;
    const double d2 = (point - foot).squaredNorm();
    double s = s0 + u * len;
    if (closed_ && s >= total_length_) s -= total_length_;
    // Ties (shared corners) resolved to the smallest s.
    const double tol = 1e-12 * (1.0 + d2);
    if (first || d2 < best_d2 - tol || (d2 <= best_d2 + tol && s < best.s)) {
      first = false;
      best_d2 = d2;
      const Vec2 tangent = d / len;
      const Vec2 off = point - foot;
      const double cross = tangent.x() * off.y() - tangent.y() * off.x();
      best.s = s;
      best.foot = foot;
      best.lateral = (cross >= 0.0 ? 1.0 : -1.0) * std::sqrt(d2);
    }
  }
  return best;
}

Projection ArcLengthCurve::project_brute(const Vec2& point) const {
  std::vector<int> all(num_segments());
  for (int i = 0; i < num_segments(); ++i) all[i] = i;
  return project_segment_range(point, all);
}

Projection ArcLengthCurve::project(const Vec2& point) const {
  if (grid_.empty()) return project_brute(point);
  const Grid& g = grid_;
  const int cx = static_cast<int>(std::floor((point.x() - g.x0) / g.cell));
  const int cy = static_cast<int>(std::floor((point.y() - g.y0) / g.cell));
  // Far outside the grid: brute force.
  if (cx < -2 || cy < -2 || cx > g.nx + 1 || cy > g.ny + 1)
    return project_brute(point);

  std::vector<int> candidates;
  std::vector<char> seen(num_segments(), 0);
  Projection best;
  double best_dist = std::numeric_limits<double>::infinity();
  bool found = false;
  const int max_ring = g.nx + g.ny + 4;
  for (int ring = 0; ring <= max_ring; ++ring) {
    // Anything in ring r is at least (r-1)*cell away from the query point.
    if (found && (ring - 1) * g.cell > best_dist) break;
    candidates.clear();
    for (int dx = -ring; dx <= ring; ++dx) {
      for (int dy = -ring; dy <= ring; ++dy) {
        if (std::max(std::abs(dx), std::abs(dy)) != ring) continue;
        const int x = cx + dx, y = cy + dy;
        if (x < 0 || y < 0 || x >= g.nx || y >= g.ny) continue;
        for (int seg : g.cells[y * g.nx + x]) {
          if (!seen[seg]) {
            seen[seg] = 1;
            candidates.push_back(seg);
          }
        }
      }
    }
    if (candidates.empty()) continue;
    const Projection p = project_segment_range(point, candidates);
    const double dist = std::abs(p.lateral);
    const double tol = 1e-12 * (1.0 + dist);
    if (!found || dist < best_dist - tol ||
        (dist <= best_dist + tol && p.s < best.s)) {
      best = p;
      best_dist = dist;
      found = true;
    }
  }
  return best;
}

double ArcLengthCurve::progress(double s_from, double s_to) const {
  if (s_from < 0.0 || s_to < 0.0 || s_from > total_length_ ||
      s_to > total_length_ || (closed_ && (s_from >= total_length_ ||
                                           s_to >= total_length_)))
    throw OutOfRange("arc coordinate outside curve domain");
  if (!closed_) return s_to - s_from;
  double d = std::fmod(s_to - s_from, total_length_);
  if (d <= -total_length_ / 2.0) d += total_length_;
  if (d > total_length_ / 2.0) d -= total_length_;
  return d;
}

double ArcLengthCurve::interpolate(const std::vector<double>& values,
                                   double s) const {
  if (values.size() != points_.size())
    throw ShapeMismatch("per-vertex value count does not match curve");
  s = normalize_s(s);
  const int nseg = num_segments();
  int lo = static_cast<int>(std::upper_bound(cum_s_.begin(), cum_s_.end(), s) -
                            cum_s_.begin()) -
           1;
  lo = std::clamp(lo, 0, nseg - 1);
  const int n = static_cast<int>(points_.size());
  const double s0 = cum_s_[lo];
  const double s1 = (lo + 1 < n) ? cum_s_[lo + 1] : total_length_;
  const double u = std::clamp((s - s0) / (s1 - s0), 0.0, 1.0);
  return values[lo] + u * (values[(lo + 1) % n] - values[lo]);
}

void ArcLengthCurve::build_grid() {
  const int nseg = num_segments();
  if (nseg < 8) return;  // brute force is fine for tiny curves
  double min_x = points_[0].x(), max_x = min_x;
  double min_y = points_[0].y(), max_y = min_y;
  for (const Vec2& p : points_) {
    min_x = std::min(min_x, p.x());
    max_x = std::max(max_x, p.x());
    min_y = std::min(min_y, p.y());
    max_y = std::max(max_y, p.y());
  }
  const double mean_seg = total_length_ / nseg;
  double cell = std::max(2.0 * mean_seg, 1e-6);
  const double spanx = max_x - min_x, spany = max_y - min_y;
  // Keep the grid at a sane size.
  while ((spanx / cell) * (spany / cell) > 4.0e6) cell *= 2.0;
  Grid g;
  g.cell = cell;
  g.x0 = min_x - cell;
  g.y0 = min_y - cell;
  g.nx = static_cast<int>(std::ceil((spanx + 2.0 * cell) / cell)) + 1;
  g.ny = static_cast<int>(std::ceil((spany + 2.0 * cell) / cell)) + 1;
  g.cells.assign(static_cast<size_t>(g.nx) * g.ny, {});
  for (int i = 0; i < nseg; ++i) {
    Vec2 a, b;
    double s0, len;
    segment(i, &a, &b, &s0, &len);
    const int x0 = static_cast<int>(std::floor(
        (std::min(a.x(), b.x()) - g.x0) / cell));
    const int x1 = static_cast<int>(std::floor(
        (std::max(a.x(), b.x()) - g.x0) / cell));
    const int y0 = static_cast<int>(std::floor(
        (std::min(a.y(), b.y()) - g.y0) / cell));
    const int y1 = static_cast<int>(std::floor(
        (std::max(a.y(), b.y()) - g.y0) / cell));
    for (int y = std::max(0, y0); y <= std::min(g.ny - 1, y1); ++y)
      for (int x = std::max(0, x0); x <= std::min(g.nx - 1, x1); ++x)
        g.cells[y * g.nx + x].push_back(i);
  }
  grid_ = std::move(g);
}

ArcLengthCurve build_curve(const std::vector<Vec2>& points, bool closed) {
  if (points.size() < 2) throw DegenerateCurve("need at least 2 points");
  ArcLengthCurve c;
  c.points_ = points;
  c.closed_ = closed;
  c.cum_s_.resize(points.size());
  c.cum_s_[0] = 0.0;
  for (size_t i = 1; i < points.size(); ++i) {
    const double len = (points[i] - points[i - 1]).norm();
    if (len <= kMinSegmentLength)
      throw DegenerateCurve("zero-length segment at index " +
                            std::to_string(i));
    c.cum_s_[i] = c.cum_s_[i - 1] + len;
  }
  c.total_length_ = c.cum_s_.back();
  if (closed) {
    const double len = (points.front() - points.back()).norm();
    if (len <= kMinSegmentLength)
      throw DegenerateCurve("zero-length closing segment");
    c.total_length_ += len;
  }
  c.build_grid();
  return c;
}

double ReferenceTrajectory::lap_time() const {
  // Integrate dt = ds / v over the curve at vertex resolution.
  const auto& cs = curve.cum_s();
  const int nseg = curve.num_segments();
  double t = 0.0;
  const int n = static_cast<int>(curve.points().size());
  for (int i = 0; i < nseg; ++i) {
    const double s1 = (i + 1 < n) ? cs[i + 1] : curve.total_length();
    const double ds = s1 - cs[i];
    const double v0 = speed[i], v1 = speed[(i + 1) % n];
    t += ds * 2.0 / (v0 + v1);
  }
  return t;
}

Vec2 to_local(const Pose& pose, const Vec2& point) {
  const double c = std::cos(pose.heading), s = std::sin(pose.heading);
  const Vec2 d = point - pose.position;
  return Vec2(c * d.x() + s * d.y(), -s * d.x() + c * d.y());
}

std::vector<Vec2> to_local(const Pose& pose, const std::vector<Vec2>& points) {
  std::vector<Vec2> out;
  out.reserve(points.size());
  for (const Vec2& p : points) out.push_back(to_local(pose, p));
  return out;
}

Vec2 from_local(const Pose& pose, const Vec2& point) {
  const double c = std::cos(pose.heading), s = std::sin(pose.heading);
  return pose.position +
         Vec2(c * point.x() - s * point.y(), s * point.x() + c * point.y());
}

std::vector<double> boundary_observation(const Track& track,
                                         const Pose& pose) {
  const ArcLengthCurve& cl = track.centerline;
  const Projection proj = cl.project(pose.position);
  std::vector<double> out;
  out.reserve(kBoundaryObsSize);
  for (double d : kBoundaryDistances) {
    double s = proj.s + d;
    if (!cl.closed()) s = std::min(s, cl.total_length());
    s = cl.normalize_s(s);
    const Vec2 p = cl.position_at(s);
    const Vec2 n = cl.normal_at(s);
    const Vec2 left = to_local(pose, p + track.width_left_at(s) * n);
    const Vec2 right = to_local(pose, p - track.width_right_at(s) * n);
    out.push_back(left.x());
    out.push_back(left.y());
    out.push_back(right.x());
    out.push_back(right.y());
  }
  return out;
}

std::vector<double> waypoint_observation(const ReferenceTrajectory& ref,
                                         const Pose& pose) {
  const Projection proj = ref.curve.project(pose.position);
  std::vector<double> out;
  out.reserve(kWaypointObsSize);
  // 1 ms sub-stepping of ds = v(s) dt along the speed profile.
  constexpr double kSubDt = 1e-3;
  const int sub_per_waypoint = static_cast<int>(kWaypointSpacingSec / kSubDt);
  double s = proj.s;
  for (int k = 0; k < kWaypointCount; ++k) {
    for (int i = 0; i < sub_per_waypoint; ++i) {
      s += ref.speed_at(s) * kSubDt;
      if (ref.curve.closed()) s = ref.curve.normalize_s(s);
    }
    const Vec2 wp = to_local(pose, ref.curve.position_at(s));
    out.push_back(wp.x());
    out.push_back(wp.y());
  }
  return out;
}

namespace {

bool parse_header(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty file");
  std::istringstream ss(line);
  std::string key, value;
  ss >> key >> value;
  if (key != "closed:") throw IoError("expected 'closed:' header");
  if (value == "true") return true;
  if (value == "false") return false;
  throw IoError("bad closed flag: " + value);
}

}  // namespace

void save_track(const Track& track, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out.precision(17);
  out << "closed: " << (track.centerline.closed() ? "true" : "false") << "\n";
  const auto& pts = track.centerline.points();
  for (size_t i = 0; i < pts.size(); ++i)
    out << pts[i].x() << " " << pts[i].y() << " " << track.half_width_left[i]
        << " " << track.half_width_right[i] << "\n";
}

Track load_track(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  const bool closed = parse_header(in);
  std::vector<Vec2> pts;
  Track t;
  double x, y, wl, wr;
  while (in >> x >> y >> wl >> wr) {
    if (wl <= 0.0 || wr <= 0.0) throw InvalidGeometry("half width must be > 0");
    pts.emplace_back(x, y);
    t.half_width_left.push_back(wl);
    t.half_width_right.push_back(wr);
  }
  t.centerline = build_curve(pts, closed);
  return t;
}

void save_reference(const ReferenceTrajectory& ref, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out.precision(17);
  out << "closed: " << (ref.curve.closed() ? "true" : "false") << "\n";
  const auto& pts = ref.curve.points();
  for (size_t i = 0; i < pts.size(); ++i)
    out << pts[i].x() << " " << pts[i].y() << " " << ref.speed[i] << "\n";
}

ReferenceTrajectory load_reference(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  const bool closed = parse_header(in);
  std::vector<Vec2> pts;
  ReferenceTrajectory ref;
  double x, y, v;
  while (in >> x >> y >> v) {
    if (v <= 0.0) throw InvalidGeometry("reference speed must be > 0");
    pts.emplace_back(x, y);
    ref.speed.push_back(v);
  }
  ref.curve = build_curve(pts, closed);
  return ref;
}

}  // namespace sbrl
