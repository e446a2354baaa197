#ifndef SBRL_GEOMETRY_HPP_
#define SBRL_GEOMETRY_HPP_

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace sbrl {

using Vec2 = Eigen::Vector2d;

/// Planar rigid pose (position + heading, x-axis along heading).
struct Pose {
  Vec2 position{0.0, 0.0};
  double heading = 0.0;
};

/// Result of projecting a point onto a curve.
/// `lateral` is signed: positive left of the direction of travel.
struct Projection {
  double s = 0.0;
  double lateral = 0.0;
  Vec2 foot{0.0, 0.0};
};

/// Piecewise-linear planar curve parameterized by arc length.
/// For closed curves the valid parameter domain is [0, total_length) and the
/// last point connects back to the first.
class ArcLengthCurve {
 public:
  ArcLengthCurve() = default;

  const std::vector<Vec2>& points() const { return points_; }
  const std::vector<double>& cum_s() const { return cum_s_; }
  bool closed() const { return closed_; }
  double total_length() const { return total_length_; }
  int num_segments() const;

  // Wraps (closed) or clamps (open) an arc coordinate into the domain.
  double normalize_s(double s) const;

  Vec2 position_at(double s) const;
  Vec2 tangent_at(double s) const;
  // Left normal (tangent rotated +90 degrees).
  Vec2 normal_at(double s) const;

  Projection project(const Vec2& point) const;
  // Exhaustive per-segment scan; used as the slow path and by tests.
  Projection project_brute(const Vec2& point) const;

  // Signed arc-length progress from s_from to s_to. Closed curves use the
  // shortest-wrap convention, mapping into (-L/2, L/2].
  double progress(double s_from, double s_to) const;

  // Interpolates per-vertex values along the curve (piecewise linear in s).
  double interpolate(const std::vector<double>& values, double s) const;

  friend ArcLengthCurve build_curve(const std::vector<Vec2>& points,
                                    bool closed);

 private:
  void segment(int i, Vec2* a, Vec2* b, double* s0, double* len) const;
  void build_grid();
  Projection project_segment_range(const Vec2& point,
                                   const std::vector<int>& segs) const;

  std::vector<Vec2> points_;
  std::vector<double> cum_s_;
  bool closed_ = false;
  double total_length_ = 0.0;

  // Uniform spatial grid over segment bounding boxes; accelerates project().
  struct Grid {
    double x0 = 0.0, y0 = 0.0, cell = 1.0;
    int nx = 0, ny = 0;
    std::vector<std::vector<int>> cells;
    bool empty() const { return cells.empty(); }
  };
  Grid grid_;
};

ArcLengthCurve build_curve(const std::vector<Vec2>& points, bool closed);

/// Closed or open track: centerline plus per-vertex half widths.
struct Track {
  ArcLengthCurve centerline;
  std::vector<double> half_width_left;
  std::vector<double> half_width_right;

  double width_left_at(double s) const {
    return centerline.interpolate(half_width_left, s);
  }
  double width_right_at(double s) const {
    return centerline.interpolate(half_width_right, s);
  }
};

/// Reference trajectory: spatial curve plus per-vertex speed (m/s).
struct ReferenceTrajectory {
  ArcLengthCurve curve;
  std::vector<double> speed;

  double speed_at(double s) const { return curve.interpolate(speed, s); }
  double lap_time() const;
};

// Rigid transform into the pose frame: translate by -position, rotate by
// -heading.
Vec2 to_local(const Pose& pose, const Vec2& point);
std::vector<Vec2> to_local(const Pose& pose, const std::vector<Vec2>& points);
Vec2 from_local(const Pose& pose, const Vec2& point);

// Look-ahead arc distances for the boundary observation (meters).
inline constexpr double kBoundaryDistances[7] = {5, 10, 20, 40, 80, 160, 320};
inline constexpr int kBoundaryObsSize = 28;
inline constexpr int kWaypointCount = 20;
inline constexpr int kWaypointObsSize = 40;
inline constexpr double kWaypointSpacingSec = 0.25;

// Left/right boundary points at the 7 look-ahead distances, in the car-local
// frame. Layout per distance: left_x, left_y, right_x, right_y.
std::vector<double> boundary_observation(const Track& track, const Pose& pose);

// Waypoints of the reference at time offsets 0.25..5.0 s, obtained by
// integrating the reference speed profile, in the car-local frame.
std::vector<double> waypoint_observation(const ReferenceTrajectory& ref,
                                         const Pose& pose);

// Track file: header "closed: true|false", then "x y hw_left hw_right" rows.
void save_track(const Track& track, const std::string& path);
Track load_track(const std::string& path);

// Reference file: header "closed: true|false", then "x y speed" rows.
void save_reference(const ReferenceTrajectory& ref, const std::string& path);
ReferenceTrajectory load_reference(const std::string& path);

}  // namespace sbrl

#endif  // SBRL_GEOMETRY_HPP_
