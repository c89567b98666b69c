#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "engagecf/data.hpp"

namespace engagecf {

// World frame: x towards the subject's right, y up, z forward (towards the
// interlocutor). Meters.
struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  friend Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
  friend Vec3 operator-(const Vec3& a, const Vec3& b) {
    return {a.x - b.x, a.y - b.y, a.z - b.z};
  }
  friend Vec3 operator*(double s, const Vec3& v) {
    return {s * v.x, s * v.y, s * v.z};
  }
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double Dot(const Vec3& a, const Vec3& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}
inline Vec3 Cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double Norm(const Vec3& v) { return std::sqrt(Dot(v, v)); }
inline double Distance(const Vec3& a, const Vec3& b) { return Norm(a - b); }

enum class Joint : std::size_t {
  kHead,
  kNeck,
  kSpine,
  kLeftShoulder,
  kRightShoulder,
  kLeftElbow,
  kRightElbow,
  kLeftWrist,
  kRightWrist,
  kLeftHip,
  kRightHip,
};
inline constexpr std::size_t kNumJoints = 11;
const std::array<std::string_view, kNumJoints>& JointNames();

struct Frame {
  std::array<Vec3, kNumJoints> joints{};
  Vec3 head_rotation;  // Euler XYZ, radians
  Vec3 gaze_direction{0.0, 0.0, 1.0};
  double face_valence = 0.0;  // [-1, 1]
  bool voice_active_self = false;
  bool voice_active_other = false;

  Vec3& joint(Joint j) { return joints[static_cast<std::size_t>(j)]; }
  const Vec3& joint(Joint j) const {
    return joints[static_cast<std::size_t>(j)];
  }

  friend bool operator==(const Frame&, const Frame&) = default;
};

struct SessionStream {
  std::string session_id;
  double frame_rate = 25.0;
  std::vector<Frame> frames;
  // Per-frame annotation, same length as `frames`.
  std::vector<EngagementClass> ground_truth;

  friend bool operator==(const SessionStream&, const SessionStream&) = default;
};

struct EngagementProfile {
  // Probability that a segment is HIGH. 1 gives an all-HIGH session, 0 an
  // all-LOW one.
  double high_fraction = 0.5;
  // Fraction of time each behavior channel spends in an episode that shows
  // the opposite class's behavior. 0 gives clean segments.
  double noise = 0.0;
  double duration_s = 120.0;
  double frame_rate = 25.0;
  double min_segment_s = 10.0;
  double max_segment_s = 30.0;
};

// Throws Error("invalid-argument") on a non-positive duration or frame rate
// and on out-of-range profile fields.
SessionStream GenerateSession(std::uint64_t seed,
                              const EngagementProfile& profile,
                              std::string session_id = "");

// Checks the per-frame invariants (unit gaze, valence range, finite values).
bool FrameIsValid(const Frame& frame);

// JSON lines: one header object, then one object per frame.
void WriteStream(const SessionStream& stream, std::ostream& out,
                 std::string_view provenance_json = {});
void SaveStream(const SessionStream& stream, const std::filesystem::path& path,
                std::string_view provenance_json = {});
SessionStream ReadStream(std::istream& in);
SessionStream LoadStream(const std::filesystem::path& path);

}  // namespace engagecf
