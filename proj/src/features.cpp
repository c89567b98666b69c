#include "engagecf/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "engagecf/error.hpp"

namespace engagecf {

namespace {

// Body frame: origin at the spine, lateral axis from the left to the right
// hip (horizontal), forward = lateral x up.
struct BodyFrame {
  Vec3 origin;
  Vec3 lateral;
  Vec3 up{0.0, 1.0, 0.0};
  Vec3 forward;

  explicit BodyFrame(const Frame& f) {
    origin = f.joint(Joint::kSpine);
    Vec3 hips = f.joint(Joint::kRightHip) - f.joint(Joint::kLeftHip);
    hips.y = 0.0;
    const double len = Norm(hips);
    lateral = len > 0.0 ? (1.0 / len) * hips : Vec3{1.0, 0.0, 0.0};
    forward = Cross(lateral, up);
  }

  double Lateral(const Vec3& p) const { return Dot(p - origin, lateral); }
  Vec3 Local(const Vec3& v) const {
    return {Dot(v, lateral), Dot(v, up), Dot(v, forward)};
  }
};

double WrapAngle(double a) {
  return std::remainder(a, 2.0 * std::numbers::pi);
}

double PopulationStd(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double sq = 0.0;
  for (double x : xs) sq += (x - mean) * (x - mean);
  return std::sqrt(sq / static_cast<double>(xs.size()));
}

// Forearm yaw about the vertical axis, measured outward from straight ahead
// (side = -1 left, +1 right).
double ForearmYaw(const BodyFrame& body, const Vec3& elbow, const Vec3& wrist,
                  double side) {
  const Vec3 local = body.Local(wrist - elbow);
  return std::atan2(side * local.x, local.z);
}

// Forearm elevation about the lateral axis: 0 hanging down, pi/2 horizontal.
double ForearmPitch(const BodyFrame& body, const Vec3& elbow,
                    const Vec3& wrist) {
  const Vec3 local = body.Local(wrist - elbow);
  const double len = Norm(local);
  if (len == 0.0) return 0.0;
  return std::acos(std::clamp(-local.y / len, -1.0, 1.0));
}

}  // namespace

void ValidateWindowSpec(const WindowSpec& spec) {
  if (!(spec.length_s > 0.0)) {
    throw Error("invalid-argument", "window length_s must be positive");
  }
  if (!(spec.stride_s > 0.0 && spec.stride_s <= spec.length_s)) {
    throw Error("invalid-argument",
                "window stride_s must satisfy 0 < stride_s <= length_s");
  }
}

FeatureVector ExtractFeatures(std::span<const Frame> window, double frame_rate,
                              const ExtractOptions& options) {
  if (window.size() < 2) {
    throw Error("window-too-short", "feature extraction needs >= 2 frames");
  }
  if (!(frame_rate > 0.0)) {
    throw Error("invalid-argument", "frame_rate must be positive");
  }
  const double n = static_cast<double>(window.size());
  const double n_steps = n - 1.0;
  const double cos_cone =
      std::cos(options.gaze_cone_deg * std::numbers::pi / 180.0);

  double shoulder_width = 0.0;
  for (const Frame& f : window) {
    shoulder_width += Distance(f.joint(Joint::kLeftShoulder),
                               f.joint(Joint::kRightShoulder));
  }
  shoulder_width /= n;
  const double touch_dist = options.head_touch_ratio * shoulder_width;
  const double crossed_dist = options.arms_crossed_ratio * shoulder_width;

  double valence = 0.0, gaze_hits = 0.0, crossed = 0.0, touching = 0.0,
         turn_hold = 0.0;
  double dist_lw = 0.0, dist_rw = 0.0;
  double yrot_le = 0.0, yrot_re = 0.0, xrot_le = 0.0, xrot_re = 0.0;
  std::vector<double> head_x, head_xrot;
  head_x.reserve(window.size());
  head_xrot.reserve(window.size());

  for (const Frame& f : window) {
    const BodyFrame body(f);
    const Vec3& head = f.joint(Joint::kHead);
    const Vec3& lw = f.joint(Joint::kLeftWrist);
    const Vec3& rw = f.joint(Joint::kRightWrist);
    const Vec3& le = f.joint(Joint::kLeftElbow);
    const Vec3& re = f.joint(Joint::kRightElbow);

    valence += f.face_valence;

    const Vec3 ray = options.interlocutor - head;
    const double ray_len = Norm(ray);
    const double gaze_len = Norm(f.gaze_direction);
    if (ray_len > 0.0 && gaze_len > 0.0 &&
        Dot(ray, f.gaze_direction) / (ray_len * gaze_len) > cos_cone) {
      gaze_hits += 1.0;
    }

    const Vec3& spine = f.joint(Joint::kSpine);
    if (body.Lateral(lw) > body.Lateral(rw) &&
        Distance(lw, spine) < crossed_dist &&
        Distance(rw, spine) < crossed_dist) {
      crossed += 1.0;
    }
    if (std::min(Distance(lw, head), Distance(rw, head)) < touch_dist) {
      touching += 1.0;
    }
    if (f.voice_active_self && !f.voice_active_other) turn_hold += 1.0;

    dist_lw += std::abs(body.Lateral(lw) -
                        body.Lateral(f.joint(Joint::kLeftHip)));
    dist_rw += std::abs(body.Lateral(rw) -
                        body.Lateral(f.joint(Joint::kRightHip)));
    yrot_le += ForearmYaw(body, le, lw, -1.0);
    yrot_re += ForearmYaw(body, re, rw, 1.0);
    xrot_le += ForearmPitch(body, le, lw);
    xrot_re += ForearmPitch(body, re, rw);

    head_x.push_back(head.x);
    head_xrot.push_back(f.head_rotation.x);
  }

  double head_activity = 0.0, cont_mov = 0.0, fo_lw = 0.0, fo_rw = 0.0,
         energy = 0.0;
  for (std::size_t t = 1; t < window.size(); ++t) {
    const Frame& a = window[t - 1];
    const Frame& b = window[t];
    const Vec3 drot{WrapAngle(b.head_rotation.x - a.head_rotation.x),
                    WrapAngle(b.head_rotation.y - a.head_rotation.y),
                    WrapAngle(b.head_rotation.z - a.head_rotation.z)};
    head_activity += Norm(drot) * frame_rate;
    for (std::size_t k = 0; k < kNumJoints; ++k) {
      cont_mov += Distance(b.joints[k], a.joints[k]);
    }
    const double dl = Distance(b.joint(Joint::kLeftWrist),
                               a.joint(Joint::kLeftWrist));
    const double dr = Distance(b.joint(Joint::kRightWrist),
                               a.joint(Joint::kRightWrist));
    fo_lw += dl;
    fo_rw += dr;
    const double vl = dl * frame_rate, vr = dr * frame_rate;
    energy += 0.5 * (vl * vl + vr * vr);
  }

  FeatureVector fv;
  fv[Feature::VAL_F] = valence / n;
  fv[Feature::GZ_DR] = gaze_hits / n;
  fv[Feature::HD_AC] = head_activity / n_steps;
  fv[Feature::AM_CR] = crossed / n;
  fv[Feature::HD_TH] = touching / n;
  fv[Feature::DIST_LW] = dist_lw / n;
  fv[Feature::DIST_RW] = dist_rw / n;
  fv[Feature::YROT_LE] = yrot_le / n;
  fv[Feature::YROT_RE] = yrot_re / n;
  fv[Feature::FO_LW] = fo_lw / n_steps;
  fv[Feature::FO_RW] = fo_rw / n_steps;
  fv[Feature::XROT_LE] = xrot_le / n;
  fv[Feature::XROT_RE] = xrot_re / n;
  fv[Feature::SDX_HD] = PopulationStd(head_x);
  fv[Feature::SDXROT_HD] = PopulationStd(head_xrot);
  fv[Feature::TN_HD] = turn_hold / n;
  fv[Feature::CONT_MOV] = cont_mov;
  fv[Feature::EN_HA] = energy / n_steps;
  return fv;
}

std::vector<LabeledSample> ExtractSession(const SessionStream& stream,
                                          const WindowSpec& spec,
                                          const ExtractOptions& options) {
  ValidateWindowSpec(spec);
  const auto length =
      static_cast<std::size_t>(std::lround(spec.length_s * stream.frame_rate));
  const auto stride = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(spec.stride_s * stream.frame_rate)));
  if (length < 2) {
    throw Error("window-too-short", "window spans fewer than 2 frames");
  }
  std::vector<LabeledSample> out;
  const std::span<const Frame> frames(stream.frames);
  std::uint64_t index = 0;
  for (std::size_t begin = 0; begin + length <= frames.size();
       begin += stride, ++index) {
    std::size_t high = 0;
    for (std::size_t t = begin; t < begin + length; ++t) {
      if (stream.ground_truth[t] == EngagementClass::kHigh) ++high;
    }
    const std::size_t low = length - high;
    const double purity =
        static_cast<double>(std::max(high, low)) / static_cast<double>(length);
    if (purity < options.min_label_purity) continue;
    LabeledSample s;
    s.features =
        ExtractFeatures(frames.subspan(begin, length), stream.frame_rate, options);
    s.label = high > low ? EngagementClass::kHigh : EngagementClass::kLow;
    s.session_id = stream.session_id;
    s.window_index = index;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace engagecf
