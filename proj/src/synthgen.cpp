#include "engagecf/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "engagecf/error.hpp"
#include "engagecf/json_util.hpp"

namespace engagecf {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::string_view kStreamFormat = "engagement-stream-v1";

constexpr std::array<std::string_view, kNumJoints> kJointNames = {
    "head",        "neck",       "spine",       "left_shoulder",
    "right_shoulder", "left_elbow", "right_elbow", "left_wrist",
    "right_wrist", "left_hip",   "right_hip"};

// Interlocutor head position used when aiming the gaze.
constexpr Vec3 kInterlocutor{0.0, 1.6, 1.5};

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double Uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  bool Bernoulli(double p) { return Uniform(0.0, 1.0) < p; }
  double Phase() { return Uniform(0.0, 2.0 * kPi); }

 private:
  std::mt19937_64 engine_;
};

enum Channel : std::size_t {
  kGaze,
  kArms,
  kGesture,
  kMotor,
  kTouch,
  kTurn,
  kValence
};
constexpr std::size_t kNumChannels = 7;

// Segment-level behavior parameters. Both styles are drawn for every segment
// so that noise episodes can borrow the opposite class's behavior.
struct LowStyle {
  double averted_fraction;
  bool restless;
  double touch_fraction;
  double valence;
  double sway_amp;
  double sway_freq;
  double jerk_amp;
};

struct HighStyle {
  double gesture_fraction;
  double gesture_amp;
  double gesture_freq;
  double nod_fraction;
  double valence;
};

struct Segment {
  int begin = 0;
  int end = 0;
  EngagementClass cls = EngagementClass::kLow;
  // Channels showing disengaged behavior (always off in HIGH segments).
  std::array<bool, kNumChannels> bad{};
  LowStyle low{};
  HighStyle high{};
  double phase[4]{};
};

// On/off timeline with event ids (-1 = off).
struct Timeline {
  std::vector<int> event;
  bool On(int t) const { return event[t] >= 0; }
};

// Fills [begin, end) with on-intervals of duration U(on_lo, on_hi) seconds,
// separated by gaps sized so the expected on-fraction is `fraction`.
void FillOnOff(Rng& rng, Timeline& tl, int begin, int end, double fps,
               double fraction, double on_lo, double on_hi, int& next_id,
               double min_gap_s = 0.0) {
  if (fraction <= 0.0) return;
  if (fraction >= 1.0) {
    const int id = next_id++;
    for (int t = begin; t < end; ++t) tl.event[t] = id;
    return;
  }
  const double mean_on = 0.5 * (on_lo + on_hi);
  const double mean_gap = std::max(mean_on * (1.0 - fraction) / fraction,
                                   min_gap_s);
  double s = static_cast<double>(begin) / fps + rng.Uniform(0.0, mean_gap);
  while (true) {
    const int a = static_cast<int>(std::lround(s * fps));
    if (a >= end) break;
    const double on = rng.Uniform(on_lo, on_hi);
    const int b = std::min(end, static_cast<int>(std::lround((s + on) * fps)));
    const int id = next_id++;
    for (int t = std::max(a, begin); t < b; ++t) tl.event[t] = id;
    s += on + std::max(min_gap_s, rng.Uniform(0.5, 1.5) * mean_gap);
  }
}

// First-order smoother used for posture transitions and envelopes.
class Smoother {
 public:
  Smoother(double fps, double tau_s) : alpha_(1.0 - std::exp(-1.0 / (fps * tau_s))) {}
  double Step(double& state, double target) const {
    state += alpha_ * (target - state);
    return state;
  }
  Vec3 Step(Vec3& state, const Vec3& target) const {
    state += alpha_ * (target - state);
    return state;
  }

 private:
  double alpha_;
};

Vec3 FromYawPitch(double yaw, double pitch) {
  return {std::sin(yaw) * std::cos(pitch), std::sin(pitch),
          std::cos(yaw) * std::cos(pitch)};
}

Vec3 Normalized(const Vec3& v) { return (1.0 / Norm(v)) * v; }

Vec3 ElbowFor(const Vec3& shoulder, const Vec3& wrist, double side) {
  const Vec3 mid = 0.5 * (shoulder + wrist);
  return mid + Vec3{side * 0.06, -0.10, -0.02};
}

// Rest posture of the skeleton (side = -1 left, +1 right).
struct Posture {
  Vec3 left_wrist;
  Vec3 right_wrist;
};

constexpr Vec3 kHead{0.0, 1.62, 0.0};
constexpr Vec3 kNeck{0.0, 1.45, 0.0};
constexpr Vec3 kSpine{0.0, 1.15, 0.0};
constexpr Vec3 kLeftShoulder{-0.18, 1.42, 0.0};
constexpr Vec3 kRightShoulder{0.18, 1.42, 0.0};
constexpr Vec3 kLeftHip{-0.12, 0.95, 0.0};
constexpr Vec3 kRightHip{0.12, 0.95, 0.0};

constexpr Vec3 kLeftRest{-0.24, 1.00, 0.32};
constexpr Vec3 kRightRest{0.24, 1.00, 0.32};
constexpr Vec3 kLeftCrossed{0.10, 1.20, 0.14};
constexpr Vec3 kRightCrossed{-0.10, 1.22, 0.13};

void ValidateProfile(const EngagementProfile& p) {
  auto bad = [](const std::string& field, const std::string& why) {
    throw Error("invalid-argument", "profile." + field + " " + why);
  };
  if (!(p.duration_s > 0.0)) bad("duration_s", "must be positive");
  if (!(p.frame_rate > 0.0)) bad("frame_rate", "must be positive");
  if (!(p.high_fraction >= 0.0 && p.high_fraction <= 1.0)) {
    bad("high_fraction", "must lie in [0, 1]");
  }
  if (!(p.noise >= 0.0 && p.noise <= 1.0)) bad("noise", "must lie in [0, 1]");
  if (!(p.min_segment_s > 0.0 && p.max_segment_s >= p.min_segment_s)) {
    bad("min_segment_s/max_segment_s", "must satisfy 0 < min <= max");
  }
}

}  // namespace

const std::array<std::string_view, kNumJoints>& JointNames() {
  return kJointNames;
}

bool FrameIsValid(const Frame& f) {
  auto finite = [](const Vec3& v) {
    return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
  };
  for (const auto& j : f.joints) {
    if (!finite(j)) return false;
  }
  return finite(f.head_rotation) && finite(f.gaze_direction) &&
         std::abs(Norm(f.gaze_direction) - 1.0) <= 1e-6 &&
         f.face_valence >= -1.0 && f.face_valence <= 1.0;
}

SessionStream GenerateSession(std::uint64_t seed,
                              const EngagementProfile& profile,
                              std::string session_id) {
  ValidateProfile(profile);
  const double fps = profile.frame_rate;
  const int n = static_cast<int>(std::lround(profile.duration_s * fps));
  if (n < 1) {
    throw Error("invalid-argument", "requested duration yields zero frames");
  }

  SessionStream stream;
  stream.session_id =
      session_id.empty() ? "s" + std::to_string(seed) : std::move(session_id);
  stream.frame_rate = fps;
  stream.frames.resize(n);
  stream.ground_truth.resize(n);

  Rng seg_rng(SplitMix64(seed ^ 0x5e6u));
  std::vector<Segment> segments;
  for (int t = 0; t < n;) {
    Segment seg;
    seg.begin = t;
    const double len =
        seg_rng.Uniform(profile.min_segment_s, profile.max_segment_s);
    seg.end = std::min(n, t + std::max(1, static_cast<int>(std::lround(len * fps))));
    seg.cls = seg_rng.Uniform(0.0, 1.0) < profile.high_fraction
                  ? EngagementClass::kHigh
                  : EngagementClass::kLow;
    seg.low.averted_fraction = seg_rng.Uniform(0.35, 0.85);
    seg.low.restless = seg_rng.Bernoulli(0.5);
    seg.low.touch_fraction = seg_rng.Uniform(0.1, 0.2);
    seg.low.valence = seg_rng.Uniform(-0.5, -0.05);
    seg.low.sway_amp = seg_rng.Uniform(0.025, 0.045);
    seg.low.sway_freq = seg_rng.Uniform(0.5, 0.9);
    seg.low.jerk_amp = seg_rng.Uniform(0.12, 0.22);
    seg.high.gesture_fraction = seg_rng.Uniform(0.3, 0.6);
    seg.high.gesture_amp = seg_rng.Uniform(0.06, 0.1);
    seg.high.gesture_freq = seg_rng.Uniform(1.2, 1.8);
    seg.high.nod_fraction = seg_rng.Uniform(0.2, 0.4);
    seg.high.valence = seg_rng.Uniform(0.15, 0.5);
    for (double& p : seg.phase) p = seg_rng.Phase();
    if (seg.cls == EngagementClass::kLow) {
      seg.bad.fill(true);
      seg.bad[kTouch] = seg_rng.Bernoulli(0.5);
      seg.bad[kValence] = seg_rng.Bernoulli(0.6);
    }
    segments.push_back(seg);
    t = seg.end;
  }

  std::vector<int> seg_of(n);
  for (std::size_t i = 0; i < segments.size(); ++i) {
    for (int t = segments[i].begin; t < segments[i].end; ++t) {
      seg_of[t] = static_cast<int>(i);
      stream.ground_truth[t] = segments[i].cls;
    }
  }

  int next_id = 0;
  auto make_timeline = [n] { return Timeline{std::vector<int>(n, -1)}; };

  // Opposite-class episodes per channel.
  Rng noise_rng(SplitMix64(seed ^ 0x401u));
  std::array<Timeline, kNumChannels> episode;
  for (auto& tl : episode) {
    tl = make_timeline();
    FillOnOff(noise_rng, tl, 0, n, fps, profile.noise, 2.0, 5.0, next_id);
  }

  Rng event_rng(SplitMix64(seed ^ 0xe7u));
  Timeline averted_low = make_timeline(), glance_high = make_timeline();
  Timeline touch = make_timeline(), gesture = make_timeline(),
           nod = make_timeline();
  for (const auto& seg : segments) {
    FillOnOff(event_rng, averted_low, seg.begin, seg.end, fps,
              seg.low.averted_fraction, 1.0, 3.0, next_id);
    FillOnOff(event_rng, glance_high, seg.begin, seg.end, fps, 0.05, 0.3, 0.6,
              next_id, 6.0);
    FillOnOff(event_rng, touch, seg.begin, seg.end, fps, seg.low.touch_fraction,
              0.8, 1.6, next_id, 8.0);
    FillOnOff(event_rng, gesture, seg.begin, seg.end, fps,
              seg.high.gesture_fraction, 1.0, 3.0, next_id);
    FillOnOff(event_rng, nod, seg.begin, seg.end, fps, seg.high.nod_fraction,
              0.8, 2.0, next_id);
  }
  // Per-event parameters (aversion direction, touching hand).
  std::vector<double> event_yaw(next_id), event_pitch(next_id);
  std::vector<bool> event_left(next_id);
  for (int id = 0; id < next_id; ++id) {
    const double yaw = event_rng.Uniform(0.45, 0.9);
    event_yaw[id] = event_rng.Bernoulli(0.5) ? yaw : -yaw;
    event_pitch[id] = -event_rng.Uniform(0.15, 0.5);
    event_left[id] = event_rng.Bernoulli(0.5);
  }

  auto seg_bad = [&](Channel c, int t) { return segments[seg_of[t]].bad[c]; };
  auto is_low = [&](Channel c, int t) {
    return seg_bad(c, t) != episode[c].On(t);
  };

  // Voice activity: alternating turns whose lengths follow the turn channel.
  Rng voice_rng(SplitMix64(seed ^ 0x70ceu));
  {
    bool self_turn = voice_rng.Bernoulli(0.5);
    int t = 0;
    while (t < n) {
      const bool low = is_low(kTurn, t);
      const double dur = self_turn ? (low ? voice_rng.Uniform(0.8, 2.0)
                                          : voice_rng.Uniform(3.0, 7.0))
                                   : (low ? voice_rng.Uniform(5.0, 10.0)
                                          : voice_rng.Uniform(2.0, 5.0));
      const int end = std::min(n, t + static_cast<int>(std::lround(dur * fps)));
      // Short pauses inside a turn, a silent gap after it.
      double next_pause = voice_rng.Uniform(1.0, 3.0);
      double pause_left = 0.0;
      for (int k = t; k < end; ++k) {
        const double s = static_cast<double>(k - t) / fps;
        if (pause_left <= 0.0 && s >= next_pause) {
          pause_left = voice_rng.Uniform(0.2, 0.5);
          next_pause = s + voice_rng.Uniform(1.5, 3.0);
        }
        const bool speaking = pause_left <= 0.0 && end - k > 5;
        if (pause_left > 0.0) pause_left -= 1.0 / fps;
        (self_turn ? stream.frames[k].voice_active_self
                   : stream.frames[k].voice_active_other) = speaking;
      }
      t = end;
      self_turn = !self_turn;
    }
  }

  const Smoother posture_smoother(fps, 0.2);
  const Smoother envelope_smoother(fps, 0.15);
  Vec3 left_wrist_base = kLeftRest, right_wrist_base = kRightRest;
  double env_restless = 0.0, env_gesture = 0.0, env_nod = 0.0,
         env_avert_yaw = 0.0, env_calm = 0.0;

  for (int t = 0; t < n; ++t) {
    const Segment& seg = segments[seg_of[t]];
    const double s = static_cast<double>(t) / fps;
    Frame& f = stream.frames[t];

    const bool low_arms = is_low(kArms, t);
    const bool low_motor = is_low(kMotor, t);
    const bool low_gaze = is_low(kGaze, t);
    const bool low_touch = is_low(kTouch, t);

    // Head touching: scheduled touches when the segment itself touches, a
    // continuous touch during an episode otherwise.
    int touch_event = -1;
    if (low_touch) {
      touch_event =
          seg_bad(kTouch, t) ? touch.event[t] : episode[kTouch].event[t];
    }

    Vec3 left_target = low_arms ? kLeftCrossed : kLeftRest;
    Vec3 right_target = low_arms ? kRightCrossed : kRightRest;
    if (touch_event >= 0) {
      const bool left = event_left[touch_event];
      const Vec3 at_head =
          kHead + Vec3{left ? -0.07 : 0.07, -0.05, 0.07};
      (left ? left_target : right_target) = at_head;
      if (low_arms) (left ? right_target : left_target) = left ? kRightRest : kLeftRest;
    }
    posture_smoother.Step(left_wrist_base, left_target);
    posture_smoother.Step(right_wrist_base, right_target);

    const bool restless = low_motor && seg.low.restless;
    const bool gesturing =
        !low_arms && !is_low(kGesture, t) && touch_event < 0 && gesture.On(t);
    envelope_smoother.Step(env_restless, restless ? 1.0 : 0.0);
    envelope_smoother.Step(env_calm, low_motor ? 0.0 : 1.0);
    envelope_smoother.Step(env_gesture, gesturing ? 1.0 : 0.0);
    envelope_smoother.Step(env_nod, !low_motor && nod.On(t) ? 1.0 : 0.0);

    // Whole-body sway.
    const double sway =
        env_restless * seg.low.sway_amp *
            (std::sin(2 * kPi * seg.low.sway_freq * s + seg.phase[0]) +
             0.5 * std::sin(2 * kPi * 1.9 * s + seg.phase[1])) +
        env_calm * 0.006 * std::sin(2 * kPi * 0.25 * s + seg.phase[2]);
    const double breath = 0.002 * std::sin(2 * kPi * 0.25 * s);
    const Vec3 body{sway, breath, 0.0};

    f.joint(Joint::kHead) = kHead + body;
    f.joint(Joint::kNeck) = kNeck + body;
    f.joint(Joint::kSpine) = kSpine + body;
    f.joint(Joint::kLeftShoulder) = kLeftShoulder + body;
    f.joint(Joint::kRightShoulder) = kRightShoulder + body;
    f.joint(Joint::kLeftHip) = kLeftHip + Vec3{0.3 * sway, 0.0, 0.0};
    f.joint(Joint::kRightHip) = kRightHip + Vec3{0.3 * sway, 0.0, 0.0};

    const double g_amp = env_gesture * seg.high.gesture_amp;
    const double g_w = 2 * kPi * seg.high.gesture_freq * s;
    const double fidget = env_restless * 0.02 * std::sin(2 * kPi * 3.1 * s);
    const Vec3 left_gest{g_amp * std::sin(g_w + seg.phase[3]),
                         0.6 * g_amp * std::sin(1.3 * g_w), fidget};
    const Vec3 right_gest{-g_amp * std::sin(g_w), 0.6 * g_amp * std::cos(1.3 * g_w),
                          -fidget};
    f.joint(Joint::kLeftWrist) = left_wrist_base + body + left_gest;
    f.joint(Joint::kRightWrist) = right_wrist_base + body + right_gest;
    f.joint(Joint::kLeftElbow) = ElbowFor(
        f.joint(Joint::kLeftShoulder), f.joint(Joint::kLeftWrist), -1.0);
    f.joint(Joint::kRightElbow) = ElbowFor(
        f.joint(Joint::kRightShoulder), f.joint(Joint::kRightWrist), 1.0);

    // Gaze.
    const int avert_event =
        low_gaze ? averted_low.event[t] : glance_high.event[t];
    const Vec3 head = f.joint(Joint::kHead);
    if (avert_event >= 0) {
      f.gaze_direction =
          FromYawPitch(event_yaw[avert_event], event_pitch[avert_event]);
    } else {
      const Vec3 ray = Normalized(kInterlocutor - head);
      const double jitter_yaw = 0.03 * std::sin(2 * kPi * 0.7 * s + seg.phase[1]);
      const double jitter_pitch = 0.02 * std::sin(2 * kPi * 0.4 * s + seg.phase[2]);
      f.gaze_direction = FromYawPitch(std::atan2(ray.x, ray.z) + jitter_yaw,
                                      std::asin(ray.y) + jitter_pitch);
    }
    envelope_smoother.Step(
        env_avert_yaw, avert_event >= 0 ? 0.3 * event_yaw[avert_event] : 0.0);

    // Head rotation: nodding (pitch), restless jerks (yaw, pitch), partial
    // head turn while the gaze is averted.
    const double nod_pitch = env_nod * 0.08 * std::sin(2 * kPi * 2.0 * s);
    const double jerk_yaw =
        env_restless * seg.low.jerk_amp *
        (std::sin(2 * kPi * 0.9 * s + seg.phase[2]) +
         0.5 * std::sin(2 * kPi * 2.3 * s + seg.phase[3]));
    const double jerk_pitch =
        env_restless * 0.4 * seg.low.jerk_amp * std::sin(2 * kPi * 1.7 * s);
    f.head_rotation = {nod_pitch + jerk_pitch, env_avert_yaw + jerk_yaw,
                       0.02 * env_calm * std::sin(2 * kPi * 0.3 * s)};

    const bool low_val = is_low(kValence, t);
    const double base_val = low_val ? seg.low.valence : seg.high.valence;
    f.face_valence = std::clamp(
        base_val + 0.05 * std::sin(2 * kPi * 0.2 * s + seg.phase[0]), -1.0, 1.0);
  }
  return stream;
}

namespace {

Json Vec3Json(const Vec3& v) { return Json::array({v.x, v.y, v.z}); }

Vec3 Vec3FromJson(const Json& j, std::string_view what) {
  if (!j.is_array() || j.size() != 3 || !j[0].is_number() ||
      !j[1].is_number() || !j[2].is_number()) {
    throw Error("invalid-stream", std::string(what) + " must be [x, y, z]");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

void WriteStream(const SessionStream& stream, std::ostream& out,
                 std::string_view provenance_json) {
  Json header{{"format", kStreamFormat},
              {"session_id", stream.session_id},
              {"frame_rate", stream.frame_rate},
              {"n_frames", stream.frames.size()}};
  if (!provenance_json.empty()) {
    header["provenance"] = ParseJson(provenance_json, "provenance");
  }
  out << header.dump() << '\n';
  for (std::size_t i = 0; i < stream.frames.size(); ++i) {
    const Frame& f = stream.frames[i];
    Json joints = Json::object();
    for (std::size_t k = 0; k < kNumJoints; ++k) {
      joints[std::string(kJointNames[k])] = Vec3Json(f.joints[k]);
    }
    Json line{{"joints", joints},
              {"head_rotation", Vec3Json(f.head_rotation)},
              {"gaze_direction", Vec3Json(f.gaze_direction)},
              {"face_valence", f.face_valence},
              {"voice_active_self", f.voice_active_self},
              {"voice_active_other", f.voice_active_other},
              {"engagement", ClassLabel(stream.ground_truth[i])}};
    out << line.dump() << '\n';
  }
}

void SaveStream(const SessionStream& stream, const std::filesystem::path& path,
                std::string_view provenance_json) {
  std::ostringstream out;
  WriteStream(stream, out, provenance_json);
  WriteFileAtomic(path, out.str());
}

SessionStream ReadStream(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error("invalid-stream", "empty stream");
  const Json header = ParseJson(line, "stream header");
  if (RequireString(header, "format", "stream header") != kStreamFormat) {
    throw Error("invalid-stream", "unsupported stream format");
  }
  SessionStream stream;
  stream.session_id = RequireString(header, "session_id", "stream header");
  stream.frame_rate = RequireNumber(header, "frame_rate", "stream header");
  if (!(stream.frame_rate > 0.0)) {
    throw Error("invalid-stream", "frame_rate must be positive");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = "stream line " + std::to_string(line_no);
    const Json j = ParseJson(line, where);
    Frame f;
    const Json& joints = RequireField(j, "joints", where);
    for (std::size_t k = 0; k < kNumJoints; ++k) {
      const std::string name(kJointNames[k]);
      f.joints[k] = Vec3FromJson(RequireField(joints, name.c_str(), where),
                                 where + " joint " + name);
    }
    f.head_rotation =
        Vec3FromJson(RequireField(j, "head_rotation", where), where);
    f.gaze_direction =
        Vec3FromJson(RequireField(j, "gaze_direction", where), where);
    f.face_valence = RequireNumber(j, "face_valence", where);
    const Json& vs = RequireField(j, "voice_active_self", where);
    const Json& vo = RequireField(j, "voice_active_other", where);
    if (!vs.is_boolean() || !vo.is_boolean()) {
      throw Error("invalid-stream", where + ": voice flags must be booleans");
    }
    f.voice_active_self = vs.get<bool>();
    f.voice_active_other = vo.get<bool>();
    stream.ground_truth.push_back(
        ParseClassLabel(RequireString(j, "engagement", where)));
    stream.frames.push_back(f);
  }
  if (stream.frames.empty()) {
    throw Error("invalid-stream", "stream has no frames");
  }
  return stream;
}

SessionStream LoadStream(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io-error", "cannot open " + path.string());
  return ReadStream(in);
}

}  // namespace engagecf
