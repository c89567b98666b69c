#pragma once

#include <span>
#include <vector>

#include "engagecf/data.hpp"
#include "engagecf/synthgen.hpp"

namespace engagecf {

struct WindowSpec {
  double length_s = 10.0;
  double stride_s = 2.0;
};

void ValidateWindowSpec(const WindowSpec& spec);

struct ExtractOptions {
  // Point the subject looks at when attending to the interlocutor.
  Vec3 interlocutor{0.0, 1.6, 1.5};
  double gaze_cone_deg = 15.0;
  // Distance thresholds are relative to the subject's mean shoulder width,
  // so a 0.36 m shoulder span gives 0.15 m (head touch) and 0.25 m (arms
  // crossed, wrist to spine).
  double head_touch_ratio = 0.15 / 0.36;
  double arms_crossed_ratio = 0.25 / 0.36;
  // Windows whose majority label covers less than this share of frames are
  // dropped by ExtractSession. 0 keeps every window.
  double min_label_purity = 0.0;
};

// Computes the 18 engagement metrics over one window of frames.
// Throws Error("window-too-short") for fewer than two frames.
FeatureVector ExtractFeatures(std::span<const Frame> window, double frame_rate,
                              const ExtractOptions& options = {});

// Slides `spec` over the stream; each window is labeled with the majority
// ground-truth class (ties go to LOW).
std::vector<LabeledSample> ExtractSession(const SessionStream& stream,
                                          const WindowSpec& spec,
                                          const ExtractOptions& options = {});

}  // namespace engagecf
