#pragma once

#include <random>
#include <string>

#include "engagecf/data.hpp"
#include "engagecf/error.hpp"

namespace engagecf::testing {

inline Dataset RandomDataset(std::mt19937_64& rng, int sessions,
                             int windows_per_session) {
  std::normal_distribution<double> g(0.0, 3.0);
  std::bernoulli_distribution coin(0.5);
  Dataset ds;
  for (int s = 0; s < sessions; ++s) {
    for (int w = 0; w < windows_per_session; ++w) {
      LabeledSample x;
      for (std::size_t i = 0; i < kNumFeatures; ++i) x.features[i] = g(rng);
      x.label = coin(rng) ? EngagementClass::kHigh : EngagementClass::kLow;
      x.session_id = "sess" + std::to_string(s);
      x.window_index = static_cast<std::uint64_t>(w);
      ds.samples.push_back(x);
    }
  }
  return ds;
}

inline std::string ErrorCode(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

}  // namespace engagecf::testing
