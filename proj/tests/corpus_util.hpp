#pragma once

#include "engagecf/pipeline.hpp"

namespace engagecf::testing {

struct Corpus {
  Dataset train;  // normalized
  Dataset test;   // normalized with the train stats
  NormStats stats;
};

inline Corpus MakeCorpus(int sessions, double noise, std::uint64_t seed) {
  RunConfig config;
  config.sessions = sessions;
  config.profile.noise = noise;
  config.seed = seed;
  const Dataset raw = ExtractCorpus(SynthesizeCorpus(config), config);
  auto [train, test] = ApplySplit(raw, ChooseSplit(raw, config));
  Corpus c;
  c.stats = FitNormalizer(train);
  c.train = NormalizeDataset(train, c.stats);
  c.test = NormalizeDataset(test, c.stats);
  return c;
}

}  // namespace engagecf::testing
