#pragma once

#include <memory>
#include <vector>

#include "swopea/drift.hpp"
#include "swopea/mdp.hpp"

namespace fixtures {

using namespace swopea;

// States {0, 1}, actions {stay, flip}, H = 2, reward 1 in state 1,
// deterministic moves.
inline EpisodeModel two_state_chain(int horizon = 2) {
  Dims d{2, 2, horizon};
  EpisodeModel m(d);
  for (int h = 0; h < horizon; ++h) {
    for (int s = 0; s < 2; ++s) {
      m.mutable_row(h, s, 0)[s] = 1.0;
      m.mutable_row(h, s, 1)[1 - s] = 1.0;
      m.mutable_reward(h, s, 0) = s == 1 ? 1.0 : 0.0;
      m.mutable_reward(h, s, 1) = s == 1 ? 1.0 : 0.0;
    }
  }
  return m;
}

inline NonstationaryMdp random_stationary(Dims d, std::uint64_t seed, int K) {
  Rng rng(seed);
  return NonstationaryMdp::stationary(random_episode_model(d, rng), 0, K);
}

// K episodes, each an independent random model.
inline NonstationaryMdp random_sequence(Dims d, std::uint64_t seed, int K) {
  Rng rng(seed);
  std::vector<std::shared_ptr<const EpisodeModel>> eps;
  for (int k = 0; k < K; ++k) eps.push_back(std::make_shared<const EpisodeModel>(random_episode_model(d, rng)));
  return NonstationaryMdp(d, 0, std::move(eps));
}

}  // namespace fixtures
