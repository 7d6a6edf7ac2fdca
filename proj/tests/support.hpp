#pragma once

#include "switchq/mdp.hpp"
#include "switchq/rng.hpp"

namespace support {

/// One state, one action, reward r on the self-loop.
inline switchq::RandomInstance one_by_one(double r, double gamma) {
  return {switchq::Mdp(1, 1, {1.0}, {r}, gamma),
          {switchq::Vector::Ones(1), switchq::Matrix::Ones(1, 1)}};
}

/// 0 -> 1 -> 1 with reward 0 out of state 0 and 1 out of state 1, gamma 0.5.
inline switchq::Mdp chain() { return switchq::Mdp(2, 1, {0, 1, 0, 1}, {0, 0, 1, 1}, 0.5); }

inline switchq::QVector random_q(switchq::Rng& rng, int n, double radius) {
  switchq::QVector q(n);
  for (int i = 0; i < n; ++i) q(i) = rng.uniform(-radius, radius);
  return q;
}

}  // namespace support
