#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "endonav/errors.hpp"
#include "endonav/replay/replay_buffer.hpp"
#include "endonav/replay/replay_file.hpp"

using namespace endonav;
using namespace endonav::replay;

namespace {

// Observation k of episode `id` carries (id, k) in its tip coordinates so
// windows can be traced back to their source.
EpisodeRecord make_episode(int id, std::size_t T, bool terminated, TaskId task = TaskId::A1) {
  EpisodeRecord ep;
  ep.task = task;
  ep.vasculature = "v" + std::to_string(id);
  for (std::size_t k = 0; k <= T; ++k) {
    env::Observation o;
    o.tracking_now[0] = {static_cast<double>(id), static_cast<double>(k)};
    o.prev_action = {0.1 * id, 0.0, 0.0, -0.1};
    ep.observations.push_back(o);
  }
  for (std::size_t k = 0; k < T; ++k) {
    ep.actions.push_back({static_cast<double>(k), -1.0, 0.5, static_cast<double>(id)});
    ep.rewards.push_back(-0.001 * static_cast<double>(k) + id);
  }
  ep.terminated = terminated;
  ep.truncated = !terminated && T == kMaxEpisodeTransitions;
  return ep;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("endonav_test_" + name);
}

}  // namespace

TEST_CASE("episodes are validated on insertion") {
  ReplayBuffer buf(1000);
  auto ep = make_episode(0, 5, true);
  ep.rewards.pop_back();
  CHECK_THROWS_AS(buf.push_episode(ep), ArgumentError);
  CHECK_THROWS_AS(buf.push_episode(make_episode(0, 0, false)), ArgumentError);
  CHECK_THROWS_AS(buf.push_episode(make_episode(0, 201, false)), ArgumentError);
  auto both = make_episode(0, 200, true);
  both.truncated = true;
  CHECK_THROWS_AS(buf.push_episode(both), ArgumentError);
  CHECK_THROWS_AS(ReplayBuffer(0), ArgumentError);
  CHECK(buf.transitions() == 0);
}

TEST_CASE("eviction drops whole oldest episodes") {
  ReplayBuffer buf(50);
  for (int i = 0; i < 10; ++i) {
    buf.push_episode(make_episode(i, 7 + static_cast<std::size_t>(i), i % 2 == 0));
    CHECK(buf.transitions() <= buf.capacity());
    std::size_t total = 0;
    for (const auto& e : buf.all()) total += e.transitions();
    CHECK(total == buf.transitions());
    // Survivors are the newest episodes in insertion order.
    for (std::size_t k = 0; k < buf.episodes(); ++k)
      CHECK(buf.episode(k).vasculature ==
            "v" + std::to_string(i - static_cast<int>(buf.episodes()) + 1 + static_cast<int>(k)));
  }
  CHECK(buf.episode(buf.episodes() - 1).vasculature == "v9");
}

TEST_CASE("sampled windows are contiguous and never cross episodes") {
  ReplayBuffer buf;
  buf.push_episode(make_episode(0, 5, true, TaskId::A2L));
  buf.push_episode(make_episode(1, 40, false, TaskId::A3R));
  buf.push_episode(make_episode(2, 200, false));
  Rng rng(11);
  const std::size_t L = 16;
  for (int rep = 0; rep < 50; ++rep) {
    const auto b = buf.sample_sequences(8, L, rng);
    REQUIRE(b.obs.size() == L + 1);
    REQUIRE(b.burn_obs.size() == kBurnIn);
    for (std::size_t j = 0; j < 8; ++j) {
      const auto col = static_cast<Eigen::Index>(j);
      const auto& ep = buf.episode(b.episode[j]);
      const std::size_t T = ep.transitions();
      CHECK(b.task[j] == ep.task);
      CHECK(b.task_onehot(static_cast<Eigen::Index>(env::task_index(ep.task)), col) == 1.0);
      CHECK(b.task_onehot.col(col).sum() == 1.0);
      CHECK(b.start[j] + std::min(L, T) <= T);
      for (std::size_t t = 0; t <= L; ++t) {
        const std::size_t k = std::min(b.start[j] + t, T);
        CHECK(b.obs[t].col(col) == ep.observations[k].flatten());
      }
      for (std::size_t t = 0; t < L; ++t) {
        const std::size_t k = b.start[j] + t;
        const bool real = k < T;
        CHECK(b.mask[t](0, col) == (real ? 1.0 : 0.0));
        CHECK(b.reward[t](0, col) == (real ? ep.rewards[k] : 0.0));
        CHECK(b.done[t](0, col) == (real && ep.terminated && k + 1 == T ? 1.0 : 0.0));
        if (real) CHECK(b.action[t](0, col) == ep.actions[k][0]);
      }
      // Burn-in: right-aligned history immediately before the window.
      for (std::size_t s = 0; s < kBurnIn; ++s) {
        const std::ptrdiff_t k = static_cast<std::ptrdiff_t>(b.start[j]) -
                                 static_cast<std::ptrdiff_t>(kBurnIn) + static_cast<std::ptrdiff_t>(s);
        if (k >= 0) {
          CHECK(b.burn_mask[s](0, col) == 1.0);
          CHECK(b.burn_obs[s].col(col) == ep.observations[static_cast<std::size_t>(k)].flatten());
        } else {
          CHECK(b.burn_mask[s](0, col) == 0.0);
        }
      }
    }
  }
}

TEST_CASE("episode draws are proportional to length and starts are uniform") {
  ReplayBuffer buf;
  const std::vector<std::size_t> lengths = {10, 30, 60};
  for (std::size_t i = 0; i < lengths.size(); ++i)
    buf.push_episode(make_episode(static_cast<int>(i), lengths[i], false));
  Rng rng(12);
  const std::size_t L = 16;
  const int draws = 30000;
  std::map<std::size_t, int> per_episode;
  std::map<std::size_t, int> starts_long;
  for (int n = 0; n < draws / 100; ++n) {
    const auto b = buf.sample_sequences(100, L, rng);
    for (std::size_t j = 0; j < 100; ++j) {
      ++per_episode[b.episode[j]];
      if (b.episode[j] == 2) ++starts_long[b.start[j]];
    }
  }
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    const double p = static_cast<double>(lengths[i]) / 100.0;
    const double sd = std::sqrt(draws * p * (1 - p));
    CHECK(std::abs(per_episode[i] - draws * p) < 4.5 * sd);
  }
  // Short episode: window always starts at 0.
  // Long episode: starts cover [0, 44] uniformly (chi-square, 44 dof).
  CHECK(starts_long.size() == 45);
  CHECK(starts_long.rbegin()->first == 44);
  int n_long = 0;
  for (const auto& [s, c] : starts_long) n_long += c;
  const double expect = n_long / 45.0;
  double chi2 = 0.0;
  for (const auto& [s, c] : starts_long) chi2 += (c - expect) * (c - expect) / expect;
  CHECK(chi2 < 80.0);  // p ~ 1e-3 at 44 dof

  ReplayBuffer empty;
  CHECK_THROWS_AS(empty.sample_sequences(4, 4, rng), ArgumentError);
  CHECK_THROWS_AS(buf.sample_sequences(0, 4, rng), ArgumentError);
  CHECK_THROWS_AS(buf.sample_sequences(4, 0, rng), ArgumentError);
}

TEST_CASE("replay files round-trip and support appending") {
  const auto path = temp_path("replay_roundtrip.replay");
  std::filesystem::remove(path);
  ReplayBuffer buf(1000);
  auto a = make_episode(3, 12, true, TaskId::A2R);
  a.augment = vessel::AugmentParams{{1.1, 0.9, 1.05}, 0.2, -0.1};
  buf.push_episode(a);
  buf.push_episode(make_episode(4, 200, false, TaskId::A3L));
  save(buf, path);
  CHECK(load(path, 1000) == buf);

  {
    ReplayWriter w(path);
    w.append(make_episode(5, 3, true));
  }
  const auto eps = read_episodes(path);
  REQUIRE(eps.size() == 3);
  CHECK(eps[0] == a);
  CHECK(eps[2] == make_episode(5, 3, true));

  // Loading into a smaller buffer keeps the newest episodes.
  CHECK(load(path, 100).episodes() == 1);
  std::filesystem::remove(path);
}

TEST_CASE("malformed replay files are rejected") {
  const auto path = temp_path("replay_bad.replay");
  {
    std::ofstream out(path, std::ios::binary);
    out << "not-a-replay\n";
  }
  CHECK_THROWS_AS(load(path), FormatError);
  CHECK_THROWS_AS(ReplayWriter{path}, FormatError);

  ReplayBuffer buf;
  buf.push_episode(make_episode(1, 20, false));
  save(buf, path);
  const auto full = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, full - 7);
  CHECK_THROWS_AS(load(path), FormatError);
  std::filesystem::remove(path);
  CHECK_THROWS(load(path));
}
