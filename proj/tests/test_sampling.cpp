#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <random>
#include <set>

#include "oracles.hpp"
#include "rb2/sampling.hpp"
#include "test_util.hpp"

using namespace rb2;
using namespace rb2::testutil;

namespace {

struct SampleFixture : SocialFixture {
  PredId p_likes;
  SampleFixture() : SocialFixture(30) {
    p_likes = schema->add_predicate("likes", {t_person, t_person});
  }
  // distinct ground atom per id
  BufferEntry entry(int id, int reward, double p) const {
    return {{p_likes, {people[id % 30], people[(id / 30) % 30]}}, 0, reward, p};
  }
};

std::set<std::vector<ConstId>> query_args(const std::vector<BufferEntry>& entries) {
  std::set<std::vector<ConstId>> out;
  for (const BufferEntry& e : entries) out.insert(e.query.args);
  return out;
}

}  // namespace

TEST_CASE("priority distributions match the stated examples") {
  SampleFixture fx;

  std::vector<BufferEntry> even{fx.entry(0, 1, 0.5), fx.entry(1, 1, 0.5)};
  auto d = priority_positive(even);
  CHECK(d.probabilities[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(d.probabilities[1] == doctest::Approx(0.5).epsilon(1e-12));

  std::vector<BufferEntry> skew{fx.entry(0, 1, 0.9), fx.entry(1, 1, 0.1)};
  auto dp = priority_positive(skew);
  CHECK(dp.probabilities[0] == doctest::Approx(0.310026).epsilon(1e-6));
  CHECK(dp.probabilities[1] == doctest::Approx(0.689974).epsilon(1e-6));
  auto lo = oracle::softmax_longdouble({1.0 - 0.9, 1.0 - 0.1});
  CHECK(dp.probabilities[0] == doctest::Approx(lo[0]).epsilon(1e-12));
  CHECK(dp.probabilities[1] == doctest::Approx(lo[1]).epsilon(1e-12));

  std::vector<BufferEntry> single{fx.entry(0, 1, 0.42)};
  CHECK(priority_positive(single).probabilities[0] == doctest::Approx(1.0).epsilon(1e-15));

  std::vector<BufferEntry> nskew{fx.entry(0, 0, 0.9), fx.entry(1, 0, 0.1)};
  auto dn = priority_negative(nskew);
  CHECK(dn.probabilities[0] == doctest::Approx(0.689974).epsilon(1e-6));
  CHECK(dn.probabilities[1] == doctest::Approx(0.310026).epsilon(1e-6));

  std::vector<BufferEntry> zeros{fx.entry(0, 0, 0.0), fx.entry(1, 0, 0.0), fx.entry(2, 0, 0.0)};
  for (double p : priority_negative(zeros).probabilities)
    CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  CHECK(priority_positive({}).empty());
}

TEST_CASE("priorities are monotone in p and shift invariant") {
  SampleFixture fx;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<BufferEntry> pos, neg;
    int n = 2 + static_cast<int>(unit(rng) * 8);
    for (int i = 0; i < n; ++i) {
      double p = unit(rng) * 0.8;  // leave headroom for the shift test
      pos.push_back(fx.entry(i, 1, p));
      neg.push_back(fx.entry(i, 0, p));
    }
    auto dp = priority_positive(pos);
    auto dn = priority_negative(neg);
    double sum_p = 0, sum_n = 0;
    for (int i = 0; i < n; ++i) {
      sum_p += dp.probabilities[i];
      sum_n += dn.probabilities[i];
      CHECK(dp.probabilities[i] > 0.0);
      CHECK(dn.probabilities[i] > 0.0);
      for (int j = 0; j < n; ++j) {
        if (pos[i].p < pos[j].p) {
          CHECK(dp.probabilities[i] > dp.probabilities[j]);  // hard positives first
          CHECK(dn.probabilities[i] < dn.probabilities[j]);  // hard negatives first
        }
      }
    }
    CHECK(sum_p == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sum_n == doctest::Approx(1.0).epsilon(1e-12));

    // adding a constant to every p leaves both softmaxes unchanged
    std::vector<BufferEntry> pos_shift = pos, neg_shift = neg;
    for (auto& e : pos_shift) e.p += 0.2;
    for (auto& e : neg_shift) e.p += 0.2;
    auto dps = priority_positive(pos_shift);
    auto dns = priority_negative(neg_shift);
    for (int i = 0; i < n; ++i) {
      CHECK(dps.probabilities[i] == doctest::Approx(dp.probabilities[i]).epsilon(1e-12));
      CHECK(dns.probabilities[i] == doctest::Approx(dn.probabilities[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("informed_sample returns whole buffer when sizes force it") {
  SampleFixture fx;
  std::mt19937_64 rng(9);
  std::vector<BufferEntry> buffer{fx.entry(0, 1, 0.3), fx.entry(1, 1, 0.8),
                                  fx.entry(2, 0, 0.4), fx.entry(3, 0, 0.6)};
  auto out = informed_sample(buffer, 4, rng);
  CHECK(out.size() == 4);
  CHECK(query_args(out) == query_args(buffer));

  CHECK(informed_sample({}, 4, rng).empty());
  CHECK_THROWS_AS(informed_sample(buffer, 1, rng), UsageError);
}

TEST_CASE("duplicate groundings collapse to the most recent entry") {
  SampleFixture fx;
  std::mt19937_64 rng(10);
  std::vector<BufferEntry> buffer;
  for (int i = 0; i < 5; ++i) {
    BufferEntry e = fx.entry(0, 1, 0.1 * (i + 1));  // same ground atom five times
    buffer.push_back(e);
  }
  buffer.push_back(fx.entry(1, 0, 0.5));

  auto deduped = dedup_groundings(buffer);
  REQUIRE(deduped.size() == 2);
  CHECK(deduped[0].p == doctest::Approx(0.5));  // latest copy of the positive

  auto out = informed_sample(buffer, 4, rng);
  std::map<std::vector<ConstId>, int> seen;
  for (const BufferEntry& e : out) seen[e.query.args]++;
  for (const auto& [args, count] : seen) CHECK(count == 1);
}

TEST_CASE("informed_sample first positive draw follows the priority distribution") {
  SampleFixture fx;
  std::vector<BufferEntry> buffer{fx.entry(0, 1, 0.2), fx.entry(1, 1, 0.5),
                                  fx.entry(2, 1, 0.9), fx.entry(3, 0, 0.3),
                                  fx.entry(4, 0, 0.7)};
  std::vector<BufferEntry> positives(buffer.begin(), buffer.begin() + 3);
  auto exact = priority_positive(positives);

  std::mt19937_64 rng(123);
  const int draws = 100000;
  std::map<std::vector<ConstId>, int> first_counts;
  for (int d = 0; d < draws; ++d) {
    auto out = informed_sample(buffer, 4, rng);
    REQUIRE(!out.empty());
    CHECK(out[0].reward == 1);  // positives are drawn first
    first_counts[out[0].query.args]++;
  }
  for (size_t i = 0; i < positives.size(); ++i) {
    double freq = static_cast<double>(first_counts[positives[i].query.args]) / draws;
    CHECK(std::fabs(freq - exact.probabilities[i]) < 0.01);
  }
}

TEST_CASE("shortage takes the short side whole and fills from the other") {
  SampleFixture fx;
  std::mt19937_64 rng(21);
  std::vector<BufferEntry> buffer{fx.entry(0, 1, 0.4)};
  for (int i = 1; i < 8; ++i) buffer.push_back(fx.entry(i, 0, 0.1 * i));
  auto out = informed_sample(buffer, 6, rng);
  CHECK(out.size() == 6);
  int positives = 0;
  for (const BufferEntry& e : out) positives += e.reward;
  CHECK(positives == 1);  // the lone positive plus five negatives
}

TEST_CASE("greedy_sample picks hardest examples deterministically") {
  SampleFixture fx;
  std::vector<BufferEntry> buffer{fx.entry(0, 1, 0.1), fx.entry(1, 1, 0.9),
                                  fx.entry(2, 0, 0.1), fx.entry(3, 0, 0.9)};
  auto out = greedy_sample(buffer, 2);
  REQUIRE(out.size() == 2);
  CHECK(out[0].p == doctest::Approx(0.1));  // lowest-p positive
  CHECK(out[0].reward == 1);
  CHECK(out[1].p == doctest::Approx(0.9));  // highest-p negative
  CHECK(out[1].reward == 0);

  // deterministic: same input, same output
  auto again = greedy_sample(buffer, 2);
  CHECK(query_args(out) == query_args(again));
  for (size_t i = 0; i < out.size(); ++i) CHECK(out[i].query.args == again[i].query.args);

  // ties broken by buffer order
  std::vector<BufferEntry> tied{fx.entry(0, 1, 0.5), fx.entry(1, 1, 0.5), fx.entry(2, 0, 0.5),
                                fx.entry(3, 0, 0.5)};
  auto t = greedy_sample(tied, 2);
  CHECK(t[0].query.args == tied[0].query.args);
  CHECK(t[1].query.args == tied[2].query.args);
}

TEST_CASE("random_sample is uniform without replacement after dedup") {
  SampleFixture fx;
  std::mt19937_64 rng(33);
  std::vector<BufferEntry> buffer;
  for (int i = 0; i < 10; ++i) buffer.push_back(fx.entry(i, i % 2, 0.5));

  auto all = random_sample(buffer, 20, rng);
  CHECK(all.size() == 10);

  std::vector<BufferEntry> one{fx.entry(0, 1, 0.5), fx.entry(0, 1, 0.6)};
  auto single = random_sample(one, 3, rng);
  REQUIRE(single.size() == 1);
  CHECK(single[0].p == doctest::Approx(0.6));

  std::map<std::vector<ConstId>, int> inclusion;
  const int trials = 100000;
  for (int d = 0; d < trials; ++d) {
    auto out = random_sample(buffer, 4, rng);
    REQUIRE(out.size() == 4);
    CHECK(query_args(out).size() == 4);  // no repeats
    for (const BufferEntry& e : out) inclusion[e.query.args]++;
  }
  for (const auto& [args, count] : inclusion)
    CHECK(std::fabs(static_cast<double>(count) / trials - 0.4) < 0.01);
}

TEST_CASE("sample size never exceeds K and hits K when both sides suffice") {
  SampleFixture fx;
  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<BufferEntry> buffer;
    int n = 1 + static_cast<int>(unit(rng) * 20);
    int id = 0;
    int pos_count = 0, neg_count = 0;
    for (int i = 0; i < n; ++i) {
      int r = unit(rng) < 0.5 ? 1 : 0;
      (r ? pos_count : neg_count)++;
      buffer.push_back(fx.entry(id++, r, unit(rng)));
    }
    int k = 2 + 2 * static_cast<int>(unit(rng) * 4);
    auto out = informed_sample(buffer, k, rng);
    CHECK(out.size() <= static_cast<size_t>(k));
    CHECK(query_args(out).size() == out.size());
    if (pos_count >= k / 2 && neg_count >= k / 2) CHECK(out.size() == static_cast<size_t>(k));
    auto g = greedy_sample(buffer, k);
    CHECK(g.size() <= static_cast<size_t>(k));
    if (pos_count >= k / 2 && neg_count >= k / 2) CHECK(g.size() == static_cast<size_t>(k));
  }
}
