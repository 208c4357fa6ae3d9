#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

#include <gtest/gtest.h>

#include "csifb/adaptive.hpp"
#include "csifb/errors.hpp"
#include "csifb/rng.hpp"

using namespace csifb;

namespace {

MeasurementRecord rec(double rho, double kappa, double bler, const std::string& tag = "CDL-E",
                      double ber = 0.01) {
  return MeasurementRecord::make(rho, kappa, ber, bler, 0.1, tag, 1);
}

AdaptiveDataset table(std::initializer_list<std::pair<double, double>> kappa_bler, double rho = 10.0) {
  std::vector<MeasurementRecord> r;
  for (auto [k, b] : kappa_bler) r.push_back(rec(rho, k, b));
  return build_dataset(r);
}

}  // namespace

TEST(MeasurementRecord, FlagFollowsBler) {
  EXPECT_TRUE(rec(0, 0.5, 0.2).exceeds_bmax);
  EXPECT_FALSE(rec(0, 0.5, 0.1).exceeds_bmax);
  EXPECT_THROW(rec(0, 0.5, 1.2), ValidationError);
  MeasurementRecord bad = rec(0, 0.5, 0.2);
  bad.exceeds_bmax = false;
  EXPECT_THROW(bad.validate(0.1), ValidationError);
}

TEST(SnrBuckets, NearestCenter) {
  const auto b = SnrBuckets::default_grid();
  EXPECT_EQ(b.size(), 7u);
  EXPECT_EQ(b.bucket_of(-10.0), 0u);
  EXPECT_EQ(b.bucket_of(2.4), 0u);
  EXPECT_EQ(b.bucket_of(2.5), 1u);
  EXPECT_EQ(b.bucket_of(29.0), 6u);
  EXPECT_EQ(b.bucket_of(99.0), 6u);
  EXPECT_EQ(b.low(0), -2.5);
  EXPECT_EQ(b.high(6), 32.5);
  for (std::size_t i = 0; i + 1 < b.size(); ++i) EXPECT_EQ(b.high(i), b.low(i + 1));
  EXPECT_THROW(SnrBuckets({5, 0}), ValidationError);
}

TEST(BuildDataset, MeanOfBucket) {
  const auto ds = build_dataset(std::vector{rec(10, 0.5, 0.0), rec(11, 0.5, 0.2)});
  ASSERT_EQ(ds.entries.size(), 1u);
  EXPECT_NEAR(ds.entries[0].mean_bler, 0.1, 1e-15);
  EXPECT_EQ(ds.entries[0].trials, 2u);
  const auto one = build_dataset(std::vector{rec(20, 0.7, 0.3)});
  ASSERT_EQ(one.entries.size(), 1u);
  EXPECT_EQ(one.entries[0].mean_bler, 0.3);
  EXPECT_EQ(one.entries[0].bucket, 4u);
  EXPECT_TRUE(build_dataset(std::vector<MeasurementRecord>{}).entries.empty());
}

TEST(BuildDataset, MatchesGroupByOracle) {
  Rng rng(3);
  const double kappas[] = {0.0, 0.1, 0.5, 0.7};
  const char* tags[] = {"CDL-C", "CDL-E"};
  std::vector<MeasurementRecord> records;
  for (int i = 0; i < 1000; ++i) {
    const double rho = -3.0 + 36.0 * uniform01(rng);
    records.push_back(MeasurementRecord::make(rho, kappas[rng() % 4], uniform01(rng), uniform01(rng), 0.1,
                                              tags[rng() % 2], rng() % 10));
  }
  const auto ds = build_dataset(records);

  // Bucket by explicit distance to each grid point.
  std::map<std::tuple<std::string, int, double>, std::tuple<double, double, int>> ref;
  for (const auto& r : records) {
    int best = 0;
    for (int b = 1; b < 7; ++b)
      if (std::abs(r.rho_db - 5.0 * b) < std::abs(r.rho_db - 5.0 * best) ||
          (std::abs(r.rho_db - 5.0 * b) == std::abs(r.rho_db - 5.0 * best) && b > best))
        best = b;
    auto& [ber, bler, n] = ref[{r.channel_tag, best, r.kappa}];
    ber += r.ber;
    bler += r.bler;
    ++n;
  }
  ASSERT_EQ(ds.entries.size(), ref.size());
  for (const auto& e : ds.entries) {
    const auto it = ref.find({e.channel_tag, static_cast<int>(e.bucket), e.kappa});
    ASSERT_NE(it, ref.end());
    const auto& [ber, bler, n] = it->second;
    EXPECT_EQ(e.trials, static_cast<std::size_t>(n));
    EXPECT_NEAR(e.mean_ber, ber / n, 1e-12);
    EXPECT_NEAR(e.mean_bler, bler / n, 1e-12);
  }
  // Same records, same dataset.
  const auto again = build_dataset(records);
  for (std::size_t i = 0; i < ds.entries.size(); ++i) EXPECT_EQ(again.entries[i].mean_bler, ds.entries[i].mean_bler);
}

TEST(SelectKappa, ConstrainedArgmin) {
  EXPECT_EQ(select_kappa(table({{0.1, 0.05}, {0.5, 0.02}, {0.7, 0.3}}), "CDL-E", 10.0), 0.5);
}

TEST(SelectKappa, FallbackWhenNothingQualifies) {
  EXPECT_EQ(select_kappa(table({{0.1, 0.5}, {0.5, 0.2}, {0.7, 0.3}}), "CDL-E", 10.0), kNoCompression);
}

TEST(SelectKappa, TiesPreferMoreCompression) {
  EXPECT_EQ(select_kappa(table({{0.1, 0.02}, {0.5, 0.02}}), "CDL-E", 10.0), 0.5);
}

TEST(SelectKappa, BaselineIsNeverACandidate) {
  EXPECT_EQ(select_kappa(table({{0.0, 0.0}, {0.5, 0.05}}), "CDL-E", 10.0), 0.5);
}

TEST(SelectKappa, MissingBucketIsPolicyError) {
  const auto ds = table({{0.5, 0.05}}, 10.0);
  EXPECT_THROW(select_kappa(ds, "CDL-E", 30.0), PolicyError);
  EXPECT_THROW(select_kappa(ds, "CDL-C", 10.0), PolicyError);
}

TEST(SelectKappa, NeverViolatesConstraint) {
  Rng rng(8);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<MeasurementRecord> r;
    for (double k : {0.1, 0.5, 0.7}) r.push_back(rec(5, k, 0.25 * uniform01(rng)));
    const auto ds = build_dataset(r);
    const double k = select_kappa(ds, "CDL-E", 5.0, 0.1);
    if (k != kNoCompression) EXPECT_LE(ds.find("CDL-E", 1, k)->mean_bler, 0.1);
  }
}

TEST(Policy, BuildLookupAndCsvRoundTrip) {
  std::vector<MeasurementRecord> r;
  for (int b = 0; b < 7; ++b) {
    const double rho = 5.0 * b;
    r.push_back(rec(rho, 0.0, 0.5 / (b + 1)));
    r.push_back(rec(rho, 0.1, b >= 4 ? 0.05 : 0.4));
    r.push_back(rec(rho, 0.7, b >= 5 ? 0.05 : 0.9));
  }
  const auto ds = build_dataset(r);
  const auto p = build_policy(ds, "CDL-E", 0.1);
  ASSERT_EQ(p.rows.size(), 7u);
  EXPECT_EQ(p.lookup(0.0), kNoCompression);
  EXPECT_EQ(p.lookup(20.0), 0.1);
  EXPECT_EQ(p.lookup(25.0), 0.7);
  EXPECT_EQ(p.lookup(31.0), 0.7);
  EXPECT_NEAR(p.rows[0].measured_bler, 0.5, 1e-15);

  std::stringstream ss;
  write_policy_csv(p, ss);
  const std::string csv = ss.str();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "bucket_low_db,bucket_high_db,kappa_or_baseline,measured_bler");
  EXPECT_NE(csv.find("baseline"), std::string::npos);
  const auto back = read_policy_csv(ss, "CDL-E");
  ASSERT_EQ(back.rows.size(), 7u);
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_EQ(back.rows[i].kappa, p.rows[i].kappa);
    EXPECT_EQ(back.rows[i].bucket_low_db, p.rows[i].bucket_low_db);
    EXPECT_EQ(back.rows[i].measured_bler, p.rows[i].measured_bler);
  }
  std::stringstream bad("a,b,c\n");
  EXPECT_THROW(read_policy_csv(bad), SchemaError);
}

TEST(Schedule, DutyCycleHalf) {
  const auto s = schedule_slots(SlotPattern::DutyCycle, 10, 0.5);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(s.assignment[i], i < 5 ? SlotRole::Train : SlotRole::Infer);
}

TEST(Schedule, StaggeredEveryOther) {
  const auto s = schedule_slots(SlotPattern::Staggered, 6, 2);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(s.assignment[i], i % 2 == 0 ? SlotRole::Train : SlotRole::Infer);
  EXPECT_EQ(s.count(SlotRole::Train), 3u);
}

TEST(Schedule, SingleSlotFrame) {
  const auto s = schedule_slots(SlotPattern::DutyCycle, 1, 1.0);
  ASSERT_EQ(s.assignment.size(), 1u);
  EXPECT_EQ(s.assignment[0], SlotRole::Train);
}

TEST(Schedule, ExhaustiveClosedForm) {
  for (std::size_t n = 1; n <= 64; ++n) {
    for (int tenth = 0; tenth <= 10; ++tenth) {
      const double f = tenth / 10.0;
      const auto s = schedule_slots(SlotPattern::DutyCycle, n, f);
      ASSERT_EQ(s.assignment.size(), n);
      // ceil(f n) computed in integers: tenths * n / 10 rounded up.
      const std::size_t n_train = (static_cast<std::size_t>(tenth) * n + 9) / 10;
      for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(s.assignment[i] == SlotRole::Train, i < n_train) << n << " " << f;
    }
    for (std::size_t occ = 1; occ <= 8; ++occ) {
      const auto s = schedule_slots(SlotPattern::Staggered, n, static_cast<double>(occ));
      for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(s.assignment[i] == SlotRole::Train, i % occ == 0);
    }
  }
}

TEST(Schedule, InvalidParameters) {
  EXPECT_THROW(schedule_slots(SlotPattern::DutyCycle, 10, 1.5), ValidationError);
  EXPECT_THROW(schedule_slots(SlotPattern::Staggered, 10, 0.0), ValidationError);
  EXPECT_THROW(schedule_slots(SlotPattern::DutyCycle, 0, 0.5), ValidationError);
}

TEST(Invalidation, StrictThreshold) {
  const std::vector<double> low{0.1, 0.2};
  const std::vector<double> high{0.5, 0.7};
  const std::vector<double> edge{0.25, 0.25};
  EXPECT_FALSE(check_invalidation(low, 0.3));
  EXPECT_TRUE(check_invalidation(high, 0.3));
  EXPECT_FALSE(check_invalidation(edge, 0.25));
  EXPECT_EQ(default_invalidation_threshold(0.02), 0.04);
  EXPECT_THROW(check_invalidation(std::vector<double>{}, 1.0), ValidationError);
}

TEST(RunAdaptive, CollapsesToDominantKappa) {
  std::vector<MeasurementRecord> r;
  for (int b = 0; b < 7; ++b) {
    r.push_back(rec(5.0 * b, 0.1, 0.08));
    r.push_back(rec(5.0 * b, 0.5, 0.01));
    r.push_back(rec(5.0 * b, 0.7, 0.3));
  }
  const auto p = build_policy(build_dataset(r), "CDL-E");
  const std::vector<double> rhos{0, 5, 10, 15, 20, 25, 30};
  auto eval = [](double rho, double kappa) {
    return ErrorCounts{static_cast<std::uint64_t>(rho + 100 * kappa), 1000, 1, 10};
  };
  const auto adaptive = run_adaptive(p, rhos, eval);
  ASSERT_EQ(adaptive.size(), rhos.size());
  for (const auto& pt : adaptive) {
    EXPECT_EQ(pt.kappa, 0.5);
    EXPECT_EQ(pt.counts, eval(pt.rho_db, 0.5));
  }
}
