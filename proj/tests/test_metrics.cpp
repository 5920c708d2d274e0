#include <doctest.h>

#include <random>

#include "mlskelm/error.hpp"
#include "mlskelm/metrics.hpp"

using namespace mlskelm;

namespace {

ConfusionMatrix from_counts(std::initializer_list<std::initializer_list<std::uint64_t>> rows) {
  ConfusionMatrix cm(rows.size());
  std::size_t i = 0;
  for (const auto& row : rows) {
    std::size_t j = 0;
    for (auto v : row) cm.at(i, j++) = v;
    ++i;
  }
  return cm;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("confusion counts") {
  const std::vector<int> t{1, 2}, p{1, 2};
  CHECK(confusion(t, p, 2) == from_counts({{1, 0}, {0, 1}}));
  const std::vector<int> t2{1, 1}, p2{2, 2};
  CHECK(confusion(t2, p2, 2) == from_counts({{0, 2}, {0, 0}}));
  const std::vector<int> none;
  CHECK(confusion(none, none, 3) == ConfusionMatrix(3));
  const std::vector<int> bad{3};
  const std::vector<int> ok{1};
  CHECK_THROWS_AS(confusion(bad, ok, 2), DataError);
  CHECK_THROWS_AS(confusion(t, ok, 2), DataError);
}

TEST_CASE("hand cases match exactly") {
  const auto diag = from_counts({{3, 0, 0}, {0, 5, 0}, {0, 0, 2}});
  CHECK(overall_accuracy(diag) == 1.0);
  CHECK(average_accuracy(diag) == 1.0);
  CHECK(kappa(diag) == 1.0);

  const auto chance = from_counts({{1, 1}, {1, 1}});
  CHECK(overall_accuracy(chance) == 0.5);
  CHECK(kappa(chance) == 0.0);

  const auto cm = from_counts({{4, 1}, {2, 3}});
  CHECK(overall_accuracy(cm) == 0.7);
  CHECK(kappa(cm) == 0.4);
  CHECK(average_accuracy(cm) == 0.7);
}

TEST_CASE("degenerate and empty matrices") {
  const auto single = from_counts({{4, 0}, {0, 0}});
  CHECK(kappa(single) == 1.0);  // p_e = 1
  CHECK(average_accuracy(single) == 1.0);  // absent class 2 excluded
  CHECK_THROWS_AS(overall_accuracy(ConfusionMatrix(2)), DataError);
  CHECK_THROWS_AS(kappa(ConfusionMatrix(0)), DataError);
}

TEST_CASE("kappa bounds and permutation invariance on random matrices") {
  std::mt19937_64 gen(5);
  std::uniform_int_distribution<int> u(0, 9);
  for (int trial = 0; trial < 200; ++trial) {
    ConfusionMatrix cm(4);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) cm.at(i, j) = static_cast<std::uint64_t>(u(gen) + (i == j ? 5 : 0));
    const double oa = overall_accuracy(cm), aa = average_accuracy(cm), k = kappa(cm);
    CHECK(oa >= 0.0);
    CHECK(oa <= 1.0);
    CHECK(aa >= 0.0);
    CHECK(aa <= 1.0);
    CHECK(k >= -1.0);
    if (oa < 1.0) CHECK(k <= oa);
    CHECK((k == 1.0) == (oa == 1.0));

    const std::size_t perm[4] = {2, 0, 3, 1};
    ConfusionMatrix pm(4);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) pm.at(perm[i], perm[j]) = cm.at(i, j);
    CHECK(overall_accuracy(pm) == oa);
    CHECK(average_accuracy(pm) == doctest::Approx(aa).epsilon(1e-15));
    CHECK(kappa(pm) == k);
  }
}

TEST_CASE("CSV round trip") {
  const auto cm = from_counts({{4, 1, 0}, {2, 3, 7}, {0, 0, 12}});
  const std::string csv = confusion_csv(cm);
  CHECK(csv == "1,2,3\n4,1,0\n2,3,7\n0,0,12\n");
  const auto back = parse_confusion_csv(csv);
  CHECK(back == cm);
  CHECK(kappa(back) == kappa(cm));
  CHECK_THROWS_AS(parse_confusion_csv("1,2\n1,x\n0,1\n"), DataError);
  CHECK_THROWS_AS(parse_confusion_csv("1,2\n1,0\n"), DataError);
  CHECK_THROWS_AS(parse_confusion_csv(""), DataError);
}

}  // TEST_SUITE
