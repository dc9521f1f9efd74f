#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "lesion/error.hpp"
#include "lesion/multiclass.hpp"
#include "lesion/rng.hpp"
#include "oracles.hpp"

using namespace lesion;

namespace {

// Three well separated Gaussian blobs in d dimensions.
OvrTrainingSet blobs(std::uint64_t seed, std::size_t per_class, std::size_t d, double spread = 0.3) {
  Xoshiro256 rng(seed);
  OvrTrainingSet set;
  set.features = RowMatrix(3 * per_class, d);
  for (std::size_t i = 0; i < 3 * per_class; ++i) {
    const std::size_t c = i % 3;
    set.labels.push_back(kAllClasses[c]);
    for (std::size_t j = 0; j < d; ++j) set.features(i, j) = (j == c ? 4.0 : 0.0) + spread * rng.normal();
  }
  return set;
}

std::size_t argmax(const std::array<double, 3>& q) {
  return static_cast<std::size_t>(std::max_element(q.begin(), q.end()) - q.begin());
}

}  // namespace

TEST_SUITE("multiclass") {
  TEST_CASE("standardizer maps to zero mean and unit variance") {
    RowMatrix x(4, 2);
    const double v[4][2] = {{1, 5}, {3, 5}, {5, 5}, {7, 5}};
    for (int i = 0; i < 4; ++i) {
      x(i, 0) = v[i][0];
      x(i, 1) = v[i][1];
    }
    const auto s = Standardizer::fit(x);
    CHECK(s.mean[0] == 4.0);
    CHECK(s.mean[1] == 5.0);
    CHECK(s.scale[1] == 1.0);
    const auto z = s.apply(x);
    double m = 0.0, var = 0.0;
    for (int i = 0; i < 4; ++i) m += z(i, 0);
    for (int i = 0; i < 4; ++i) var += z(i, 0) * z(i, 0);
    CHECK(std::abs(m) < 1e-12);
    CHECK(var / 4.0 == doctest::Approx(1.0));
    for (int i = 0; i < 4; ++i) CHECK(z(i, 1) == 0.0);
  }

  TEST_CASE("well separated blobs are classified perfectly") {
    const auto train = blobs(1, 30, 4);
    const auto test = blobs(2, 20, 4);
    OvrOptions opt;
    OvrTrainReport rep;
    const auto model = train_one_vs_rest(train, opt, &rep);
    CHECK(model.dim() == 4);
    CHECK(rep.svm_rows + rep.calibration_rows == 90);
    CHECK(rep.calibration_rows == 18);
    CHECK(rep.gamma > 0.0);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.features.rows; ++i) {
      const auto q = model.class_probabilities(test.features.row(i));
      for (double p : q) {
        CHECK(p > 0.0);
        CHECK(p < 1.0);
      }
      correct += argmax(q) == class_index(test.labels[i]);
    }
    CHECK(correct == test.features.rows);
  }

  TEST_CASE("a missing class is an error") {
    auto set = blobs(3, 10, 3);
    for (auto& l : set.labels) l = LesionClass::Nevus;
    CHECK_THROWS_AS(train_one_vs_rest(set, {}), MissingClass);

    auto two = blobs(3, 10, 3);
    for (auto& l : two.labels) {
      if (l == LesionClass::SeborrheicKeratosis) l = LesionClass::Melanoma;
    }
    CHECK_THROWS_AS(train_one_vs_rest(two, {}), MissingClass);
  }

  TEST_CASE("a class too small to split is an error") {
    auto set = blobs(4, 10, 3);
    set.labels[0] = LesionClass::Melanoma;
    // Leave a single melanoma row.
    for (std::size_t i = 1; i < set.labels.size(); ++i) {
      if (set.labels[i] == LesionClass::Melanoma) set.labels[i] = LesionClass::Nevus;
    }
    CHECK_THROWS_AS(train_one_vs_rest(set, {}), MissingClass);
  }

  TEST_CASE("row order does not affect predictions") {
    const auto set = blobs(5, 15, 3, 1.2);
    std::vector<std::size_t> perm(set.labels.size());
    std::iota(perm.begin(), perm.end(), 0);
    Xoshiro256 rng(9);
    rng.shuffle(std::span<std::size_t>(perm));
    OvrTrainingSet shuffled;
    shuffled.features = RowMatrix(set.features.rows, set.features.cols);
    for (std::size_t i = 0; i < perm.size(); ++i) {
      for (std::size_t j = 0; j < set.features.cols; ++j) shuffled.features(i, j) = set.features(perm[i], j);
      shuffled.labels.push_back(set.labels[perm[i]]);
    }
    OvrOptions opt;
    opt.seed = 4;
    const auto a = train_one_vs_rest(set, opt), b = train_one_vs_rest(shuffled, opt);
    CHECK(a == b);
    for (int t = 0; t < 10; ++t) {
      std::vector<double> probe(3);
      for (auto& v : probe) v = rng.normal() * 2.0;
      const auto qa = a.class_probabilities(probe), qb = b.class_probabilities(probe);
      for (int c = 0; c < 3; ++c) CHECK(std::abs(qa[c] - qb[c]) < 1e-8);
    }
  }

  TEST_CASE("worker count does not affect the model") {
    const auto set = blobs(6, 12, 3, 1.0);
    OvrOptions one, many;
    many.workers = 3;
    CHECK(train_one_vs_rest(set, one) == train_one_vs_rest(set, many));
  }

  TEST_CASE("groups keep variants on one side of the calibration split") {
    auto set = blobs(7, 16, 3, 0.8);
    for (std::size_t i = 0; i < set.labels.size(); ++i) set.groups.push_back("g" + std::to_string(i / 2));
    // Pair rows 2k and 2k+1 must share a label for grouping to be valid.
    for (std::size_t i = 1; i < set.labels.size(); i += 2) set.labels[i] = set.labels[i - 1];
    OvrTrainReport rep;
    CHECK_NOTHROW(train_one_vs_rest(set, {}, &rep));
    CHECK(rep.calibration_rows % 2 == 0);

    set.labels[1] = set.labels[0] == LesionClass::Nevus ? LesionClass::Melanoma : LesionClass::Nevus;
    CHECK_THROWS_AS(train_one_vs_rest(set, {}), ValidationError);
  }

  TEST_CASE("a C grid records its choice") {
    const auto set = blobs(8, 20, 3, 1.5);
    OvrOptions opt;
    opt.c_grid = {10.0, 0.1, 1.0};
    OvrTrainReport rep;
    const auto model = train_one_vs_rest(set, opt, &rep);
    for (int c = 0; c < 3; ++c) {
      CHECK((rep.chosen_c[c] == 0.1 || rep.chosen_c[c] == 1.0 || rep.chosen_c[c] == 10.0));
      CHECK(model.machines[c].svm.C == rep.chosen_c[c]);
    }
  }

  TEST_CASE("explicit linear kernel is honoured") {
    const auto set = blobs(9, 10, 3);
    OvrOptions opt;
    opt.kernel = KernelSpec::linear();
    const auto model = train_one_vs_rest(set, opt);
    for (const auto& m : model.machines) CHECK(m.svm.kernel.kind == KernelSpec::Kind::Linear);
  }

  TEST_CASE("serialisation round-trips exactly") {
    const auto model = train_one_vs_rest(blobs(10, 10, 5), {});
    std::stringstream ss;
    write_multiclass(ss, model);
    CHECK(read_multiclass(ss) == model);

    oracle::TempDir tmp("mc_file");
    const auto path = (tmp.path() / "m.model").string();
    save_multiclass_file(path, model, "{\"seed\":3}");
    std::string meta;
    CHECK(load_multiclass_file(path, &meta) == model);
    CHECK(meta == "{\"seed\":3}");
    CHECK(oracle::read_file(path).substr(0, 8) == std::string("LSNSVM\0\0", 8));

    std::stringstream truncated(ss.str().substr(0, 20));
    CHECK_THROWS_AS(read_multiclass(truncated), ValidationError);
    CHECK_THROWS_AS(load_multiclass_file((tmp.path() / "none").string()), ValidationError);
  }
}
