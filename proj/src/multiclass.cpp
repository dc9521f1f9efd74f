#include "lesion/multiclass.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "detail/binio.hpp"
#include "detail/parallel.hpp"
#include "lesion/error.hpp"
#include "lesion/metrics.hpp"
#include "lesion/rng.hpp"

namespace lesion {
namespace {

constexpr char kMagic[8] = {'L', 'S', 'N', 'S', 'V', 'M', '\0', '\0'};
constexpr std::uint32_t kFileVersion = 1;

void check_finite(std::span<const double> x, const char* what) {
  for (double v : x) {
    if (!std::isfinite(v)) throw ValidationError(std::string(what) + " contains a non-finite value");
  }
}

struct CalibrationSplit {
  std::vector<std::size_t> svm_rows;
  std::vector<std::size_t> calib_rows;
};

// Rows must already be in canonical order. Groups are assigned to the
// calibration side per class by a seeded shuffle.
CalibrationSplit split_for_calibration(const std::vector<std::string>& groups,
                                       const std::vector<LesionClass>& labels, double fraction,
                                       std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ValidationError("calibration fraction must lie in (0, 1)");

  // Distinct groups in first-appearance order, with their class.
  std::vector<std::string> order;
  std::map<std::string, LesionClass> group_class;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    auto [it, inserted] = group_class.emplace(groups[i], labels[i]);
    if (inserted) {
      order.push_back(groups[i]);
    } else if (it->second != labels[i]) {
      throw ValidationError("rows of group '" + groups[i] + "' carry different labels");
    }
  }

  std::map<std::string, bool> to_calib;
  for (LesionClass c : kAllClasses) {
    std::vector<std::string> members;
    for (const auto& g : order) {
      if (group_class[g] == c) members.push_back(g);
    }
    const std::size_t n = members.size();
    const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));
    if (n < 2 || k >= n) {
      throw MissingClass("class " + std::string(class_name(c)) + " has " + std::to_string(n) +
                         " source image(s); the calibration split needs at least one on each side");
    }
    Xoshiro256 rng(seed ^ fnv1a64("calibration/" + std::string(class_name(c))));
    rng.shuffle(std::span<std::string>(members));
    for (std::size_t i = 0; i < n; ++i) to_calib[members[i]] = i < k;
  }

  CalibrationSplit out;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    (to_calib[groups[i]] ? out.calib_rows : out.svm_rows).push_back(i);
  }
  return out;
}

RowMatrix gather(const RowMatrix& x, const std::vector<std::size_t>& rows) {
  RowMatrix out(rows.size(), x.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(x.row(rows[i]).begin(), x.cols, out.row(i).begin());
  }
  return out;
}

double default_gamma(const RowMatrix& z) {
  const double n = static_cast<double>(z.rows);
  double total_var = 0.0;
  for (std::size_t j = 0; j < z.cols; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < z.rows; ++i) mean += z(i, j);
    mean /= n;
    double var = 0.0;
    for (std::size_t i = 0; i < z.rows; ++i) var += (z(i, j) - mean) * (z(i, j) - mean);
    total_var += var / n;
  }
  const double d = static_cast<double>(z.cols);
  const double mean_var = total_var / d;
  return mean_var > 0.0 ? 1.0 / (d * mean_var) : 1.0 / d;
}

struct ClassFit {
  BinaryMachine machine;
  double chosen_c = 0.0;
  std::size_t iterations = 0;
};

ClassFit fit_class(LesionClass c, const RowMatrix& svm_x, const std::vector<LesionClass>& svm_labels,
                   const RowMatrix& cal_x, const std::vector<LesionClass>& cal_labels, const KernelSpec& kernel,
                   const OvrOptions& options) {
  std::vector<int> y(svm_labels.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = svm_labels[i] == c ? 1 : -1;
  std::vector<int> cal_y(cal_labels.size()), cal_01(cal_labels.size());
  for (std::size_t i = 0; i < cal_y.size(); ++i) {
    cal_y[i] = cal_labels[i] == c ? 1 : -1;
    cal_01[i] = cal_labels[i] == c ? 1 : 0;
  }

  std::vector<double> grid = options.c_grid;
  if (grid.empty()) throw ValidationError("C grid is empty");
  std::sort(grid.begin(), grid.end());

  ClassFit best;
  std::vector<double> best_scores;
  double best_auc = -1.0;
  for (double cval : grid) {
    SmoOptions smo;
    smo.C = cval;
    smo.kernel = kernel;
    smo.tol = options.tol;
    smo.max_iterations = options.max_iterations;
    smo.cache_bytes = options.cache_bytes;
    SmoResult r = smo_train(svm_x, y, smo);
    std::vector<double> scores(cal_x.rows);
    for (std::size_t i = 0; i < cal_x.rows; ++i) scores[i] = decision_value(r.model, cal_x.row(i));
    const double a = grid.size() == 1 ? 0.0 : auc(scores, cal_01);
    if (a > best_auc) {
      best_auc = a;
      best.machine.svm = std::move(r.model);
      best.chosen_c = cval;
      best.iterations = r.iterations;
      best_scores = std::move(scores);
    }
  }
  best.machine.calibrator = fit_platt(best_scores, cal_y);
  return best;
}

void write_machine(std::ostream& out, const BinaryMachine& m) {
  const auto& svm = m.svm;
  binio::put<std::uint8_t>(out, static_cast<std::uint8_t>(svm.kernel.kind));
  binio::put<double>(out, svm.kernel.gamma);
  binio::put<double>(out, svm.C);
  binio::put<double>(out, svm.bias);
  binio::put<double>(out, m.calibrator.A);
  binio::put<double>(out, m.calibrator.B);
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(svm.dual_coeffs.size()));
  binio::put_array(out, svm.dual_coeffs.data(), svm.dual_coeffs.size());
  binio::put_array(out, svm.support_vectors.data.data(), svm.support_vectors.data.size());
}

BinaryMachine read_machine(std::istream& in, std::size_t dim) {
  BinaryMachine m;
  auto& svm = m.svm;
  const auto kind = binio::get<std::uint8_t>(in);
  if (kind > 1) throw ValidationError("unknown kernel kind " + std::to_string(kind));
  svm.kernel.kind = static_cast<KernelSpec::Kind>(kind);
  svm.kernel.gamma = binio::get<double>(in);
  svm.C = binio::get<double>(in);
  svm.bias = binio::get<double>(in);
  m.calibrator.A = binio::get<double>(in);
  m.calibrator.B = binio::get<double>(in);
  const auto n = binio::get<std::uint32_t>(in);
  if (dim != 0 && n > (std::size_t{1} << 34) / dim) throw ValidationError("support vector count too large");
  svm.dual_coeffs.resize(n);
  binio::get_array(in, svm.dual_coeffs.data(), n);
  svm.support_vectors = RowMatrix(n, dim);
  binio::get_array(in, svm.support_vectors.data.data(), svm.support_vectors.data.size());
  if (svm.kernel.kind == KernelSpec::Kind::Rbf && !(svm.kernel.gamma > 0.0)) {
    throw ValidationError("RBF gamma must be positive");
  }
  if (!(svm.C > 0.0)) throw ValidationError("C must be positive");
  check_finite(svm.dual_coeffs, "dual coefficients");
  check_finite(svm.support_vectors.data, "support vectors");
  const double params[] = {svm.bias, m.calibrator.A, m.calibrator.B};
  check_finite(params, "model parameters");
  return m;
}

}  // namespace

Standardizer Standardizer::fit(const RowMatrix& x) {
  if (x.rows == 0) throw ValidationError("cannot standardise an empty matrix");
  Standardizer s;
  s.mean.assign(x.cols, 0.0);
  s.scale.assign(x.cols, 1.0);
  const double n = static_cast<double>(x.rows);
  for (std::size_t j = 0; j < x.cols; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) m += x(i, j);
    m /= n;
    double v = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) v += (x(i, j) - m) * (x(i, j) - m);
    const double sd = std::sqrt(v / n);
    s.mean[j] = m;
    s.scale[j] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

std::vector<double> Standardizer::apply(std::span<const double> x) const {
  if (x.size() != mean.size()) {
    throw ValidationError("feature dimension " + std::to_string(x.size()) + " does not match model dimension " +
                          std::to_string(mean.size()));
  }
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - mean[j]) / scale[j];
  return out;
}

RowMatrix Standardizer::apply(const RowMatrix& x) const {
  RowMatrix out(x.rows, x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const auto z = apply(x.row(i));
    std::copy(z.begin(), z.end(), out.row(i).begin());
  }
  return out;
}

std::array<double, 3> MultiClassSvm::class_probabilities(std::span<const double> x) const {
  const auto z = standardizer.apply(x);
  std::array<double, 3> q{};
  for (std::size_t c = 0; c < 3; ++c) {
    q[c] = apply_platt(machines[c].calibrator, decision_value(machines[c].svm, z));
  }
  return q;
}

MultiClassSvm train_one_vs_rest(const OvrTrainingSet& data, const OvrOptions& options, OvrTrainReport* report) {
  const RowMatrix& x = data.features;
  if (x.rows != data.labels.size()) throw ValidationError("feature rows and labels differ in count");
  if (!data.groups.empty() && data.groups.size() != x.rows) {
    throw ValidationError("feature rows and group ids differ in count");
  }
  if (x.cols == 0) throw ValidationError("feature dimension is zero");
  check_finite(x.data, "feature matrix");
  for (LesionClass c : kAllClasses) {
    if (std::find(data.labels.begin(), data.labels.end(), c) == data.labels.end()) {
      throw MissingClass("class " + std::string(class_name(c)) + " is absent from the training data");
    }
  }

  // Canonical order.
  std::vector<std::size_t> perm(x.rows);
  std::iota(perm.begin(), perm.end(), 0);
  const std::string no_group;
  auto group_of = [&](std::size_t i) -> const std::string& { return data.groups.empty() ? no_group : data.groups[i]; };
  std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
    if (int g = group_of(a).compare(group_of(b)); g != 0) return g < 0;
    const auto ra = x.row(a), rb = x.row(b);
    if (auto cmp = std::lexicographical_compare_three_way(ra.begin(), ra.end(), rb.begin(), rb.end()); cmp != 0) {
      return cmp < 0;
    }
    return data.labels[a] < data.labels[b];
  });
  RowMatrix sorted = gather(x, perm);
  std::vector<LesionClass> labels(x.rows);
  std::vector<std::string> groups(x.rows);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    labels[i] = data.labels[perm[i]];
    groups[i] = data.groups.empty() ? std::to_string(i) : data.groups[perm[i]];
  }

  const CalibrationSplit split = split_for_calibration(groups, labels, options.calib_fraction, options.seed);

  MultiClassSvm model;
  model.standardizer = Standardizer::fit(sorted);
  const RowMatrix z = model.standardizer.apply(sorted);
  const RowMatrix svm_x = gather(z, split.svm_rows);
  const RowMatrix cal_x = gather(z, split.calib_rows);
  std::vector<LesionClass> svm_labels, cal_labels;
  for (auto i : split.svm_rows) svm_labels.push_back(labels[i]);
  for (auto i : split.calib_rows) cal_labels.push_back(labels[i]);

  KernelSpec kernel = options.kernel.value_or(KernelSpec::rbf(default_gamma(svm_x)));
  if (kernel.kind == KernelSpec::Kind::Rbf && !(kernel.gamma > 0.0 && std::isfinite(kernel.gamma))) {
    throw ValidationError("RBF gamma must be positive and finite");
  }

  std::array<ClassFit, 3> fits;
  detail::parallel_for(3, options.workers, [&](std::size_t c) {
    fits[c] = fit_class(kAllClasses[c], svm_x, svm_labels, cal_x, cal_labels, kernel, options);
  });

  for (std::size_t c = 0; c < 3; ++c) model.machines[c] = std::move(fits[c].machine);
  if (report != nullptr) {
    for (std::size_t c = 0; c < 3; ++c) {
      report->chosen_c[c] = fits[c].chosen_c;
      report->support_vectors[c] = model.machines[c].svm.dual_coeffs.size();
      report->iterations[c] = fits[c].iterations;
    }
    report->svm_rows = svm_x.rows;
    report->calibration_rows = cal_x.rows;
    report->gamma = kernel.kind == KernelSpec::Kind::Rbf ? kernel.gamma : 0.0;
  }
  return model;
}

void write_multiclass(std::ostream& out, const MultiClassSvm& model) {
  const std::size_t d = model.dim();
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  binio::put_array(out, model.standardizer.mean.data(), d);
  binio::put_array(out, model.standardizer.scale.data(), d);
  for (const auto& m : model.machines) write_machine(out, m);
}

MultiClassSvm read_multiclass(std::istream& in) {
  MultiClassSvm model;
  const auto d = binio::get<std::uint32_t>(in);
  if (d == 0 || d > (1u << 24)) throw ValidationError("implausible feature dimension " + std::to_string(d));
  model.standardizer.mean.resize(d);
  model.standardizer.scale.resize(d);
  binio::get_array(in, model.standardizer.mean.data(), d);
  binio::get_array(in, model.standardizer.scale.data(), d);
  check_finite(model.standardizer.mean, "standardiser mean");
  for (double s : model.standardizer.scale) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("standardiser scale must be positive");
  }
  for (auto& m : model.machines) m = read_machine(in, d);
  return model;
}

void save_multiclass_file(const std::string& path, const MultiClassSvm& model, const std::string& metadata) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot open " + path + " for writing");
  out.write(kMagic, sizeof kMagic);
  binio::put<std::uint32_t>(out, kFileVersion);
  binio::put_string(out, metadata);
  write_multiclass(out, model);
  out.flush();
  if (!out) throw RuntimeFailure("failed writing " + path);
}

MultiClassSvm load_multiclass_file(const std::string& path, std::string* metadata) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open model file " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || !std::equal(magic, magic + 8, kMagic)) throw ValidationError(path + " is not a classifier file");
  const auto version = binio::get<std::uint32_t>(in);
  if (version != kFileVersion) {
    throw ValidationError(path + ": unsupported classifier file version " + std::to_string(version));
  }
  std::string meta = binio::get_string(in);
  MultiClassSvm model = read_multiclass(in);
  if (metadata != nullptr) *metadata = std::move(meta);
  return model;
}

}  // namespace lesion
