#include "lesion/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <opencv2/imgcodecs.hpp>

#include "detail/parallel.hpp"
#include "detail/text.hpp"
#include "lesion/error.hpp"
#include "lesion/preprocess.hpp"
#include "lesion/rng.hpp"

namespace lesion {

namespace fs = std::filesystem;

std::string_view class_name(LesionClass c) {
  switch (c) {
    case LesionClass::Melanoma: return "melanoma";
    case LesionClass::SeborrheicKeratosis: return "seborrheic_keratosis";
    case LesionClass::Nevus: return "nevus";
  }
  return "unknown";
}

RgbImage LabeledImage::load_pixels() const {
  if (!pixels.pixels.empty()) return pixels;
  return decode_image(path);
}

ClassCounts Dataset::class_counts() const {
  ClassCounts counts;
  for (const auto& img : images) {
    if (img.label) {
      ++counts.labeled[class_index(*img.label)];
    } else {
      ++counts.unlabeled;
    }
  }
  return counts;
}

std::optional<std::size_t> Dataset::find(std::string_view id) const {
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].id == id) return i;
  }
  return std::nullopt;
}

namespace {

constexpr std::string_view kLabeledHeader = "image_id,melanoma,seborrheic_keratosis";
constexpr std::string_view kUnlabeledHeader = "image_id";

using text::split_fields;
using text::trim;

bool parse_indicator(std::string_view cell, const std::string& where) {
  if (cell == "0" || cell == "0.0") return false;
  if (cell == "1" || cell == "1.0") return true;
  throw ValidationError(where + ": indicator must be one of 0, 0.0, 1, 1.0, got '" + std::string(cell) + "'");
}

}  // namespace

Dataset parse_manifest(std::string_view text, std::string_view source_name) {
  const std::string source(source_name);
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);

  Dataset ds;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);

    if (!header_seen) {
      if (line == kLabeledHeader) {
        ds.labeled = true;
      } else if (line == kUnlabeledHeader) {
        ds.labeled = false;
      } else {
        throw ValidationError(where + ": expected header '" + std::string(kLabeledHeader) + "', got '" +
                              std::string(line) + "'");
      }
      header_seen = true;
      continue;
    }

    const auto fields = split_fields(line);
    const std::size_t expected = ds.labeled ? 3 : 1;
    if (fields.size() != expected) {
      throw ValidationError(where + ": expected " + std::to_string(expected) + " fields, got " +
                            std::to_string(fields.size()));
    }
    LabeledImage img;
    img.id = std::string(fields[0]);
    if (img.id.empty()) throw ValidationError(where + ": empty image_id");
    if (!seen.insert(img.id).second) throw DuplicateId(img.id);
    if (ds.labeled) {
      const bool mel = parse_indicator(fields[1], where);
      const bool sk = parse_indicator(fields[2], where);
      if (mel && sk) throw ValidationError(where + ": image '" + img.id + "' has both indicators set");
      img.label = mel ? LesionClass::Melanoma : sk ? LesionClass::SeborrheicKeratosis : LesionClass::Nevus;
    }
    ds.images.push_back(std::move(img));
  }
  if (!header_seen) throw ValidationError(source + ": manifest is empty (no header)");
  return ds;
}

fs::path resolve_image_path(const fs::path& image_dir, const std::string& id) {
  static constexpr std::array<std::string_view, 6> kExts{".jpg", ".jpeg", ".png", ".JPG", ".JPEG", ".PNG"};
  for (auto ext : kExts) {
    fs::path candidate = image_dir / (id + std::string(ext));
    std::error_code ec;
    if (fs::is_regular_file(candidate, ec)) return candidate;
  }
  throw MissingImage(id);
}

Dataset load_manifest(const fs::path& manifest_path, const fs::path& image_dir, const LoadOptions& options) {
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw ValidationError("cannot read manifest '" + manifest_path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  Dataset ds = parse_manifest(buf.str(), manifest_path.string());

  for (auto& img : ds.images) img.path = resolve_image_path(image_dir, img.id);

  detail::parallel_for(ds.images.size(), options.workers, [&](std::size_t i) {
    auto& img = ds.images[i];
    if (options.decode) {
      img.pixels = decode_image(img.path);
    } else if (!cv::haveImageReader(img.path.string())) {
      throw UnreadableImage(img.path.string());
    }
  });
  return ds;
}

std::string format_manifest(const Dataset& dataset) {
  std::string out(dataset.labeled ? kLabeledHeader : kUnlabeledHeader);
  out += '\n';
  for (const auto& img : dataset.images) {
    out += img.id;
    if (dataset.labeled) {
      const LesionClass c = img.label.value_or(LesionClass::Nevus);
      out += c == LesionClass::Melanoma ? ",1.0" : ",0.0";
      out += c == LesionClass::SeborrheicKeratosis ? ",1.0" : ",0.0";
    }
    out += '\n';
  }
  return out;
}

void write_manifest(const Dataset& dataset, const fs::path& manifest_path) {
  std::ofstream out(manifest_path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write manifest '" + manifest_path.string() + "'");
  out << format_manifest(dataset);
}

std::string_view split_unit_name(SplitUnit unit) {
  return unit == SplitUnit::OriginalImage ? "original-image" : "augmented-instance";
}

SplitUnit parse_split_unit(std::string_view name) {
  if (name == "original-image") return SplitUnit::OriginalImage;
  if (name == "augmented-instance") return SplitUnit::AugmentedInstance;
  throw ValidationError("unknown split unit '" + std::string(name) + "'");
}

DatasetSplit split(const Dataset& dataset, double fraction, std::uint64_t seed, SplitUnit unit, bool stratify) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ValidationError("split fraction must lie in (0, 1), got " + std::to_string(fraction));
  }
  if (dataset.empty()) throw ValidationError("cannot split an empty dataset");

  struct Unit {
    std::string id;
    int stratum;  // class index, or 3 for unlabeled
  };
  std::vector<Unit> units;
  for (const auto& img : dataset.images) {
    const int stratum = img.label ? static_cast<int>(class_index(*img.label)) : 3;
    if (unit == SplitUnit::OriginalImage) {
      units.push_back({img.id, stratum});
    } else {
      for (const auto& tag : all_augment_tags()) units.push_back({variant_id(img.id, tag), stratum});
    }
  }
  const std::size_t n = units.size();
  if (fraction * static_cast<double>(n) < 1.0) {
    throw ValidationError("split would leave the training side empty");
  }

  Xoshiro256 rng(seed);
  std::vector<char> in_train(n, 0);
  auto take = [&](std::vector<std::size_t> members) {
    rng.shuffle(std::span<std::size_t>(members));
    const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
    for (std::size_t i = 0; i < k && i < members.size(); ++i) in_train[members[i]] = 1;
  };
  if (stratify) {
    for (int s = 0; s < 4; ++s) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < n; ++i) {
        if (units[i].stratum == s) members.push_back(i);
      }
      take(std::move(members));
    }
  } else {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    take(std::move(all));
  }

  DatasetSplit out;
  out.seed = seed;
  out.fraction = fraction;
  out.unit = unit;
  out.stratified = stratify;
  for (std::size_t i = 0; i < n; ++i) (in_train[i] ? out.train_ids : out.holdout_ids).push_back(units[i].id);
  return out;
}

void write_split(const DatasetSplit& s, const fs::path& path, std::string_view comment) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write split record '" + path.string() + "'");
  std::ostringstream frac;
  frac.precision(17);
  frac << s.fraction;
  out << "lesion-split 1\n";
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "seed " << s.seed << '\n'
      << "fraction " << frac.str() << '\n'
      << "unit " << split_unit_name(s.unit) << '\n'
      << "stratified " << (s.stratified ? "true" : "false") << '\n'
      << "train " << s.train_ids.size() << '\n';
  for (const auto& id : s.train_ids) out << id << '\n';
  out << "holdout " << s.holdout_ids.size() << '\n';
  for (const auto& id : s.holdout_ids) out << id << '\n';
}

DatasetSplit read_split(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read split record '" + path.string() + "'");
  auto bad = [&](const std::string& what) {
    return ValidationError("split record '" + path.string() + "': " + what);
  };
  std::string line;
  auto expect_kv = [&](std::string_view key) {
    if (!std::getline(in, line)) throw bad("truncated");
    if (!line.starts_with(std::string(key) + " ")) throw bad("expected '" + std::string(key) + "'");
    return line.substr(key.size() + 1);
  };
  if (!std::getline(in, line) || line != "lesion-split 1") throw bad("bad magic line");
  while (in.peek() == '#') std::getline(in, line);
  DatasetSplit s;
  try {
    s.seed = std::stoull(expect_kv("seed"));
    s.fraction = std::stod(expect_kv("fraction"));
    s.unit = parse_split_unit(expect_kv("unit"));
    s.stratified = expect_kv("stratified") == "true";
    for (auto* list : {&s.train_ids, &s.holdout_ids}) {
      const auto count = std::stoull(expect_kv(list == &s.train_ids ? "train" : "holdout"));
      for (std::size_t i = 0; i < count; ++i) {
        if (!std::getline(in, line)) throw bad("truncated id list");
        list->push_back(line);
      }
    }
  } catch (const std::logic_error&) {
    throw bad("malformed number");
  }
  return s;
}

}  // namespace lesion
