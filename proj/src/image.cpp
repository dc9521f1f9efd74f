#include "lesion/image.hpp"

#include <fstream>
#include <sstream>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "detail/binio.hpp"
#include "lesion/error.hpp"

namespace lesion {

RgbImage decode_image(const std::filesystem::path& path) {
  cv::Mat bgr;
  try {
    bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  } catch (const cv::Exception&) {
    throw UnreadableImage(path.string());
  }
  if (bgr.empty() || bgr.type() != CV_8UC3) throw UnreadableImage(path.string());

  RgbImage out(bgr.rows, bgr.cols);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<std::uint8_t>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      out.at(y, x, 0) = row[3 * x + 2];
      out.at(y, x, 1) = row[3 * x + 1];
      out.at(y, x, 2) = row[3 * x + 0];
    }
  }
  return out;
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
  cv::Mat bgr(image.height, image.width, CV_8UC3);
  for (int y = 0; y < image.height; ++y) {
    auto* row = bgr.ptr<std::uint8_t>(y);
    for (int x = 0; x < image.width; ++x) {
      row[3 * x + 2] = image.at(y, x, 0);
      row[3 * x + 1] = image.at(y, x, 1);
      row[3 * x + 0] = image.at(y, x, 2);
    }
  }
  if (!cv::imwrite(path.string(), bgr)) throw RuntimeFailure("cannot write '" + path.string() + "'");
}

void dump_tensor(const std::filesystem::path& path, const Tensor3& tensor) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write '" + path.string() + "'");
  out << tensor.height << ' ' << tensor.width << ' ' << kChannels << '\n';
  for (double v : tensor.data) binio::put<float>(out, static_cast<float>(v));
}

Tensor3 load_tensor_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read '" + path.string() + "'");
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  int h = 0, w = 0, c = 0;
  if (!(hs >> h >> w >> c) || h < 1 || w < 1 || c != kChannels) {
    throw ValidationError("bad tensor dump header in '" + path.string() + "'");
  }
  Tensor3 t(h, w);
  for (double& v : t.data) v = binio::get<float>(in);
  return t;
}

}  // namespace lesion
