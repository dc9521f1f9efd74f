#include "lesion/error.hpp"

#include <utility>

namespace lesion {

MissingImage::MissingImage(std::string id)
    : ValidationError("missing image for id '" + id + "'"), id_(std::move(id)) {}

DuplicateId::DuplicateId(std::string id)
    : ValidationError("duplicate image id '" + id + "'"), id_(std::move(id)) {}

UnreadableImage::UnreadableImage(std::string path)
    : ValidationError("cannot decode image '" + path + "'"), path_(std::move(path)) {}

MissingLayer::MissingLayer(std::string name)
    : ValidationError("model does not expose output '" + name + "'"), name_(std::move(name)) {}

SideMismatch::SideMismatch(std::string image_id, int expected, int actual)
    : ValidationError("image '" + image_id + "' has side " + std::to_string(actual) +
                      ", backend expects " + std::to_string(expected)),
      image_id_(std::move(image_id)) {}

ConvergenceError::ConvergenceError(const std::string& what, double residual)
    : RuntimeFailure(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}

}  // namespace lesion
