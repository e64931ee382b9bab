#include "d2c/encoders/image_source.hpp"

#include "d2c/numcore/errors.hpp"
#include "d2c/numcore/rng.hpp"
#include "d2c/numcore/tensor_io.hpp"

namespace d2c::enc {

FeatureMap::FeatureMap(Tensor grid) : grid_(std::move(grid)) {
    if (grid_.rank() != 3) {
        throw ShapeError("feature map must be rank 3, got shape " + shape_string(grid_.shape()));
    }
    if (grid_.dim(0) != grid_.dim(1)) {
        throw ShapeError("feature map grid must be square, got " + shape_string(grid_.shape()));
    }
    if (grid_.dim(0) == 0 || grid_.dim(2) == 0) throw ShapeError("feature map is empty");
    if (!grid_.all_finite()) throw FormatError("feature map contains non-finite values");
}

Tensor FeatureMap::flattened() const { return grid_.reshaped({side() * side(), width()}); }

FeatureMap provide_image(const std::filesystem::path& path) {
    return FeatureMap(load_tensor(path));
}

FeatureMap provide_image(const SyntheticImageSpec& spec) {
    Rng rng(spec.seed);
    return FeatureMap(rng.normal_tensor({spec.side, spec.side, spec.width}, 1.0));
}

} // namespace d2c::enc
