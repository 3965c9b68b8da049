#include "striatum/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "striatum/error.hpp"

namespace striatum {

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ')';
    return os.str();
}

static void check_extents(const Shape& shape) {
    if (shape.empty()) throw ShapeError("tensor shape must have at least one extent");
    if (std::any_of(shape.begin(), shape.end(), [](std::size_t e) { return e == 0; }))
        throw ShapeError("tensor extents must be >= 1, got " + shape_to_string(shape));
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    check_extents(shape_);
    data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, AlignedVector data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_extents(shape_);
    if (shape_size(shape_) != data_.size())
        throw ShapeError("tensor shape " + shape_to_string(shape_) + " needs " +
                         std::to_string(shape_size(shape_)) + " values, got " +
                         std::to_string(data_.size()));
}

Tensor Tensor::from_list(Shape shape, std::initializer_list<double> values) {
    return Tensor(std::move(shape), AlignedVector(values));
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_size(shape) != data_.size())
        throw ShapeError("cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(shape));
    return Tensor(std::move(shape), data_);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

}  // namespace striatum
