#include "cubitopo/grid.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>

namespace cubitopo {

GridShape::GridShape(std::vector<std::size_t> dims)
    : GridShape(dims, std::vector<double>(dims.size(), 1.0)) {}

GridShape::GridShape(std::vector<std::size_t> dims, std::vector<double> spacing)
    : dims_(std::move(dims)), spacing_(std::move(spacing)) {
    if (dims_.size() != 2 && dims_.size() != 3)
        throw std::invalid_argument("grid must be 2D or 3D, got " +
                                    std::to_string(dims_.size()) + " axes");
    if (spacing_.size() != dims_.size())
        throw std::invalid_argument("spacing length does not match grid dimensionality");
    for (std::size_t d : dims_)
        if (d < 1) throw std::invalid_argument("grid extent must be >= 1");
    for (double s : spacing_)
        if (!(s > 0.0) || !std::isfinite(s))
            throw std::invalid_argument("grid spacing must be positive and finite");
}

std::size_t GridShape::size() const {
    if (dims_.empty()) return 0;
    return std::accumulate(dims_.begin(), dims_.end(), std::size_t{1}, std::multiplies<>());
}

std::vector<std::size_t> GridShape::strides() const {
    std::vector<std::size_t> s(dims_.size(), 1);
    for (int a = ndim() - 2; a >= 0; --a) s[a] = s[a + 1] * dims_[a + 1];
    return s;
}

ScalarField::ScalarField(GridShape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != shape_.size())
        throw std::invalid_argument("field has " + std::to_string(values_.size()) +
                                    " values for a grid of " + std::to_string(shape_.size()));
    for (double v : values_)
        if (!std::isfinite(v)) throw std::invalid_argument("field contains non-finite values");
}

std::size_t BitField::count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

LabelMap::LabelMap(GridShape shape, int num_classes, std::vector<std::uint16_t> labels)
    : shape_(std::move(shape)), num_classes_(num_classes), labels_(std::move(labels)) {
    if (num_classes_ < 2) throw std::invalid_argument("label map needs at least 2 classes");
    if (labels_.size() != shape_.size())
        throw std::invalid_argument("label count does not match grid size");
    for (auto l : labels_)
        if (l < 1 || l > num_classes_)
            throw std::invalid_argument("label " + std::to_string(l) + " outside [1, " +
                                        std::to_string(num_classes_) + "]");
}

BitField LabelMap::mask(std::span<const int> classes) const {
    std::vector<std::uint8_t> selected(num_classes_ + 1, 0);
    for (int c : classes) {
        if (c < 1 || c > num_classes_) throw std::invalid_argument("class index out of range");
        selected[c] = 1;
    }
    BitField out{shape_, std::vector<std::uint8_t>(labels_.size())};
    for (std::size_t i = 0; i < labels_.size(); ++i) out.bits[i] = selected[labels_[i]];
    return out;
}

BitField LabelMap::mask(int cls) const {
    const int one[] = {cls};
    return mask(one);
}

ChannelStack::ChannelStack(GridShape shape, int num_channels, double fill)
    : shape_(std::move(shape)),
      channels_(num_channels, std::vector<double>(shape_.size(), fill)) {}

ChannelStack::ChannelStack(GridShape shape, std::vector<std::vector<double>> channels)
    : shape_(std::move(shape)), channels_(std::move(channels)) {
    for (const auto& c : channels_)
        if (c.size() != shape_.size())
            throw std::invalid_argument("channel size does not match grid size");
}

ProbSegmentation::ProbSegmentation(ChannelStack stack) : stack_(std::move(stack)) {
    const int k = stack_.num_channels();
    if (k < 2) throw std::invalid_argument("segmentation needs at least 2 classes");
    for (std::size_t i = 0; i < stack_.points(); ++i) {
        double sum = 0.0;
        for (int c = 0; c < k; ++c) {
            const double p = stack_.at(c, i);
            if (!(p >= 0.0) || !std::isfinite(p))
                throw std::invalid_argument("probability at point " + std::to_string(i) +
                                            " is negative or non-finite");
            sum += p;
        }
        if (std::abs(sum - 1.0) > kSimplexTolerance)
            throw std::invalid_argument("probabilities at point " + std::to_string(i) +
                                        " sum to " + std::to_string(sum));
    }
}

ScalarField union_field(const ChannelStack& stack, std::span<const int> classes) {
    if (classes.empty()) throw std::invalid_argument("union_field: empty class set");
    for (int c : classes)
        if (c < 2 || c > stack.num_channels())
            throw std::invalid_argument("union_field: class " + std::to_string(c) +
                                        " is not a foreground class");
    std::vector<double> values(stack.points(), 0.0);
    for (int c : classes) {
        auto ch = stack.channel(c - 1);
        for (std::size_t i = 0; i < values.size(); ++i) values[i] += ch[i];
    }
    return ScalarField(stack.shape(), std::move(values));
}

ScalarField union_field(const ProbSegmentation& seg, std::span<const int> classes) {
    return union_field(seg.stack(), classes);
}

LabelMap argmax_labels(const ProbSegmentation& seg) {
    const std::size_t n = seg.stack().points();
    const int k = seg.num_classes();
    std::vector<std::uint16_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        int best = 1;
        double best_p = seg.prob(1, i);
        for (int c = 2; c <= k; ++c) {
            const double p = seg.prob(c, i);
            if (p > best_p) {
                best = c;
                best_p = p;
            }
        }
        labels[i] = static_cast<std::uint16_t>(best);
    }
    return LabelMap(seg.shape(), k, std::move(labels));
}

BitField binarize(const ScalarField& field, double threshold) {
    BitField out{field.shape(), std::vector<std::uint8_t>(field.size())};
    for (std::size_t i = 0; i < field.size(); ++i) out.bits[i] = field[i] >= threshold ? 1 : 0;
    return out;
}

ProbSegmentation one_hot(const LabelMap& labels) {
    ChannelStack stack(labels.shape(), labels.num_classes(), 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) stack.at(labels[i] - 1, i) = 1.0;
    return ProbSegmentation(std::move(stack));
}

}  // namespace cubitopo
