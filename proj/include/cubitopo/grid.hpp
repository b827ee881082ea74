#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cubitopo {

/// Extents and physical voxel spacing of a 2D or 3D grid.
///
/// Axes are stored slowest-first: (y, x) in 2D and (z, y, x) in 3D. Linear
/// indices are row-major in that order.
class GridShape {
public:
    GridShape() = default;
    explicit GridShape(std::vector<std::size_t> dims);
    GridShape(std::vector<std::size_t> dims, std::vector<double> spacing);

    int ndim() const { return static_cast<int>(dims_.size()); }
    std::size_t extent(int axis) const { return dims_[axis]; }
    const std::vector<std::size_t>& dims() const { return dims_; }
    const std::vector<double>& spacing() const { return spacing_; }
    std::size_t size() const;

    /// Row-major stride of each axis in grid points.
    std::vector<std::size_t> strides() const;

    bool operator==(const GridShape& other) const = default;

private:
    std::vector<std::size_t> dims_;
    std::vector<double> spacing_;
};

/// Real value per grid point.
class ScalarField {
public:
    ScalarField() = default;
    ScalarField(GridShape shape, std::vector<double> values);

    const GridShape& shape() const { return shape_; }
    std::span<const double> values() const { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    std::size_t size() const { return values_.size(); }

private:
    GridShape shape_;
    std::vector<double> values_;
};

/// Dense boolean mask.
struct BitField {
    GridShape shape;
    std::vector<std::uint8_t> bits;

    std::size_t count() const;
};

/// Class index per grid point. Class 1 is background; labels lie in [1, K].
class LabelMap {
public:
    LabelMap() = default;
    LabelMap(GridShape shape, int num_classes, std::vector<std::uint16_t> labels);

    const GridShape& shape() const { return shape_; }
    int num_classes() const { return num_classes_; }
    std::span<const std::uint16_t> labels() const { return labels_; }
    std::uint16_t operator[](std::size_t i) const { return labels_[i]; }
    std::size_t size() const { return labels_.size(); }

    /// Points whose label is one of `classes`.
    BitField mask(std::span<const int> classes) const;
    BitField mask(int cls) const;

    bool operator==(const LabelMap& other) const = default;

private:
    GridShape shape_;
    int num_classes_ = 0;
    std::vector<std::uint16_t> labels_;
};

/// K unconstrained real channels over one grid. Used for gradients and for
/// probability stacks that are not (yet) validated against the simplex.
class ChannelStack {
public:
    ChannelStack() = default;
    ChannelStack(GridShape shape, int num_channels, double fill = 0.0);
    ChannelStack(GridShape shape, std::vector<std::vector<double>> channels);

    const GridShape& shape() const { return shape_; }
    int num_channels() const { return static_cast<int>(channels_.size()); }
    std::size_t points() const { return shape_.size(); }

    std::span<double> channel(int k) { return channels_[k]; }
    std::span<const double> channel(int k) const { return channels_[k]; }
    double at(int k, std::size_t i) const { return channels_[k][i]; }
    double& at(int k, std::size_t i) { return channels_[k][i]; }

    bool operator==(const ChannelStack& other) const = default;

private:
    GridShape shape_;
    std::vector<std::vector<double>> channels_;
};

/// dL/d(channel value) at every grid point.
using GradField = ChannelStack;

/// Tolerance on the per-point channel sum of a ProbSegmentation.
inline constexpr double kSimplexTolerance = 1e-6;

/// Per-class probabilities on the pixel-wise simplex. Channel index k holds
/// class k + 1, so channel 0 is the background.
class ProbSegmentation {
public:
    ProbSegmentation() = default;
    explicit ProbSegmentation(ChannelStack stack);

    const GridShape& shape() const { return stack_.shape(); }
    int num_classes() const { return stack_.num_channels(); }
    std::span<const double> channel(int cls) const { return stack_.channel(cls - 1); }
    double prob(int cls, std::size_t i) const { return stack_.at(cls - 1, i); }
    const ChannelStack& stack() const { return stack_; }

private:
    ChannelStack stack_;
};

/// Sum of the probability channels of `classes` (foreground classes, 1-based).
/// Classes are mutually exclusive, so the sum is the probability of the union.
ScalarField union_field(const ChannelStack& stack, std::span<const int> classes);
ScalarField union_field(const ProbSegmentation& seg, std::span<const int> classes);

/// Label of the largest channel; ties resolve to the lowest class index.
LabelMap argmax_labels(const ProbSegmentation& seg);

/// True where value >= threshold.
BitField binarize(const ScalarField& field, double threshold);

ProbSegmentation one_hot(const LabelMap& labels);

}  // namespace cubitopo
