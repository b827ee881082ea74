#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "cubitopo/grid.hpp"

namespace cubitopo::npy {

class NpyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class DType { F4, F8, U1, U2, I4, I8 };

/// A little-endian C-order array as stored in a .npy file.
struct Array {
    std::vector<std::size_t> shape;
    DType dtype = DType::F8;
    std::vector<std::uint8_t> raw;

    std::size_t count() const;
    std::vector<double> to_doubles() const;
};

Array decode(const std::string& bytes);
std::string encode(const Array& array);

Array load(const std::filesystem::path& path);
void save(const std::filesystem::path& path, const Array& array);

Array from_doubles(std::vector<std::size_t> shape, const std::vector<double>& values, DType dtype);

// Typed helpers. Fields and stacks are stored with axes (z, y, x); probability
// stacks carry the class axis first. Labels are stored 1-based.

ScalarField load_field(const std::filesystem::path& path, std::vector<double> spacing = {});
ChannelStack load_stack(const std::filesystem::path& path, std::vector<double> spacing = {});
LabelMap load_labels(const std::filesystem::path& path, int num_classes,
                     std::vector<double> spacing = {});

Array field_array(const ScalarField& field, DType dtype = DType::F8);
Array stack_array(const ChannelStack& stack, DType dtype = DType::F8);
Array labels_array(const LabelMap& labels);

}  // namespace cubitopo::npy
