#include "cubitopo/npy.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <sstream>

namespace cubitopo::npy {

static_assert(std::endian::native == std::endian::little, "npy I/O assumes a little-endian host");

namespace {

constexpr char kMagic[] = "\x93NUMPY";

std::size_t item_size(DType t) {
    switch (t) {
        case DType::F4: return 4;
        case DType::F8: return 8;
        case DType::U1: return 1;
        case DType::U2: return 2;
        case DType::I4: return 4;
        case DType::I8: return 8;
    }
    return 0;
}

const char* descr_of(DType t) {
    switch (t) {
        case DType::F4: return "<f4";
        case DType::F8: return "<f8";
        case DType::U1: return "|u1";
        case DType::U2: return "<u2";
        case DType::I4: return "<i4";
        case DType::I8: return "<i8";
    }
    return "";
}

DType parse_descr(const std::string& d) {
    if (d == "<f4") return DType::F4;
    if (d == "<f8") return DType::F8;
    if (d == "|u1" || d == "<u1") return DType::U1;
    if (d == "<u2") return DType::U2;
    if (d == "<i4") return DType::I4;
    if (d == "<i8") return DType::I8;
    throw NpyError("unsupported dtype '" + d + "'");
}

// Value following `'key':` in the header dict, up to the next top-level comma.
std::string header_value(const std::string& header, const std::string& key) {
    const auto k = header.find("'" + key + "'");
    if (k == std::string::npos) throw NpyError("header is missing '" + key + "'");
    auto pos = header.find(':', k);
    if (pos == std::string::npos) throw NpyError("malformed header near '" + key + "'");
    ++pos;
    while (pos < header.size() && header[pos] == ' ') ++pos;
    if (pos < header.size() && header[pos] == '(') {
        const auto end = header.find(')', pos);
        if (end == std::string::npos) throw NpyError("malformed shape tuple");
        return header.substr(pos, end - pos + 1);
    }
    auto end = header.find_first_of(",}", pos);
    if (end == std::string::npos) end = header.size();
    std::string v = header.substr(pos, end - pos);
    while (!v.empty() && v.back() == ' ') v.pop_back();
    return v;
}

std::vector<std::size_t> parse_shape(const std::string& tuple) {
    std::vector<std::size_t> shape;
    std::string inner = tuple.substr(1, tuple.size() - 2);
    std::stringstream ss(inner);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok.erase(std::remove(tok.begin(), tok.end(), ' '), tok.end());
        if (tok.empty()) continue;
        try {
            shape.push_back(static_cast<std::size_t>(std::stoull(tok)));
        } catch (const std::exception&) {
            throw NpyError("malformed shape entry '" + tok + "'");
        }
    }
    return shape;
}

template <typename T>
double read_as(const std::uint8_t* p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return static_cast<double>(v);
}

template <typename T>
void write_as(std::uint8_t* p, double v) {
    const T t = static_cast<T>(v);
    std::memcpy(p, &t, sizeof(T));
}

GridShape grid_from(std::vector<std::size_t> dims, std::vector<double> spacing) {
    if (spacing.empty()) spacing.assign(dims.size(), 1.0);
    return GridShape(std::move(dims), std::move(spacing));
}

}  // namespace

std::size_t Array::count() const {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::vector<double> Array::to_doubles() const {
    const std::size_t n = count();
    const std::size_t w = item_size(dtype);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t* p = raw.data() + i * w;
        switch (dtype) {
            case DType::F4: out[i] = read_as<float>(p); break;
            case DType::F8: out[i] = read_as<double>(p); break;
            case DType::U1: out[i] = read_as<std::uint8_t>(p); break;
            case DType::U2: out[i] = read_as<std::uint16_t>(p); break;
            case DType::I4: out[i] = read_as<std::int32_t>(p); break;
            case DType::I8: out[i] = read_as<std::int64_t>(p); break;
        }
    }
    return out;
}

Array decode(const std::string& bytes) {
    if (bytes.size() < 10 || bytes.compare(0, 6, kMagic, 6) != 0)
        throw NpyError("not an npy file (bad magic)");
    const auto major = static_cast<std::uint8_t>(bytes[6]);
    std::size_t header_len = 0;
    std::size_t offset = 0;
    if (major == 1) {
        header_len = static_cast<std::uint8_t>(bytes[8]) |
                     (static_cast<std::size_t>(static_cast<std::uint8_t>(bytes[9])) << 8);
        offset = 10;
    } else if (major == 2 || major == 3) {
        if (bytes.size() < 12) throw NpyError("truncated npy header");
        for (int b = 0; b < 4; ++b)
            header_len |= static_cast<std::size_t>(static_cast<std::uint8_t>(bytes[8 + b])) << (8 * b);
        offset = 12;
    } else {
        throw NpyError("unsupported npy version " + std::to_string(major));
    }
    if (bytes.size() < offset + header_len) throw NpyError("truncated npy header");
    const std::string header = bytes.substr(offset, header_len);

    Array a;
    std::string descr = header_value(header, "descr");
    descr.erase(std::remove(descr.begin(), descr.end(), '\''), descr.end());
    a.dtype = parse_descr(descr);
    if (header_value(header, "fortran_order") != "False")
        throw NpyError("fortran-ordered arrays are not supported");
    a.shape = parse_shape(header_value(header, "shape"));

    const std::size_t nbytes = a.count() * item_size(a.dtype);
    const std::size_t data_start = offset + header_len;
    if (bytes.size() - data_start < nbytes) throw NpyError("npy payload shorter than header shape");
    a.raw.assign(bytes.begin() + static_cast<std::ptrdiff_t>(data_start),
                 bytes.begin() + static_cast<std::ptrdiff_t>(data_start + nbytes));
    return a;
}

std::string encode(const Array& array) {
    std::string shape = "(";
    for (std::size_t i = 0; i < array.shape.size(); ++i) {
        shape += std::to_string(array.shape[i]);
        shape += (array.shape.size() == 1 || i + 1 < array.shape.size()) ? "," : "";
        if (i + 1 < array.shape.size()) shape += " ";
    }
    shape += ")";
    std::string header = std::string("{'descr': '") + descr_of(array.dtype) +
                         "', 'fortran_order': False, 'shape': " + shape + ", }";
    // Pad so the payload starts on a 64-byte boundary; header ends with '\n'.
    const std::size_t total = 10 + header.size() + 1;
    header.append((64 - total % 64) % 64, ' ');
    header.push_back('\n');

    std::string out(kMagic, 6);
    out.push_back('\x01');
    out.push_back('\x00');
    out.push_back(static_cast<char>(header.size() & 0xff));
    out.push_back(static_cast<char>((header.size() >> 8) & 0xff));
    out += header;
    out.append(reinterpret_cast<const char*>(array.raw.data()), array.raw.size());
    return out;
}

Array load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NpyError("cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode(bytes);
    } catch (const NpyError& e) {
        throw NpyError(path.string() + ": " + e.what());
    }
}

void save(const std::filesystem::path& path, const Array& array) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw NpyError("cannot write " + path.string());
    const std::string bytes = encode(array);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw NpyError("write failed for " + path.string());
}

Array from_doubles(std::vector<std::size_t> shape, const std::vector<double>& values, DType dtype) {
    Array a;
    a.shape = std::move(shape);
    a.dtype = dtype;
    if (a.count() != values.size()) throw NpyError("value count does not match shape");
    const std::size_t w = item_size(dtype);
    a.raw.resize(values.size() * w);
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint8_t* p = a.raw.data() + i * w;
        switch (dtype) {
            case DType::F4: write_as<float>(p, values[i]); break;
            case DType::F8: write_as<double>(p, values[i]); break;
            case DType::U1: write_as<std::uint8_t>(p, values[i]); break;
            case DType::U2: write_as<std::uint16_t>(p, values[i]); break;
            case DType::I4: write_as<std::int32_t>(p, values[i]); break;
            case DType::I8: write_as<std::int64_t>(p, values[i]); break;
        }
    }
    return a;
}

ScalarField load_field(const std::filesystem::path& path, std::vector<double> spacing) {
    Array a = load(path);
    if (a.shape.size() != 2 && a.shape.size() != 3)
        throw NpyError(path.string() + ": expected a 2D or 3D array, got " +
                       std::to_string(a.shape.size()) + " axes");
    return ScalarField(grid_from(a.shape, std::move(spacing)), a.to_doubles());
}

ChannelStack load_stack(const std::filesystem::path& path, std::vector<double> spacing) {
    Array a = load(path);
    if (a.shape.size() != 3 && a.shape.size() != 4)
        throw NpyError(path.string() + ": expected (K, ...) with a 2D or 3D grid");
    const std::size_t k = a.shape[0];
    std::vector<std::size_t> dims(a.shape.begin() + 1, a.shape.end());
    GridShape shape = grid_from(dims, std::move(spacing));
    const std::vector<double> flat = a.to_doubles();
    const std::size_t n = shape.size();
    std::vector<std::vector<double>> channels(k);
    for (std::size_t c = 0; c < k; ++c)
        channels[c].assign(flat.begin() + static_cast<std::ptrdiff_t>(c * n),
                           flat.begin() + static_cast<std::ptrdiff_t>((c + 1) * n));
    return ChannelStack(std::move(shape), std::move(channels));
}

LabelMap load_labels(const std::filesystem::path& path, int num_classes, std::vector<double> spacing) {
    Array a = load(path);
    if (a.dtype == DType::F4 || a.dtype == DType::F8)
        throw NpyError(path.string() + ": labels must have an integer dtype");
    if (a.shape.size() != 2 && a.shape.size() != 3)
        throw NpyError(path.string() + ": expected a 2D or 3D label array");
    const std::vector<double> flat = a.to_doubles();
    std::vector<std::uint16_t> labels(flat.size());
    std::transform(flat.begin(), flat.end(), labels.begin(),
                   [](double v) { return static_cast<std::uint16_t>(v); });
    return LabelMap(grid_from(a.shape, std::move(spacing)), num_classes, std::move(labels));
}

Array field_array(const ScalarField& field, DType dtype) {
    return from_doubles(field.shape().dims(),
                        std::vector<double>(field.values().begin(), field.values().end()), dtype);
}

Array stack_array(const ChannelStack& stack, DType dtype) {
    std::vector<std::size_t> shape{static_cast<std::size_t>(stack.num_channels())};
    shape.insert(shape.end(), stack.shape().dims().begin(), stack.shape().dims().end());
    std::vector<double> flat;
    flat.reserve(stack.points() * stack.num_channels());
    for (int c = 0; c < stack.num_channels(); ++c)
        flat.insert(flat.end(), stack.channel(c).begin(), stack.channel(c).end());
    return from_doubles(std::move(shape), flat, dtype);
}

Array labels_array(const LabelMap& labels) {
    std::vector<double> flat(labels.labels().begin(), labels.labels().end());
    return from_doubles(labels.shape().dims(), flat,
                        labels.num_classes() <= 255 ? DType::U1 : DType::U2);
}

}  // namespace cubitopo::npy
