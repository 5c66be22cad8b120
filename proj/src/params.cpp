#include "revode/params.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "revode/errors.hpp"

namespace revode {

using nlohmann::json;

std::size_t TensorSpec::size() const {
    std::size_t n = 1;
    for (std::size_t d : dims) n *= d;
    return n;
}

Params::Params(std::vector<TensorSpec> shape, Vec values)
    : shape_(std::move(shape)), values_(std::move(values)) {
    offsets_.reserve(shape_.size());
    std::size_t total = 0;
    for (const auto& t : shape_) {
        offsets_.push_back(total);
        total += t.size();
    }
    if (total != values_.size()) {
        throw ConfigError("Params: declared tensor sizes sum to " + std::to_string(total) +
                          " but " + std::to_string(values_.size()) + " values were given");
    }
}

Params Params::zeros(std::vector<TensorSpec> shape) {
    std::size_t total = 0;
    for (const auto& t : shape) total += t.size();
    return Params(std::move(shape), Vec(total, 0.0));
}

std::size_t Params::offset_of(std::string_view tensor_name) const {
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (shape_[i].name == tensor_name) return i;
    }
    throw ConfigError("Params: no tensor named '" + std::string(tensor_name) + "'");
}

std::span<const double> Params::view(std::string_view tensor_name) const {
    std::size_t i = offset_of(tensor_name);
    return {values_.data() + offsets_[i], shape_[i].size()};
}

std::span<double> Params::view(std::string_view tensor_name) {
    std::size_t i = offset_of(tensor_name);
    return {values_.data() + offsets_[i], shape_[i].size()};
}

namespace {

static_assert(sizeof(double) == 8);

void write_f64_le(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    if constexpr (std::endian::native == std::endian::big) {
        bits = __builtin_bswap64(bits);
    }
    os.write(reinterpret_cast<const char*>(&bits), 8);
}

double read_f64_le(std::istream& is) {
    std::uint64_t bits = 0;
    is.read(reinterpret_cast<char*>(&bits), 8);
    if constexpr (std::endian::native == std::endian::big) {
        bits = __builtin_bswap64(bits);
    }
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace

void Params::save(const std::string& path_prefix) const {
    {
        std::ofstream bin(path_prefix + ".params.bin", std::ios::binary);
        if (!bin) throw DataError("cannot open " + path_prefix + ".params.bin for writing");
        for (double v : values_) write_f64_le(bin, v);
    }
    json desc;
    desc["total"] = values_.size();
    desc["tensors"] = json::array();
    for (const auto& t : shape_) {
        desc["tensors"].push_back({{"name", t.name}, {"dims", t.dims}});
    }
    std::ofstream js(path_prefix + ".params.json");
    if (!js) throw DataError("cannot open " + path_prefix + ".params.json for writing");
    js << desc.dump(2) << "\n";
}

Params Params::load(const std::string& path_prefix) {
    std::ifstream js(path_prefix + ".params.json");
    if (!js) throw DataError("cannot open " + path_prefix + ".params.json");
    json desc = json::parse(js);

    std::vector<TensorSpec> shape;
    std::size_t total = 0;
    for (const auto& t : desc.at("tensors")) {
        TensorSpec spec;
        spec.name = t.at("name").get<std::string>();
        spec.dims = t.at("dims").get<std::vector<std::size_t>>();
        total += spec.size();
        shape.push_back(std::move(spec));
    }
    if (desc.contains("total") && desc["total"].get<std::size_t>() != total) {
        throw DataError(path_prefix + ".params.json: 'total' disagrees with tensor sizes");
    }

    std::ifstream bin(path_prefix + ".params.bin", std::ios::binary);
    if (!bin) throw DataError("cannot open " + path_prefix + ".params.bin");
    Vec values(total);
    for (std::size_t i = 0; i < total; ++i) {
        values[i] = read_f64_le(bin);
        if (!bin) throw DataError(path_prefix + ".params.bin: truncated at value " + std::to_string(i));
    }
    return Params(std::move(shape), std::move(values));
}

}  // namespace revode
