#include "sparsect/nn/params.hpp"

#include <fstream>
#include <stdexcept>

#include "sparsect/io.hpp"

namespace sparsect::nn {

template <class T>
void Params<T>::add(std::string name, Tensor<T> value) {
    for (const auto& n : names_)
        if (n == name) throw GraphError("duplicate parameter name " + name);
    names_.push_back(std::move(name));
    tensors_.push_back(std::move(value));
}

template <class T>
std::size_t Params<T>::count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
}

template <class T>
std::size_t Params<T>::index(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return i;
    throw std::out_of_range("no parameter named " + name);
}

template <class T>
std::vector<Var<T>> Params<T>::bind(Tape<T>& tape) const {
    std::vector<Var<T>> vars;
    vars.reserve(tensors_.size());
    for (const auto& t : tensors_) vars.push_back(tape.variable(t));
    return vars;
}

template <class T>
void Params<T>::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    io::write_header(out, {static_cast<std::uint32_t>(size()), static_cast<std::uint32_t>(count()),
                           io::DType::kTensorBundle});
    for (const auto& t : tensors_)
        for (T v : t.values()) io::write_f32(out, static_cast<float>(v));
    std::uint64_t offset = 0;
    for (std::size_t i = 0; i < size(); ++i) {
        io::write_u32(out, static_cast<std::uint32_t>(names_[i].size()));
        out.write(names_[i].data(), static_cast<std::streamsize>(names_[i].size()));
        io::write_u32(out, static_cast<std::uint32_t>(tensors_[i].rank()));
        for (std::size_t d : tensors_[i].shape()) io::write_u32(out, static_cast<std::uint32_t>(d));
        io::write_u64(out, offset);
        offset += tensors_[i].size();
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

template <class T>
Params<T> Params<T>::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    const auto h = io::read_header(in);
    if (h.dtype != io::DType::kTensorBundle) throw std::runtime_error(path.string() + " is not a tensor bundle");
    std::vector<float> payload(h.cols);
    for (auto& v : payload) v = io::read_f32(in);
    Params p;
    for (std::uint32_t i = 0; i < h.rows; ++i) {
        std::string name(io::read_u32(in), '\0');
        if (!in.read(name.data(), static_cast<std::streamsize>(name.size())))
            throw std::runtime_error("truncated tensor index in " + path.string());
        Shape shape(io::read_u32(in));
        for (auto& d : shape) d = io::read_u32(in);
        const std::uint64_t offset = io::read_u64(in);
        const std::size_t n = shape_size(shape);
        if (offset + n > payload.size()) throw std::runtime_error("tensor index out of range in " + path.string());
        std::vector<T> values(payload.begin() + static_cast<long>(offset), payload.begin() + static_cast<long>(offset + n));
        p.add(std::move(name), Tensor<T>(std::move(shape), std::move(values)));
    }
    return p;
}

template class Params<float>;
template class Params<double>;

}  // namespace sparsect::nn
