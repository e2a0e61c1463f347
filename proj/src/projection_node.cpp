#include "sparsect/projection_node.hpp"

#include <memory>

#include "sparsect/projection.hpp"

namespace sparsect {

template <class T>
nn::Tensor<T> to_tensor(const Image2D& image) {
    nn::Tensor<T> t(nn::Shape{1, 1, image.rows(), image.cols()});
    for (std::size_t i = 0; i < image.size(); ++i) t[i] = static_cast<T>(image[i]);
    return t;
}

template <class T>
nn::Tensor<T> to_tensor(const Sinogram& sino) {
    nn::Tensor<T> t(nn::Shape{1, 1, sino.num_angles(), sino.num_detectors()});
    for (std::size_t i = 0; i < sino.size(); ++i) t[i] = static_cast<T>(sino[i]);
    return t;
}

template <class T>
Image2D to_image(const nn::Tensor<T>& t) {
    if (t.rank() != 4 || t.dim(0) != 1 || t.dim(1) != 1 || t.dim(2) != t.dim(3))
        throw ConfigError("to_image: expected a (1,1,n,n) tensor, got " + nn::shape_str(t.shape()));
    Image2D image(t.dim(2));
    for (std::size_t i = 0; i < image.size(); ++i) image[i] = static_cast<double>(t[i]);
    return image;
}

template <class T>
nn::Var<T> projection_node(const nn::Var<T>& x, const Geometry& geom) {
    const std::size_t n = geom.image_size();
    if (x.shape() != nn::Shape{1, 1, n, n})
        throw nn::GraphError("projection_node: expected image shape (1,1," + std::to_string(n) + "," +
                             std::to_string(n) + "), got " + nn::shape_str(x.shape()));
    auto g = std::make_shared<const Geometry>(geom);
    nn::Tensor<T> out(nn::Shape{1, 1, geom.num_angles(), geom.num_detectors()});
    forward_project<T>(x.value().values(), *g, out.values());
    return x.tape().record(std::move(out), {x}, [x, g](nn::Tape<T>& tape, const nn::Tensor<T>& grad, const nn::Tensor<T>&) {
        if (auto* gx = tape.grad_sink(x)) {
            nn::Tensor<T> back(gx->shape());
            back_project<T>(grad.values(), *g, back.values());
            for (std::size_t i = 0; i < back.size(); ++i) (*gx)[i] += back[i];
        }
    });
}

#define SPARSECT_INSTANTIATE(T)                                       \
    template nn::Tensor<T> to_tensor<T>(const Image2D&);               \
    template nn::Tensor<T> to_tensor<T>(const Sinogram&);              \
    template Image2D to_image<T>(const nn::Tensor<T>&);                \
    template nn::Var<T> projection_node<T>(const nn::Var<T>&, const Geometry&);
SPARSECT_INSTANTIATE(float)
SPARSECT_INSTANTIATE(double)
#undef SPARSECT_INSTANTIATE

}  // namespace sparsect
