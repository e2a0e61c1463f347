#pragma once

#include "sparsect/array2d.hpp"
#include "sparsect/geometry.hpp"
#include "sparsect/nn/tape.hpp"

namespace sparsect {

/// Wraps an Image2D as a (1,1,n,n) tensor.
template <class T>
nn::Tensor<T> to_tensor(const Image2D& image);

/// Wraps a Sinogram as a (1,1,angles,detectors) tensor.
template <class T>
nn::Tensor<T> to_tensor(const Sinogram& sino);

/// Reads a (1,1,n,n) tensor back into an Image2D.
template <class T>
Image2D to_image(const nn::Tensor<T>& t);

/// The projection operator as a tape primitive. Forward applies
/// forward_project to a (1,1,n,n) image; backward back-projects the incoming
/// gradient, which is exact since the operator is linear.
template <class T>
nn::Var<T> projection_node(const nn::Var<T>& x, const Geometry& geom);

}  // namespace sparsect
