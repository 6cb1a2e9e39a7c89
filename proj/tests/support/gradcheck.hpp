#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "lnn/frontend.hpp"
#include "lnn/model.hpp"

namespace lnn::testing {

struct TensorGradCheck {
  std::string name;
  double max_abs_diff = 0.0;
  double max_abs_fd = 0.0;
  double max_abs_analytic = 0.0;

  // Error relative to the tensor's largest gradient entry. Entry-wise
  // relative error is meaningless where a gradient is ~0, which saturated
  // sigmoid gates produce in bulk.
  double relative() const {
    const double denom = std::max(max_abs_fd, max_abs_analytic);
    return denom > 0.0 ? max_abs_diff / denom : max_abs_diff;
  }
};

inline double image_loss(const Model& model, const Tensor& image, std::size_t label) {
  return softmax_cross_entropy(forward(model, image).logits, label).loss;
}

// Central differences over every entry of every trainable tensor.
inline std::vector<TensorGradCheck> check_gradients(Model model, const Tensor& image,
                                                    std::size_t label, double h = 1e-5) {
  const BackwardResult analytic = backward(model, forward(model, image), label);
  std::vector<NamedTensor> params = named_parameters(model);
  std::vector<TensorGradCheck> out;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& t = *params[p].value;
    const Tensor& g = analytic.grads.tensors[p];
    TensorGradCheck c{params[p].name};
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double v = t[i];
      t[i] = v + h;
      const double up = image_loss(model, image, label);
      t[i] = v - h;
      const double down = image_loss(model, image, label);
      t[i] = v;
      const double fd = (up - down) / (2.0 * h);
      c.max_abs_diff = std::max(c.max_abs_diff, std::fabs(fd - g[i]));
      c.max_abs_fd = std::max(c.max_abs_fd, std::fabs(fd));
      c.max_abs_analytic = std::max(c.max_abs_analytic, std::fabs(g[i]));
    }
    out.push_back(c);
  }
  return out;
}

}  // namespace lnn::testing
