/* Copyright 2026 The DVG Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "dvg/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "dvg/error.hpp"

namespace dvg {

namespace {

double rel_error(double analytic, double numeric) {
  const double scale = std::max({1.0, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / scale;
}

double scalar_value(const Var& v) {
  if (v.value().size() != 1) {
    throw ShapeError("grad_check: function output has shape " + shape_string(v.shape()));
  }
  return v.item();
}

}  // namespace

double grad_check(const std::function<Var(Tape&, const Var&)>& fn, const Tensor& point, double h) {
  Tensor analytic;
  {
    Tape tape;
    Var x = tape.variable(point);
    Var y = fn(tape, x);
    scalar_value(y);
    tape.backward(y);
    analytic = tape.grad(x);
  }
  auto eval = [&](const Tensor& p) {
    Tape tape;
    return scalar_value(fn(tape, tape.constant(p)));
  };
  double worst = 0.0;
  Tensor probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double hi = point[i] + h, lo = point[i] - h;
    probe[i] = hi;
    const double up = eval(probe);
    probe[i] = lo;
    const double down = eval(probe);
    probe[i] = point[i];
    worst = std::max(worst, rel_error(analytic[i], (up - down) / (hi - lo)));
  }
  return worst;
}

double grad_check_params(const std::function<Var(Tape&)>& fn, std::span<Parameter* const> params,
                         double h, std::size_t max_coords_per_param) {
  std::vector<Tensor> analytic;
  {
    Tape tape;
    Var y = fn(tape);
    scalar_value(y);
    tape.backward(y);
    analytic = tape.grads(params);
  }
  auto eval = [&] {
    Tape tape;
    return scalar_value(fn(tape));
  };
  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& value = params[p]->value;
    const std::size_t n = value.size();
    const std::size_t stride =
        (max_coords_per_param == 0 || n <= max_coords_per_param) ? 1 : n / max_coords_per_param;
    for (std::size_t i = 0; i < n; i += stride) {
      const double orig = value[i];
      const double hi = orig + h, lo = orig - h;
      value[i] = hi;
      const double up = eval();
      value[i] = lo;
      const double down = eval();
      value[i] = orig;
      worst = std::max(worst, rel_error(analytic[p][i], (up - down) / (hi - lo)));
    }
  }
  return worst;
}

}  // namespace dvg
