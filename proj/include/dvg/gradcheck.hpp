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

#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "dvg/autograd.hpp"

namespace dvg {

// Central-difference gradient check of a scalar function of one tensor.
// Returns max over coordinates of |analytic - numeric| / max(1, |analytic|, |numeric|).
// Throws ShapeError when fn is not scalar-valued.
double grad_check(const std::function<Var(Tape&, const Var&)>& fn, const Tensor& point,
                  double h = 1e-4);

// Same check with respect to model parameters, perturbed in place and
// restored afterwards. max_coords_per_param > 0 checks only the first
// coordinates of each parameter in a fixed stride pattern.
double grad_check_params(const std::function<Var(Tape&)>& fn, std::span<Parameter* const> params,
                         double h = 1e-4, std::size_t max_coords_per_param = 0);

}  // namespace dvg
