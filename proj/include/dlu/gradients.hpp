// Copyright (c) 2026 The DLU Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "dlu/upsampling.hpp"

namespace dlu {

template <typename T>
struct ConvBackward {
  BasicTensor<T> d_input;
  BasicConvSpec<T> d_spec;  // weight and bias gradients, same geometry as the layer
};

template <typename T>
struct ReassembleBackward {
  BasicTensor<T> d_input;
  BasicTensor<T> d_kernels;
};

template <typename T>
struct ExpandBackward {
  BasicTensor<T> d_source;
  BasicTensor<T> d_offsets;
};

// Gradients of a whole operator. d_params follows the params' layers()
// order; d_offsets is only filled for DLU.
template <typename T>
struct BasicGradBundle {
  BasicTensor<T> d_input;
  std::vector<BasicConvSpec<T>> d_params;
  BasicTensor<T> d_offsets;

  bool all_finite() const;
};

using GradBundle = BasicGradBundle<double>;

template <typename T>
ConvBackward<T> conv2d_backward(const BasicTensor<T>& input, const BasicConvSpec<T>& spec,
                                const BasicTensor<T>& d_output);

// d_in = out * (d_out - <out, d_out>) per location.
template <typename T>
BasicTensor<T> softmax_backward(const BasicTensor<T>& output, const BasicTensor<T>& d_output);

template <typename T>
ReassembleBackward<T> reassemble_backward(const BasicTensor<T>& input,
                                          const BasicKernelField<T>& kernels,
                                          const BasicTensor<T>& d_output,
                                          const UpsampleConfig& config);

// Adjoint of expand_kernel_space. Offset gradients come from the linear
// form inside the interpolation cell. At an integer coordinate the cell on
// the positive side is used (zero at the last row/column); an axis whose
// coordinate was clamped gets zero gradient.
template <typename T>
ExpandBackward<T> expand_backward(const BasicKernelField<T>& source,
                                  const BasicOffsetField<T>& offsets,
                                  const BasicTensor<T>& d_expanded,
                                  const UpsampleConfig& config);

template <typename T>
BasicGradBundle<T> dlu_backward(const BasicTensor<T>& input, const BasicDluParams<T>& params,
                                const UpsampleConfig& config, const BasicTensor<T>& d_output);

// Same, reusing the intermediates of an earlier dlu_trace on this input.
template <typename T>
BasicGradBundle<T> dlu_backward(const BasicDluTrace<T>& trace, const BasicTensor<T>& input,
                                const BasicDluParams<T>& params, const UpsampleConfig& config,
                                const BasicTensor<T>& d_output);

template <typename T>
BasicGradBundle<T> carafe_backward(const BasicTensor<T>& input,
                                   const BasicCarafeParams<T>& params,
                                   const UpsampleConfig& config,
                                   const BasicTensor<T>& d_output);

namespace testing {
// Fault injection for exercising the check pipeline: the named backward
// ("conv2d", "softmax", "reassemble", "expand", "dlu", "carafe") returns
// negated gradients until cleared with an empty name.
void inject_gradient_sign_fault(std::string_view op);
std::string injected_gradient_sign_fault();
}  // namespace testing

}  // namespace dlu
