#pragma once

// Named analytic field primitives, built from small JSON specs. This is what
// keeps scenario configs serializable: a config names a primitive and its
// parameters instead of carrying code. Primitives compose by sum and scalar
// multiple, so the examples used across the library (rotations, graded
// Holder drifts, trigonometric probes, bumps) are all expressible.

#include "klab/fields.hpp"

#include "json.hpp"

#include <string>
#include <vector>

namespace klab {

using Json = nlohmann::json;

// Vector fields. Recognised "type" values:
//   constant      {components: [..]}
//   linear        {matrix: [[..]], offset: [..] (optional)}
//   rotation      {plane: [i, j], omega: w}          rigid rotation in one plane
//   radial-holder {alpha: a, cutoff: R}              the rough radial drift
//   gaussian-bump {direction: [..], center: [..], width: w}
//   trigonometric {amplitudes: [..], wavevectors: [[..]], phases: [..]}
//                                                    one wave per component
//   sum           {terms: [spec, ...]}
//   scale         {factor: s, term: spec}
// Throws std::invalid_argument naming the offending key on any mismatch.
VectorField make_vector_field(const Json& spec, int n);

// Scalar coefficients. Types: constant {value}, trigonometric {amplitude,
// wavevector, phase}, gaussian-bump {amplitude, center, width}, bump
// {radius, amplitude}, sum, scale.
ScalarFn make_scalar(const Json& spec, int n);

// k-forms: {degree: k, channels: [scalar-spec, ...]} with C(n,k) channels,
// or the shorthand {type: bump-form, degree: k, radius: R, values: [..]}
// for a compactly supported form with constant core values.
KFormField make_form(const Json& spec, int n);

std::vector<std::string> vector_field_types();
std::vector<std::string> scalar_types();

} // namespace klab
