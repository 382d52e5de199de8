#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedleak/model.hpp"

namespace fedleak {

// Result of checking one architecture/loss combination over several random
// instances. Relative error per entry is |analytic - numeric| divided by
// max(|analytic|, |numeric|, 1e-5); the floor keeps near-zero gradients from
// amplifying finite-difference roundoff into spurious failures.
struct GradCheckReport {
  std::string case_name;
  size_t instances = 0;
  size_t entries_checked = 0;
  double max_rel_err = 0.0;
};

// Central finite differences with step h over every parameter entry.
double max_grad_rel_err(const ModelSpec& spec, const ModelParams& params,
                        const Tensor& inputs,
                        const std::vector<int>& targets, double h = 1e-5);
double max_grad_rel_err(const ModelSpec& spec, const ModelParams& params,
                        const Tensor& inputs, const Tensor& targets,
                        double h = 1e-5);

// Built-in case list covering every layer kind under both loss kinds
// (parameter-free layers are exercised by differentiating through them).
std::vector<GradCheckReport> run_gradient_checks(size_t instances_per_case,
                                                 uint64_t seed);

}  // namespace fedleak
