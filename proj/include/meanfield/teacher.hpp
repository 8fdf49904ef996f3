#pragma once

#include <cstdint>

#include "meanfield/model.hpp"

namespace meanfield {

enum class InputLaw { kSphere, kBall, kGaussianClipped };

const char* input_law_name(InputLaw law);
InputLaw parse_input_law(const std::string& name);

/// Finite-width teacher y = (1/M) sum_m u_m h(w_m, x) (mean_normalize)
/// or the raw sum, with optional additive Gaussian label noise.
struct TeacherSpec {
  ParticleEnsemble neurons{0, 1};
  ActivationSpec act = ActivationSpec::smoothed_relu();
  InputLaw law = InputLaw::kSphere;
  double x_max = 1.0;
  double noise_sd = 0.0;
  bool mean_normalize = true;
};

double teacher_predict(const TeacherSpec& t, const Eigen::VectorXd& x);

/// n i.i.d. samples; inputs are confined to the ball of radius x_max so the
/// activation bounds C1..C4 stay valid. Sample i is a pure function of
/// (seed, i).
Dataset make_teacher_dataset(const TeacherSpec& t, long n, std::uint64_t seed);

}  // namespace meanfield
