#include "meanfield/teacher.hpp"

#include <cmath>
#include <stdexcept>

#include "meanfield/rng.hpp"

namespace meanfield {

const char* input_law_name(InputLaw law) {
  switch (law) {
    case InputLaw::kSphere: return "sphere";
    case InputLaw::kBall: return "ball";
    case InputLaw::kGaussianClipped: return "gaussian-clipped";
  }
  return "?";
}

InputLaw parse_input_law(const std::string& name) {
  if (name == "sphere") return InputLaw::kSphere;
  if (name == "ball") return InputLaw::kBall;
  if (name == "gaussian-clipped") return InputLaw::kGaussianClipped;
  throw std::invalid_argument("unknown input law: " + name);
}

double teacher_predict(const TeacherSpec& t, const Eigen::VectorXd& x) {
  if (t.neurons.size() == 0) return 0.0;
  double f = predict(t.neurons, x, t.act);  // already the 1/M average
  return t.mean_normalize ? f : f * static_cast<double>(t.neurons.size());
}

Dataset make_teacher_dataset(const TeacherSpec& t, long n, std::uint64_t seed) {
  if (n < 0) throw std::invalid_argument("make_teacher_dataset: n must be >= 0");
  if (!(t.x_max > 0))
    throw std::invalid_argument("make_teacher_dataset: x_max must be positive");
  const int d = t.neurons.size() > 0 ? static_cast<int>(t.neurons.input_dim()) : 1;

  Dataset data;
  data.X = Eigen::MatrixXd(n, d);
  data.y = Eigen::VectorXd(n);
  for (long i = 0; i < n; ++i) {
    Substream st(seed, StreamPurpose::kData, static_cast<std::uint64_t>(i));
    Eigen::VectorXd x(d);
    for (int j = 0; j < d; ++j) x[j] = st.next_normal();
    double nrm = x.norm();
    if (nrm == 0) {
      x[0] = 1.0;
      nrm = 1.0;
    }
    switch (t.law) {
      case InputLaw::kSphere:
        x *= t.x_max / nrm;
        break;
      case InputLaw::kBall: {
        double r = t.x_max * std::pow(st.next_uniform(), 1.0 / d);
        x *= r / nrm;
        break;
      }
      case InputLaw::kGaussianClipped:
        if (nrm > t.x_max) x *= t.x_max / nrm;
        break;
    }
    data.X.row(i) = x.transpose();
    double y = teacher_predict(t, x);
    if (t.noise_sd > 0) y += t.noise_sd * st.next_normal();
    data.y[i] = y;
  }
  return data;
}

}  // namespace meanfield
