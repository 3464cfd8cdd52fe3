#include "salp/gait.hpp"

#include <cmath>
#include <sstream>

namespace salp {

double GaitProgram::peak_component(int i) const {
  const auto k = static_cast<size_t>(i);
  return std::abs(a0[k]) + std::hypot(a1[k], b1[k]);
}

double GaitProgram::peak_norm() const {
  double best = 0.0;
  for (int k = 0; k < 720; ++k) {
    const Control u = control_at(*this, period * k / 720.0);
    best = std::max(best, u.u.norm());
  }
  return best;
}

void GaitProgram::validate(double saturation) const {
  if (period <= 0.0) throw ConfigError("gait period must be > 0");
  for (int i = 0; i < 3; ++i) {
    if (peak_component(i) > saturation) {
      std::ostringstream os;
      os << "gait actuator " << i + 1 << " peak " << peak_component(i)
         << " exceeds saturation " << saturation;
      throw ConfigError(os.str());
    }
  }
}

GaitProgram GaitProgram::phase_shifted(double t0) const {
  const double w = 2.0 * M_PI / period;
  const double c = std::cos(w * t0), s = std::sin(w * t0);
  GaitProgram g = *this;
  for (size_t i = 0; i < 3; ++i) {
    g.a1[i] = a1[i] * c + b1[i] * s;
    g.b1[i] = -a1[i] * s + b1[i] * c;
  }
  return g;
}

Control control_at(const GaitProgram& gait, double t) {
  // fmod is exact, so u(t + T) == u(t) bitwise whenever t + T is.
  double tc = std::fmod(t, gait.period);
  if (tc < 0.0) tc += gait.period;
  const double phase = 2.0 * M_PI / gait.period * tc;
  const double c = std::cos(phase), s = std::sin(phase);
  Vec3 u;
  for (size_t i = 0; i < 3; ++i)
    u[static_cast<int>(i)] = gait.a0[i] + gait.a1[i] * c + gait.b1[i] * s;
  return Control(u);
}

GaitProgram mirror(const GaitProgram& gait) {
  GaitProgram g = gait;
  for (size_t i = 0; i < 3; ++i) {
    g.a0[i] = -gait.a0[i];
    g.a1[i] = -gait.a1[i];
    g.b1[i] = -gait.b1[i];
  }
  return g;
}

std::map<std::string, GaitProgram> gait_library() {
  // Coefficients frozen from the calibration sweep (salpkit gait-cal)
  // against ChainParams::default_params(): forward travels 0.030 m per
  // 6 s cycle with negligible heading change; thrust ordering
  // turn > forward > left on the peak control norm. configs/gaits.json
  // mirrors these constants.
  std::map<std::string, GaitProgram> lib;

  GaitProgram forward;
  forward.period = 6.0;
  forward.a0 = {0.001971820745299369, -0.007865654484037019, 0.001593455799718426};
  forward.a1 = {0.2750996523781665, 0.13181384362456844, 0.2725536343327185};
  forward.b1 = {-0.09845761315640822, 0.054974568468302995, 0.29242078213442324};

  GaitProgram left;
  left.period = 6.0;
  left.a0 = {-0.007269673684551288, -0.009409723434683959, -0.007180069775343985};
  left.a1 = {0.020328740961204607, -0.10458646310113787, -0.027862684316350732};
  left.b1 = {0.026371312728107027, 0.36537456688682557, -0.12695718323406435};

  GaitProgram turn;
  turn.period = 6.0;
  turn.a0 = {0.0685842380167819, -0.0017372246999927871, -0.0618310569181878};
  turn.a1 = {0.3989957853114023, -0.529120107429347, 0.17659432388108753};
  turn.b1 = {0.31827195476376713, 0.38551786214626543, 0.48358401526817973};

  lib["forward"] = forward;
  lib["backward"] = mirror(forward);
  lib["left"] = left;
  lib["right"] = mirror(left);
  lib["turn"] = turn;
  return lib;
}

}  // namespace salp
