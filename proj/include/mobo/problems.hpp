#pragma once

// Benchmark problem suite: three canonical constrained bi-objective test
// problems (BNH, SRN, TNK) and an analytic simply-supported beam sizing
// problem whose constraints are spatial utilization fields, mimicking the
// structure of an expensive FEM-based design loop.  Everything is
// minimization with constraints expressed as field <= limit at every
// station; scalar constraints are fields with a single station.

#include <mobo/core.hpp>
#include <mobo/sampling.hpp>

#include <functional>
#include <string>
#include <vector>

namespace mobo {

/// One constraint field: evaluate returns the utilization/constraint value
/// at every station, all of which must stay at or below `limit`.
struct FieldConstraint {
  std::string name;
  double limit = 0.0;
  Index stations = 1;
  std::function<Vector(const Vector&)> evaluate;
};

/// A constrained multi-objective problem over a box design space.
struct Problem {
  std::string name;
  DesignSpace space;
  Index n_objectives = 0;
  std::function<Vector(const Vector&)> objectives;
  std::vector<FieldConstraint> constraints;
};

/// Full evaluation of a design: objectives, every constraint field, and the
/// exact feasibility flag (all stations of all fields within limits).
struct ProblemEvaluation {
  Vector objectives;
  std::vector<Vector> fields;
  bool feasible = false;
};

inline ProblemEvaluation evaluate_problem(const Problem& problem,
                                          const Vector& x) {
  if (x.size() != problem.space.dim())
    throw dimension_error("evaluate_problem: design dimension mismatch");
  ProblemEvaluation ev;
  ev.objectives = problem.objectives(x);
  ev.feasible = true;
  ev.fields.reserve(problem.constraints.size());
  for (const auto& c : problem.constraints) {
    Vector field = c.evaluate(x);
    if (field.size() != c.stations)
      throw dimension_error("evaluate_problem: constraint '" + c.name +
                            "' returned wrong station count");
    if ((field.array() > c.limit).any()) ev.feasible = false;
    ev.fields.push_back(std::move(field));
  }
  return ev;
}

/// Binh-Korn (BNH): quadratic objectives, one disc constraint and one
/// excluded-disc constraint; feasible region is most of the box.
inline Problem bnh() {
  Problem p;
  p.name = "bnh";
  p.space = DesignSpace{Vector::Zero(2), (Vector(2) << 5.0, 3.0).finished()};
  p.n_objectives = 2;
  p.objectives = [](const Vector& x) {
    Vector f(2);
    f[0] = 4.0 * x[0] * x[0] + 4.0 * x[1] * x[1];
    f[1] = (x[0] - 5.0) * (x[0] - 5.0) + (x[1] - 5.0) * (x[1] - 5.0);
    return f;
  };
  p.constraints.push_back(
      {"inside_disc", 25.0, 1, [](const Vector& x) {
         return Vector::Constant(
             1, (x[0] - 5.0) * (x[0] - 5.0) + x[1] * x[1]);
       }});
  // (x1-8)^2 + (x2+3)^2 >= 7.7, rewritten as -(...) <= -7.7.
  p.constraints.push_back(
      {"outside_disc", -7.7, 1, [](const Vector& x) {
         return Vector::Constant(
             1, -((x[0] - 8.0) * (x[0] - 8.0) + (x[1] + 3.0) * (x[1] + 3.0)));
       }});
  return p;
}

/// Srinivas (SRN).
inline Problem srn() {
  Problem p;
  p.name = "srn";
  p.space = DesignSpace{Vector::Constant(2, -20.0), Vector::Constant(2, 20.0)};
  p.n_objectives = 2;
  p.objectives = [](const Vector& x) {
    Vector f(2);
    f[0] = 2.0 + (x[0] - 2.0) * (x[0] - 2.0) + (x[1] - 1.0) * (x[1] - 1.0);
    f[1] = 9.0 * x[0] - (x[1] - 1.0) * (x[1] - 1.0);
    return f;
  };
  p.constraints.push_back({"radius", 225.0, 1, [](const Vector& x) {
                             return Vector::Constant(
                                 1, x[0] * x[0] + x[1] * x[1]);
                           }});
  p.constraints.push_back({"halfplane", 0.0, 1, [](const Vector& x) {
                             return Vector::Constant(
                                 1, x[0] - 3.0 * x[1] + 10.0);
                           }});
  return p;
}

/// Tanaka (TNK): objectives are the coordinates themselves; the feasible
/// region is a wavy band, so the Pareto front is disconnected.
inline Problem tnk() {
  Problem p;
  p.name = "tnk";
  p.space = DesignSpace{Vector::Zero(2), Vector::Constant(2, M_PI)};
  p.n_objectives = 2;
  p.objectives = [](const Vector& x) { return Vector(x); };
  // x1^2 + x2^2 - 1 - 0.1 cos(16 atan(x1/x2)) >= 0, as -(...) <= 0.
  // atan2 extends the canonical atan(x1/x2) continuously to x2 = 0.
  p.constraints.push_back(
      {"wave", 0.0, 1, [](const Vector& x) {
         const double wave =
             x[0] * x[0] + x[1] * x[1] - 1.0 -
             0.1 * std::cos(16.0 * std::atan2(x[0], x[1]));
         return Vector::Constant(1, -wave);
       }});
  p.constraints.push_back(
      {"disc", 0.5, 1, [](const Vector& x) {
         return Vector::Constant(1, (x[0] - 0.5) * (x[0] - 0.5) +
                                        (x[1] - 0.5) * (x[1] - 0.5));
       }});
  return p;
}

namespace beam {

// Simply supported rectangular concrete beam, analytic Euler-Bernoulli
// response.  Units: kN, m.
inline constexpr double kSpan = 20.0;              // L
inline constexpr double kYoung = 3.0e7;            // E, kN/m^2 (30 GPa)
inline constexpr double kUniformLoad = 30.0;       // q0, kN/m
inline constexpr double kPointLoad = 150.0;        // P at midspan, kN
inline constexpr double kAllowableStress = 2.0e4;  // kN/m^2 (20 MPa)
inline constexpr double kDeflectionRatio = 350.0;  // limit = L / 350
inline constexpr Index kShapeVars = 13;            // load-shape harmonics

/// Harmonic amplitude of shape variable k (1-based): 0.3 / k^2.
inline double shape_amplitude(Index k) {
  return 0.3 / (static_cast<double>(k) * static_cast<double>(k));
}

/// Bending moment at abscissa X for design x = (H, B, s_1..s_13).
/// Superposition of the uniform load, the sinusoidal load harmonics
/// (moment of q0 c_k sin(k pi X/L) is q0 c_k (L/(k pi))^2 sin(k pi X/L)),
/// and the midspan point load.
inline double bending_moment(const Vector& x, double X) {
  const double L = kSpan;
  double m = kUniformLoad * X * (L - X) / 2.0;
  for (Index k = 1; k <= kShapeVars; ++k) {
    const double wavenumber = static_cast<double>(k) * M_PI / L;
    m += kUniformLoad * x[1 + k] * shape_amplitude(k) /
         (wavenumber * wavenumber) * std::sin(wavenumber * X);
  }
  m += (X <= L / 2.0) ? kPointLoad * X / 2.0 : kPointLoad * (L - X) / 2.0;
  return m;
}

/// Deflection at abscissa X (downwards positive), unit flexural rigidity;
/// divide by E I for the physical value.
inline double deflection_ei(const Vector& x, double X) {
  const double L = kSpan;
  double v = kUniformLoad * X * (L * L * L - 2.0 * L * X * X + X * X * X) /
             24.0;
  for (Index k = 1; k <= kShapeVars; ++k) {
    const double wavenumber = static_cast<double>(k) * M_PI / L;
    v += kUniformLoad * x[1 + k] * shape_amplitude(k) /
         (wavenumber * wavenumber * wavenumber * wavenumber) *
         std::sin(wavenumber * X);
  }
  const double Xm = std::min(X, L - X);  // point-load case is symmetric
  v += kPointLoad * Xm * (3.0 * L * L - 4.0 * Xm * Xm) / 48.0;
  return v;
}

}  // namespace beam

/// Analytic beam sizing problem: 15 design variables (section height H,
/// width B, and 13 load-shape harmonics), two conflicting cost objectives,
/// and two utilization constraint fields sampled at `stations` points along
/// the span.  The constants are calibrated so the stiffest design is
/// comfortably feasible while roughly two thirds of the box is not.
inline Problem beam_field(Index stations = 121) {
  if (stations < 11)
    throw config_error("beam_field: need at least 11 stations");
  Problem p;
  p.name = "beam";
  const Index d = 2 + beam::kShapeVars;
  Vector lo(d), hi(d);
  lo[0] = 0.3;
  hi[0] = 1.5;  // H
  lo[1] = 0.2;
  hi[1] = 1.0;  // B
  for (Index k = 0; k < beam::kShapeVars; ++k) {
    lo[2 + k] = -1.0;
    hi[2 + k] = 1.0;
  }
  p.space = DesignSpace{lo, hi};
  p.n_objectives = 2;
  // f1: volume-proportional monetary cost.  f2: environmental cost with a
  // height penalty (formwork/visual intrusion), so that along the active
  // stress constraint f1 prefers tall-thin sections and f2 an interior
  // height -- a genuine trade-off.
  p.objectives = [](const Vector& x) {
    const double volume = x[0] * x[1] * beam::kSpan;
    Vector f(2);
    f[0] = 4.2 * volume;
    f[1] = 0.36 * volume + 0.30 * x[0] * beam::kSpan;
    return f;
  };

  auto abscissa = [stations](Index j) {
    return beam::kSpan * static_cast<double>(j) /
           static_cast<double>(stations - 1);
  };
  p.constraints.push_back(
      {"stress_utilization", 1.0, stations, [=](const Vector& x) {
         const double section_modulus = x[1] * x[0] * x[0] / 6.0;
         Vector u(stations);
         for (Index j = 0; j < stations; ++j) {
           const double sigma =
               std::abs(beam::bending_moment(x, abscissa(j))) /
               section_modulus;
           u[j] = sigma / beam::kAllowableStress;
         }
         return u;
       }});
  p.constraints.push_back(
      {"deflection_utilization", 1.0, stations, [=](const Vector& x) {
         const double inertia = x[1] * x[0] * x[0] * x[0] / 12.0;
         const double limit = beam::kSpan / beam::kDeflectionRatio;
         Vector u(stations);
         for (Index j = 0; j < stations; ++j) {
           const double delta =
               std::abs(beam::deflection_ei(x, abscissa(j))) /
               (beam::kYoung * inertia);
           u[j] = delta / limit;
         }
         return u;
       }});
  return p;
}

/// Factory used by the CLI: problem by name.
inline Problem make_problem(const std::string& name) {
  if (name == "bnh") return bnh();
  if (name == "srn") return srn();
  if (name == "tnk") return tnk();
  if (name == "beam") return beam_field();
  throw config_error("unknown problem '" + name +
                     "' (expected bnh | srn | tnk | beam)");
}

}  // namespace mobo
