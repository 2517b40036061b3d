#pragma once

// Synthetic mixtures shared by the tests.

#include <semimodal/dataset.hpp>

namespace scenario {

using semimodal::Matrix;
using semimodal::MixtureComponent;
using semimodal::MixtureSpec;
using semimodal::Vector;

inline MixtureComponent isotropic(Vector mean, double sd, double weight)
{
  const auto d = mean.size();
  return { weight, std::move(mean), Matrix::Identity(d, d) * (sd * sd) };
}

// Standard normal background in d dimensions, optionally with a bump of the
// given fraction at `signal_mean` with standard deviation `signal_sd`.
inline MixtureSpec bump(semimodal::Index d, double fraction, const Vector& signal_mean, double signal_sd)
{
  MixtureSpec s;
  s.components.push_back(isotropic(Vector::Zero(d), 1.0, 0.5));
  s.components.push_back(isotropic(signal_mean, signal_sd, 0.5));
  s.signal_components = { 1 };
  s.signal_fraction = fraction;
  return s;
}

// The planted 2-d scenario: 30% of the experimental sample at (4, 4), sd 0.5.
inline MixtureSpec planted(double fraction = 0.3) { return bump(2, fraction, Vector::Constant(2, 4.0), 0.5); }

// d-dimensional background with the signal shifted by `shift` in the first
// two coordinates only, unit spread everywhere.
inline MixtureSpec shifted_pair(semimodal::Index d, double fraction, double shift)
{
  Vector mean = Vector::Zero(d);
  mean(0) = shift;
  mean(1) = shift;
  return bump(d, fraction, mean, 1.0);
}

inline semimodal::Dataset sample(const MixtureSpec& spec, std::size_t n, std::uint64_t seed)
{
  return semimodal::sample_mixture(spec, n, seed);
}

} // namespace scenario
