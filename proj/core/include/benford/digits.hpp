#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>

namespace benford {

/// Probability mass over leading digits 1..9.
///
/// An empirical distribution records how many values contributed; one with no
/// contributing values is empty and rejected by the comparison statistics. The
/// analytic Benford reference is flagged separately.
struct DigitDistribution {
  std::array<double, 9> probs{};
  std::size_t support_count = 0;
  bool analytic = false;

  /// Probability of digit d in 1..9.
  double operator[](int digit) const { return probs.at(static_cast<std::size_t>(digit - 1)); }
  bool empty() const noexcept { return !analytic && support_count == 0; }

  friend bool operator==(const DigitDistribution&, const DigitDistribution&) = default;
};

struct DivergenceReport {
  double ks = 0.0;
  double kl = 0.0;
};

/// P(d) = log10(1 + 1/d).
DigitDistribution benford_pmf();

/// First significant decimal digit of |value|; nullopt for zero.
///
/// The digit is read from the shortest decimal string that round-trips to
/// `value`, so 0.3 yields 3 even though the nearest double lies just below 0.3.
/// Throws std::invalid_argument for NaN or infinity.
std::optional<int> first_digit(double value);

/// Leading-digit frequencies. Zeros carry no digit and are left out of both the
/// counts and support_count; an all-zero input gives an empty distribution.
DigitDistribution digit_histogram(std::span<const double> values);

/// max_d |Acc(p)(d) - Acc(q)(d)| over the nine cumulative sums.
double ks_statistic(const DigitDistribution& p, const DigitDistribution& q);

/// sum_d p(d) ln(p(d) / q(d)), taking 0 ln(0 / q) = 0. Throws when q(d) = 0 for
/// a digit with p(d) > 0.
double kl_divergence(const DigitDistribution& p, const DigitDistribution& q);

/// Both statistics against the Benford reference.
DivergenceReport compare_to_benford(const DigitDistribution& p);

}  // namespace benford
