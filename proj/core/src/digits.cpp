#include "benford/digits.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>
#include <string>
#include <system_error>

namespace benford {

namespace {

void require_usable(const DigitDistribution& d, const char* what) {
  if (d.empty()) {
    throw std::invalid_argument(std::string(what) + ": empty digit distribution");
  }
}

}  // namespace

DigitDistribution benford_pmf() {
  DigitDistribution pmf;
  for (int d = 1; d <= 9; ++d) {
    pmf.probs[static_cast<std::size_t>(d - 1)] = std::log10(1.0 + 1.0 / d);
  }
  pmf.analytic = true;
  return pmf;
}

std::optional<int> first_digit(double value) {
  if (!std::isfinite(value)) {
    throw std::invalid_argument("first_digit: non-finite value");
  }
  if (value == 0.0) {
    return std::nullopt;
  }
  // Scientific notation always starts with the leading significant digit.
  char buffer[32];
  const auto result =
      std::to_chars(buffer, buffer + sizeof buffer, std::fabs(value), std::chars_format::scientific);
  if (result.ec != std::errc{}) {
    throw std::runtime_error("first_digit: formatting failed");
  }
  return buffer[0] - '0';
}

DigitDistribution digit_histogram(std::span<const double> values) {
  std::array<std::size_t, 9> counts{};
  std::size_t support = 0;
  for (double v : values) {
    if (auto digit = first_digit(v)) {
      ++counts[static_cast<std::size_t>(*digit - 1)];
      ++support;
    }
  }
  DigitDistribution hist;
  hist.support_count = support;
  if (support == 0) {
    return hist;
  }
  for (std::size_t d = 0; d < 9; ++d) {
    hist.probs[d] = static_cast<double>(counts[d]) / static_cast<double>(support);
  }
  return hist;
}

double ks_statistic(const DigitDistribution& p, const DigitDistribution& q) {
  require_usable(p, "ks_statistic");
  require_usable(q, "ks_statistic");
  double acc_p = 0.0;
  double acc_q = 0.0;
  double sup = 0.0;
  for (std::size_t d = 0; d < 9; ++d) {
    acc_p += p.probs[d];
    acc_q += q.probs[d];
    sup = std::max(sup, std::fabs(acc_p - acc_q));
  }
  // Partial sums can overshoot 1 by an ulp.
  return std::min(sup, 1.0);
}

double kl_divergence(const DigitDistribution& p, const DigitDistribution& q) {
  require_usable(p, "kl_divergence");
  require_usable(q, "kl_divergence");
  double total = 0.0;
  for (std::size_t d = 0; d < 9; ++d) {
    if (p.probs[d] == 0.0) {
      continue;
    }
    if (q.probs[d] == 0.0) {
      throw std::invalid_argument("kl_divergence: reference assigns zero mass to digit " +
                                  std::to_string(d + 1));
    }
    total += p.probs[d] * std::log(p.probs[d] / q.probs[d]);
  }
  // Rounding can leave a tiny negative residue when p == q.
  return std::max(total, 0.0);
}

DivergenceReport compare_to_benford(const DigitDistribution& p) {
  static const DigitDistribution reference = benford_pmf();
  return {ks_statistic(p, reference), kl_divergence(p, reference)};
}

}  // namespace benford
