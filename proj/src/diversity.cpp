#include "divkit/diversity.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace divkit {

DiversityScore diversity_score(const NGramBag& bag, std::uint64_t prompt_count,
                               double decay) {
  if (prompt_count < 1) {
    throw ArgumentError("diversity needs at least one prompt");
  }
  if (!(decay > 0.0) || decay > 1.0) {
    throw ArgumentError("decay index must lie in (0, 1], got " +
                        std::to_string(decay));
  }
  double rate = unique_rate(bag);  // throws on an empty bag
  double m = static_cast<double>(prompt_count);
  // decay == 1 reduces to rate * m exactly; don't route that through pow.
  double growth = decay == 1.0 ? m : std::pow(m, decay);
  return DiversityScore{rate, prompt_count, decay, rate * growth};
}

FitResult linear_fit(std::span<const FitPoint> points) {
  if (points.size() < 2) {
    throw DegenerateFitError("linear fit needs at least 2 points, got " +
                             std::to_string(points.size()));
  }
  bool all_same = true;
  for (const FitPoint& p : points) {
    if (p.diversity != points.front().diversity) {
      all_same = false;
      break;
    }
  }
  if (all_same) {
    throw DegenerateFitError(
        "linear fit needs at least 2 distinct diversity values");
  }

  const double n = static_cast<double>(points.size());
  double mean_d = 0.0;
  double mean_s = 0.0;
  for (const FitPoint& p : points) {
    mean_d += p.diversity;
    mean_s += p.score;
  }
  mean_d /= n;
  mean_s /= n;

  double sdd = 0.0;
  double sds = 0.0;
  for (const FitPoint& p : points) {
    sdd += (p.diversity - mean_d) * (p.diversity - mean_d);
    sds += (p.diversity - mean_d) * (p.score - mean_s);
  }
  if (sdd == 0.0) {
    throw DegenerateFitError("diversity values have no spread");
  }

  FitResult fit;
  fit.slope = sds / sdd;
  fit.intercept = mean_s - fit.slope * mean_d;
  fit.residuals.reserve(points.size());
  double sq = 0.0;
  for (const FitPoint& p : points) {
    double r = p.score - (fit.slope * p.diversity + fit.intercept);
    fit.residuals.push_back(r);
    sq += r * r;
  }
  fit.mse = sq / n;
  return fit;
}

GridSearchResult search_decay_index(std::span<const CorpusMeasure> corpora,
                                    std::span<const double> scores,
                                    const GridSearchConfig& config) {
  if (corpora.size() != scores.size()) {
    throw ArgumentError("got " + std::to_string(corpora.size()) +
                        " corpora but " + std::to_string(scores.size()) +
                        " scores");
  }
  if (corpora.size() < 3) {
    throw ArgumentError("decay search needs at least 3 corpora, got " +
                        std::to_string(corpora.size()));
  }
  for (std::size_t i = 1; i < corpora.size(); ++i) {
    if (corpora[i].prompt_count <= corpora[i - 1].prompt_count) {
      throw ArgumentError("prompt counts must be strictly ascending");
    }
  }
  if (!(config.step > 0.0) || !(config.p_max > 0.0) || config.p_max > 1.0 ||
      config.step > config.p_max) {
    throw ArgumentError("grid step must satisfy 0 < step <= p_max <= 1");
  }

  std::vector<double> rates;
  rates.reserve(corpora.size());
  for (const CorpusMeasure& c : corpora) rates.push_back(unique_rate(c.bag));

  const auto grid_points =
      static_cast<std::size_t>(std::floor(config.p_max / config.step + 1e-9));

  GridSearchResult result;
  result.grid.reserve(grid_points);
  bool any_ascending = false;
  double best_mse = std::numeric_limits<double>::infinity();
  double best_p = 0.0;

  std::vector<FitPoint> points(corpora.size());
  for (std::size_t k = 1; k <= grid_points; ++k) {
    double p = config.step * static_cast<double>(k);
    if (p > config.p_max || std::abs(p - config.p_max) < 1e-12) {
      p = config.p_max;
    }

    bool ascending = true;
    for (std::size_t i = 0; i < corpora.size(); ++i) {
      double m = static_cast<double>(corpora[i].prompt_count);
      double d = rates[i] * (p == 1.0 ? m : std::pow(m, p));
      points[i] = FitPoint{d, scores[i]};
      if (i > 0) {
        double prev = points[i - 1].diversity;
        if (config.strict_ascending ? d <= prev : d < prev) ascending = false;
      }
    }
    any_ascending = any_ascending || ascending;

    std::optional<double> mse;
    try {
      mse = linear_fit(points).mse;
    } catch (const DegenerateFitError&) {
      // leave mse empty; this grid point cannot be chosen
    }
    result.grid.push_back(GridPoint{p, mse, ascending});

    bool feasible = mse.has_value() && (ascending || !config.require_ascending);
    if (feasible && *mse < best_mse) {
      best_mse = *mse;
      best_p = p;
    }
  }

  if (!std::isfinite(best_mse)) {
    if (config.require_ascending && !any_ascending) {
      throw NoFeasibleDecayError(
          "no grid point yields an ascending diversity profile");
    }
    throw SearchFailedError("fit was degenerate at every grid point");
  }

  result.decay = best_p;
  result.mse = best_mse;
  return result;
}

}  // namespace divkit
