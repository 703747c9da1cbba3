#include "ibot/interference.hpp"

#include <algorithm>

namespace ibot {

const char* to_string(CompositionMode mode) {
  return mode == CompositionMode::PaperLiteral ? "paper_literal" : "marginal";
}

CompositionMode composition_mode_from_string(const std::string& s) {
  if (s == "paper_literal") return CompositionMode::PaperLiteral;
  if (s == "marginal") return CompositionMode::Marginal;
  throw Error("ConfigError", "composition mode must be paper_literal or marginal, got '" + s + "'");
}

PairFit fit_pair(ProbePoint a, ProbePoint b) {
  if (a.k == b.k) throw Error("DegenerateProbe", "probe points share the same co-location count");
  if (!(a.st > 0.0) || !(b.st > 0.0)) throw Error("NonPositiveProbe", "probe service times must be positive");

  PairFit fit;
  fit.pair.m = (b.st - a.st) / (b.k - a.k);
  if (fit.pair.m < 0.0) {
    fit.pair.m = 0.0;
    fit.clamped = true;
    // Flat line through the midpoint keeps the fit unbiased.
    fit.pair.c = 0.5 * (a.st + b.st);
  } else {
    fit.pair.c = a.st - fit.pair.m * a.k;
  }
  // Extrapolating back to k = 0 can undershoot when neither probe sits there.
  fit.pair.c = std::max(fit.pair.c, 1e-6);
  return fit;
}

}  // namespace ibot
