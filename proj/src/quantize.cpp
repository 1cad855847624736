#include "qsynth/quantize.hpp"

#include <stdexcept>

namespace qsynth {

QuantMap QuantMap::uniform(Rational lo, Rational hi, int bits) {
  if (bits < 1 || bits > 24) throw std::invalid_argument("quantize: bits out of range");
  if (lo >= hi) throw std::invalid_argument("quantize: empty domain");
  QuantMap m;
  m.kind_ = QuantKind::Uniform;
  m.lo_ = lo;
  m.hi_ = hi;
  m.bits_ = bits;
  m.count_ = 1L << bits;
  m.width_ = (hi - lo) / Rational(m.count_);
  m.min_level_ = 0;
  return m;
}

QuantMap QuantMap::floor_scale(Rational lo, Rational hi, Rational scale) {
  if (scale.sign() <= 0) throw std::invalid_argument("quantize: scale must be positive");
  if (lo >= hi) throw std::invalid_argument("quantize: empty domain");
  QuantMap m;
  m.kind_ = QuantKind::FloorScale;
  m.lo_ = lo;
  m.hi_ = hi;
  m.scale_ = scale;
  m.min_level_ = (scale * lo).floor().to_long();
  // top value folds into the last proper cell
  Rational top = scale * hi;
  long top_level = top.is_integer() ? top.to_long() - 1 : top.floor().to_long();
  m.count_ = top_level - m.min_level_ + 1;
  if (m.count_ < 1) throw std::invalid_argument("quantize: domain narrower than one cell");
  return m;
}

QuantMap QuantMap::discrete_identity(Rational lo, Rational hi) {
  if (!lo.is_integer() || !hi.is_integer()) {
    throw std::invalid_argument("quantize: discrete domain must have integer bounds");
  }
  QuantMap m;
  m.kind_ = QuantKind::DiscreteIdentity;
  m.lo_ = lo;
  m.hi_ = hi;
  m.min_level_ = lo.to_long();
  m.count_ = hi.to_long() - lo.to_long() + 1;
  return m;
}

Rational QuantMap::step() const {
  switch (kind_) {
    case QuantKind::Uniform: return width_;
    case QuantKind::FloorScale: return Rational(1) / scale_;
    case QuantKind::DiscreteIdentity: return Rational(0);
  }
  return Rational(0);
}

std::optional<long> QuantMap::level_of(const Rational& v) const {
  if (v < lo_ || v > hi_) return std::nullopt;
  switch (kind_) {
    case QuantKind::Uniform: {
      long k = ((v - lo_) / width_).floor().to_long();
      if (k >= count_) k = count_ - 1;  // top edge folds into the last cell
      return k;
    }
    case QuantKind::FloorScale: {
      long k = (scale_ * v).floor().to_long();
      long top = min_level_ + count_ - 1;
      if (k > top) k = top;
      return k;
    }
    case QuantKind::DiscreteIdentity: {
      if (!v.is_integer()) return std::nullopt;
      return v.to_long();
    }
  }
  return std::nullopt;
}

std::pair<Rational, Rational> QuantMap::cell(long level) const {
  if (level < min_level_ || level >= min_level_ + count_) {
    throw std::out_of_range("quantize: level outside the map image");
  }
  switch (kind_) {
    case QuantKind::Uniform: {
      Rational a = lo_ + width_ * Rational(level);
      Rational b = (level == count_ - 1) ? hi_ : lo_ + width_ * Rational(level + 1);
      return {a, b};
    }
    case QuantKind::FloorScale: {
      Rational a = Rational(level) / scale_;
      Rational b = Rational(level + 1) / scale_;
      return {max(a, lo_), min(b, hi_)};
    }
    case QuantKind::DiscreteIdentity:
      return {Rational(level), Rational(level)};
  }
  return {Rational(0), Rational(0)};
}

const QuantMap& Quantization::map_of(const std::string& var) const {
  for (const auto& [n, m] : maps)
    if (n == var) return m;
  throw std::invalid_argument("quantization has no map for variable '" + var + "'");
}

bool Quantization::has(const std::string& var) const {
  for (const auto& [n, m] : maps) {
    (void)m;
    if (n == var) return true;
  }
  return false;
}

Rational Quantization::step() const {
  Rational s(0);
  for (const auto& [n, m] : maps) {
    (void)n;
    s = max(s, m.step());
  }
  return s;
}

std::optional<AbstractState> quantize(const Quantization& q, const std::vector<std::string>& vars,
                                      const Valuation& v) {
  AbstractState s;
  s.levels.reserve(vars.size());
  for (const auto& name : vars) {
    auto it = v.find(name);
    if (it == v.end()) throw std::runtime_error("quantize: valuation missing variable '" + name + "'");
    auto lvl = q.map_of(name).level_of(it->second);
    if (!lvl) return std::nullopt;
    s.levels.push_back(*lvl);
  }
  return s;
}

std::vector<std::pair<Rational, Rational>> cell_box(const Quantization& q,
                                                    const std::vector<std::string>& vars,
                                                    const AbstractState& s) {
  if (vars.size() != s.levels.size()) throw std::invalid_argument("cell_box: arity mismatch");
  std::vector<std::pair<Rational, Rational>> box;
  box.reserve(vars.size());
  for (size_t i = 0; i < vars.size(); ++i) {
    box.push_back(q.map_of(vars[i]).cell(s.levels[i]));
  }
  return box;
}

ConjunctivePredicate relax_goal(const ConjunctivePredicate& goal, const Rational& eps) {
  if (eps.sign() < 0) throw std::invalid_argument("relax_goal: negative radius");
  if (eps.is_zero()) return goal;
  ConjunctivePredicate out;
  out.vars = goal.vars;
  for (const auto& c : goal.items) {
    Rational slack(0);
    for (const auto& [n, coef] : c.expr.terms()) {
      const Var* v = goal.find_var(n);
      if (!v) throw std::invalid_argument("relax_goal: unknown variable '" + n + "'");
      if (v->kind == VarKind::Continuous) slack += coef.abs() * eps;
    }
    switch (c.sense) {
      case Sense::Le:
        out.items.push_back(make_le(c.expr, c.bound + slack));
        break;
      case Sense::Ge:
        out.items.push_back(make_ge(c.expr, c.bound - slack));
        break;
      case Sense::Eq:
        out.items.push_back(make_le(c.expr, c.bound + slack));
        out.items.push_back(make_ge(c.expr, c.bound - slack));
        break;
    }
  }
  return out;
}

}  // namespace qsynth
