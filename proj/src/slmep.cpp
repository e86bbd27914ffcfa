#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "twrn/estimators.hpp"

namespace twrn {

namespace {

// SnrContext restricted to the span of an orthonormal basis B: every
// quadratic form u^H R u with u = B a becomes a^H Rr a.
struct Reduced {
  CMat R;
  CVec p, rE;
  double a2 = 0.0, b2 = 0.0, tail = 0.0;
  bool cross_a = true;  // false drops the h_a cross term
};

CVec project(const std::vector<CVec>& B, const CVec& v) {
  CVec r(B.size());
  for (std::size_t i = 0; i < B.size(); ++i) r[i] = dotc(B[i], v);
  return r;
}

Reduced reduce(const std::vector<CVec>& B, const SnrContext& c, bool cross_a) {
  const std::size_t K = B.size();
  Reduced r;
  const CVec bv = project(B, c.v);
  r.R = CMat(K, K);
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < K; ++j) {
      cplx s = bv[i] * std::conj(bv[j]);
      for (std::size_t k = 0; k < c.noise.size(); ++k) s += std::conj(B[i][k]) * c.noise[k] * B[j][k];
      r.R(i, j) = s;
    }
  r.p = scaled(bv, std::conj(c.ha));
  r.rE = scaled(bv, std::conj(c.hb));
  r.a2 = std::norm(c.ha);
  r.b2 = std::norm(c.hb);
  r.tail = c.tail;
  r.cross_a = cross_a;
  return r;
}

// Design SNR and its Wirtinger gradients with respect to conj(a), conj(b).
struct SnrEval {
  double value = 0.0;
  CVec ga, gb;
};

SnrEval eval(const Reduced& r, const CVec& a, const CVec& b) {
  const CVec Ra = matvec(r.R, a), Rb = matvec(r.R, b);
  const double qa = dotc(a, Ra).real(), qb = dotc(b, Rb).real();
  const double xa = r.cross_a ? dotc(a, r.p).real() : 0.0;
  const double xb = dotc(b, r.rE).real();
  const double num = qb;
  const double den = qa - 2.0 * xa + r.a2 + qb - 2.0 * xb + r.b2 + r.tail;
  SnrEval e;
  e.value = num / den;
  const CVec dDa = r.cross_a ? axpy(-1.0, r.p, Ra) : Ra;
  const CVec dDb = axpy(-1.0, r.rE, Rb);
  const double inv = 1.0 / (den * den);
  e.ga = scaled(dDa, -num * inv);
  e.gb = axpy(-num * inv, dDb, scaled(Rb, den * inv));
  return e;
}

using Vec = std::vector<double>;

struct Packing {
  std::size_t K;
  void unpack(const Vec& z, CVec& a, CVec& b) const {
    a.resize(K);
    b.resize(K);
    for (std::size_t i = 0; i < K; ++i) {
      a[i] = cplx(z[i], z[K + i]);
      b[i] = cplx(z[2 * K + i], z[3 * K + i]);
    }
  }
  Vec pack(const CVec& a, const CVec& b) const {
    Vec z(4 * K);
    for (std::size_t i = 0; i < K; ++i) {
      z[i] = a[i].real();
      z[K + i] = a[i].imag();
      z[2 * K + i] = b[i].real();
      z[3 * K + i] = b[i].imag();
    }
    return z;
  }
  // Real gradient of a real function from its Wirtinger gradient.
  Vec grad(const CVec& ga, const CVec& gb) const { return pack(scaled(ga, 2.0), scaled(gb, 2.0)); }
};

struct Problem {
  const Reduced* r0;
  const Reduced* r1;
  Packing pk;
  double gap;

  // Returns (U0, U1) and their real gradients.
  void both(const Vec& z, double& u0, double& u1, Vec& g0, Vec& g1) const {
    CVec a, b;
    pk.unpack(z, a, b);
    const SnrEval e0 = eval(*r0, a, b), e1 = eval(*r1, a, b);
    u0 = e0.value;
    u1 = e1.value;
    g0 = pk.grad(e0.ga, e0.gb);
    g1 = pk.grad(e1.ga, e1.gb);
  }
};

double dot(const Vec& x, const Vec& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

// Minimizes a smooth function with BFGS and backtracking; returns the
// number of iterations spent.
int bfgs(const std::function<double(const Vec&, Vec&)>& f, Vec& z, int max_iter, double gtol) {
  const std::size_t n = z.size();
  std::vector<Vec> H(n, Vec(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) H[i][i] = 1.0;
  Vec g(n);
  double fz = f(z, g);
  int it = 0;
  for (; it < max_iter; ++it) {
    if (std::sqrt(dot(g, g)) <= gtol) break;
    Vec d(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i] -= H[i][j] * g[j];
    double slope = dot(g, d);
    if (!(slope < 0.0)) {
      for (std::size_t i = 0; i < n; ++i) {
        std::fill(H[i].begin(), H[i].end(), 0.0);
        H[i][i] = 1.0;
        d[i] = -g[i];
      }
      slope = -dot(g, g);
    }
    double step = 1.0;
    Vec zn(n), gn(n);
    double fn = 0.0;
    bool ok = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t i = 0; i < n; ++i) zn[i] = z[i] + step * d[i];
      fn = f(zn, gn);
      if (std::isfinite(fn) && fn <= fz + 1e-4 * step * slope) {
        ok = true;
        break;
      }
      step *= 0.5;
    }
    if (!ok) break;
    Vec s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = zn[i] - z[i];
      y[i] = gn[i] - g[i];
    }
    const double sy = dot(s, y);
    if (sy > 1e-300) {
      Vec Hy(n, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) Hy[i] += H[i][j] * y[j];
      const double yHy = dot(y, Hy);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          H[i][j] += ((sy + yHy) * s[i] * s[j]) / (sy * sy) - (Hy[i] * s[j] + s[i] * Hy[j]) / sy;
    }
    const double drop = fz - fn;
    z = zn;
    g = gn;
    fz = fn;
    if (drop <= 1e-15 * (1.0 + std::abs(fz))) break;
  }
  return it;
}

// Orthonormal basis of the given vectors, dropping near-dependent ones.
std::vector<CVec> orthonormal(const std::vector<CVec>& cols) {
  std::vector<CVec> B;
  double scale = 0.0;
  for (const auto& c : cols) scale = std::max(scale, std::sqrt(norm2(c)));
  for (CVec v : cols) {
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : B) v = axpy(-dotc(q, v), q, v);
    const double nv = std::sqrt(norm2(v));
    if (nv > 1e-9 * scale) B.push_back(scaled(v, 1.0 / nv));
  }
  return B;
}

}  // namespace

SlmepResult slmep_estimate(const CVec& x, const PilotModel& detected, const PilotModel& other, const SystemParams& p,
                           double p_theta, const SlmepOptions& opt) {
  const double gap = slmep_target_gap(p_theta);
  const ChannelEstimate e0 = lmmse_estimate(x, detected, p);
  const ChannelEstimate e1 = lmmse_estimate(x, other, p);

  SlmepResult res;
  ChannelEstimate lmep;
  try {
    lmep = lmep_from(x, e0.ha, e0.hb, detected, p);
  } catch (const DegenerateError&) {
    res.est = e0;
    res.est.fallback = true;
    return res;
  }

  const SnrContext c0 = estimate_context(detected, e0.ha, e0.hb, p);
  const SnrContext c1 = estimate_context(other, e1.ha, e1.hb, p);

  // Stationary combiners of any weighting of the two SNRs lie (exactly for
  // a flat relay gain, closely otherwise) in the span of these directions.
  const std::size_t n = x.size();
  CVec w00(n), w11(n), w0m(n), w1m(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double cm = 0.5 * (c0.noise[k] + c1.noise[k]);
    w00[k] = c0.v[k] / c0.noise[k];
    w11[k] = c1.v[k] / c1.noise[k];
    w0m[k] = c0.v[k] / cm;
    w1m[k] = c1.v[k] / cm;
  }
  const std::vector<CVec> B = orthonormal({w00, w11, w0m, w1m});
  const Reduced r0 = reduce(B, c0, true);
  const Reduced r1 = reduce(B, c1, false);
  const Problem pr{&r0, &r1, Packing{B.size()}, gap};

  Vec z = pr.pk.pack(project(B, lmep.u.ua), project(B, lmep.u.ub));

  // Augmented Lagrangian on  max U0 + U1  s.t.  U0 - U1 = gap.
  double mu = 0.0, rho = 10.0, prev_c = std::numeric_limits<double>::infinity();
  int iters = 0;
  auto cons = [&](const Vec& zz) {
    double u0, u1;
    Vec g0, g1;
    pr.both(zz, u0, u1, g0, g1);
    return u0 - u1 - gap;
  };
  for (int outer = 0; outer < opt.max_iter; ++outer) {
    auto phi = [&](const Vec& zz, Vec& g) {
      double u0, u1;
      Vec g0, g1;
      pr.both(zz, u0, u1, g0, g1);
      const double c = u0 - u1 - gap;
      const double m = mu + rho * c;
      g.resize(zz.size());
      for (std::size_t i = 0; i < zz.size(); ++i) g[i] = -(g0[i] + g1[i]) + m * (g0[i] - g1[i]);
      return -(u0 + u1) + mu * c + 0.5 * rho * c * c;
    };
    iters += bfgs(phi, z, 200, 1e-10);
    const double c = cons(z);
    if (!std::isfinite(c)) break;
    if (std::abs(c) <= 0.1 * opt.tol) break;
    mu += rho * c;
    if (std::abs(c) > 0.25 * std::abs(prev_c)) rho = std::min(rho * 4.0, 1e10);
    prev_c = c;
  }

  // Newton polish along the constraint gradient.
  for (int k = 0; k < 30; ++k) {
    double u0, u1;
    Vec g0, g1;
    pr.both(z, u0, u1, g0, g1);
    const double c = u0 - u1 - gap;
    if (!std::isfinite(c) || std::abs(c) <= 1e-12) break;
    Vec d(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) d[i] = g0[i] - g1[i];
    const double dd = dot(d, d);
    if (!(dd > 0.0)) break;
    for (std::size_t i = 0; i < z.size(); ++i) z[i] -= c * d[i] / dd;
  }

  double u0, u1;
  Vec g0, g1;
  pr.both(z, u0, u1, g0, g1);
  res.iterations = iters;
  res.residual = std::abs(u0 - u1 - gap);
  res.snr = u0;
  res.snr_err = u1;
  res.feasible = std::isfinite(res.residual) && res.residual <= opt.tol && u0 >= 0.0 && u1 >= 0.0;
  if (!res.feasible) {
    res.est = lmep;
    res.est.fallback = true;
    return res;
  }

  CVec a, b;
  pr.pk.unpack(z, a, b);
  CombinerPair u{CVec(n, 0.0), CVec(n, 0.0)};
  for (std::size_t i = 0; i < B.size(); ++i) {
    u.ua = axpy(a[i], B[i], u.ua);
    u.ub = axpy(b[i], B[i], u.ub);
  }
  res.est.u = u;
  res.est.ha = dotc(u.ua, x);
  res.est.hb = dotc(u.ub, x);
  res.est.method = Method::slmep;
  res.est.hypothesis = detected.order;
  res.est.effective_snr = u0;
  return res;
}

}  // namespace twrn
