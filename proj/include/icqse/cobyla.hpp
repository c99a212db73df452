// Copyright 2026 The icqse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/**
 * @file
 * Constrained Optimization BY Linear Approximations.
 *
 * A direct C++ rendering of Powell's 1992 Fortran routines TRSTLP and COBYLB.
 * Minimizes f(x) subject to c_k(x) >= 0 using linear interpolation on a
 * simplex of n+1 points inside a trust region of radius rho, which shrinks
 * from rhobeg to rhoend. The control flow (labelled jumps) is kept as in the
 * reference so that iterates can be compared line by line; arrays use
 * 1-based accessors for the same reason.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "icqse/errors.hpp"

namespace icqse {

struct CobylaOptions {
  double rhobeg = 0.5;
  double rhoend = 1e-6;
  int max_evals = 5000;
};

enum class CobylaStatus { Converged, MaxEvals, RoundingErrors, NonFinite };

struct CobylaResult {
  std::vector<double> x;
  double f = 0.0;
  double max_violation = 0.0;  ///< max(0, -c_k(x))
  int evaluations = 0;
  CobylaStatus status = CobylaStatus::Converged;
};

namespace detail {

// Column-major storage with 1-based indexing, mirroring the reference arrays.
class Mat1 {
 public:
  Mat1(int rows, int cols) : rows_(rows), d_(static_cast<std::size_t>(std::max(rows, 1)) * std::max(cols, 1), 0.0) {}
  double& operator()(int i, int j) { return d_[static_cast<std::size_t>(i - 1) + static_cast<std::size_t>(j - 1) * rows_]; }

 private:
  int rows_;
  std::vector<double> d_;
};

class Vec1 {
 public:
  explicit Vec1(int n) : d_(static_cast<std::size_t>(std::max(n, 1)), 0.0) {}
  double& operator()(int i) { return d_[static_cast<std::size_t>(i - 1)]; }

 private:
  std::vector<double> d_;
};

class IVec1 {
 public:
  explicit IVec1(int n) : d_(static_cast<std::size_t>(std::max(n, 1)), 0) {}
  int& operator()(int i) { return d_[static_cast<std::size_t>(i - 1)]; }

 private:
  std::vector<int> d_;
};

// Finds a step dx with |dx| <= rho that first minimizes the greatest violation
// of the linearized constraints a(.,k).dx >= b(k), k <= m, then uses remaining
// freedom to decrease the linear objective -a(.,m+1).dx.
inline void trstlp(int n, int m, Mat1& a, Vec1& b, double rho, Vec1& dx, int& ifull) {
  Mat1 z(n, n);
  Vec1 zdota(n), vmultc(m + 1), sdirn(n), dxnew(n), vmultd(m + 1);
  IVec1 iact(m + 1);

  int mcon, nact, icon, i, j, k, nactx = 0, isave, kk, kw, kp, kl, icount = 0;
  double resmax, optold = 0, optnew, tot, temp, alpha, beta, sp, spabs, acca, accb, ratio, zdotv, zdvabs, vsave, dd,
      ss, sd, stpful = 0, step = 0, zdotw, zdwabs, resold = 0, sumabs, sum, tempa;

  ifull = 1;
  mcon = m;
  nact = 0;
  resmax = 0.0;
  icon = 0;
  for (i = 1; i <= n; i++) {
    for (j = 1; j <= n; j++) z(i, j) = 0.0;
    z(i, i) = 1.0;
    dx(i) = 0.0;
  }
  if (m >= 1) {
    for (k = 1; k <= m; k++) {
      if (b(k) > resmax) {
        resmax = b(k);
        icon = k;
      }
    }
    for (k = 1; k <= m; k++) {
      iact(k) = k;
      vmultc(k) = resmax - b(k);
    }
  }
  if (resmax == 0.0) goto L480;
  for (i = 1; i <= n; i++) sdirn(i) = 0.0;

  // End the stage after three iterations without progress, which prevents cycling.
L60:
  optold = 0.0;
  icount = 0;
L70:
  if (mcon == m) {
    optnew = resmax;
  } else {
    optnew = 0.0;
    for (i = 1; i <= n; i++) optnew -= dx(i) * a(i, mcon);
  }
  if (icount == 0 || optnew < optold) {
    optold = optnew;
    nactx = nact;
    icount = 3;
  } else if (nact > nactx) {
    nactx = nact;
    icount = 3;
  } else {
    icount--;
    if (icount == 0) goto L490;
  }

  // Add constraint iact(icon) to the active set, rotating Z so its trailing
  // columns are orthogonal to the new gradient.
  if (icon <= nact) goto L260;
  kk = iact(icon);
  for (i = 1; i <= n; i++) dxnew(i) = a(i, kk);
  tot = 0.0;
  k = n;
L100:
  if (k > nact) {
    sp = 0.0;
    spabs = 0.0;
    for (i = 1; i <= n; i++) {
      temp = z(i, k) * dxnew(i);
      sp += temp;
      spabs += std::fabs(temp);
    }
    acca = spabs + 0.1 * std::fabs(sp);
    accb = spabs + 0.2 * std::fabs(sp);
    if (spabs >= acca || acca >= accb) sp = 0.0;
    if (tot == 0.0) {
      tot = sp;
    } else {
      kp = k + 1;
      temp = std::sqrt(sp * sp + tot * tot);
      alpha = sp / temp;
      beta = tot / temp;
      tot = temp;
      for (i = 1; i <= n; i++) {
        temp = alpha * z(i, k) + beta * z(i, kp);
        z(i, kp) = alpha * z(i, kp) - beta * z(i, k);
        z(i, k) = temp;
      }
    }
    k--;
    goto L100;
  }

  if (tot != 0.0) {
    nact++;
    zdota(nact) = tot;
    vmultc(icon) = vmultc(nact);
    vmultc(nact) = 0.0;
    goto L210;
  }

  // The new gradient is a combination of active ones: pick one to delete.
  ratio = -1.0;
  k = nact;
L130:
  zdotv = 0.0;
  zdvabs = 0.0;
  for (i = 1; i <= n; i++) {
    temp = z(i, k) * dxnew(i);
    zdotv += temp;
    zdvabs += std::fabs(temp);
  }
  acca = zdvabs + 0.1 * std::fabs(zdotv);
  accb = zdvabs + 0.2 * std::fabs(zdotv);
  if (zdvabs < acca && acca < accb) {
    temp = zdotv / zdota(k);
    if (temp > 0.0 && iact(k) <= m) {
      tempa = vmultc(k) / temp;
      if (ratio < 0.0 || tempa < ratio) ratio = tempa;
    }
    if (k >= 2) {
      kw = iact(k);
      for (i = 1; i <= n; i++) dxnew(i) -= temp * a(i, kw);
    }
    vmultd(k) = temp;
  } else {
    vmultd(k) = 0.0;
  }
  k--;
  if (k > 0) goto L130;
  if (ratio < 0.0) goto L490;

  for (k = 1; k <= nact; k++) vmultc(k) = std::max(0.0, vmultc(k) - ratio * vmultd(k));
  if (icon < nact) {
    isave = iact(icon);
    vsave = vmultc(icon);
    k = icon;
  L170:
    kp = k + 1;
    kw = iact(kp);
    sp = 0.0;
    for (i = 1; i <= n; i++) sp += z(i, k) * a(i, kw);
    temp = std::sqrt(sp * sp + zdota(kp) * zdota(kp));
    alpha = zdota(kp) / temp;
    beta = sp / temp;
    zdota(kp) = alpha * zdota(k);
    zdota(k) = temp;
    for (i = 1; i <= n; i++) {
      temp = alpha * z(i, kp) + beta * z(i, k);
      z(i, kp) = alpha * z(i, k) - beta * z(i, kp);
      z(i, k) = temp;
    }
    iact(k) = kw;
    vmultc(k) = vmultc(kp);
    k = kp;
    if (k < nact) goto L170;
    iact(k) = isave;
    vmultc(k) = vsave;
  }
  temp = 0.0;
  for (i = 1; i <= n; i++) temp += z(i, nact) * a(i, kk);
  if (temp == 0.0) goto L490;
  zdota(nact) = temp;
  vmultc(icon) = 0.0;
  vmultc(nact) = ratio;

  // Keep the objective as the last active constraint in stage two.
L210:
  iact(icon) = iact(nact);
  iact(nact) = kk;
  if (mcon > m && kk != mcon) {
    k = nact - 1;
    sp = 0.0;
    for (i = 1; i <= n; i++) sp += z(i, k) * a(i, kk);
    temp = std::sqrt(sp * sp + zdota(nact) * zdota(nact));
    alpha = zdota(nact) / temp;
    beta = sp / temp;
    zdota(nact) = alpha * zdota(k);
    zdota(k) = temp;
    for (i = 1; i <= n; i++) {
      temp = alpha * z(i, nact) + beta * z(i, k);
      z(i, nact) = alpha * z(i, k) - beta * z(i, nact);
      z(i, k) = temp;
    }
    iact(nact) = iact(k);
    iact(k) = kk;
    temp = vmultc(k);
    vmultc(k) = vmultc(nact);
    vmultc(nact) = temp;
  }

  if (mcon > m) goto L320;
  kk = iact(nact);
  temp = 0.0;
  for (i = 1; i <= n; i++) temp += sdirn(i) * a(i, kk);
  temp -= 1.0;
  temp /= zdota(nact);
  for (i = 1; i <= n; i++) sdirn(i) -= temp * z(i, nact);
  goto L340;

  // Delete constraint iact(icon) from the active set.
L260:
  if (icon < nact) {
    isave = iact(icon);
    vsave = vmultc(icon);
    k = icon;
  L270:
    kp = k + 1;
    kk = iact(kp);
    sp = 0.0;
    for (i = 1; i <= n; i++) sp += z(i, k) * a(i, kk);
    temp = std::sqrt(sp * sp + zdota(kp) * zdota(kp));
    alpha = zdota(kp) / temp;
    beta = sp / temp;
    zdota(kp) = alpha * zdota(k);
    zdota(k) = temp;
    for (i = 1; i <= n; i++) {
      temp = alpha * z(i, kp) + beta * z(i, k);
      z(i, kp) = alpha * z(i, k) - beta * z(i, kp);
      z(i, k) = temp;
    }
    iact(k) = kk;
    vmultc(k) = vmultc(kp);
    k = kp;
    if (k < nact) goto L270;
    iact(k) = isave;
    vmultc(k) = vsave;
  }
  nact--;

  if (mcon > m) goto L320;
  temp = 0.0;
  for (i = 1; i <= n; i++) temp += sdirn(i) * z(i, nact + 1);
  for (i = 1; i <= n; i++) sdirn(i) -= temp * z(i, nact + 1);
  goto L340;

L320:
  temp = 1.0 / zdota(nact);
  for (i = 1; i <= n; i++) sdirn(i) = temp * z(i, nact);

  // Step to the trust-region boundary, or the step that zeroes resmax.
L340:
  dd = rho * rho;
  sd = 0.0;
  ss = 0.0;
  for (i = 1; i <= n; i++) {
    if (std::fabs(dx(i)) >= 1.0e-6 * rho) dd -= dx(i) * dx(i);
    sd += dx(i) * sdirn(i);
    ss += sdirn(i) * sdirn(i);
  }
  if (dd <= 0.0) goto L490;
  temp = std::sqrt(ss * dd);
  if (std::fabs(sd) >= 1.0e-6 * temp) temp = std::sqrt(ss * dd + sd * sd);
  stpful = dd / (temp + sd);
  step = stpful;
  if (mcon == m) {
    acca = step + 0.1 * resmax;
    accb = step + 0.2 * resmax;
    if (step >= acca || acca >= accb) goto L480;
    step = std::min(step, resmax);
  }

  for (i = 1; i <= n; i++) dxnew(i) = dx(i) + step * sdirn(i);
  if (mcon == m) {
    resold = resmax;
    resmax = 0.0;
    for (k = 1; k <= nact; k++) {
      kk = iact(k);
      temp = b(kk);
      for (i = 1; i <= n; i++) temp -= a(i, kk) * dxnew(i);
      resmax = std::max(resmax, temp);
    }
  }

  // Multipliers that would hold at dxnew; rounding-level values forced to zero.
  k = nact;
L390:
  zdotw = 0.0;
  zdwabs = 0.0;
  for (i = 1; i <= n; i++) {
    temp = z(i, k) * dxnew(i);
    zdotw += temp;
    zdwabs += std::fabs(temp);
  }
  acca = zdwabs + 0.1 * std::fabs(zdotw);
  accb = zdwabs + 0.2 * std::fabs(zdotw);
  if (zdwabs >= acca || acca >= accb) zdotw = 0.0;
  vmultd(k) = zdotw / zdota(k);
  if (k >= 2) {
    kk = iact(k);
    for (i = 1; i <= n; i++) dxnew(i) -= vmultd(k) * a(i, kk);
    k--;
    goto L390;
  }
  if (mcon > m) vmultd(nact) = std::max(0.0, vmultd(nact));

  for (i = 1; i <= n; i++) dxnew(i) = dx(i) + step * sdirn(i);
  if (mcon > nact) {
    kl = nact + 1;
    for (k = kl; k <= mcon; k++) {
      kk = iact(k);
      sum = resmax - b(kk);
      sumabs = resmax + std::fabs(b(kk));
      for (i = 1; i <= n; i++) {
        temp = a(i, kk) * dxnew(i);
        sum += temp;
        sumabs += std::fabs(temp);
      }
      acca = sumabs + 0.1 * std::fabs(sum);
      accb = sumabs + 0.2 * std::fabs(sum);
      if (sumabs >= acca || acca >= accb) sum = 0.0;
      vmultd(k) = sum;
    }
  }

  ratio = 1.0;
  icon = 0;
  for (k = 1; k <= mcon; k++) {
    if (vmultd(k) < 0.0) {
      temp = vmultc(k) / (vmultc(k) - vmultd(k));
      if (temp < ratio) {
        ratio = temp;
        icon = k;
      }
    }
  }

  temp = 1.0 - ratio;
  for (i = 1; i <= n; i++) dx(i) = temp * dx(i) + ratio * dxnew(i);
  for (k = 1; k <= mcon; k++) vmultc(k) = std::max(0.0, temp * vmultc(k) + ratio * vmultd(k));
  if (mcon == m) resmax = resold + ratio * (resmax - resold);

  if (icon > 0) goto L70;
  if (step == stpful) return;
L480:
  mcon = m + 1;
  icon = mcon;
  iact(mcon) = mcon;
  vmultc(mcon) = 0.0;
  goto L60;

L490:
  if (mcon == m) goto L480;
  ifull = 0;
}

}  // namespace detail

/**
 * Minimizes f(x) subject to c_k(x) >= 0, k < m.
 *
 * calcfc(std::span<const double> x, std::span<double> con) returns f(x) and
 * fills con. Returns the best simplex vertex under the merit function
 * f + parmu * max violation.
 */
template <class F>
CobylaResult cobyla_minimize(F&& calcfc, std::vector<double> x0, int m, const CobylaOptions& opt = {}) {
  using detail::Mat1;
  using detail::Vec1;
  const int n = static_cast<int>(x0.size());
  if (n < 1) throw ArgumentError("cobyla: need at least one variable");
  if (m < 0) throw ArgumentError("cobyla: negative constraint count");
  if (!(opt.rhobeg > 0) || !(opt.rhoend > 0) || opt.rhoend > opt.rhobeg)
    throw ArgumentError("cobyla: require 0 < rhoend <= rhobeg");
  if (opt.max_evals < n + 1) throw ArgumentError("cobyla: max_evals must exceed the simplex size");

  const int mp = m + 1, mpp = m + 2, np = n + 1;
  Mat1 sim(n, np), simi(n, n), datmat(mpp, np), a(n, mp);
  Vec1 con(mpp), vsig(n), veta(n), sigbar(n), dx(n), w(n), x(n);
  std::vector<double> xs(static_cast<std::size_t>(n)), cs(static_cast<std::size_t>(m));
  for (int i = 1; i <= n; i++) x(i) = x0[static_cast<std::size_t>(i - 1)];

  const double alpha = 0.25, beta = 2.1, gamma = 0.5, delta = 1.1;
  const double rhoend = opt.rhoend;
  double rho = opt.rhobeg, parmu = 0.0;
  int i, j, k, nbest, l, iflag = 0, ifull = 0, jdrop = np, ibrnch = 0, nfvals = 0;
  double resmax = 0, phimin, tempa, error, parsig = 0, pareta = 0, wsig, weta, cvmaxp, cvmaxm, sum = 0, dxsign, resnew,
         barmu, phi, prerec = 0, prerem = 0, vmold, vmnew, trured, ratio, edgmax, denom, cmin = 0, cmax = 0, f = 0, temp;
  CobylaStatus status = CobylaStatus::Converged;

  temp = 1.0 / rho;
  for (i = 1; i <= n; i++) {
    sim(i, np) = x(i);
    for (j = 1; j <= n; j++) simi(i, j) = 0.0;
    sim(i, i) = rho;
    simi(i, i) = temp;
  }

L40:
  if (nfvals >= opt.max_evals && nfvals > 0) {
    status = CobylaStatus::MaxEvals;
    goto L600;
  }
  nfvals++;
  for (i = 1; i <= n; i++) xs[static_cast<std::size_t>(i - 1)] = x(i);
  f = calcfc(std::span<const double>(xs), std::span<double>(cs));
  resmax = 0.0;
  for (k = 1; k <= m; k++) {
    con(k) = cs[static_cast<std::size_t>(k - 1)];
    resmax = std::max(resmax, -con(k));
  }
  if (!std::isfinite(f) || !std::isfinite(resmax)) {
    status = CobylaStatus::NonFinite;
    if (nfvals <= np) {
      // The initial simplex is incomplete, so there is no vertex to fall back to.
      CobylaResult r;
      r.x = xs;
      r.f = f;
      r.max_violation = resmax;
      r.evaluations = nfvals;
      r.status = status;
      return r;
    }
    goto L600;
  }
  con(mp) = f;
  con(mpp) = resmax;
  if (ibrnch == 1) goto L440;

  // Store the values in the column of the vertex just evaluated.
  for (k = 1; k <= mpp; k++) datmat(k, jdrop) = con(k);
  if (nfvals > np) goto L130;

  // While building the initial simplex, keep the best vertex in pole position.
  if (jdrop <= n) {
    if (datmat(mp, np) <= f) {
      x(jdrop) = sim(jdrop, np);
    } else {
      sim(jdrop, np) = x(jdrop);
      for (k = 1; k <= mpp; k++) {
        datmat(k, jdrop) = datmat(k, np);
        datmat(k, np) = con(k);
      }
      for (k = 1; k <= jdrop; k++) {
        sim(jdrop, k) = -rho;
        temp = 0.0;
        for (i = k; i <= jdrop; i++) temp -= simi(i, k);
        simi(jdrop, k) = temp;
      }
    }
  }
  if (nfvals <= n) {
    jdrop = nfvals;
    x(jdrop) += rho;
    goto L40;
  }
L130:
  ibrnch = 1;

L140:
  phimin = datmat(mp, np) + parmu * datmat(mpp, np);
  nbest = np;
  for (j = 1; j <= n; j++) {
    temp = datmat(mp, j) + parmu * datmat(mpp, j);
    if (temp < phimin) {
      nbest = j;
      phimin = temp;
    } else if (temp == phimin && parmu == 0.0) {
      if (datmat(mpp, j) < datmat(mpp, nbest)) nbest = j;
    }
  }

  if (nbest <= n) {
    for (i = 1; i <= mpp; i++) {
      temp = datmat(i, np);
      datmat(i, np) = datmat(i, nbest);
      datmat(i, nbest) = temp;
    }
    for (i = 1; i <= n; i++) {
      temp = sim(i, nbest);
      sim(i, nbest) = 0.0;
      sim(i, np) += temp;
      tempa = 0.0;
      for (k = 1; k <= n; k++) {
        sim(i, k) -= temp;
        tempa -= simi(k, i);
      }
      simi(nbest, i) = tempa;
    }
  }

  // Bail out if simi has drifted from the inverse of sim.
  error = 0.0;
  for (i = 1; i <= n; i++) {
    for (j = 1; j <= n; j++) {
      temp = (i == j) ? -1.0 : 0.0;
      for (k = 1; k <= n; k++) temp += simi(i, k) * sim(k, j);
      error = std::max(error, std::fabs(temp));
    }
  }
  if (error > 0.1) {
    status = CobylaStatus::RoundingErrors;
    goto L600;
  }

  // Linear models: constraint gradients, then minus the objective gradient.
  for (k = 1; k <= mp; k++) {
    con(k) = -datmat(k, np);
    for (j = 1; j <= n; j++) w(j) = datmat(k, j) + con(k);
    for (i = 1; i <= n; i++) {
      temp = 0.0;
      for (j = 1; j <= n; j++) temp += w(j) * simi(j, i);
      if (k == mp) temp = -temp;
      a(i, k) = temp;
    }
  }

  iflag = 1;
  parsig = alpha * rho;
  pareta = beta * rho;
  for (j = 1; j <= n; j++) {
    wsig = 0.0;
    weta = 0.0;
    for (i = 1; i <= n; i++) {
      wsig += simi(j, i) * simi(j, i);
      weta += sim(i, j) * sim(i, j);
    }
    vsig(j) = 1.0 / std::sqrt(wsig);
    veta(j) = std::sqrt(weta);
    if (vsig(j) < parsig || veta(j) > pareta) iflag = 0;
  }

  // Replace a vertex to restore simplex acceptability.
  if (ibrnch == 1 || iflag == 1) goto L370;
  jdrop = 0;
  temp = pareta;
  for (j = 1; j <= n; j++) {
    if (veta(j) > temp) {
      jdrop = j;
      temp = veta(j);
    }
  }
  if (jdrop == 0) {
    for (j = 1; j <= n; j++) {
      if (vsig(j) < temp) {
        jdrop = j;
        temp = vsig(j);
      }
    }
  }

  temp = gamma * rho * vsig(jdrop);
  for (i = 1; i <= n; i++) dx(i) = temp * simi(jdrop, i);
  cvmaxp = 0.0;
  cvmaxm = 0.0;
  for (k = 1; k <= mp; k++) {
    sum = 0.0;
    for (i = 1; i <= n; i++) sum += a(i, k) * dx(i);
    if (k < mp) {
      temp = datmat(k, np);
      cvmaxp = std::max(cvmaxp, -sum - temp);
      cvmaxm = std::max(cvmaxm, sum - temp);
    }
  }
  dxsign = 1.0;
  if (parmu * (cvmaxp - cvmaxm) > sum + sum) dxsign = -1.0;

  temp = 0.0;
  for (i = 1; i <= n; i++) {
    dx(i) *= dxsign;
    sim(i, jdrop) = dx(i);
    temp += simi(jdrop, i) * dx(i);
  }
  for (i = 1; i <= n; i++) simi(jdrop, i) /= temp;
  for (j = 1; j <= n; j++) {
    if (j != jdrop) {
      temp = 0.0;
      for (i = 1; i <= n; i++) temp += simi(j, i) * dx(i);
      for (i = 1; i <= n; i++) simi(j, i) -= temp * simi(jdrop, i);
    }
    x(j) = sim(j, np) + dx(j);
  }
  goto L40;

  // Trust-region step from the best vertex.
L370:
  ifull = 0;
  detail::trstlp(n, m, a, con, rho, dx, ifull);
  if (ifull == 0) {
    temp = 0.0;
    for (i = 1; i <= n; i++) temp += dx(i) * dx(i);
    if (temp < 0.25 * rho * rho) {
      ibrnch = 1;
      goto L550;
    }
  }

  resnew = 0.0;
  con(mp) = 0.0;
  for (k = 1; k <= mp; k++) {
    sum = con(k);
    for (i = 1; i <= n; i++) sum -= a(i, k) * dx(i);
    if (k < mp) resnew = std::max(resnew, sum);
  }

  barmu = 0.0;
  prerec = datmat(mpp, np) - resnew;
  if (prerec > 0.0) barmu = sum / prerec;
  if (parmu < 1.5 * barmu) {
    parmu = 2.0 * barmu;
    phi = datmat(mp, np) + parmu * datmat(mpp, np);
    for (j = 1; j <= n; j++) {
      temp = datmat(mp, j) + parmu * datmat(mpp, j);
      if (temp < phi) goto L140;
      if (temp == phi && parmu == 0.0) {
        if (datmat(mpp, j) < datmat(mpp, np)) goto L140;
      }
    }
  }
  prerem = parmu * prerec - sum;

  for (i = 1; i <= n; i++) x(i) = sim(i, np) + dx(i);
  ibrnch = 1;
  goto L40;

L440:
  vmold = datmat(mp, np) + parmu * datmat(mpp, np);
  vmnew = f + parmu * resmax;
  trured = vmold - vmnew;
  if (parmu == 0.0 && f == datmat(mp, np)) {
    prerem = prerec;
    trured = datmat(mpp, np) - resmax;
  }

  // Choose the vertex that x(*) replaces; mandatory when trured > 0.
  ratio = 0.0;
  if (trured <= 0.0) ratio = 1.0;
  jdrop = 0;
  for (j = 1; j <= n; j++) {
    temp = 0.0;
    for (i = 1; i <= n; i++) temp += simi(j, i) * dx(i);
    temp = std::fabs(temp);
    if (temp > ratio) {
      jdrop = j;
      ratio = temp;
    }
    sigbar(j) = temp * vsig(j);
  }

  edgmax = delta * rho;
  l = 0;
  for (j = 1; j <= n; j++) {
    if (sigbar(j) >= parsig || sigbar(j) >= vsig(j)) {
      temp = veta(j);
      if (trured > 0.0) {
        temp = 0.0;
        for (i = 1; i <= n; i++) temp += (dx(i) - sim(i, j)) * (dx(i) - sim(i, j));
        temp = std::sqrt(temp);
      }
      if (temp > edgmax) {
        l = j;
        edgmax = temp;
      }
    }
  }
  if (l > 0) jdrop = l;
  if (jdrop == 0) goto L550;

  temp = 0.0;
  for (i = 1; i <= n; i++) {
    sim(i, jdrop) = dx(i);
    temp += simi(jdrop, i) * dx(i);
  }
  for (i = 1; i <= n; i++) simi(jdrop, i) /= temp;
  for (j = 1; j <= n; j++) {
    if (j != jdrop) {
      temp = 0.0;
      for (i = 1; i <= n; i++) temp += simi(j, i) * dx(i);
      for (i = 1; i <= n; i++) simi(j, i) -= temp * simi(jdrop, i);
    }
  }
  for (k = 1; k <= mpp; k++) datmat(k, jdrop) = con(k);

  if (trured > 0.0 && trured >= 0.1 * prerem) goto L140;
L550:
  if (iflag == 0) {
    ibrnch = 0;
    goto L140;
  }

  // Shrink rho and relax parmu.
  if (rho > rhoend) {
    rho *= 0.5;
    if (rho <= 1.5 * rhoend) rho = rhoend;
    if (parmu > 0.0) {
      denom = 0.0;
      for (k = 1; k <= mp; k++) {
        cmin = datmat(k, np);
        cmax = cmin;
        for (i = 1; i <= n; i++) {
          cmin = std::min(cmin, datmat(k, i));
          cmax = std::max(cmax, datmat(k, i));
        }
        if (k <= m && cmin < 0.5 * cmax) {
          temp = std::max(cmax, 0.0) - cmin;
          denom = denom <= 0.0 ? temp : std::min(denom, temp);
        }
      }
      if (denom == 0.0) {
        parmu = 0.0;
      } else if (cmax - cmin < parmu * denom) {
        parmu = (cmax - cmin) / denom;
      }
    }
    goto L140;
  }

L600: {
  CobylaResult r;
  r.x.resize(static_cast<std::size_t>(n));
  for (i = 1; i <= n; i++) r.x[static_cast<std::size_t>(i - 1)] = sim(i, np);
  r.f = datmat(mp, np);
  r.max_violation = datmat(mpp, np);
  r.evaluations = nfvals;
  r.status = status;
  return r;
}
}

}  // namespace icqse
