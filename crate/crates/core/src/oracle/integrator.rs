use std::ops::Range;

use num_complex::Complex64 as C64;

use super::ThreeModeState;
use crate::error::{invalid, Error, Result};
use crate::fock::ModelParams;

/// Integrator tolerances for the no-count propagation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-12 }
    }
}

impl Tolerances {
    /// Looser setting for trajectory sampling, where the statistical error
    /// of any feasible sample size dominates the integration error.
    pub fn monte_carlo() -> Self {
        Self { rtol: 1e-7, atol: 1e-10 }
    }
}

const MAX_STEPS: usize = 1_000_000;

// Dormand–Prince 5(4) tableau.
const A: [[f64; 5]; 6] = [
    [0.0; 5],
    [0.2, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
];
const B: [f64; 6] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
/// Fifth- minus fourth-order weights over stages 1..=7 (7 is the FSAL stage).
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
/// Fourth-order dense-output weights over stages 1..=7.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Propagates three-mode states under `Y = -i H - (gamma / 2) c^dag c` with
/// `H = lambda (a^dag b + a b^dag) + chi (m + n) (c + c^dag)`.
#[derive(Debug, Clone)]
pub struct NoCountPropagator {
    params: ModelParams,
    tol: Tolerances,
    d: usize,
    d_c: usize,
    len: usize,
    sqrt: Vec<f64>,
    pairs: Vec<(usize, usize)>,
    /// Contiguous index runs covering the active pairs.
    runs: Vec<Range<usize>>,
    h_init: f64,
}

/// Scratch space for one integration.
struct Work {
    k: [Vec<C64>; 7],
    tmp: Vec<C64>,
    ynew: Vec<C64>,
}

impl Work {
    fn new(len: usize) -> Self {
        let z = || vec![C64::new(0.0, 0.0); len];
        Self { k: [z(), z(), z(), z(), z(), z(), z()], tmp: z(), ynew: z() }
    }
}

impl NoCountPropagator {
    pub fn new(params: &ModelParams, state: &ThreeModeState, tol: Tolerances) -> Result<Self> {
        params.validate()?;
        let (d, _, d_c) = state.dims();
        let n_max = d - 1;
        let sqrt = (0..=d.max(d_c) + 1).map(|i| (i as f64).sqrt()).collect();
        let runs = (0..=n_max).map(|m| (m * d) * d_c..(m * d + n_max - m + 1) * d_c).collect();
        let nf = n_max as f64;
        let rate = params.lambda * nf + 2.0 * params.chi * nf * (d_c as f64).sqrt() + params.gamma * d_c as f64 / 2.0;
        Ok(Self {
            params: *params,
            tol,
            d,
            d_c,
            len: d * d * d_c,
            sqrt,
            pairs: state.pairs().collect(),
            runs,
            h_init: 0.5 / rate.max(1e-300),
        })
    }

    fn idx(&self, m: usize, n: usize, p: usize) -> usize {
        (m * self.d + n) * self.d_c + p
    }

    /// `out = Y psi` on the active pairs.
    fn rhs(&self, psi: &[C64], out: &mut [C64]) {
        let ModelParams { lambda, chi, gamma } = self.params;
        let d_c = self.d_c;
        for &(m, n) in &self.pairs {
            let base = self.idx(m, n, 0);
            let drive = chi * (m + n) as f64;
            let src = &psi[base..base + d_c];
            let dst = &mut out[base..base + d_c];
            let damp = 0.5 * gamma;
            // -i drive (c + c^dag) psi - (gamma / 2) c^dag c psi
            let mut emit = |p: usize, x: C64| dst[p] = C64::new(drive * x.im, -drive * x.re) - src[p] * (damp * p as f64);
            if d_c == 1 {
                emit(0, C64::new(0.0, 0.0));
            } else {
                emit(0, src[1] * self.sqrt[1]);
                for p in 1..d_c - 1 {
                    emit(p, src[p + 1] * self.sqrt[p + 1] + src[p - 1] * self.sqrt[p]);
                }
                emit(d_c - 1, src[d_c - 2] * self.sqrt[d_c - 1]);
            }
            if lambda != 0.0 {
                // a^dag b |m-1, n+1> and a b^dag |m+1, n-1>
                let mut couple = |from: usize, amp: f64| {
                    let c = lambda * amp;
                    for p in 0..d_c {
                        let s = psi[from + p];
                        out[base + p] += C64::new(c * s.im, -c * s.re);
                    }
                };
                if m > 0 {
                    couple(self.idx(m - 1, n + 1, 0), self.sqrt[m] * self.sqrt[n + 1]);
                }
                if n > 0 {
                    couple(self.idx(m + 1, n - 1, 0), self.sqrt[m + 1] * self.sqrt[n]);
                }
            }
        }
    }

    /// Trial step from `y` (with `w.k[0] = Y y`) into `w.ynew`, filling all
    /// seven stages. Returns the scaled error; accept when <= 1.
    fn try_step(&self, y: &[C64], h: f64, w: &mut Work) -> f64 {
        for s in 1..6 {
            for r in &self.runs {
                for i in r.clone() {
                    let mut acc = w.k[0][i] * A[s][0];
                    for j in 1..s {
                        acc += w.k[j][i] * A[s][j];
                    }
                    w.tmp[i] = y[i] + acc * h;
                }
            }
            let (_, after) = w.k.split_at_mut(s);
            self.rhs(&w.tmp, &mut after[0]);
        }
        for r in &self.runs {
            for i in r.clone() {
                let mut acc = w.k[0][i] * B[0];
                for s in 2..6 {
                    acc += w.k[s][i] * B[s];
                }
                w.ynew[i] = y[i] + acc * h;
            }
        }
        let (head, tail) = w.k.split_at_mut(6);
        let _ = head;
        self.rhs(&w.ynew, &mut tail[0]);
        // Root-mean-square scaled error over the active components.
        let mut err: f64 = 0.0;
        let mut count = 0usize;
        for r in &self.runs {
            for i in r.clone() {
                let mut e = C64::new(0.0, 0.0);
                for s in 0..7 {
                    e += w.k[s][i] * E[s];
                }
                // squared moduli throughout: hypot is far slower than sqrt
                let sc = self.tol.atol + self.tol.rtol * y[i].norm_sqr().max(w.ynew[i].norm_sqr()).sqrt();
                err += e.norm_sqr() / (sc * sc);
                count += 1;
            }
        }
        (err / count.max(1) as f64).sqrt() * h
    }

    /// Coefficients of the dense-output polynomial of the last accepted
    /// step, so `y(theta) = y + theta (r2 + (1 - theta) (r3 + theta (r4 + (1 - theta) r5)))`.
    fn dense_coefficients(&self, y: &[C64], h: f64, w: &Work) -> [Vec<C64>; 4] {
        let z = || vec![C64::new(0.0, 0.0); self.len];
        let mut r = [z(), z(), z(), z()];
        for run in &self.runs {
            for i in run.clone() {
                let r2 = w.ynew[i] - y[i];
                let r3 = w.k[0][i] * h - r2;
                let mut acc = C64::new(0.0, 0.0);
                for s in 0..7 {
                    acc += w.k[s][i] * D[s];
                }
                r[0][i] = r2;
                r[1][i] = r3;
                r[2][i] = r2 - w.k[6][i] * h - r3;
                r[3][i] = acc * h;
            }
        }
        r
    }

    fn interpolate(&self, y: &[C64], r: &[Vec<C64>; 4], theta: f64, out: &mut [C64]) {
        let t1 = 1.0 - theta;
        for run in &self.runs {
            for i in run.clone() {
                out[i] = y[i] + (r[0][i] + (r[1][i] + (r[2][i] + r[3][i] * t1) * theta) * t1) * theta;
            }
        }
    }

    fn norm_sqr(&self, v: &[C64]) -> f64 {
        self.runs.iter().map(|r| v[r.clone()].iter().map(|c| c.norm_sqr()).sum::<f64>()).sum()
    }

    /// Integrates `psi` forward by exactly `dt`.
    pub fn evolve(&self, state: &mut ThreeModeState, dt: f64) -> Result<()> {
        self.evolve_inner(state, dt, None).map(|_| ())
    }

    /// Integrates forward until `|psi|^2` falls to `target` or `dt_max`
    /// elapses. Returns the crossing time if it happened; the crossing is
    /// located on the step's dense output.
    pub fn evolve_until_norm(&self, state: &mut ThreeModeState, dt_max: f64, target: f64) -> Result<Option<f64>> {
        self.evolve_inner(state, dt_max, Some(target))
    }

    fn evolve_inner(&self, state: &mut ThreeModeState, dt: f64, target: Option<f64>) -> Result<Option<f64>> {
        if !(dt >= 0.0) || !dt.is_finite() {
            return invalid(format!("propagation time must be finite and >= 0, got {dt}"));
        }
        debug_assert_eq!(state.coeffs.len(), self.len);
        state.mark_conditional();
        if dt == 0.0 {
            return Ok(None);
        }
        let mut w = Work::new(self.len);
        self.rhs(&state.coeffs, &mut w.k[0]);
        let mut t = 0.0;
        let mut h = self.h_init.min(dt);
        for _ in 0..MAX_STEPS {
            let last = t + h >= dt;
            if last {
                h = dt - t;
            }
            let err = self.try_step(&state.coeffs, h, &mut w);
            if err <= 1.0 {
                if let Some(target) = target {
                    if self.norm_sqr(&w.ynew) <= target {
                        let r = self.dense_coefficients(&state.coeffs, h, &w);
                        let mut out = std::mem::take(&mut w.tmp);
                        let theta = self.crossing_fraction(&state.coeffs, &r, target, &mut out);
                        self.interpolate(&state.coeffs, &r, theta, &mut out);
                        state.coeffs = out;
                        return Ok(Some(t + theta * h));
                    }
                }
                std::mem::swap(&mut state.coeffs, &mut w.ynew);
                w.k.swap(0, 6);
                t += h;
                if last {
                    return Ok(None);
                }
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= factor;
            if h < 1e-14 * dt {
                return Err(Error::Convergence { message: "no-count step size underflow".into(), estimate: t, bound: h });
            }
        }
        Err(Error::Convergence { message: "no-count propagation exceeded step budget".into(), estimate: t, bound: dt })
    }

    /// Root of `|y(theta)|^2 - target` on `[0, 1]` by the Illinois variant
    /// of regula falsi; the norm decreases across the step.
    fn crossing_fraction(&self, y: &[C64], r: &[Vec<C64>; 4], target: f64, buf: &mut [C64]) -> f64 {
        let mut f = |theta: f64| {
            self.interpolate(y, r, theta, buf);
            self.norm_sqr(buf) - target
        };
        let (mut a, mut b) = (0.0, 1.0);
        let (mut fa, mut fb) = (f(a), f(b));
        if fa <= 0.0 {
            return 0.0;
        }
        if fb >= 0.0 {
            return 1.0;
        }
        let mut side = 0;
        for _ in 0..100 {
            let c = (a * fb - b * fa) / (fb - fa);
            let fc = f(c);
            if fc.abs() <= 1e-14 * target || b - a <= 1e-15 {
                return c;
            }
            if fc > 0.0 {
                a = c;
                fa = fc;
                if side == 1 {
                    fb /= 2.0;
                }
                side = 1;
            } else {
                b = c;
                fb = fc;
                if side == -1 {
                    fa /= 2.0;
                }
                side = -1;
            }
        }
        0.5 * (a + b)
    }
}

/// `e^{Y dt} psi` with default tolerances.
pub fn no_count_evolution(state: &ThreeModeState, params: &ModelParams, dt: f64) -> Result<ThreeModeState> {
    let prop = NoCountPropagator::new(params, state, Tolerances::default())?;
    let mut out = state.clone();
    prop.evolve(&mut out, dt)?;
    Ok(out)
}
