//! Discrete geometry of the closed localization curve: uniform periodic
//! s-grid on [0, 2pi), spectral derivatives, quadrature, the action integral,
//! the nearest-parameter (tau) solver and the convexity critical index.
//!
//! Only closed curves are supported; all per-s fields are smooth periodic
//! functions of s. The action S is multivalued on a quantized closed curve
//! (S(2pi) - S(0) = loop integral of <P, dX>), so it is stored as a winding
//! part `s_wind * s` plus a periodic part; the winding coefficient is constant
//! in time because the rate of change of S is periodic in s.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::params::ModelParams;
use crate::{Error, Result};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

fn check_grid_len(n: usize) -> Result<()> {
    if n < 8 || n % 2 != 0 {
        return Err(Error::Config(format!(
            "periodic grid needs an even size >= 8, got {n}"
        )));
    }
    Ok(())
}

fn fft(values: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let mut planner = FftPlanner::new();
    let plan = if inverse {
        planner.plan_fft_inverse(values.len())
    } else {
        planner.plan_fft_forward(values.len())
    };
    let mut buf = values.to_vec();
    plan.process(&mut buf);
    buf
}

/// Spectral derivative of the given order on the uniform periodic grid over
/// [0, 2pi). The Nyquist mode is zeroed for odd orders.
fn spectral_derivative(values: &[f64], order: u32) -> Result<Vec<f64>> {
    let n = values.len();
    check_grid_len(n)?;
    let buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut hat = fft(&buf, false);
    for (k, c) in hat.iter_mut().enumerate() {
        let m = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        if order % 2 == 1 && k == n / 2 {
            *c = Complex64::new(0.0, 0.0);
        } else {
            *c *= Complex64::new(0.0, m).powu(order);
        }
    }
    let out = fft(&hat, true);
    Ok(out.iter().map(|c| c.re / n as f64).collect())
}

/// Spectral d/ds on the periodic grid.
pub fn d_ds(values: &[f64]) -> Result<Vec<f64>> {
    spectral_derivative(values, 1)
}

/// Spectral d^2/ds^2 on the periodic grid.
pub fn d2_ds2(values: &[f64]) -> Result<Vec<f64>> {
    spectral_derivative(values, 2)
}

/// Trapezoid rule on the uniform periodic grid (equals the rectangle rule
/// there; spectrally accurate for smooth periodic integrands).
pub fn quad_s(values: &[f64]) -> f64 {
    let h = TWO_PI / values.len() as f64;
    values.iter().sum::<f64>() * h
}

/// Ratio of the trailing (Nyquist-band) Fourier amplitude to the leading one;
/// a smooth periodic sample decays well below 1e-8.
pub fn periodicity_defect(values: &[f64]) -> f64 {
    let n = values.len();
    let buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let hat = fft(&buf, false);
    let leading = hat.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if leading == 0.0 {
        return 0.0;
    }
    let tail = [n / 2 - 1, n / 2, n / 2 + 1]
        .iter()
        .map(|&k| hat[k].norm())
        .fold(0.0, f64::max);
    tail / leading
}

/// Discretized curve data sampled on the periodic s-grid.
#[derive(Clone, Debug)]
pub struct CurveState {
    /// Momentum samples P(s_j).
    pub p: Vec<[f64; 2]>,
    /// Position samples X(s_j).
    pub x: Vec<[f64; 2]>,
    /// Weight density mu(s_j) (per unit s).
    pub mu: Vec<f64>,
    /// Winding coefficient of the action: S contains the term s_wind * s.
    pub s_wind: f64,
    /// Periodic part of the action.
    pub s_per: Vec<f64>,
    /// Current time.
    pub t: f64,
}

impl CurveState {
    /// Rotating-circle initial data: X = R(cos s, sin s),
    /// P = Pr(sin s, -cos s), mu = mu0, S = -R Pr s.
    pub fn initial_circle(params: &ModelParams, ns: usize) -> Result<CurveState> {
        check_grid_len(ns)?;
        params.validate()?;
        let r = params.radius;
        let pr = params.p_r;
        let mut p = Vec::with_capacity(ns);
        let mut x = Vec::with_capacity(ns);
        for j in 0..ns {
            let s = TWO_PI * j as f64 / ns as f64;
            x.push([r * s.cos(), r * s.sin()]);
            p.push([pr * s.sin(), -pr * s.cos()]);
        }
        Ok(CurveState {
            p,
            x,
            mu: vec![params.mu0; ns],
            s_wind: -r * pr,
            s_per: vec![0.0; ns],
            t: 0.0,
        })
    }

    pub fn ns(&self) -> usize {
        self.x.len()
    }

    pub fn grid_step(&self) -> f64 {
        TWO_PI / self.ns() as f64
    }

    pub fn s_value(&self, j: usize) -> f64 {
        TWO_PI * j as f64 / self.ns() as f64
    }

    /// Action value S(s_j) = s_wind * s_j + periodic part.
    pub fn action(&self, j: usize) -> f64 {
        self.s_wind * self.s_value(j) + self.s_per[j]
    }

    /// Phase-space sample (p, x) at grid index j.
    pub fn z(&self, j: usize) -> [f64; 4] {
        [self.p[j][0], self.p[j][1], self.x[j][0], self.x[j][1]]
    }

    pub fn component(&self, which: Component) -> Vec<f64> {
        match which {
            Component::P(i) => self.p.iter().map(|v| v[i]).collect(),
            Component::X(i) => self.x.iter().map(|v| v[i]).collect(),
        }
    }

    /// Spectral S_s = s_wind + d/ds of the periodic part.
    pub fn action_derivative(&self) -> Result<Vec<f64>> {
        let mut d = d_ds(&self.s_per)?;
        for v in &mut d {
            *v += self.s_wind;
        }
        Ok(d)
    }

    /// Fails on negative weight (beyond -1e-10) or non-finite fields.
    pub fn validate(&self) -> Result<()> {
        for (j, &m) in self.mu.iter().enumerate() {
            if !m.is_finite() || m < -1e-10 {
                return Err(Error::Numerics(format!(
                    "weight mu became invalid at s index {j}: {m} (t = {})",
                    self.t
                )));
            }
        }
        let finite = self
            .p
            .iter()
            .chain(self.x.iter())
            .all(|v| v[0].is_finite() && v[1].is_finite())
            && self.s_per.iter().all(|v| v.is_finite())
            && self.s_wind.is_finite();
        if !finite {
            return Err(Error::Numerics(format!(
                "curve state became non-finite at t = {}",
                self.t
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Component {
    P(usize),
    X(usize),
}

/// Loop integral of <P, X_s> ds via the spectral derivative and periodic
/// quadrature.
pub fn action_integral(curve: &CurveState) -> Result<f64> {
    let xs1 = d_ds(&curve.component(Component::X(0)))?;
    let xs2 = d_ds(&curve.component(Component::X(1)))?;
    let integrand: Vec<f64> = (0..curve.ns())
        .map(|j| curve.p[j][0] * xs1[j] + curve.p[j][1] * xs2[j])
        .collect();
    Ok(quad_s(&integrand))
}

/// Minimum over s of the planar signed curvature (X_s x X_ss) / |X_s|^3.
/// Negative values flag an essentially non-convex curve.
pub fn convexity_index(curve: &CurveState) -> Result<f64> {
    let x1 = curve.component(Component::X(0));
    let x2 = curve.component(Component::X(1));
    let xs1 = d_ds(&x1)?;
    let xs2 = d_ds(&x2)?;
    let xss1 = d2_ds2(&x1)?;
    let xss2 = d2_ds2(&x2)?;
    let mut min = f64::INFINITY;
    for j in 0..curve.ns() {
        let speed2 = xs1[j] * xs1[j] + xs2[j] * xs2[j];
        if speed2.sqrt() < 1e-12 {
            return Err(Error::DegenerateTangent);
        }
        let cross = xs1[j] * xss2[j] - xs2[j] * xss1[j];
        min = min.min(cross / speed2.powf(1.5));
    }
    Ok(min)
}

// ---------------------------------------------------------------------------
// Trigonometric interpolation and the tau solver
// ---------------------------------------------------------------------------

/// Trigonometric interpolant of the curve built from its grid samples; exact
/// at the nodes and spectrally accurate in between.
#[derive(Clone, Debug)]
pub struct CurveInterp {
    n: usize,
    cx: [Vec<Complex64>; 2],
    cp: [Vec<Complex64>; 2],
    /// Grid positions kept for the global nearest-point scan.
    grid_x: Vec<[f64; 2]>,
}

impl CurveInterp {
    pub fn new(curve: &CurveState) -> Result<CurveInterp> {
        check_grid_len(curve.ns())?;
        let coeffs = |vals: Vec<f64>| -> Vec<Complex64> {
            let buf: Vec<Complex64> = vals.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            let mut hat = fft(&buf, false);
            let n = hat.len() as f64;
            for c in &mut hat {
                *c /= n;
            }
            hat
        };
        Ok(CurveInterp {
            n: curve.ns(),
            cx: [
                coeffs(curve.component(Component::X(0))),
                coeffs(curve.component(Component::X(1))),
            ],
            cp: [
                coeffs(curve.component(Component::P(0))),
                coeffs(curve.component(Component::P(1))),
            ],
            grid_x: curve.x.clone(),
        })
    }

    /// Evaluates the interpolant and optionally its s-derivatives.
    /// `order` multiplies coefficients by (i m)^order; Nyquist is zeroed for
    /// odd orders.
    fn eval(coeffs: &[Complex64], tau: f64, order: u32) -> f64 {
        let n = coeffs.len();
        let half = n / 2;
        let rot = Complex64::from_polar(1.0, tau);
        let mut phase = Complex64::new(1.0, 0.0);
        let mut acc = if order == 0 { coeffs[0] } else { Complex64::new(0.0, 0.0) };
        for m in 1..half {
            phase *= rot;
            let im = Complex64::new(0.0, m as f64).powu(order);
            acc += coeffs[m] * im * phase + coeffs[n - m] * im.conj() * phase.conj();
        }
        if order % 2 == 0 {
            let m = half as f64;
            let factor = (-(m * m)).powf(order as f64 / 2.0) * (m * tau).cos();
            acc += coeffs[half] * factor;
        }
        acc.re
    }

    pub fn x(&self, tau: f64) -> [f64; 2] {
        [Self::eval(&self.cx[0], tau, 0), Self::eval(&self.cx[1], tau, 0)]
    }

    pub fn x_s(&self, tau: f64) -> [f64; 2] {
        [Self::eval(&self.cx[0], tau, 1), Self::eval(&self.cx[1], tau, 1)]
    }

    pub fn x_ss(&self, tau: f64) -> [f64; 2] {
        [Self::eval(&self.cx[0], tau, 2), Self::eval(&self.cx[1], tau, 2)]
    }

    pub fn p(&self, tau: f64) -> [f64; 2] {
        [Self::eval(&self.cp[0], tau, 0), Self::eval(&self.cp[1], tau, 0)]
    }

    pub fn p_s(&self, tau: f64) -> [f64; 2] {
        [Self::eval(&self.cp[0], tau, 1), Self::eval(&self.cp[1], tau, 1)]
    }

    pub fn ns(&self) -> usize {
        self.n
    }
}

fn wrap_2pi(mut s: f64) -> f64 {
    s %= TWO_PI;
    if s < 0.0 {
        s += TWO_PI;
    }
    s
}

/// Solves the transversality condition <X_s(tau), x - X(tau)> = 0 for the
/// continuous parameter branch nearest the hint (or the globally nearest
/// point when no hint is given).
#[derive(Clone, Debug)]
pub struct TauSolver {
    interp: CurveInterp,
}

impl TauSolver {
    pub fn new(curve: &CurveState) -> Result<TauSolver> {
        Ok(TauSolver { interp: CurveInterp::new(curve)? })
    }

    pub fn interp(&self) -> &CurveInterp {
        &self.interp
    }

    fn newton(&self, x: [f64; 2], start: f64) -> Option<f64> {
        let mut tau = start;
        for _ in 0..60 {
            let xc = self.interp.x(tau);
            let xs = self.interp.x_s(tau);
            let xss = self.interp.x_ss(tau);
            let dx = [x[0] - xc[0], x[1] - xc[1]];
            let g = xs[0] * dx[0] + xs[1] * dx[1];
            let speed2 = xs[0] * xs[0] + xs[1] * xs[1];
            let den = speed2 - (xss[0] * dx[0] + xss[1] * dx[1]);
            let tol = 1e-10 * speed2.sqrt() * (dx[0] * dx[0] + dx[1] * dx[1]).sqrt()
                + 1e-15 * speed2;
            if g.abs() <= tol {
                if den <= 0.0 {
                    return None;
                }
                return Some(tau);
            }
            if den <= 0.0 || !den.is_finite() {
                return None;
            }
            let step = g / den;
            // Keep the iteration on the branch near the start.
            let step = step.clamp(-1.0, 1.0);
            tau += step;
        }
        None
    }

    /// Returns tau in [0, 2pi); 2pi-periodic in the hint. Fails with
    /// `OutsideTube` when no root satisfies the denominator positivity
    /// condition X_s^2 - <X_ss, dx> > 0.
    pub fn solve(&self, x: [f64; 2], hint: Option<f64>) -> Result<f64> {
        if let Some(h) = hint {
            if let Some(tau) = self.newton(x, wrap_2pi(h)) {
                return Ok(wrap_2pi(tau));
            }
        }
        // Global fallback: nearest grid node, then Newton.
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (j, xg) in self.interp.grid_x.iter().enumerate() {
            let d = (x[0] - xg[0]).powi(2) + (x[1] - xg[1]).powi(2);
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        let start = TWO_PI * best as f64 / self.interp.n as f64;
        match self.newton(x, start) {
            Some(tau) => Ok(wrap_2pi(tau)),
            None => Err(Error::OutsideTube),
        }
    }
}

/// One-shot convenience wrapper around [`TauSolver`].
pub fn tau_solve(x: [f64; 2], curve: &CurveState, hint: Option<f64>) -> Result<f64> {
    TauSolver::new(curve)?.solve(x, hint)
}
