//! Steady rotating-circle state of the curve system and the linearized
//! deformation Cauchy problem around it.
//!
//! The fixed-point conditions for the circle ansatz
//!   X = Rb (cos th, sin th), P = Prb (sin th, -cos th), th = wb t + s,
//! under the quantization Rb*Prb = N hbar, are (z = 2 Rb^2/g^2, sIn =
//! e^{-z} I_n(z)):
//!
//!   Rb (wb - w) + 2 Prb = 0                                   (tangential flow)
//!   Prb (wb - w) + 2 Rb (k2 + 2 k4 Rb^2)
//!       - (4 kappa mub / g^4) Rb (sI0 - sI1) = 0              (radial force)
//!   Prb^2 + k2 Rb^2 + k4 Rb^4 - w Rb Prb
//!       + (2 kappa mub / g^2) sI0 = 0                         (weight stationarity)
//!   Rb Prb - N hbar = 0                                       (quantization)
//!
//! The linearization below is the exact Jacobian of the curve system at this
//! circle; its scalar coefficients reduce to modified-Bessel/0F1 closed forms.

use serde::{Deserialize, Serialize};

use crate::curve::CurveState;
use crate::params::ModelParams;
use crate::specialfn::{hyp0f1_b1, i0_scaled, i1_scaled};
use crate::{Error, Result};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// The steady rotating circle: radius, tangential momentum, pattern rotation
/// rate and uniform weight. `s0` is the phase offset (0 by convention).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SteadyCircle {
    pub rbar: f64,
    pub prbar: f64,
    pub omegabar: f64,
    pub mubar0: f64,
    pub s0: f64,
}

impl SteadyCircle {
    /// Curve-state samples of the circle at time `t` (phase wb t + s + s0).
    pub fn to_curve(&self, ns: usize, t: f64) -> CurveState {
        let mut p = Vec::with_capacity(ns);
        let mut x = Vec::with_capacity(ns);
        for j in 0..ns {
            let s = TWO_PI * j as f64 / ns as f64;
            let th = self.omegabar * t + s + self.s0;
            x.push([self.rbar * th.cos(), self.rbar * th.sin()]);
            p.push([self.prbar * th.sin(), -self.prbar * th.cos()]);
        }
        CurveState {
            p,
            x,
            mu: vec![self.mubar0; ns],
            s_wind: -self.rbar * self.prbar,
            s_per: vec![0.0; ns],
            t,
        }
    }
}

struct SteadyProblem {
    omega: f64,
    k2: f64,
    k4: f64,
    kappa: f64,
    gamma: f64,
    n_hbar: f64,
}

impl SteadyProblem {
    /// Raw residuals of the four equations at u = (Rb, Prb, wb, mub).
    fn residuals(&self, u: [f64; 4]) -> Result<[f64; 4]> {
        let [r, pr, wb, mu] = u;
        let g2 = self.gamma * self.gamma;
        let z = 2.0 * r * r / g2;
        let si0 = i0_scaled(z)?;
        let si1 = i1_scaled(z)?;
        let f1 = r * (wb - self.omega) + 2.0 * pr;
        let f2 = pr * (wb - self.omega) + 2.0 * r * (self.k2 + 2.0 * self.k4 * r * r)
            - 4.0 * self.kappa * mu / (g2 * g2) * r * (si0 - si1);
        let f3 = pr * pr + self.k2 * r * r + self.k4 * r.powi(4) - self.omega * r * pr
            + 2.0 * self.kappa * mu / g2 * si0;
        let f4 = r * pr - self.n_hbar;
        Ok([f1, f2, f3, f4])
    }

    /// Largest term magnitude per equation, for nondimensional residual
    /// scaling.
    fn scales(&self, u: [f64; 4]) -> Result<[f64; 4]> {
        let [r, pr, wb, mu] = u;
        let g2 = self.gamma * self.gamma;
        let z = 2.0 * r * r / g2;
        let si0 = i0_scaled(z)?;
        let si1 = i1_scaled(z)?;
        let m = |terms: &[f64]| terms.iter().fold(1e-30f64, |a, t: &f64| a.max(t.abs()));
        Ok([
            m(&[r * (wb - self.omega), 2.0 * pr]),
            m(&[
                pr * (wb - self.omega),
                2.0 * r * (self.k2 + 2.0 * self.k4 * r * r),
                4.0 * self.kappa * mu / (g2 * g2) * r * (si0 - si1),
            ]),
            m(&[
                pr * pr,
                self.k2 * r * r,
                self.k4 * r.powi(4),
                self.omega * r * pr,
                2.0 * self.kappa * mu / g2 * si0,
            ]),
            m(&[r * pr, self.n_hbar]),
        ])
    }

    fn jacobian(&self, u: [f64; 4]) -> Result<[[f64; 4]; 4]> {
        let [r, pr, wb, mu] = u;
        let g2 = self.gamma * self.gamma;
        let g4 = g2 * g2;
        let z = 2.0 * r * r / g2;
        let si0 = i0_scaled(z)?;
        let si1 = i1_scaled(z)?;
        let dsi0 = si1 - si0;
        let dsi1 = si0 - si1 * (1.0 + 1.0 / z);
        let dz_dr = 4.0 * r / g2;
        let c2 = 4.0 * self.kappa / g4;
        let c3 = 2.0 * self.kappa / g2;
        Ok([
            [wb - self.omega, 2.0, r, 0.0],
            [
                2.0 * self.k2 + 12.0 * self.k4 * r * r
                    - c2 * mu * ((si0 - si1) + r * (dsi0 - dsi1) * dz_dr),
                wb - self.omega,
                pr,
                -c2 * r * (si0 - si1),
            ],
            [
                2.0 * self.k2 * r + 4.0 * self.k4 * r.powi(3) - self.omega * pr
                    + c3 * mu * dsi0 * dz_dr,
                2.0 * pr - self.omega * r,
                0.0,
                c3 * si0,
            ],
            [pr, r, 0.0, 0.0],
        ])
    }

    fn residual_norm(&self, u: [f64; 4]) -> f64 {
        match (self.residuals(u), self.scales(u)) {
            (Ok(f), Ok(s)) => (0..4).map(|i| (f[i] / s[i]).abs()).fold(0.0, f64::max),
            _ => f64::INFINITY,
        }
    }
}

fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let mut piv = col;
        for row in col + 1..4 {
            if a[row][col].abs() > a[piv][col].abs() {
                piv = row;
            }
        }
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for col in (0..4).rev() {
        let mut v = b[col];
        for k in col + 1..4 {
            v -= a[col][k] * x[k];
        }
        x[col] = v / a[col][col];
    }
    Some(x)
}

fn newton_from(problem: &SteadyProblem, start: [f64; 4]) -> Option<[f64; 4]> {
    let mut u = start;
    let mut res = problem.residual_norm(u);
    for _ in 0..200 {
        if res <= 1e-12 {
            return Some(u);
        }
        let f = problem.residuals(u).ok()?;
        let jac = problem.jacobian(u).ok()?;
        let rhs = [-f[0], -f[1], -f[2], -f[3]];
        let step = solve4(jac, rhs)?;
        // Damping: halve the step until the scaled residual decreases and the
        // radius stays positive; the mixed polynomial/Bessel system is poorly
        // conditioned far from the root.
        let mut lam = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = [
                u[0] + lam * step[0],
                u[1] + lam * step[1],
                u[2] + lam * step[2],
                u[3] + lam * step[3],
            ];
            if trial[0] > 1e-6 {
                let tr = problem.residual_norm(trial);
                if tr < res {
                    u = trial;
                    res = tr;
                    accepted = true;
                    break;
                }
            }
            lam *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    if res <= 1e-12 {
        Some(u)
    } else {
        None
    }
}

/// Solves the steady-circle system under the quantization closure with a
/// damped Newton iteration and multi-start over the radius. Deterministic:
/// among converged positive-weight solutions the smallest scaled residual
/// wins, with smaller radius breaking ties.
pub fn solve_steady(params: &ModelParams) -> Result<SteadyCircle> {
    params.validate()?;
    if params.kappa == 0.0 {
        return Err(Error::Config(
            "solve_steady requires kappa != 0: with kappa = 0 the weight drops out \
             of the stationarity equations"
                .into(),
        ));
    }
    let problem = SteadyProblem {
        omega: params.omega,
        k2: params.k2,
        k4: params.k4,
        kappa: params.kappa,
        gamma: params.gamma,
        n_hbar: params.n_vortex as f64 * params.hbar,
    };

    let mut found: Vec<([f64; 4], f64)> = Vec::new();
    for r0 in [0.5, 1.0, 2.0, 3.0, 5.0, 8.0] {
        let pr0 = problem.n_hbar / r0;
        let wb0 = problem.omega - 2.0 * pr0 / r0;
        let g2 = params.gamma * params.gamma;
        let si0 = i0_scaled(2.0 * r0 * r0 / g2)?;
        let num = problem.omega * r0 * pr0
            - pr0 * pr0
            - problem.k2 * r0 * r0
            - problem.k4 * r0.powi(4);
        let mu0 = {
            let v = num * g2 / (2.0 * problem.kappa * si0);
            if v.is_finite() && v > 0.0 {
                v
            } else {
                0.1
            }
        };
        if let Some(u) = newton_from(&problem, [r0, pr0, wb0, mu0]) {
            if u[3] > 0.0
                && !found
                    .iter()
                    .any(|(v, _)| (v[0] - u[0]).abs() < 1e-6 && (v[3] - u[3]).abs() < 1e-6)
            {
                let res = problem.residual_norm(u);
                found.push((u, res));
            }
        }
    }
    found.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0[0].total_cmp(&b.0[0])));
    let (u, res) = found
        .into_iter()
        .next()
        .ok_or_else(|| Error::Numerics("no steady circle found from any start".into()))?;
    if res > 1e-10 {
        return Err(Error::Numerics(format!(
            "steady-circle residual {res:.3e} exceeds 1e-10"
        )));
    }
    Ok(SteadyCircle {
        rbar: u[0],
        prbar: u[1],
        omegabar: u[2],
        mubar0: u[3],
        s0: 0.0,
    })
}

/// Scaled residuals of the steady system at `circle` (for reports and tests).
pub fn steady_residuals(params: &ModelParams, circle: &SteadyCircle) -> Result<[f64; 4]> {
    let problem = SteadyProblem {
        omega: params.omega,
        k2: params.k2,
        k4: params.k4,
        kappa: params.kappa,
        gamma: params.gamma,
        n_hbar: params.n_vortex as f64 * params.hbar,
    };
    let u = [circle.rbar, circle.prbar, circle.omegabar, circle.mubar0];
    let f = problem.residuals(u)?;
    let s = problem.scales(u)?;
    Ok([f[0] / s[0], f[1] / s[1], f[2] / s[2], f[3] / s[3]])
}

// ---------------------------------------------------------------------------
// Linearized deformation
// ---------------------------------------------------------------------------

/// Deformation of the curve in the linear regime: dz rows are ordered
/// (dP1, dP2, dX1, dX2).
#[derive(Clone, Debug)]
pub struct DeformationState {
    pub dz: Vec<[f64; 4]>,
    pub dmu: Vec<f64>,
    pub t: f64,
}

/// Closed-form coefficients of the deformation system linearized at the
/// steady circle.
///
/// `a_matrix` is the exact Jacobian of the local part; the nonlocal kernel
/// acts on (dP rows, dX columns) as -(a~ I + b~ Rot(th_s + th_r)), where a~
/// and b~ are the Gaussian-kernel scalars (accessible as `a_tilde`/`b_tilde`),
/// and the weight-forcing vector `c_vec` lives in the dP rows.
#[derive(Clone, Debug)]
pub struct LinearizedCoefficients {
    pub circle: SteadyCircle,
    omega: f64,
    kappa: f64,
    gamma: f64,
    lambda: f64,
    /// Local Hessian scalars of the dP/dX block.
    pub a_const: f64,
    pub b_const: f64,
}

fn rot2(phi: f64) -> [[f64; 2]; 2] {
    [[phi.cos(), phi.sin()], [phi.sin(), -phi.cos()]]
}

impl LinearizedCoefficients {
    /// Local 4x4 coefficient matrix at lab angle `theta`.
    pub fn a_matrix(&self, theta: f64) -> [[f64; 4]; 4] {
        let (a, b, w) = (self.a_const, self.b_const, self.omega);
        let c2 = (2.0 * theta).cos();
        let s2 = (2.0 * theta).sin();
        [
            [0.0, -w, a + b * c2, b * s2],
            [w, 0.0, b * s2, a - b * c2],
            [2.0, 0.0, 0.0, -w],
            [0.0, 2.0, w, 0.0],
        ]
    }

    /// Gaussian-kernel scalar a~(u); a~(0) = 2 kappa mub / (g^4 pi).
    pub fn a_tilde(&self, u: f64) -> f64 {
        let g2 = self.gamma * self.gamma;
        let r2 = self.circle.rbar * self.circle.rbar;
        let e = (-2.0 * r2 * (1.0 - u.cos()) / g2).exp();
        2.0 * self.kappa * self.circle.mubar0 / (g2 * g2 * g2 * std::f64::consts::PI)
            * e
            * (g2 - 4.0 * r2 * (0.5 * u).sin().powi(2))
    }

    /// Gaussian-kernel scalar b~(u); b~(0) = 0.
    pub fn b_tilde(&self, u: f64) -> f64 {
        let g2 = self.gamma * self.gamma;
        let r2 = self.circle.rbar * self.circle.rbar;
        let e = (-2.0 * r2 * (1.0 - u.cos()) / g2).exp();
        8.0 * self.kappa * self.circle.mubar0 * r2 / (g2 * g2 * g2 * std::f64::consts::PI)
            * e
            * (0.5 * u).sin().powi(2)
    }

    /// Nonlocal kernel block acting on dX(r) in the dP rows:
    /// -(a~(u) I + b~(u) Rot(th_s + th_r)).
    pub fn b_kernel(&self, th_s: f64, th_r: f64) -> [[f64; 2]; 2] {
        let u = th_s - th_r;
        let at = self.a_tilde(u);
        let bt = self.b_tilde(u);
        let rot = rot2(th_s + th_r);
        [
            [-(at + bt * rot[0][0]), -bt * rot[0][1]],
            [-bt * rot[1][0], -(at - bt * rot[0][0])],
        ]
    }

    /// Weight-coupling vector in the dP rows:
    /// c(th_s, th_r) = (4 kappa Rb / (g^4 pi)) e^{...} sin(u/2) m(psi),
    /// with m(psi) = (-sin psi, cos psi) at the midpoint angle psi.
    pub fn c_vec(&self, th_s: f64, th_r: f64) -> [f64; 2] {
        let u = th_s - th_r;
        let psi = 0.5 * (th_s + th_r);
        let g2 = self.gamma * self.gamma;
        let r = self.circle.rbar;
        let e = (-2.0 * r * r * (1.0 - u.cos()) / g2).exp();
        let amp =
            4.0 * self.kappa * r / (g2 * g2 * std::f64::consts::PI) * e * (0.5 * u).sin();
        [-amp * psi.sin(), amp * psi.cos()]
    }

    /// Scalar kernel of the dmu self-coupling, kappa W(Zb(th_s), Zb(th_r)).
    pub fn mu_kernel(&self, u: f64) -> f64 {
        let g2 = self.gamma * self.gamma;
        let r2 = self.circle.rbar * self.circle.rbar;
        self.kappa / (std::f64::consts::PI * g2) * (-2.0 * r2 * (1.0 - u.cos()) / g2).exp()
    }

    /// J times the circle velocity at lab angle theta: (-Xb_t, Pb_t).
    pub fn j_zdot(&self, theta: f64) -> [f64; 4] {
        let wb = self.circle.omegabar;
        let r = self.circle.rbar;
        let pr = self.circle.prbar;
        [
            wb * r * theta.sin(),
            -wb * r * theta.cos(),
            wb * pr * theta.cos(),
            wb * pr * theta.sin(),
        ]
    }

    pub fn omegabar(&self) -> f64 {
        self.circle.omegabar
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// Builds the closed-form linearized coefficients at the steady circle.
///
/// The local scalars reduce to
///   a = -2 k2 - 8 k4 Rb^2 + (4 kappa mub / g^6) e^{-z} [2 Rb^2 I1(z)
///       + (g^2 - 2 Rb^2) 0F1(;1; Rb^4/g^4)],
///   b = -4 k4 Rb^2 + (4 kappa mub / g^6) e^{-z} [(g^2 + 2 Rb^2) I1(z)
///       - 2 Rb^2 0F1(;1; Rb^4/g^4)],
/// with z = 2 Rb^2 / g^2, evaluated here through the scaled Bessel forms
/// (e^{-z} 0F1(;1; z^2/4) = e^{-z} I0(z)).
pub fn build_linearized(
    params: &ModelParams,
    circle: &SteadyCircle,
) -> Result<LinearizedCoefficients> {
    let g2 = params.gamma * params.gamma;
    let r2 = circle.rbar * circle.rbar;
    let z = 2.0 * r2 / g2;
    let si0 = i0_scaled(z)?;
    let si1 = i1_scaled(z)?;
    let g6 = g2 * g2 * g2;
    let pref = 4.0 * params.kappa * circle.mubar0 / g6;
    let a =
        -2.0 * params.k2 - 8.0 * params.k4 * r2 + pref * (2.0 * r2 * si1 + (g2 - 2.0 * r2) * si0);
    let b = -4.0 * params.k4 * r2 + pref * ((g2 + 2.0 * r2) * si1 - 2.0 * r2 * si0);
    Ok(LinearizedCoefficients {
        circle: *circle,
        omega: params.omega,
        kappa: params.kappa,
        gamma: params.gamma,
        lambda: params.lambda,
        a_const: a,
        b_const: b,
    })
}

/// Confluent-hypergeometric route to the local scalars, kept as the printed
/// closed form; equals the Bessel route to 1e-12 (identity test).
pub fn local_scalars_via_0f1(
    params: &ModelParams,
    circle: &SteadyCircle,
) -> Result<(f64, f64)> {
    let g2 = params.gamma * params.gamma;
    let r2 = circle.rbar * circle.rbar;
    let z = 2.0 * r2 / g2;
    let f01 = hyp0f1_b1(r2 * r2 / (g2 * g2))?;
    let i1 = crate::specialfn::i1(z)?;
    let e = (-z).exp();
    let g6 = g2 * g2 * g2;
    let pref = 4.0 * params.kappa * circle.mubar0 / g6;
    let a = -2.0 * params.k2 - 8.0 * params.k4 * r2
        + pref * e * (2.0 * r2 * i1 + (g2 - 2.0 * r2) * f01);
    let b = -4.0 * params.k4 * r2 + pref * e * ((g2 + 2.0 * r2) * i1 - 2.0 * r2 * f01);
    Ok((a, b))
}

#[derive(Clone)]
struct DefRhs {
    dz: Vec<[f64; 4]>,
    dmu: Vec<f64>,
}

fn deformation_rhs(
    coeffs: &LinearizedCoefficients,
    delta_k: [f64; 2],
    state: &DeformationState,
    t: f64,
) -> DefRhs {
    let ns = state.dz.len();
    let h = TWO_PI / ns as f64;
    let wb = coeffs.omegabar();
    let rb = coeffs.circle.rbar;
    let mub = coeffs.circle.mubar0;
    let lambda = coeffs.lambda();
    let theta: Vec<f64> = (0..ns)
        .map(|j| wb * t + TWO_PI * j as f64 / ns as f64 + coeffs.circle.s0)
        .collect();
    let mut out = DefRhs {
        dz: vec![[0.0; 4]; ns],
        dmu: vec![0.0; ns],
    };
    for i in 0..ns {
        let a = coeffs.a_matrix(theta[i]);
        let mut dzdot = [0.0f64; 4];
        for r in 0..4 {
            for c in 0..4 {
                dzdot[r] += a[r][c] * state.dz[i][c];
            }
        }
        // Nonlocal integrals over r.
        let mut acc_p = [0.0f64; 2];
        let mut acc_mu = 0.0f64;
        for j in 0..ns {
            let bk = coeffs.b_kernel(theta[i], theta[j]);
            let cv = coeffs.c_vec(theta[i], theta[j]);
            let dx = [state.dz[j][2], state.dz[j][3]];
            acc_p[0] += bk[0][0] * dx[0] + bk[0][1] * dx[1] + cv[0] * state.dmu[j];
            acc_p[1] += bk[1][0] * dx[0] + bk[1][1] * dx[1] + cv[1] * state.dmu[j];
            acc_mu += coeffs.mu_kernel(theta[i] - theta[j]) * state.dmu[j]
                + mub * (cv[0] * dx[0] + cv[1] * dx[1]);
        }
        dzdot[0] += h * acc_p[0];
        dzdot[1] += h * acc_p[1];
        // Trap-asymmetry forcing -2 deltaK Xb in the dP rows.
        let xb = [rb * theta[i].cos(), rb * theta[i].sin()];
        dzdot[0] += -2.0 * delta_k[0] * xb[0];
        dzdot[1] += -2.0 * delta_k[1] * xb[1];
        out.dz[i] = dzdot;

        let jz = coeffs.j_zdot(theta[i]);
        let mut dmu_dot = 0.0;
        for c in 0..4 {
            dmu_dot += jz[c] * state.dz[i][c];
        }
        dmu_dot -= delta_k[0] * xb[0] * xb[0] + delta_k[1] * xb[1] * xb[1];
        dmu_dot -= h * acc_mu;
        out.dmu[i] = 2.0 * lambda * mub * dmu_dot;
    }
    out
}

fn def_axpy(state: &DeformationState, c: f64, rhs: &DefRhs, t: f64) -> DeformationState {
    let ns = state.dz.len();
    let mut out = state.clone();
    for j in 0..ns {
        for k in 0..4 {
            out.dz[j][k] += c * rhs.dz[j][k];
        }
        out.dmu[j] += c * rhs.dmu[j];
    }
    out.t = t;
    out
}

/// Integrates the deformation Cauchy problem with zero initial data from `t0`
/// to `t_end` by fixed-step RK4, returning snapshots every `save_every` steps
/// plus the initial and final states.
pub fn evolve_deformation(
    coeffs: &LinearizedCoefficients,
    delta_k: [f64; 2],
    t0: f64,
    t_end: f64,
    dt: f64,
    ns: usize,
    save_every: usize,
) -> Result<Vec<DeformationState>> {
    if !(dt > 0.0) || t_end < t0 {
        return Err(Error::Config(format!(
            "deformation window needs dt > 0 and t_end >= t0 (dt={dt}, t0={t0}, t_end={t_end})"
        )));
    }
    if ns < 8 || ns % 2 != 0 {
        return Err(Error::Config(format!("ns must be even and >= 8, got {ns}")));
    }
    if save_every == 0 {
        return Err(Error::Config("save_every must be >= 1".into()));
    }
    let n_steps = ((t_end - t0) / dt).round() as usize;
    let mut state = DeformationState {
        dz: vec![[0.0; 4]; ns],
        dmu: vec![0.0; ns],
        t: t0,
    };
    let mut snaps = vec![state.clone()];
    for step in 1..=n_steps {
        let t = t0 + (step - 1) as f64 * dt;
        let k1 = deformation_rhs(coeffs, delta_k, &state, t);
        let y2 = def_axpy(&state, 0.5 * dt, &k1, t + 0.5 * dt);
        let k2 = deformation_rhs(coeffs, delta_k, &y2, t + 0.5 * dt);
        let y3 = def_axpy(&state, 0.5 * dt, &k2, t + 0.5 * dt);
        let k3 = deformation_rhs(coeffs, delta_k, &y3, t + 0.5 * dt);
        let y4 = def_axpy(&state, dt, &k3, t + dt);
        let k4 = deformation_rhs(coeffs, delta_k, &y4, t + dt);
        let mut next = state.clone();
        for j in 0..ns {
            for c in 0..4 {
                next.dz[j][c] += dt / 6.0
                    * (k1.dz[j][c] + 2.0 * k2.dz[j][c] + 2.0 * k3.dz[j][c] + k4.dz[j][c]);
            }
            next.dmu[j] += dt / 6.0 * (k1.dmu[j] + 2.0 * k2.dmu[j] + 2.0 * k3.dmu[j] + k4.dmu[j]);
        }
        next.t = t0 + step as f64 * dt;
        for row in &next.dz {
            if !row.iter().all(|v| v.is_finite()) {
                return Err(Error::Numerics(format!(
                    "deformation state became non-finite at t = {}",
                    next.t
                )));
            }
        }
        state = next;
        if step % save_every == 0 && step != n_steps {
            snaps.push(state.clone());
        }
    }
    if n_steps > 0 {
        snaps.push(state);
    }
    Ok(snaps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hes::hes_rhs;
    use crate::symbols::gpe_symbols;

    fn symmetric_paper() -> ModelParams {
        ModelParams::paper().with_delta_k([0.0, 0.0])
    }

    const GOLDEN_RBAR: f64 = 3.0726080045030657;
    const GOLDEN_PRBAR: f64 = 3.2545641960655192;
    const GOLDEN_OMEGABAR: f64 = 0.88156237873768040;
    const GOLDEN_MUBAR0: f64 = 0.24831945026760327;

    #[test]
    fn steady_circle_paper_params_golden() {
        let params = symmetric_paper();
        let circle = solve_steady(&params).unwrap();
        let res = steady_residuals(&params, &circle).unwrap();
        for r in res {
            assert!(r.abs() <= 1e-10, "residuals {res:?}");
        }
        assert!((circle.rbar * circle.prbar - 10.0).abs() <= 1e-12 * 10.0);
        assert!((circle.rbar - GOLDEN_RBAR).abs() <= 1e-9, "rbar {}", circle.rbar);
        assert!((circle.prbar - GOLDEN_PRBAR).abs() <= 1e-9, "prbar {}", circle.prbar);
        assert!(
            (circle.omegabar - GOLDEN_OMEGABAR).abs() <= 1e-9,
            "omegabar {}",
            circle.omegabar
        );
        assert!(
            (circle.mubar0 - GOLDEN_MUBAR0).abs() <= 1e-9,
            "mubar0 {}",
            circle.mubar0
        );
    }

    #[test]
    fn steady_depends_only_on_n_hbar_product() {
        let a = solve_steady(&symmetric_paper()).unwrap();
        let mut p = ModelParams::quantized(3.0, 20, 0.5).with_delta_k([0.0, 0.0]);
        p.lambda = 0.3;
        let b = solve_steady(&p).unwrap();
        assert!((a.rbar - b.rbar).abs() <= 1e-12 * a.rbar);
        assert!((a.prbar - b.prbar).abs() <= 1e-12 * a.prbar);
        assert!((a.omegabar - b.omegabar).abs() <= 1e-12 * a.omegabar.abs());
        assert!((a.mubar0 - b.mubar0).abs() <= 1e-12 * a.mubar0);
    }

    #[test]
    fn steady_circle_is_a_fixed_point_of_the_curve_system() {
        let params = symmetric_paper();
        let circle = solve_steady(&params).unwrap();
        let sym = gpe_symbols(&params);
        let curve = circle.to_curve(128, 0.0);
        let rhs = hes_rhs(&curve, &sym, params.lambda, params.kappa);
        let wb = circle.omegabar;
        for j in 0..curve.ns() {
            let x = curve.x[j];
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            let radial = (x[0] * rhs.dx[j][0] + x[1] * rhs.dx[j][1]) / r;
            assert!(radial.abs() <= 1e-8, "radial velocity {radial} at {j}");
            // The full velocity must be the rigid rotation at rate omegabar.
            let exp_dx = [-wb * x[1], wb * x[0]];
            let p = curve.p[j];
            let exp_dp = [-wb * p[1], wb * p[0]];
            for c in 0..2 {
                assert!((rhs.dx[j][c] - exp_dx[c]).abs() <= 1e-8);
                assert!((rhs.dp[j][c] - exp_dp[c]).abs() <= 1e-8);
            }
            assert!(rhs.dmu[j].abs() <= 1e-8, "dmu {}", rhs.dmu[j]);
        }
    }

    #[test]
    fn rejects_zero_coupling() {
        let mut p = symmetric_paper();
        p.kappa = 0.0;
        assert!(matches!(solve_steady(&p), Err(Error::Config(_))));
    }

    #[test]
    fn local_scalar_closed_forms_agree_between_bessel_and_0f1_routes() {
        let params = symmetric_paper();
        let circle = solve_steady(&params).unwrap();
        let coeffs = build_linearized(&params, &circle).unwrap();
        let (a01, b01) = local_scalars_via_0f1(&params, &circle).unwrap();
        assert!((coeffs.a_const - a01).abs() <= 1e-12 * a01.abs());
        assert!((coeffs.b_const - b01).abs() <= 1e-12 * b01.abs().max(1.0));
    }

    #[test]
    fn a_matrix_structure() {
        let params = symmetric_paper();
        let circle = solve_steady(&params).unwrap();
        let coeffs = build_linearized(&params, &circle).unwrap();
        let a0 = coeffs.a_matrix(0.0);
        // Upper-right block is diag(a + b, a - b) at theta = 0.
        assert!((a0[0][2] - (coeffs.a_const + coeffs.b_const)).abs() <= 1e-14);
        assert!((a0[1][3] - (coeffs.a_const - coeffs.b_const)).abs() <= 1e-14);
        assert_eq!(a0[0][3], 0.0);
        assert_eq!(a0[1][2], 0.0);
        // Coriolis entries (signs from the Jacobian of the Hamiltonian flow;
        // the finite-difference test below pins them).
        for theta in [0.0, 0.3, 2.0, 5.5] {
            let a = coeffs.a_matrix(theta);
            assert_eq!(a[0][1], -params.omega);
            assert_eq!(a[1][0], params.omega);
            assert_eq!(a[2][3], -params.omega);
            assert_eq!(a[3][2], params.omega);
            assert_eq!(a[2][0], 2.0);
            assert_eq!(a[3][1], 2.0);
        }
    }

    #[test]
    fn kernel_scalars_match_printed_values_and_symmetries() {
        let params = symmetric_paper();
        let circle = solve_steady(&params).unwrap();
        let coeffs = build_linearized(&params, &circle).unwrap();
        let g4 = params.gamma.powi(4);
        let expected = 2.0 * params.kappa * circle.mubar0 / (g4 * std::f64::consts::PI);
        assert!((coeffs.a_tilde(0.0) - expected).abs() <= 1e-12 * expected);
        assert_eq!(coeffs.b_tilde(0.0), 0.0);
        // a~ is even and 2pi-periodic; the c vector vanishes on the diagonal.
        for u in [0.3, 1.7, 3.0] {
            assert!((coeffs.a_tilde(u) - coeffs.a_tilde(-u)).abs() <= 1e-15);
            assert!((coeffs.a_tilde(u) - coeffs.a_tilde(u + TWO_PI)).abs() <= 1e-12);
            assert!((coeffs.b_tilde(u) - coeffs.b_tilde(u + TWO_PI)).abs() <= 1e-12);
        }
        for th in [0.0, 1.1, 4.0] {
            let c = coeffs.c_vec(th, th);
            assert_eq!(c, [0.0, 0.0]);
            let a = coeffs.a_matrix(th + TWO_PI);
            let b = coeffs.a_matrix(th);
            for r in 0..4 {
                for cc in 0..4 {
                    assert!((a[r][cc] - b[r][cc]).abs() <= 1e-12);
                }
            }
        }
    }

    /// Finite-difference Jacobian of the nonlinear curve system at the steady
    /// circle, compared entry by entry with the closed-form linearization.
    /// This pins the Coriolis signs, the kernel block placement and the
    /// weight couplings.
    #[test]
    fn linearization_matches_finite_difference_jacobian() {
        let params = symmetric_paper();
        let circle = solve_steady(&params).unwrap();
        let coeffs = build_linearized(&params, &circle).unwrap();
        let sym = gpe_symbols(&params);
        let ns = 48;
        let base = circle.to_curve(ns, 0.0);
        let h = base.grid_step();
        let eps = 1e-5;

        let rhs_of = |curve: &CurveState| hes_rhs(curve, &sym, params.lambda, params.kappa);

        let cases = [(0usize, 0usize), (5, 5), (3, 7), (20, 4), (11, 40)];
        for &(i, j) in &cases {
            for comp in 0..4 {
                let mut plus = base.clone();
                let mut minus = base.clone();
                match comp {
                    0 | 1 => {
                        plus.p[j][comp] += eps;
                        minus.p[j][comp] -= eps;
                    }
                    _ => {
                        plus.x[j][comp - 2] += eps;
                        minus.x[j][comp - 2] -= eps;
                    }
                }
                let rp = rhs_of(&plus);
                let rm = rhs_of(&minus);
                let fd_dz = [
                    (rp.dp[i][0] - rm.dp[i][0]) / (2.0 * eps),
                    (rp.dp[i][1] - rm.dp[i][1]) / (2.0 * eps),
                    (rp.dx[i][0] - rm.dx[i][0]) / (2.0 * eps),
                    (rp.dx[i][1] - rm.dx[i][1]) / (2.0 * eps),
                ];
                let fd_dmu = (rp.dmu[i] - rm.dmu[i]) / (2.0 * eps);

                let th_i = base.s_value(i);
                let th_j = base.s_value(j);
                let mut expect = [0.0f64; 4];
                if i == j {
                    let a = coeffs.a_matrix(th_i);
                    for r in 0..4 {
                        expect[r] += a[r][comp];
                    }
                }
                if comp >= 2 {
                    let bk = coeffs.b_kernel(th_i, th_j);
                    expect[0] += h * bk[0][comp - 2];
                    expect[1] += h * bk[1][comp - 2];
                }
                for r in 0..4 {
                    assert!(
                        (fd_dz[r] - expect[r]).abs() <= 2e-6,
                        "dZ[{r}]/dZ[{comp}] at (i={i}, j={j}): fd {} vs analytic {}",
                        fd_dz[r],
                        expect[r]
                    );
                }

                // Weight equation couplings: 2 lam mub <J Zdot, dZ> locally,
                // plus the nonlocal c vector acting on dX.
                let mut expect_mu = 0.0;
                if i == j {
                    expect_mu +=
                        2.0 * params.lambda * circle.mubar0 * coeffs.j_zdot(th_i)[comp];
                }
                if comp >= 2 {
                    let cv = coeffs.c_vec(th_i, th_j);
                    expect_mu +=
                        -2.0 * params.lambda * circle.mubar0 * circle.mubar0 * h * cv[comp - 2];
                }
                assert!(
                    (fd_dmu - expect_mu).abs() <= 2e-6,
                    "dmu/dZ[{comp}] at (i={i}, j={j}): fd {fd_dmu} vs analytic {expect_mu}"
                );
            }

            // dZdot_i / dmu_j and dmudot_i / dmu_j.
            let mut plus = base.clone();
            let mut minus = base.clone();
            plus.mu[j] += eps;
            minus.mu[j] -= eps;
            let rp = rhs_of(&plus);
            let rm = rhs_of(&minus);
            let th_i = base.s_value(i);
            let th_j = base.s_value(j);
            let cv = coeffs.c_vec(th_i, th_j);
            let fd = [
                (rp.dp[i][0] - rm.dp[i][0]) / (2.0 * eps),
                (rp.dp[i][1] - rm.dp[i][1]) / (2.0 * eps),
                (rp.dx[i][0] - rm.dx[i][0]) / (2.0 * eps),
                (rp.dx[i][1] - rm.dx[i][1]) / (2.0 * eps),
            ];
            assert!((fd[0] - h * cv[0]).abs() <= 2e-6, "c1 fd {} vs {}", fd[0], h * cv[0]);
            assert!((fd[1] - h * cv[1]).abs() <= 2e-6, "c2 fd {} vs {}", fd[1], h * cv[1]);
            assert!(fd[2].abs() <= 1e-9 && fd[3].abs() <= 1e-9);

            let fd_mumu = (rp.dmu[i] - rm.dmu[i]) / (2.0 * eps);
            // The diagonal local part -2 lam (V + kappa \oint mu W) vanishes
            // at the steady state (weight stationarity).
            let expect = -2.0 * params.lambda * circle.mubar0 * h * coeffs.mu_kernel(th_i - th_j);
            assert!(
                (fd_mumu - expect).abs() <= 2e-6,
                "dmu/dmu at (i={i}, j={j}): fd {fd_mumu} vs analytic {expect}"
            );
        }
    }

    #[test]
    fn deformation_stays_zero_without_forcing() {
        let params = symmetric_paper();
        let circle = solve_steady(&params).unwrap();
        let coeffs = build_linearized(&params, &circle).unwrap();
        let snaps = evolve_deformation(&coeffs, [0.0, 0.0], 0.0, 0.5, 1e-2, 32, 100).unwrap();
        let end = snaps.last().unwrap();
        assert!(end.dz.iter().all(|r| r.iter().all(|&v| v == 0.0)));
        assert!(end.dmu.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deformation_weight_frozen_without_damping() {
        let mut params = symmetric_paper();
        params.lambda = 0.0;
        let circle = solve_steady(&params).unwrap();
        let coeffs = build_linearized(&params, &circle).unwrap();
        let snaps =
            evolve_deformation(&coeffs, [0.025, -0.025], 0.0, 0.5, 1e-2, 32, 100).unwrap();
        let end = snaps.last().unwrap();
        assert!(end.dmu.iter().all(|&v| v == 0.0));
        // The curve itself does deform under the trap asymmetry.
        let max = end
            .dz
            .iter()
            .flat_map(|r| r.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max > 1e-3, "expected nonzero deformation, got {max}");
    }
}
