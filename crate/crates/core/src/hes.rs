//! Time integration of the zeroth-order Hamilton-Ehrenfest system on the
//! discretized curve:
//!
//!   mu_t(s) = -2 Lambda mu(s) [ Vb(Z(s)) + kappa \oint mu(r) Wb(Z(s), Z(r)) dr ],
//!   Z_t(s)  = J V_z(Z(s)) + kappa \oint mu(r) J W_z(Z(s), Z(r)) dr,
//!
//! plus the action rate S_t = <P, X_t> - V - kappa \oint mu W dr, integrated
//! alongside the state for the wavefunction ansatz and the S_s = <P, X_s>
//! cross-check.
//!
//! The r-integrals are evaluated directly (O(Ns^2) per evaluation) with the
//! periodic trapezoid rule; the per-s loop is parallel with a fixed reduction
//! order inside each s, so results are independent of thread count.

use rayon::prelude::*;

use crate::curve::{self, CurveState};
use crate::symbols::{apply_j, SymbolSet};
use crate::{Error, Result};

/// Fixed-step RK4 configuration for [`integrate`].
#[derive(Clone, Copy, Debug)]
pub struct HesConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Snapshot interval in steps.
    pub save_every: usize,
}

impl HesConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::Config(format!("t_end must be >= 0, got {}", self.t_end)));
        }
        if self.save_every == 0 {
            return Err(Error::Config("save_every must be >= 1".into()));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Time derivatives of the curve state.
#[derive(Clone, Debug)]
pub struct HesRhs {
    pub dmu: Vec<f64>,
    pub dp: Vec<[f64; 2]>,
    pub dx: Vec<[f64; 2]>,
    /// Action rate; periodic in s on solutions.
    pub ds: Vec<f64>,
}

/// Evaluates the Hamilton-Ehrenfest right-hand side (and the action rate) at
/// the state's own time.
pub fn hes_rhs(
    curve: &CurveState,
    symbols: &dyn SymbolSet,
    lambda: f64,
    kappa: f64,
) -> HesRhs {
    let ns = curve.ns();
    let h = curve.grid_step();
    let t = curve.t;

    let per_s: Vec<(f64, [f64; 2], [f64; 2], f64)> = (0..ns)
        .into_par_iter()
        .map(|i| {
            let zi = curve.z(i);
            let mut w_sum = 0.0;
            let mut wb_sum = 0.0;
            let mut wz_sum = [0.0f64; 4];
            if kappa != 0.0 {
                for j in 0..ns {
                    let e = symbols.nonlocal_eval(zi, curve.z(j), t);
                    let m = curve.mu[j];
                    w_sum += m * e.w;
                    wb_sum += m * e.w_breve;
                    for a in 0..4 {
                        wz_sum[a] += m * e.w_z[a];
                    }
                }
                w_sum *= h;
                wb_sum *= h;
                for a in &mut wz_sum {
                    *a *= h;
                }
            }

            let mut force = symbols.v_z(zi, t);
            for a in 0..4 {
                force[a] += kappa * wz_sum[a];
            }
            let dz = apply_j(force);
            let dp = [dz[0], dz[1]];
            let dx = [dz[2], dz[3]];

            let dmu = -2.0 * lambda
                * curve.mu[i]
                * (symbols.v_breve(zi, t) + kappa * wb_sum);
            let ds = curve.p[i][0] * dx[0] + curve.p[i][1] * dx[1]
                - symbols.v(zi, t)
                - kappa * w_sum;
            (dmu, dp, dx, ds)
        })
        .collect();

    let mut rhs = HesRhs {
        dmu: Vec::with_capacity(ns),
        dp: Vec::with_capacity(ns),
        dx: Vec::with_capacity(ns),
        ds: Vec::with_capacity(ns),
    };
    for (dmu, dp, dx, ds) in per_s {
        rhs.dmu.push(dmu);
        rhs.dp.push(dp);
        rhs.dx.push(dx);
        rhs.ds.push(ds);
    }
    rhs
}

/// Action rate S_t(s) = <P, X_t> - V(Z) - kappa \oint mu(r) W(Z(s), Z(r)) dr,
/// with X_t supplied by the caller (normally from [`hes_rhs`]).
pub fn sdot(
    curve: &CurveState,
    symbols: &dyn SymbolSet,
    kappa: f64,
    xdot: &[[f64; 2]],
) -> Vec<f64> {
    let ns = curve.ns();
    let h = curve.grid_step();
    let t = curve.t;
    (0..ns)
        .into_par_iter()
        .map(|i| {
            let zi = curve.z(i);
            let mut w_sum = 0.0;
            if kappa != 0.0 {
                for j in 0..ns {
                    w_sum += curve.mu[j] * symbols.w(zi, curve.z(j), t);
                }
                w_sum *= h;
            }
            curve.p[i][0] * xdot[i][0] + curve.p[i][1] * xdot[i][1]
                - symbols.v(zi, t)
                - kappa * w_sum
        })
        .collect()
}

fn axpy(state: &CurveState, c: f64, rhs: &HesRhs, t: f64) -> CurveState {
    let ns = state.ns();
    let mut out = state.clone();
    for j in 0..ns {
        out.p[j][0] += c * rhs.dp[j][0];
        out.p[j][1] += c * rhs.dp[j][1];
        out.x[j][0] += c * rhs.dx[j][0];
        out.x[j][1] += c * rhs.dx[j][1];
        out.mu[j] += c * rhs.dmu[j];
        out.s_per[j] += c * rhs.ds[j];
    }
    out.t = t;
    out
}

fn accumulate(acc: &mut HesRhs, c: f64, rhs: &HesRhs) {
    for j in 0..acc.dmu.len() {
        acc.dmu[j] += c * rhs.dmu[j];
        acc.dp[j][0] += c * rhs.dp[j][0];
        acc.dp[j][1] += c * rhs.dp[j][1];
        acc.dx[j][0] += c * rhs.dx[j][0];
        acc.dx[j][1] += c * rhs.dx[j][1];
        acc.ds[j] += c * rhs.ds[j];
    }
}

/// One classic RK4 step of (mu, Z, S) with fixed dt.
pub fn rk4_step(
    curve: &CurveState,
    symbols: &dyn SymbolSet,
    lambda: f64,
    kappa: f64,
    dt: f64,
) -> CurveState {
    let t = curve.t;
    let k1 = hes_rhs(curve, symbols, lambda, kappa);
    let y2 = axpy(curve, 0.5 * dt, &k1, t + 0.5 * dt);
    let k2 = hes_rhs(&y2, symbols, lambda, kappa);
    let y3 = axpy(curve, 0.5 * dt, &k2, t + 0.5 * dt);
    let k3 = hes_rhs(&y3, symbols, lambda, kappa);
    let y4 = axpy(curve, dt, &k3, t + dt);
    let k4 = hes_rhs(&y4, symbols, lambda, kappa);

    let mut total = k1;
    accumulate(&mut total, 2.0, &k2);
    accumulate(&mut total, 2.0, &k3);
    accumulate(&mut total, 1.0, &k4);
    axpy(curve, dt / 6.0, &total, t + dt)
}

/// Per-step monitor record.
#[derive(Clone, Copy, Debug)]
pub struct MonitorRow {
    pub t: f64,
    pub total_mass: f64,
    pub action_integral: f64,
    pub convexity_index: f64,
    pub r_min: f64,
    pub r_max: f64,
}

/// Result of [`integrate`]: snapshots every `save_every` steps (plus initial
/// and final states) and the per-step monitor series.
#[derive(Clone, Debug)]
pub struct HesRun {
    pub snapshots: Vec<CurveState>,
    pub monitors: Vec<MonitorRow>,
}

fn monitor(curve: &CurveState) -> Result<MonitorRow> {
    let (mut r_min, mut r_max) = (f64::INFINITY, 0.0f64);
    for xx in &curve.x {
        let r = (xx[0] * xx[0] + xx[1] * xx[1]).sqrt();
        r_min = r_min.min(r);
        r_max = r_max.max(r);
    }
    Ok(MonitorRow {
        t: curve.t,
        total_mass: curve::quad_s(&curve.mu),
        action_integral: curve::action_integral(curve)?,
        convexity_index: curve::convexity_index(curve)?,
        r_min,
        r_max,
    })
}

/// Fixed-step RK4 evolution of the curve system, with per-step invariant
/// monitors. Aborts with a diagnostic if the weight becomes negative beyond
/// -1e-10 or any field becomes non-finite.
pub fn integrate(
    curve0: &CurveState,
    symbols: &dyn SymbolSet,
    lambda: f64,
    kappa: f64,
    config: &HesConfig,
) -> Result<HesRun> {
    config.validate()?;
    curve0.validate()?;
    let n_steps = config.n_steps();
    let mut state = curve0.clone();
    state.t = curve0.t;
    let mut run = HesRun {
        snapshots: vec![state.clone()],
        monitors: vec![monitor(&state)?],
    };
    for step in 1..=n_steps {
        state = rk4_step(&state, symbols, lambda, kappa, config.dt);
        state.t = curve0.t + step as f64 * config.dt;
        state.validate()?;
        run.monitors.push(monitor(&state)?);
        if step % config.save_every == 0 && step != n_steps {
            run.snapshots.push(state.clone());
        }
    }
    if n_steps > 0 {
        run.snapshots.push(state);
    }
    Ok(run)
}
