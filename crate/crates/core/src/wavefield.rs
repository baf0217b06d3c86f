//! Vortex wavefunction construction from curve data and field diagnostics:
//! density, phase, plaquette winding (defect census) and the semiclassical
//! density reconstruction.

use num_complex::Complex64;

use crate::curve::{CurveInterp, CurveState, TauSolver};
use crate::params::ModelParams;
use crate::{Error, Result};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Uniform periodic grid over [-Lx, Lx) x [-Ly, Ly).
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nx < 4 || self.ny < 4 {
            return Err(Error::Config(format!(
                "grid must be at least 4x4, got {}x{}",
                self.nx, self.ny
            )));
        }
        if !(self.lx > 0.0) || !(self.ly > 0.0) {
            return Err(Error::Config(format!(
                "grid half-widths must be > 0, got ({}, {})",
                self.lx, self.ly
            )));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.lx / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        2.0 * self.ly / self.ny as f64
    }

    pub fn x1(&self, i: usize) -> f64 {
        -self.lx + i as f64 * self.dx()
    }

    pub fn x2(&self, j: usize) -> f64 {
        -self.ly + j as f64 * self.dy()
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Complex wavefunction on the periodic grid, stored row-major with index
/// i * ny + j for the point (x1(i), x2(j)).
#[derive(Clone, Debug)]
pub struct ComplexField2D {
    pub grid: GridSpec,
    pub values: Vec<Complex64>,
    pub t: f64,
}

impl ComplexField2D {
    pub fn zeros(grid: GridSpec) -> ComplexField2D {
        ComplexField2D {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
            t: 0.0,
        }
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.grid.ny + j
    }

    /// Squared L2 norm, sum |psi|^2 dx dy.
    pub fn norm_sqr(&self) -> f64 {
        let cell = self.grid.dx() * self.grid.dy();
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * cell
    }

    pub fn peak_density(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

/// Exponential prefactor of the transverse ansatz in coordinate form.
///
/// When <P_s, X_s> = 0 the obstruction degenerates and no extra phase is
/// attached (the rotating-circle case, where the prefactor is identically 1);
/// otherwise the coordinate-form exponent is evaluated with the component
/// k = argmax |X_{s,k}|, which removes the X_{s,k} = 0 singularities.
pub fn transverse_phase_factor(
    curve: &CurveState,
    s: f64,
    x: [f64; 2],
    hbar: f64,
) -> Result<Complex64> {
    let interp = CurveInterp::new(curve)?;
    transverse_phase_factor_interp(&interp, s, x, hbar)
}

/// Same as [`transverse_phase_factor`], reusing a prebuilt interpolant.
pub fn transverse_phase_factor_interp(
    interp: &CurveInterp,
    s: f64,
    x: [f64; 2],
    hbar: f64,
) -> Result<Complex64> {
    let xs = interp.x_s(s);
    let speed = (xs[0] * xs[0] + xs[1] * xs[1]).sqrt();
    if speed < 1e-12 {
        return Err(Error::DegenerateTangent);
    }
    let ps = interp.p_s(s);
    let ps_norm = (ps[0] * ps[0] + ps[1] * ps[1]).sqrt();
    let ps_xs = ps[0] * xs[0] + ps[1] * xs[1];
    if ps_xs.abs() <= 1e-14 * (ps_norm * speed).max(1e-300) {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let xc = interp.x(s);
    let dx = [x[0] - xc[0], x[1] - xc[1]];
    let ps_dx = ps[0] * dx[0] + ps[1] * dx[1];
    let k = if xs[0].abs() >= xs[1].abs() { 0 } else { 1 };
    let exponent = (2.0 * xs[k] * x[k] * ps_dx - x[k] * x[k] * ps_xs)
        / (2.0 * hbar * xs[k] * xs[k]);
    Ok(Complex64::from_polar(1.0, exponent))
}

/// Samples the vortex initial state on the grid:
/// sqrt(mu0 / (g R sqrt(pi hbar))) exp(-(|x|-R)^2 / (0.5 hbar))
/// exp(-i (R Pr / hbar) arg(x1 + i x2)).
///
/// Requires the quantization R Pr = N hbar (continuous phase); any residual
/// non-finite sample is set to 0.
pub fn build_initial_psi(params: &ModelParams, grid: GridSpec) -> Result<ComplexField2D> {
    params.validate()?;
    grid.validate()?;
    let n_hbar = params.n_vortex as f64 * params.hbar;
    if params.quantization_residual().abs() > 1e-12 * n_hbar.abs().max(1.0) {
        return Err(Error::Config(format!(
            "initial state requires the quantization R*Pr = N*hbar; residual {}",
            params.quantization_residual()
        )));
    }
    let amp = (params.mu0 / (params.gamma * params.radius * (std::f64::consts::PI * params.hbar).sqrt()))
        .sqrt();
    let winding = params.radius * params.p_r / params.hbar;
    let mut field = ComplexField2D::zeros(grid);
    for i in 0..grid.nx {
        let x1 = grid.x1(i);
        for j in 0..grid.ny {
            let x2 = grid.x2(j);
            let r = (x1 * x1 + x2 * x2).sqrt();
            let gauss = (-(r - params.radius).powi(2) / (0.5 * params.hbar)).exp();
            let phase = -winding * x2.atan2(x1);
            let mut v = Complex64::from_polar(amp * gauss, phase);
            if !v.re.is_finite() || !v.im.is_finite() {
                v = Complex64::new(0.0, 0.0);
            }
            field.values[i * grid.ny + j] = v;
        }
    }
    Ok(field)
}

/// Density |psi|^2 and principal phase in (-pi, pi] per grid point.
pub fn density_and_phase(field: &ComplexField2D) -> (Vec<f64>, Vec<f64>) {
    let density = field.values.iter().map(|v| v.norm_sqr()).collect();
    let phase = field.values.iter().map(|v| v.im.atan2(v.re)).collect();
    (density, phase)
}

/// A phase defect: plaquette center and integer winding charge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Defect {
    pub pos: [f64; 2],
    pub charge: i64,
}

#[inline]
fn principal(d: f64) -> f64 {
    d - TWO_PI * (d / TWO_PI).round()
}

/// Plaquette winding census on the periodic grid. A plaquette is counted only
/// if all four corner densities exceed `density_floor` times the maximum
/// density (phase is meaningless where the density underflows); plaquettes
/// with zero winding are not reported.
pub fn count_defects(field: &ComplexField2D, density_floor: f64) -> Vec<Defect> {
    let grid = field.grid;
    let max_density = field.peak_density();
    let threshold = density_floor * max_density;
    let (density, phase) = density_and_phase(field);
    let mut out = Vec::new();
    for i in 0..grid.nx {
        let ip = (i + 1) % grid.nx;
        for j in 0..grid.ny {
            let jp = (j + 1) % grid.ny;
            let c = [
                i * grid.ny + j,
                ip * grid.ny + j,
                ip * grid.ny + jp,
                i * grid.ny + jp,
            ];
            if c.iter().any(|&k| density[k] <= threshold) {
                continue;
            }
            let mut winding = 0.0;
            for e in 0..4 {
                winding += principal(phase[c[(e + 1) % 4]] - phase[c[e]]);
            }
            let charge = (winding / TWO_PI).round() as i64;
            if charge != 0 {
                out.push(Defect {
                    pos: [grid.x1(i) + 0.5 * grid.dx(), grid.x2(j) + 0.5 * grid.dy()],
                    charge,
                });
            }
        }
    }
    out
}

/// Net charge of defects strictly inside the circle of the given radius.
pub fn net_charge_within(defects: &[Defect], radius: f64) -> i64 {
    defects
        .iter()
        .filter(|d| (d.pos[0] * d.pos[0] + d.pos[1] * d.pos[1]).sqrt() < radius)
        .map(|d| d.charge)
        .sum()
}

/// Leading-order semiclassical density prediction on the grid:
/// mu(tau(x)) / (gamma |X_s(tau(x))| sqrt(pi hbar)) * exp(-4 dn^2 / hbar),
/// where dn is the normal offset |x - X(tau(x))|. Grid points outside the
/// tau-solvable tube get density 0.
///
/// The transverse profile is the literal initial Gaussian (normal-coordinate
/// variance hbar/8), and the normalization constant gamma*sqrt(pi hbar)
/// makes the t = 0 reconstruction match |psi_0|^2 pointwise; the plane
/// integral is then \oint mu ds / (2 gamma).
pub fn reconstruct_density(
    curve: &CurveState,
    hbar: f64,
    gamma: f64,
    grid: GridSpec,
) -> Result<Vec<f64>> {
    grid.validate()?;
    if !(hbar > 0.0) || !(gamma > 0.0) {
        return Err(Error::Config(format!(
            "reconstruct_density needs hbar > 0 and gamma > 0, got ({hbar}, {gamma})"
        )));
    }
    let solver = TauSolver::new(curve)?;
    let interp = solver.interp();
    let norm = gamma * (std::f64::consts::PI * hbar).sqrt();
    let mut out = vec![0.0; grid.len()];
    let mu_interp = MuInterp::new(curve);
    for i in 0..grid.nx {
        let x1 = grid.x1(i);
        let mut hint: Option<f64> = None;
        for j in 0..grid.ny {
            let x = [x1, grid.x2(j)];
            let tau = match solver.solve(x, hint) {
                Ok(t) => t,
                Err(_) => {
                    hint = None;
                    continue;
                }
            };
            hint = Some(tau);
            let xc = interp.x(tau);
            let xs = interp.x_s(tau);
            let speed = (xs[0] * xs[0] + xs[1] * xs[1]).sqrt();
            if speed < 1e-12 {
                return Err(Error::DegenerateTangent);
            }
            let dn2 = (x[0] - xc[0]).powi(2) + (x[1] - xc[1]).powi(2);
            let mu = mu_interp.eval(tau);
            out[i * grid.ny + j] = mu.max(0.0) / (speed * norm) * (-4.0 * dn2 / hbar).exp();
        }
    }
    Ok(out)
}

/// Trigonometric interpolation of the weight along the curve.
struct MuInterp {
    coeffs: Vec<Complex64>,
}

impl MuInterp {
    fn new(curve: &CurveState) -> MuInterp {
        use rustfft::FftPlanner;
        let n = curve.ns();
        let mut buf: Vec<Complex64> =
            curve.mu.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        for c in &mut buf {
            *c /= n as f64;
        }
        MuInterp { coeffs: buf }
    }

    fn eval(&self, tau: f64) -> f64 {
        let n = self.coeffs.len();
        let half = n / 2;
        let rot = Complex64::from_polar(1.0, tau);
        let mut phase = Complex64::new(1.0, 0.0);
        let mut acc = self.coeffs[0];
        for m in 1..half {
            phase *= rot;
            acc += self.coeffs[m] * phase + self.coeffs[n - m] * phase.conj();
        }
        acc.re + self.coeffs[half].re * (half as f64 * tau).cos()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::SplitMix64;
    use proptest::prelude::*;

    fn paper_grid() -> GridSpec {
        GridSpec { nx: 512, ny: 512, lx: 8.0, ly: 8.0 }
    }

    #[test]
    fn phase_factor_is_identity_on_the_rotating_circle() {
        let params = ModelParams::paper();
        let curve = CurveState::initial_circle(&params, 128).unwrap();
        let mut rng = SplitMix64::new(9);
        for _ in 0..20 {
            let s = rng.uniform(0.0, TWO_PI);
            let x = [rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0)];
            let f = transverse_phase_factor(&curve, s, x, params.hbar).unwrap();
            assert_eq!(f, Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn phase_factor_is_identity_for_constant_momentum() {
        let params = ModelParams::paper();
        let mut curve = CurveState::initial_circle(&params, 64).unwrap();
        for p in &mut curve.p {
            *p = [0.7, -0.2];
        }
        let f = transverse_phase_factor(&curve, 1.3, [2.0, 0.5], params.hbar).unwrap();
        assert_eq!(f, Complex64::new(1.0, 0.0));
    }

    /// A curve with <P_s, X_s> != 0 exercises the generic coordinate form.
    fn generic_curve(ns: usize) -> CurveState {
        let params = ModelParams::paper();
        let mut curve = CurveState::initial_circle(&params, ns).unwrap();
        for j in 0..ns {
            let s = curve.s_value(j);
            curve.x[j] = [2.0 * s.cos(), 1.3 * s.sin()];
            curve.p[j] = [0.8 * s.sin() + 0.3 * (2.0 * s).cos(), -0.5 * s.cos()];
        }
        curve
    }

    #[test]
    fn phase_factor_has_unit_modulus() {
        let curve = generic_curve(128);
        let mut rng = SplitMix64::new(40);
        for _ in 0..100 {
            let s = rng.uniform(0.0, TWO_PI);
            let x = [rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)];
            let f = transverse_phase_factor(&curve, s, x, 1.0).unwrap();
            assert!((f.norm() - 1.0).abs() <= 1e-12);
        }
        // Nontrivial phase somewhere.
        let f = transverse_phase_factor(&curve, 0.9, [1.0, 1.0], 1.0).unwrap();
        assert!(f.im.abs() > 1e-6);
    }

    #[test]
    fn initial_state_requires_quantization() {
        let mut params = ModelParams::paper();
        params.p_r = 3.0;
        assert!(build_initial_psi(&params, paper_grid()).is_err());
    }

    #[test]
    fn initial_state_winds_minus_n_along_a_ring() {
        let params = ModelParams::paper();
        let grid = paper_grid();
        let field = build_initial_psi(&params, grid).unwrap();
        let (_, phase) = density_and_phase(&field);
        // Walk a discrete loop of grid points near radius R around the origin.
        let m = 2000;
        let node = |k: usize| {
            let ang = TWO_PI * k as f64 / m as f64;
            let x = params.radius * ang.cos();
            let y = params.radius * ang.sin();
            let i = ((x + grid.lx) / grid.dx()).round() as usize % grid.nx;
            let j = ((y + grid.ly) / grid.dy()).round() as usize % grid.ny;
            i * grid.ny + j
        };
        let mut total = 0.0;
        for k in 0..m {
            total += principal(phase[node((k + 1) % m)] - phase[node(k)]);
        }
        assert!(
            (total + TWO_PI * params.n_vortex as f64).abs() <= 1e-8,
            "loop winding {total}"
        );
    }

    #[test]
    fn initial_state_peaks_on_the_ring() {
        let params = ModelParams::paper();
        let grid = paper_grid();
        let field = build_initial_psi(&params, grid).unwrap();
        let (density, _) = density_and_phase(&field);
        let mut best = (0.0, 0usize);
        for (k, &d) in density.iter().enumerate() {
            if d > best.0 {
                best = (d, k);
            }
        }
        let (i, j) = (best.1 / grid.ny, best.1 % grid.ny);
        let r = (grid.x1(i).powi(2) + grid.x2(j).powi(2)).sqrt();
        assert!((r - params.radius).abs() <= grid.dx().max(grid.dy()));
    }

    #[test]
    fn initial_state_norm_matches_radial_quadrature_oracle() {
        let params = ModelParams::paper();
        let field = build_initial_psi(&params, paper_grid()).unwrap();
        let norm2 = field.norm_sqr();
        // Oracle: 2 pi * A^2 \int_0^inf exp(-4(r-R)^2/hbar) r dr by midpoint
        // quadrature of the closed-form radial density.
        let a2 = params.mu0
            / (params.gamma * params.radius * (std::f64::consts::PI * params.hbar).sqrt());
        let n = 200_000;
        let rmax = 10.0;
        let dr = rmax / n as f64;
        let mut int = 0.0;
        for k in 0..n {
            let r = (k as f64 + 0.5) * dr;
            int += (-4.0 * (r - params.radius).powi(2) / params.hbar).exp() * r * dr;
        }
        let oracle = TWO_PI * a2 * int;
        assert!((norm2 - oracle).abs() <= 1e-3 * oracle, "{norm2} vs {oracle}");
        // And the closed-form value mu0 pi / gamma, to 1%.
        let closed = params.mu0 * std::f64::consts::PI / params.gamma;
        assert!((norm2 - closed).abs() <= 0.01 * closed, "{norm2} vs {closed}");
    }

    #[test]
    fn initial_state_norm_scales_linearly_in_mu0() {
        let params = ModelParams::paper();
        let grid = GridSpec { nx: 128, ny: 128, lx: 8.0, ly: 8.0 };
        let n1 = build_initial_psi(&params, grid).unwrap().norm_sqr();
        let mut scaled = params.clone();
        scaled.mu0 *= 3.5;
        let n2 = build_initial_psi(&scaled, grid).unwrap().norm_sqr();
        assert!((n2 - 3.5 * n1).abs() <= 1e-12 * n2);
    }

    #[test]
    fn density_and_phase_basics() {
        let grid = GridSpec { nx: 8, ny: 8, lx: 1.0, ly: 1.0 };
        let mut f = ComplexField2D::zeros(grid);
        for v in &mut f.values {
            *v = Complex64::new(2.0, 0.0);
        }
        let (d, p) = density_and_phase(&f);
        assert!(d.iter().all(|&v| v == 4.0));
        assert!(p.iter().all(|&v| v == 0.0));
        for v in &mut f.values {
            *v = Complex64::new(0.0, 1.0);
        }
        let (_, p) = density_and_phase(&f);
        assert!(p.iter().all(|&v| (v - std::f64::consts::FRAC_PI_2).abs() <= 1e-15));
    }

    #[test]
    fn initial_density_has_grid_symmetry() {
        let params = ModelParams::paper();
        let grid = GridSpec { nx: 128, ny: 128, lx: 8.0, ly: 8.0 };
        let field = build_initial_psi(&params, grid).unwrap();
        let (density, _) = density_and_phase(&field);
        // Mirror-symmetric grid points share |x| exactly; densities agree to
        // rounding.
        for i in 1..grid.nx {
            for j in 1..grid.ny {
                let a = density[i * grid.ny + j];
                let b = density[(grid.nx - i) * grid.ny + j];
                let c = density[j * grid.ny + i];
                let scale = a.abs().max(1e-300);
                assert!((a - b).abs() / scale <= 1e-10);
                assert!((a - c).abs() / scale <= 1e-10);
            }
        }
    }

    #[test]
    fn single_vortex_census() {
        let grid = GridSpec { nx: 16, ny: 16, lx: 1.0, ly: 1.0 };
        let a = 0.5 * grid.dx();
        let mut f = ComplexField2D::zeros(grid);
        for i in 0..grid.nx {
            for j in 0..grid.ny {
                let x = grid.x1(i) - a;
                let y = grid.x2(j) - a;
                f.values[i * grid.ny + j] = Complex64::new(x, y);
            }
        }
        let defects = count_defects(&f, 0.0);
        // The census runs over torus plaquettes, so a non-periodic sample
        // carries a compensating charge on the wrap seam; the interior holds
        // exactly the one vortex.
        let interior: Vec<_> = defects
            .iter()
            .filter(|d| d.pos[0].abs() < 0.5 * grid.lx && d.pos[1].abs() < 0.5 * grid.ly)
            .collect();
        assert_eq!(interior.len(), 1);
        assert_eq!(interior[0].charge, 1);
        assert!((interior[0].pos[0] - a).abs() <= 1e-12);
        assert!((interior[0].pos[1] - a).abs() <= 1e-12);
        let total: i64 = defects.iter().map(|d| d.charge).sum();
        assert_eq!(total, 0);
    }

    #[test]
    fn constant_phase_field_has_no_defects() {
        let grid = GridSpec { nx: 16, ny: 16, lx: 1.0, ly: 1.0 };
        let mut f = ComplexField2D::zeros(grid);
        for v in &mut f.values {
            *v = Complex64::new(0.3, 0.4);
        }
        assert!(count_defects(&f, 0.0).is_empty());
    }

    #[test]
    fn initial_state_net_charge_is_minus_n() {
        let params = ModelParams::paper();
        let field = build_initial_psi(&params, paper_grid()).unwrap();
        let defects = count_defects(&field, 0.0);
        assert_eq!(net_charge_within(&defects, params.radius), -10);

        // The relative density floor removes the near-vacuum core plaquettes
        // that carry the winding (density there is ~1e-15 of the ring), so a
        // floored census sees no interior defects at t = 0.
        let floored = count_defects(&field, 1e-6);
        assert_eq!(net_charge_within(&floored, params.radius), 0);
    }

    /// Independent winding oracle via complex-ratio arguments.
    fn winding_oracle(f: &ComplexField2D, radius: f64) -> i64 {
        let grid = f.grid;
        let mut total = 0.0;
        for i in 0..grid.nx {
            let ip = (i + 1) % grid.nx;
            for j in 0..grid.ny {
                let jp = (j + 1) % grid.ny;
                let cx = grid.x1(i) + 0.5 * grid.dx();
                let cy = grid.x2(j) + 0.5 * grid.dy();
                if (cx * cx + cy * cy).sqrt() >= radius {
                    continue;
                }
                let q = [
                    f.values[i * grid.ny + j],
                    f.values[ip * grid.ny + j],
                    f.values[ip * grid.ny + jp],
                    f.values[i * grid.ny + jp],
                ];
                for e in 0..4 {
                    total += (q[(e + 1) % 4] / q[e]).arg();
                }
            }
        }
        (total / TWO_PI).round() as i64
    }

    #[test]
    fn census_matches_ratio_oracle_on_initial_state() {
        let params = ModelParams::paper();
        let grid = GridSpec { nx: 256, ny: 256, lx: 8.0, ly: 8.0 };
        let field = build_initial_psi(&params, grid).unwrap();
        let defects = count_defects(&field, 0.0);
        assert_eq!(
            net_charge_within(&defects, params.radius),
            winding_oracle(&field, params.radius)
        );
    }

    #[test]
    fn reconstructed_density_peaks_on_ring_and_integrates_to_half_mass() {
        let params = ModelParams::paper();
        let curve = CurveState::initial_circle(&params, 128).unwrap();
        let grid = paper_grid();
        let density =
            reconstruct_density(&curve, params.hbar, params.gamma, grid).unwrap();
        let mut best = (0.0, 0usize);
        for (k, &d) in density.iter().enumerate() {
            if d > best.0 {
                best = (d, k);
            }
        }
        let (i, j) = (best.1 / grid.ny, best.1 % grid.ny);
        let r = (grid.x1(i).powi(2) + grid.x2(j).powi(2)).sqrt();
        assert!((r - params.radius).abs() <= grid.dx().max(grid.dy()));

        let cell = grid.dx() * grid.dy();
        let total: f64 = density.iter().sum::<f64>() * cell;
        // \oint mu ds times the transverse-norm convention constant 1/(2 g).
        let mass = crate::curve::quad_s(&curve.mu);
        let expected = mass / (2.0 * params.gamma);
        assert!((total - expected).abs() <= 0.01 * expected, "{total} vs {expected}");
    }

    #[test]
    fn reconstruction_matches_initial_state_pointwise() {
        let params = ModelParams::paper();
        let curve = CurveState::initial_circle(&params, 128).unwrap();
        let grid = GridSpec { nx: 256, ny: 256, lx: 8.0, ly: 8.0 };
        let rec = reconstruct_density(&curve, params.hbar, params.gamma, grid).unwrap();
        let field = build_initial_psi(&params, grid).unwrap();
        let (density, _) = density_and_phase(&field);
        let peak = field.peak_density();
        for k in 0..density.len() {
            if density[k] >= 1e-6 * peak {
                let rel = (rec[k] - density[k]).abs() / density[k];
                assert!(rel <= 1e-8, "rel {rel} at {k}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        /// Total plaquette charge over the torus vanishes for smooth periodic
        /// fields, and the census is invariant under global phase rotation.
        #[test]
        fn charge_sum_rule_and_phase_invariance(seed in 0u64..500) {
            let grid = GridSpec { nx: 24, ny: 24, lx: 1.0, ly: 1.0 };
            let mut rng = SplitMix64::new(seed);
            let mut f = ComplexField2D::zeros(grid);
            for m in -2i32..=2 {
                for n in -2i32..=2 {
                    let amp = Complex64::new(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
                    for i in 0..grid.nx {
                        for j in 0..grid.ny {
                            let ph = std::f64::consts::PI
                                * (m as f64 * grid.x1(i) + n as f64 * grid.x2(j));
                            f.values[i * grid.ny + j] += amp * Complex64::from_polar(1.0, ph);
                        }
                    }
                }
            }
            let defects = count_defects(&f, 0.0);
            let total: i64 = defects.iter().map(|d| d.charge).sum();
            prop_assert_eq!(total, 0);

            let mut rotated = f.clone();
            let rot = Complex64::from_polar(1.0, rng.uniform(0.0, TWO_PI));
            for v in &mut rotated.values {
                *v *= rot;
            }
            let rotated_defects = count_defects(&rotated, 0.0);
            prop_assert_eq!(defects, rotated_defects);
        }
    }
}
