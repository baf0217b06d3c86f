//! Hamiltonian symbols of the general nonlocal model and the explicit 2D
//! rotating-trap instance, with analytic derivatives up to third order and
//! finite-difference self-checks.
//!
//! Phase-space points are ordered z = (p1, p2, x1, x2); n = 2 throughout.

use crate::params::ModelParams;
use crate::{Error, Result};

/// Phase-space vector (p1, p2, x1, x2).
pub type Z4 = [f64; 4];
/// 4x4 matrix over phase space.
pub type Mat4 = [[f64; 4]; 4];
/// Order-3 tensor over phase space.
pub type Ten4 = [[[f64; 4]; 4]; 4];

/// Standard symplectic matrix J = [[0, -I], [I, 0]] in the (p, x) ordering.
pub const J_MAT: Mat4 = [
    [0.0, 0.0, -1.0, 0.0],
    [0.0, 0.0, 0.0, -1.0],
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
];

/// Applies J to a phase-space vector: J(p, x) = (-x-part, p-part).
#[inline]
pub fn apply_j(v: Z4) -> Z4 {
    [-v[2], -v[3], v[0], v[1]]
}

/// A point of the 2n-dimensional phase space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseSpacePoint {
    pub p: [f64; 2],
    pub x: [f64; 2],
}

impl PhaseSpacePoint {
    pub fn new(p: [f64; 2], x: [f64; 2]) -> Self {
        PhaseSpacePoint { p, x }
    }

    #[inline]
    pub fn to_z(self) -> Z4 {
        [self.p[0], self.p[1], self.x[0], self.x[1]]
    }

    #[inline]
    pub fn from_z(z: Z4) -> Self {
        PhaseSpacePoint { p: [z[0], z[1]], x: [z[2], z[3]] }
    }
}

/// Fused kernel evaluation used by the O(Ns^2) inner loops: the kernel value,
/// its anti-Hermitian counterpart and its z-gradient in one call.
#[derive(Clone, Copy, Debug)]
pub struct NonlocalEval {
    pub w: f64,
    pub w_breve: f64,
    pub w_z: Z4,
}

/// Analytic symbol callbacks for the one-particle part V(z,t), the two-point
/// kernel W(z,w,t) and their anti-Hermitian (breve) counterparts.
///
/// Mixed-derivative tensor index conventions:
/// `w_zzw[a][b][c]` = d^2/dz_a dz_b d/dw_c W, and
/// `w_zww[a][b][c]` = d/dz_a d^2/dw_b dw_c W.
///
/// All evaluations are pure functions of their arguments; implementations are
/// shared read-only across threads.
pub trait SymbolSet: Sync {
    fn v(&self, z: Z4, t: f64) -> f64;
    fn v_z(&self, z: Z4, t: f64) -> Z4;
    fn v_zz(&self, z: Z4, t: f64) -> Mat4;
    fn v_zzz(&self, z: Z4, t: f64) -> Ten4;

    fn w(&self, z: Z4, w: Z4, t: f64) -> f64;
    fn w_z(&self, z: Z4, w: Z4, t: f64) -> Z4;
    fn w_w(&self, z: Z4, w: Z4, t: f64) -> Z4;
    fn w_zz(&self, z: Z4, w: Z4, t: f64) -> Mat4;
    fn w_zw(&self, z: Z4, w: Z4, t: f64) -> Mat4;
    fn w_ww(&self, z: Z4, w: Z4, t: f64) -> Mat4;
    fn w_zzz(&self, z: Z4, w: Z4, t: f64) -> Ten4;
    fn w_zzw(&self, z: Z4, w: Z4, t: f64) -> Ten4;
    fn w_zww(&self, z: Z4, w: Z4, t: f64) -> Ten4;

    // Anti-Hermitian counterparts; the default model has breve == plain.
    fn v_breve(&self, z: Z4, t: f64) -> f64 {
        self.v(z, t)
    }
    fn v_breve_z(&self, z: Z4, t: f64) -> Z4 {
        self.v_z(z, t)
    }
    fn v_breve_zz(&self, z: Z4, t: f64) -> Mat4 {
        self.v_zz(z, t)
    }
    fn w_breve(&self, z: Z4, w: Z4, t: f64) -> f64 {
        self.w(z, w, t)
    }
    fn w_breve_z(&self, z: Z4, w: Z4, t: f64) -> Z4 {
        self.w_z(z, w, t)
    }
    fn w_breve_w(&self, z: Z4, w: Z4, t: f64) -> Z4 {
        self.w_w(z, w, t)
    }
    fn w_breve_zz(&self, z: Z4, w: Z4, t: f64) -> Mat4 {
        self.w_zz(z, w, t)
    }
    fn w_breve_zw(&self, z: Z4, w: Z4, t: f64) -> Mat4 {
        self.w_zw(z, w, t)
    }
    fn w_breve_ww(&self, z: Z4, w: Z4, t: f64) -> Mat4 {
        self.w_ww(z, w, t)
    }

    /// Fused (W, W_breve, W_z) evaluation; implementations with a shared
    /// exponential should override this.
    fn nonlocal_eval(&self, z: Z4, w: Z4, t: f64) -> NonlocalEval {
        NonlocalEval {
            w: self.w(z, w, t),
            w_breve: self.w_breve(z, w, t),
            w_z: self.w_z(z, w, t),
        }
    }
}

/// Symbols of the 2D rotating-trap model:
/// V = p^2 + <x, K x> + k4 |x|^4 - omega (p1 x2 - p2 x1),
/// W = (1/(pi gamma^2)) exp(-(x-y)^2/gamma^2), with breve V = V, breve W = W.
///
/// The model is autonomous; the time argument is threaded through to keep the
/// general interface.
#[derive(Clone, Debug)]
pub struct GpeSymbols {
    k: [[f64; 2]; 2],
    k4: f64,
    omega: f64,
    inv_g2: f64,
    norm: f64,
}

/// Builds the rotating-trap symbol set from model parameters.
pub fn gpe_symbols(params: &ModelParams) -> GpeSymbols {
    let g2 = params.gamma * params.gamma;
    GpeSymbols {
        k: params.k_matrix(),
        k4: params.k4,
        omega: params.omega,
        inv_g2: 1.0 / g2,
        norm: 1.0 / (std::f64::consts::PI * g2),
    }
}

impl GpeSymbols {
    #[inline]
    fn gauss(&self, d: [f64; 2]) -> f64 {
        self.norm * (-(d[0] * d[0] + d[1] * d[1]) * self.inv_g2).exp()
    }

    /// Gradient of the kernel with respect to its first position argument.
    #[inline]
    fn gauss_grad(&self, d: [f64; 2], g: f64) -> [f64; 2] {
        let c = -2.0 * self.inv_g2 * g;
        [c * d[0], c * d[1]]
    }

    fn gauss_hess(&self, d: [f64; 2], g: f64) -> [[f64; 2]; 2] {
        let a = -2.0 * self.inv_g2;
        let b = 4.0 * self.inv_g2 * self.inv_g2;
        [
            [(a + b * d[0] * d[0]) * g, b * d[0] * d[1] * g],
            [b * d[0] * d[1] * g, (a + b * d[1] * d[1]) * g],
        ]
    }

    fn gauss_third(&self, d: [f64; 2], g: f64) -> [[[f64; 2]; 2]; 2] {
        let b = 4.0 * self.inv_g2 * self.inv_g2;
        let c = -8.0 * self.inv_g2 * self.inv_g2 * self.inv_g2;
        let mut out = [[[0.0; 2]; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let mut v = c * d[i] * d[j] * d[k];
                    if i == j {
                        v += b * d[k];
                    }
                    if i == k {
                        v += b * d[j];
                    }
                    if j == k {
                        v += b * d[i];
                    }
                    out[i][j][k] = v * g;
                }
            }
        }
        out
    }

    #[inline]
    fn sep(z: Z4, w: Z4) -> [f64; 2] {
        [z[2] - w[2], z[3] - w[3]]
    }

    /// Places a 2x2 position-block tensor value into x-slots of a Ten4 with a
    /// sign for each w-derivative (d/dy = -d/dx for a kernel of x - y).
    fn place_third(t: [[[f64; 2]; 2]; 2], sign: f64) -> Ten4 {
        let mut out = [[[0.0; 4]; 4]; 4];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    out[i + 2][j + 2][k + 2] = sign * t[i][j][k];
                }
            }
        }
        out
    }
}

impl SymbolSet for GpeSymbols {
    fn v(&self, z: Z4, _t: f64) -> f64 {
        let (p1, p2, x1, x2) = (z[0], z[1], z[2], z[3]);
        let kx = [
            self.k[0][0] * x1 + self.k[0][1] * x2,
            self.k[1][0] * x1 + self.k[1][1] * x2,
        ];
        let r2 = x1 * x1 + x2 * x2;
        p1 * p1 + p2 * p2 + x1 * kx[0] + x2 * kx[1] + self.k4 * r2 * r2
            - self.omega * (p1 * x2 - p2 * x1)
    }

    fn v_z(&self, z: Z4, _t: f64) -> Z4 {
        let (p1, p2, x1, x2) = (z[0], z[1], z[2], z[3]);
        let kx = [
            self.k[0][0] * x1 + self.k[0][1] * x2,
            self.k[1][0] * x1 + self.k[1][1] * x2,
        ];
        let r2 = x1 * x1 + x2 * x2;
        [
            2.0 * p1 - self.omega * x2,
            2.0 * p2 + self.omega * x1,
            2.0 * kx[0] + 4.0 * self.k4 * r2 * x1 + self.omega * p2,
            2.0 * kx[1] + 4.0 * self.k4 * r2 * x2 - self.omega * p1,
        ]
    }

    fn v_zz(&self, z: Z4, _t: f64) -> Mat4 {
        let (x1, x2) = (z[2], z[3]);
        let r2 = x1 * x1 + x2 * x2;
        let mut m = [[0.0; 4]; 4];
        m[0][0] = 2.0;
        m[1][1] = 2.0;
        m[0][3] = -self.omega;
        m[3][0] = -self.omega;
        m[1][2] = self.omega;
        m[2][1] = self.omega;
        let q = 4.0 * self.k4;
        m[2][2] = 2.0 * self.k[0][0] + q * (r2 + 2.0 * x1 * x1);
        m[3][3] = 2.0 * self.k[1][1] + q * (r2 + 2.0 * x2 * x2);
        m[2][3] = 2.0 * self.k[0][1] + q * 2.0 * x1 * x2;
        m[3][2] = m[2][3];
        m
    }

    fn v_zzz(&self, z: Z4, _t: f64) -> Ten4 {
        let x = [z[2], z[3]];
        let c = 8.0 * self.k4;
        let mut out = [[[0.0; 4]; 4]; 4];
        for a in 0..2 {
            for b in 0..2 {
                for d in 0..2 {
                    let mut v = 0.0;
                    if a == b {
                        v += x[d];
                    }
                    if a == d {
                        v += x[b];
                    }
                    if b == d {
                        v += x[a];
                    }
                    out[a + 2][b + 2][d + 2] = c * v;
                }
            }
        }
        out
    }

    fn w(&self, z: Z4, w: Z4, _t: f64) -> f64 {
        self.gauss(Self::sep(z, w))
    }

    fn w_z(&self, z: Z4, w: Z4, _t: f64) -> Z4 {
        let d = Self::sep(z, w);
        let g = self.gauss(d);
        let gr = self.gauss_grad(d, g);
        [0.0, 0.0, gr[0], gr[1]]
    }

    fn w_w(&self, z: Z4, w: Z4, _t: f64) -> Z4 {
        let d = Self::sep(z, w);
        let g = self.gauss(d);
        let gr = self.gauss_grad(d, g);
        [0.0, 0.0, -gr[0], -gr[1]]
    }

    fn w_zz(&self, z: Z4, w: Z4, _t: f64) -> Mat4 {
        let d = Self::sep(z, w);
        let h = self.gauss_hess(d, self.gauss(d));
        let mut m = [[0.0; 4]; 4];
        for i in 0..2 {
            for j in 0..2 {
                m[i + 2][j + 2] = h[i][j];
            }
        }
        m
    }

    fn w_zw(&self, z: Z4, w: Z4, _t: f64) -> Mat4 {
        let d = Self::sep(z, w);
        let h = self.gauss_hess(d, self.gauss(d));
        let mut m = [[0.0; 4]; 4];
        for i in 0..2 {
            for j in 0..2 {
                m[i + 2][j + 2] = -h[i][j];
            }
        }
        m
    }

    fn w_ww(&self, z: Z4, w: Z4, _t: f64) -> Mat4 {
        self.w_zz(z, w, _t)
    }

    fn w_zzz(&self, z: Z4, w: Z4, _t: f64) -> Ten4 {
        let d = Self::sep(z, w);
        Self::place_third(self.gauss_third(d, self.gauss(d)), 1.0)
    }

    fn w_zzw(&self, z: Z4, w: Z4, _t: f64) -> Ten4 {
        let d = Self::sep(z, w);
        Self::place_third(self.gauss_third(d, self.gauss(d)), -1.0)
    }

    fn w_zww(&self, z: Z4, w: Z4, _t: f64) -> Ten4 {
        let d = Self::sep(z, w);
        Self::place_third(self.gauss_third(d, self.gauss(d)), 1.0)
    }

    fn nonlocal_eval(&self, z: Z4, w: Z4, _t: f64) -> NonlocalEval {
        let d = Self::sep(z, w);
        let g = self.gauss(d);
        let gr = self.gauss_grad(d, g);
        NonlocalEval {
            w: g,
            w_breve: g,
            w_z: [0.0, 0.0, gr[0], gr[1]],
        }
    }
}

// ---------------------------------------------------------------------------
// Finite-difference self-checks
// ---------------------------------------------------------------------------

/// Max-norm relative error report per derivative, from `check_derivatives`.
#[derive(Clone, Debug)]
pub struct DerivativeReport {
    /// (derivative name, max relative error over all sample points).
    pub entries: Vec<(String, f64)>,
}

impl DerivativeReport {
    pub fn max_error(&self) -> f64 {
        self.entries.iter().map(|e| e.1).fold(0.0, f64::max)
    }

    pub fn error_of(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.0 == name).map(|e| e.1)
    }
}

/// 4th-order central difference of a scalar function along direction `a`.
fn fd_dir<F: Fn(Z4) -> f64>(f: &F, z: Z4, a: usize, h: f64) -> f64 {
    let mut zp = z;
    let eval = |zp: &mut Z4, off: f64| {
        zp[a] = z[a] + off;
        f(*zp)
    };
    let v = (eval(&mut zp, -2.0 * h) - 8.0 * eval(&mut zp, -h) + 8.0 * eval(&mut zp, h)
        - eval(&mut zp, 2.0 * h))
        / (12.0 * h);
    v
}

fn rel_err(analytic: &[f64], fd: &[f64]) -> f64 {
    let sa = analytic.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let sf = fd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = sa.max(sf);
    if scale == 0.0 {
        return 0.0;
    }
    analytic
        .iter()
        .zip(fd)
        .fold(0.0f64, |m, (a, f)| m.max((a - f).abs()))
        / scale
}

/// Compares every analytic derivative of `symbols` against 4th-order central
/// finite differences at the given sample points, and fails if any max
/// relative error exceeds `tol`.
///
/// Third derivatives are differenced from the analytic second derivatives (one
/// level of nesting only). The error reported per derivative is the max-norm
/// difference scaled by the larger of the two max norms; identically zero
/// derivatives report exactly 0.
pub fn check_derivatives(
    symbols: &dyn SymbolSet,
    points: &[PhaseSpacePoint],
    t: f64,
    step: f64,
    tol: f64,
) -> Result<DerivativeReport> {
    if points.is_empty() {
        return Err(Error::Config("check_derivatives needs >= 1 sample point".into()));
    }
    let h = step;
    let mut errs: Vec<(String, f64)> = vec![
        ("v_z", 0.0),
        ("v_zz", 0.0),
        ("v_zzz", 0.0),
        ("v_breve_z", 0.0),
        ("w_z", 0.0),
        ("w_w", 0.0),
        ("w_zz", 0.0),
        ("w_zw", 0.0),
        ("w_ww", 0.0),
        ("w_zzz", 0.0),
        ("w_zzw", 0.0),
        ("w_zww", 0.0),
        ("w_breve_z", 0.0),
        ("w_breve_w", 0.0),
    ]
    .into_iter()
    .map(|(n, e)| (n.to_string(), e))
    .collect();
    let bump = |errs: &mut Vec<(String, f64)>, name: &str, e: f64| {
        let slot = errs.iter_mut().find(|en| en.0 == name).unwrap();
        slot.1 = slot.1.max(e);
    };

    // Pair the points cyclically to probe the two-argument kernel.
    for (idx, pt) in points.iter().enumerate() {
        let z = pt.to_z();
        let wz = points[(idx + 1) % points.len()].to_z();

        // V family.
        let mut fd = [0.0; 4];
        for a in 0..4 {
            fd[a] = fd_dir(&|q| symbols.v(q, t), z, a, h);
        }
        bump(&mut errs, "v_z", rel_err(&symbols.v_z(z, t), &fd));

        let mut fd2 = [[0.0; 4]; 4];
        for b in 0..4 {
            for a in 0..4 {
                fd2[a][b] = fd_dir(&|q| symbols.v_z(q, t)[a], z, b, h);
            }
        }
        let a2 = symbols.v_zz(z, t);
        bump(
            &mut errs,
            "v_zz",
            rel_err(&a2.concat(), &fd2.concat()),
        );

        let mut fd3 = vec![0.0; 64];
        let a3 = symbols.v_zzz(z, t);
        let mut a3f = vec![0.0; 64];
        for c in 0..4 {
            for a in 0..4 {
                for b in 0..4 {
                    fd3[(a * 4 + b) * 4 + c] = fd_dir(&|q| symbols.v_zz(q, t)[a][b], z, c, h);
                    a3f[(a * 4 + b) * 4 + c] = a3[a][b][c];
                }
            }
        }
        bump(&mut errs, "v_zzz", rel_err(&a3f, &fd3));

        let mut fdb = [0.0; 4];
        for a in 0..4 {
            fdb[a] = fd_dir(&|q| symbols.v_breve(q, t), z, a, h);
        }
        bump(&mut errs, "v_breve_z", rel_err(&symbols.v_breve_z(z, t), &fdb));

        // W family: differentiate in z with w fixed and vice versa.
        let mut fdz = [0.0; 4];
        let mut fdw = [0.0; 4];
        for a in 0..4 {
            fdz[a] = fd_dir(&|q| symbols.w(q, wz, t), z, a, h);
            fdw[a] = fd_dir(&|q| symbols.w(z, q, t), wz, a, h);
        }
        bump(&mut errs, "w_z", rel_err(&symbols.w_z(z, wz, t), &fdz));
        bump(&mut errs, "w_w", rel_err(&symbols.w_w(z, wz, t), &fdw));

        let pairs: [(&str, Mat4, Box<dyn Fn(usize, usize) -> f64>); 3] = [
            (
                "w_zz",
                symbols.w_zz(z, wz, t),
                Box::new(|a, b| fd_dir(&|q| symbols.w_z(q, wz, t)[a], z, b, h)),
            ),
            (
                "w_zw",
                symbols.w_zw(z, wz, t),
                Box::new(|a, b| fd_dir(&|q| symbols.w_z(z, q, t)[a], wz, b, h)),
            ),
            (
                "w_ww",
                symbols.w_ww(z, wz, t),
                Box::new(|a, b| fd_dir(&|q| symbols.w_w(z, q, t)[a], wz, b, h)),
            ),
        ];
        for (name, analytic, fd_fn) in pairs {
            let mut fdm = [[0.0; 4]; 4];
            for a in 0..4 {
                for b in 0..4 {
                    fdm[a][b] = fd_fn(a, b);
                }
            }
            bump(&mut errs, name, rel_err(&analytic.concat(), &fdm.concat()));
        }

        let triples: [(&str, Ten4, Box<dyn Fn(usize, usize, usize) -> f64>); 3] = [
            (
                "w_zzz",
                symbols.w_zzz(z, wz, t),
                Box::new(|a, b, c| fd_dir(&|q| symbols.w_zz(q, wz, t)[a][b], z, c, h)),
            ),
            (
                "w_zzw",
                symbols.w_zzw(z, wz, t),
                Box::new(|a, b, c| fd_dir(&|q| symbols.w_zz(z, q, t)[a][b], wz, c, h)),
            ),
            (
                "w_zww",
                symbols.w_zww(z, wz, t),
                Box::new(|a, b, c| fd_dir(&|q| symbols.w_zw(z, q, t)[a][b], wz, c, h)),
            ),
        ];
        for (name, analytic, fd_fn) in triples {
            let mut fdt = vec![0.0; 64];
            let mut ant = vec![0.0; 64];
            for a in 0..4 {
                for b in 0..4 {
                    for c in 0..4 {
                        fdt[(a * 4 + b) * 4 + c] = fd_fn(a, b, c);
                        ant[(a * 4 + b) * 4 + c] = analytic[a][b][c];
                    }
                }
            }
            bump(&mut errs, name, rel_err(&ant, &fdt));
        }

        let mut fdbz = [0.0; 4];
        let mut fdbw = [0.0; 4];
        for a in 0..4 {
            fdbz[a] = fd_dir(&|q| symbols.w_breve(q, wz, t), z, a, h);
            fdbw[a] = fd_dir(&|q| symbols.w_breve(z, q, t), wz, a, h);
        }
        bump(&mut errs, "w_breve_z", rel_err(&symbols.w_breve_z(z, wz, t), &fdbz));
        bump(&mut errs, "w_breve_w", rel_err(&symbols.w_breve_w(z, wz, t), &fdbw));
    }

    let report = DerivativeReport { entries: errs };
    if report.max_error() > tol {
        let worst = report
            .entries
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        return Err(Error::Numerics(format!(
            "symbol derivative check failed: {} has max relative error {:.3e} > {:.3e}",
            worst.0, worst.1, tol
        )));
    }
    Ok(report)
}
