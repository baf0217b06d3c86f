use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// All scalars of the 2D rotating-trap model with Gaussian interaction.
///
/// Serializes to/from a flat JSON object; `deltaK` is stored as the two
/// diagonal entries of the trap-asymmetry matrix, so the full quadratic trap
/// matrix is `K = k2*I + diag(deltaK)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Semiclassical parameter (> 0).
    pub hbar: f64,
    /// Damping strength (>= 0).
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    /// Interaction strength.
    pub kappa: f64,
    /// Nonlocality length (> 0).
    pub gamma: f64,
    /// Rotation frequency of the frame.
    pub omega: f64,
    /// Quadratic trap strength.
    pub k2: f64,
    /// Quartic trap strength.
    pub k4: f64,
    /// Diagonal trap asymmetry, stored as the two diagonal entries.
    #[serde(rename = "deltaK")]
    pub delta_k: [f64; 2],
    /// Vortex number.
    #[serde(rename = "N")]
    pub n_vortex: i64,
    /// Initial weight density (uniform along the circle).
    pub mu0: f64,
    /// Initial circle radius (> 0).
    #[serde(rename = "R")]
    pub radius: f64,
    /// Initial tangential momentum magnitude.
    #[serde(rename = "Pr")]
    pub p_r: f64,
}

impl ModelParams {
    /// Desk-scale parameter set used throughout the reference figures:
    /// R=3, Lambda=0.3, kappa=250, k2=1/4, deltaK=diag(0.025,-0.025),
    /// k4=1/16, gamma=1, omega=3, mu0=1/2pi, hbar=1, N=10, with Pr fixed by
    /// the quantization R*Pr = N*hbar.
    pub fn paper() -> Self {
        Self::quantized(3.0, 10, 1.0)
    }

    /// Builds the paper parameter set with radius `r`, vortex number `n` and
    /// semiclassical parameter `hbar`; `Pr` is set so that R*Pr = N*hbar
    /// holds exactly.
    pub fn quantized(r: f64, n: i64, hbar: f64) -> Self {
        ModelParams {
            hbar,
            lambda: 0.3,
            kappa: 250.0,
            gamma: 1.0,
            omega: 3.0,
            k2: 0.25,
            k4: 1.0 / 16.0,
            delta_k: [0.025, -0.025],
            n_vortex: n,
            mu0: 0.5 / std::f64::consts::PI,
            radius: r,
            p_r: n as f64 * hbar / r,
        }
    }

    /// Full 2x2 trap matrix K = k2*I + diag(deltaK).
    pub fn k_matrix(&self) -> [[f64; 2]; 2] {
        [
            [self.k2 + self.delta_k[0], 0.0],
            [0.0, self.k2 + self.delta_k[1]],
        ]
    }

    /// Spectral norm of the diagonal asymmetry matrix.
    pub fn delta_k_norm(&self) -> f64 {
        self.delta_k[0].abs().max(self.delta_k[1].abs())
    }

    /// Same parameters with the asymmetry replaced by `delta_k`.
    pub fn with_delta_k(&self, delta_k: [f64; 2]) -> Self {
        ModelParams { delta_k, ..self.clone() }
    }

    /// Residual of the quantization condition R*Pr - N*hbar.
    pub fn quantization_residual(&self) -> f64 {
        self.radius * self.p_r - self.n_vortex as f64 * self.hbar
    }

    /// Checks positivity and finiteness constraints.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("hbar", self.hbar),
            ("Lambda", self.lambda),
            ("kappa", self.kappa),
            ("gamma", self.gamma),
            ("omega", self.omega),
            ("k2", self.k2),
            ("k4", self.k4),
            ("deltaK[0]", self.delta_k[0]),
            ("deltaK[1]", self.delta_k[1]),
            ("mu0", self.mu0),
            ("R", self.radius),
            ("Pr", self.p_r),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite, got {v}")));
            }
        }
        if self.hbar <= 0.0 {
            return Err(Error::Config(format!("hbar must be > 0, got {}", self.hbar)));
        }
        if self.gamma <= 0.0 {
            return Err(Error::Config(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if self.radius <= 0.0 {
            return Err(Error::Config(format!("R must be > 0, got {}", self.radius)));
        }
        if self.lambda < 0.0 {
            return Err(Error::Config(format!("Lambda must be >= 0, got {}", self.lambda)));
        }
        if self.mu0 < 0.0 {
            return Err(Error::Config(format!("mu0 must be >= 0, got {}", self.mu0)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantization_holds_for_quantized_constructor() {
        let p = ModelParams::paper();
        assert!(p.quantization_residual().abs() <= 1e-12);
        let q = ModelParams::quantized(7.3, 4, 0.01);
        assert!(q.quantization_residual().abs() <= 1e-12);
    }

    #[test]
    fn json_round_trip_uses_exact_field_names() {
        let p = ModelParams::paper();
        let s = serde_json::to_string(&p).unwrap();
        for key in [
            "\"hbar\"", "\"Lambda\"", "\"kappa\"", "\"gamma\"", "\"omega\"", "\"k2\"",
            "\"k4\"", "\"deltaK\"", "\"N\"", "\"mu0\"", "\"R\"", "\"Pr\"",
        ] {
            assert!(s.contains(key), "missing {key} in {s}");
        }
        let back: ModelParams = serde_json::from_str(&s).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn validation_rejects_bad_params() {
        let mut p = ModelParams::paper();
        p.gamma = -1.0;
        assert!(matches!(p.validate(), Err(Error::Config(_))));
        let mut p = ModelParams::paper();
        p.hbar = 0.0;
        assert!(p.validate().is_err());
        let mut p = ModelParams::paper();
        p.k4 = f64::NAN;
        assert!(p.validate().is_err());
    }

    #[test]
    fn k_matrix_is_k2_identity_plus_asymmetry() {
        let p = ModelParams::paper();
        let k = p.k_matrix();
        assert_eq!(k[0][0], 0.25 + 0.025);
        assert_eq!(k[1][1], 0.25 - 0.025);
        assert_eq!(k[0][1], 0.0);
    }
}
