//! Generalized Brillouin zone of nearest-module chains.
//!
//! For fixed `E`, `β·det(H_β − E)` is a quadratic `Aβ² + Bβ + C` with
//! `A = ±a`, `C = ±c`. The coefficients are recovered from three numeric
//! determinant evaluations instead of symbolic expansion.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{NhError, Result};
use crate::model::{build_generalized_bloch, ModelParams};

pub const DEFAULT_CONTOUR_POINTS: usize = 2048;
pub const MIN_CONTOUR_POINTS: usize = 64;

/// Circle `|β| = radius` sampled at `φ_j = 2πj/n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GbzContour {
    pub radius: f64,
    pub points: Vec<Complex64>,
}

impl GbzContour {
    pub fn new(radius: f64, n_points: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(NhError::Singular(format!(
                "GBZ radius must be positive and finite, got {radius}"
            )));
        }
        if n_points < MIN_CONTOUR_POINTS {
            return Err(NhError::Domain(format!(
                "contour needs at least {MIN_CONTOUR_POINTS} points, got {n_points}"
            )));
        }
        let points = (0..n_points)
            .map(|j| Complex64::from_polar(radius, Self::angle(j, n_points)))
            .collect();
        Ok(Self { radius, points })
    }

    /// Analytic GBZ circle of `p`.
    pub fn for_model(p: &ModelParams, n_points: usize) -> Result<Self> {
        Self::new(gbz_radius(p)?, n_points)
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn phis(&self) -> Vec<f64> {
        (0..self.n_points()).map(|j| Self::angle(j, self.n_points())).collect()
    }

    pub fn refined(&self) -> Self {
        Self::new(self.radius, 2 * self.n_points()).expect("refining a valid contour")
    }

    fn angle(j: usize, n: usize) -> f64 {
        2.0 * PI * j as f64 / n as f64
    }
}

/// `a = J0^{r(d−1)} JL^{r−1} Jm` and `c = J0^{r(d−1)} JR^{r−1} JmP`.
pub fn beta_quadratic_coeffs(p: &ModelParams) -> (Complex64, Complex64) {
    let sub = Complex64::new(p.j0, 0.0).powu((p.r * (p.d - 1)) as u32);
    let a = sub * p.jl.powu((p.r - 1) as u32) * p.jm;
    let c = sub * p.jr.powu((p.r - 1) as u32) * p.jmp;
    (a, c)
}

/// `det(H_β − E)`.
pub fn bulk_determinant(p: &ModelParams, e: Complex64, beta: Complex64) -> Result<Complex64> {
    Ok(build_generalized_bloch(p, beta)?.shifted(e).determinant())
}

/// Coefficients `[A, B, C]` of `β·det(H_β − E) = Aβ² + Bβ + C`, by
/// interpolation through `β ∈ {1, −1, 2}`.
pub fn beta_polynomial(p: &ModelParams, e: Complex64) -> Result<[Complex64; 3]> {
    let f = |beta: f64| -> Result<Complex64> {
        let b = Complex64::new(beta, 0.0);
        Ok(b * bulk_determinant(p, e, b)?)
    };
    let (f1, fm, f2) = (f(1.0)?, f(-1.0)?, f(2.0)?);
    let b = (f1 - fm) / 2.0;
    let even = (f1 + fm) / 2.0;
    let a = (f2 - 2.0 * b - even) / 3.0;
    Ok([a, b, even - a])
}

/// Both roots of the β-quadratic at energy `E`, ordered `|β1| ≤ |β2|`.
pub fn beta_roots(p: &ModelParams, e: Complex64) -> Result<(Complex64, Complex64)> {
    let (a_exact, c_exact) = beta_quadratic_coeffs(p);
    let [a, b, c] = beta_polynomial(p, e)?;
    let scale = a.norm().max(b.norm()).max(c.norm()).max(c_exact.norm());
    if a_exact.norm() <= 1e-14 * scale.max(f64::MIN_POSITIVE) || a == Complex64::new(0.0, 0.0) {
        return Err(NhError::Singular(
            "leading β coefficient vanishes (JL^{r−1}·Jm ≈ 0)".into(),
        ));
    }
    let disc = (b * b - 4.0 * a * c).sqrt();
    let sign = if (b.conj() * disc).re >= 0.0 { 1.0 } else { -1.0 };
    let q = -(b + sign * disc) / 2.0;
    let (r1, r2) = if q.norm() == 0.0 {
        (q, q)
    } else {
        (q / a, c / q)
    };
    Ok(if r1.norm() <= r2.norm() { (r1, r2) } else { (r2, r1) })
}

/// `|J_R^{r−1} J′_m / (J_L^{r−1} J_m)|` without the square root.
fn modulus_ratio(p: &ModelParams) -> Result<f64> {
    let denom = p.jl.powu((p.r - 1) as u32) * p.jm;
    if p.jm.norm() == 0.0 || (p.r > 1 && p.jl.norm() == 0.0) {
        return Err(NhError::Singular("JL^{r−1}·Jm vanishes".into()));
    }
    Ok((p.jr.powu((p.r - 1) as u32) * p.jmp).norm() / denom.norm())
}

/// Radius of the analytic GBZ circle, `sqrt(|c/a|)`.
pub fn gbz_radius(p: &ModelParams) -> Result<f64> {
    Ok(modulus_ratio(p)?.sqrt())
}

/// Distance of the point-gap criticality ratio from one; zero at criticality.
pub fn point_gap_residual(p: &ModelParams) -> Result<f64> {
    Ok((modulus_ratio(p)? - 1.0).abs())
}

/// Criticality ratio minus one, keeping its sign (for root bracketing).
pub fn point_gap_signed(p: &ModelParams) -> Result<f64> {
    Ok(modulus_ratio(p)? - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Boundary, CouplingPreset};
    use crate::model::build_bloch;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn chain(d: usize, r: usize, j0: f64, jl: f64, jr: f64, jm: f64, jmp: f64) -> ModelParams {
        ModelParams {
            d,
            r,
            l: 4,
            j0,
            jl: c(jl, 0.0),
            jr: c(jr, 0.0),
            jm: c(jm, 0.0),
            jmp: c(jmp, 0.0),
            boundary: Boundary::Obc,
        }
    }

    #[test]
    fn quadratic_coefficients() {
        let (a, cc) = beta_quadratic_coeffs(&chain(1, 3, 0.0, 1.0, 2.0, 3.0, 4.0));
        assert_eq!((a, cc), (c(3.0, 0.0), c(16.0, 0.0)));
        // J0^{r(d−1)} = 2² here.
        let (a, cc) = beta_quadratic_coeffs(&chain(2, 2, 2.0, 1.0, 1.0, 1.0, 1.0));
        assert_eq!((a, cc), (c(4.0, 0.0), c(4.0, 0.0)));
    }

    #[test]
    fn interpolated_polynomial_matches_coefficients() {
        for p in [
            chain(1, 3, 0.0, 1.0, 2.0, 3.0, 4.0),
            chain(2, 2, 1.25, 1.0, -0.4, 3.0, 1.6),
            chain(3, 2, 0.8, 0.5, 1.5, -1.0, 0.7),
        ] {
            let (a, cc) = beta_quadratic_coeffs(&p);
            let sign = if (p.cell_dim() - 1) % 2 == 0 { 1.0 } else { -1.0 };
            let [qa, _, qc] = beta_polynomial(&p, c(0.3, -0.2)).unwrap();
            assert!((qa - sign * a).norm() < 1e-10, "{qa} vs {a}");
            assert!((qc - sign * cc).norm() < 1e-10, "{qc} vs {cc}");
        }
    }

    #[test]
    fn roots_are_ordered_and_multiply_to_c_over_a() {
        let p = chain(2, 2, 1.25, 1.0, -0.4, 3.0, 1.6);
        let (a, cc) = beta_quadratic_coeffs(&p);
        let e = c(0.7, 0.1);
        let (b1, b2) = beta_roots(&p, e).unwrap();
        assert!(b1.norm() <= b2.norm());
        assert!((b1 * b2 - cc / a).norm() < 1e-10);
        for b in [b1, b2] {
            assert!(bulk_determinant(&p, e, b).unwrap().norm() < 1e-9);
        }
    }

    #[test]
    fn singular_leading_coefficient() {
        let p = chain(1, 3, 0.0, 1.0, 2.0, 0.0, 4.0);
        assert!(matches!(beta_roots(&p, c(0.1, 0.0)), Err(NhError::Singular(_))));
        assert!(matches!(gbz_radius(&p), Err(NhError::Singular(_))));
    }

    #[test]
    fn radius_examples() {
        let mut hn = chain(1, 3, 0.0, 1.0, 2.0, 0.0, 0.0);
        CouplingPreset::reciprocal(2.0).apply(&mut hn).unwrap();
        assert!((gbz_radius(&hn).unwrap() - 1.0).abs() < 1e-15);
        hn.jr = c(-2.0, 0.0);
        assert!((gbz_radius(&hn).unwrap() - 1.0).abs() < 1e-15);

        let mut ssh = chain(2, 2, 2.0, 1.0, -1.5, 0.0, 0.0);
        CouplingPreset::shifted(0.5).apply(&mut ssh).unwrap();
        assert!((gbz_radius(&ssh).unwrap() - 1.0).abs() < 1e-15);

        let p = chain(1, 2, 0.0, 1.0, 2.0, 1.0, 1.0);
        assert!((gbz_radius(&p).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn residual_examples() {
        let p = chain(1, 3, 0.0, 1.0, -0.2, 0.012, 0.3);
        assert!(point_gap_residual(&p).unwrap() < 1e-12);
        let mut nm = chain(1, 3, 0.0, 1.0, -1.0, 0.0, 0.0);
        CouplingPreset::non_modular().apply(&mut nm).unwrap();
        assert!(point_gap_residual(&nm).unwrap() < 1e-15);
        let p = chain(1, 2, 0.0, 1.0, 2.0, 0.7, 0.7);
        assert!((point_gap_residual(&p).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn determinant_on_unit_circle_is_bloch() {
        let p = chain(2, 2, 1.25, 1.0, -0.4, 3.0, 1.6);
        let e = c(0.2, 0.4);
        for k in [0.0, 1.0, 2.5] {
            let det = bulk_determinant(&p, e, Complex64::from_polar(1.0, k)).unwrap();
            let direct = build_bloch(&p, k).shifted(e).determinant();
            assert!((det - direct).norm() < 1e-12);
        }
    }

    #[test]
    fn contour_shape() {
        let g = GbzContour::new(1.7, 64).unwrap();
        assert!(g.points.iter().all(|z| (z.norm() - 1.7).abs() < 1e-12));
        assert!(g.phis().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(g.refined().n_points(), 128);
        assert!(GbzContour::new(1.0, 63).is_err());
        assert!(GbzContour::new(0.0, 64).is_err());
    }
}
