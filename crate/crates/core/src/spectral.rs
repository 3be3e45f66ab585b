//! Dense eigenproblems for non-normal matrices and skin-effect diagnostics.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{NhError, Result};
use crate::linalg::{inner, normalize, ComplexMatrix};
use crate::model::{build_hamiltonian, Boundary, ModelParams};

/// Default relative residual bound: `‖Hv − λv‖ ≤ tol · ‖H‖_F`.
pub const DEFAULT_TOL_EIG: f64 = 1e-9;

#[derive(Clone, Debug, Serialize)]
pub struct SpectralDecomposition {
    pub values: Vec<Complex64>,
    /// Unit-norm right eigenvectors, `vectors[m]` belongs to `values[m]`.
    pub vectors: Vec<Vec<Complex64>>,
    pub residuals: Vec<f64>,
}

impl SpectralDecomposition {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Diagonal similarity `s` with `S⁻¹ H S` better conditioned than `H`.
///
/// For tridiagonal input the gauge equalizes the moduli of every bond pair
/// exactly; otherwise a few Osborne sweeps with power-of-two factors.
fn balancing_scales(h: &ComplexMatrix) -> Vec<f64> {
    if h.is_tridiagonal() {
        let n = h.dim();
        let mut log_s = vec![0.0; n];
        for i in 0..n.saturating_sub(1) {
            let up = h[(i, i + 1)].norm();
            let down = h[(i + 1, i)].norm();
            let step = if up > 0.0 && down > 0.0 {
                0.5 * (down.ln() - up.ln())
            } else {
                0.0
            };
            log_s[i + 1] = log_s[i] + step;
        }
        let (lo, hi) = log_s
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        if hi - lo < 1200.0 {
            let mid = 0.5 * (lo + hi);
            return log_s.iter().map(|x| (x - mid).exp()).collect();
        }
    }
    osborne(h)
}

fn osborne(h: &ComplexMatrix) -> Vec<f64> {
    let n = h.dim();
    let mut s = vec![1.0; n];
    for _ in 0..100 {
        let mut converged = true;
        for i in 0..n {
            let mut col = 0.0;
            let mut row = 0.0;
            for j in 0..n {
                if j != i {
                    col += h[(j, i)].norm() * s[i] / s[j];
                    row += h[(i, j)].norm() * s[j] / s[i];
                }
            }
            if col == 0.0 || row == 0.0 {
                continue;
            }
            let mut f = 1.0;
            let total = col + row;
            let (mut c, mut r) = (col, row);
            while c < r / 2.0 {
                c *= 2.0;
                r /= 2.0;
                f *= 2.0;
            }
            while c >= r * 2.0 {
                c /= 2.0;
                r *= 2.0;
                f /= 2.0;
            }
            if (c + r) < 0.95 * total {
                converged = false;
                s[i] *= f;
            }
        }
        if converged {
            break;
        }
    }
    s
}

pub fn full_spectrum(h: &ComplexMatrix) -> Result<SpectralDecomposition> {
    full_spectrum_with_tol(h, DEFAULT_TOL_EIG)
}

/// All eigenpairs, sorted by `(Im λ desc, Re λ desc)`.
pub fn full_spectrum_with_tol(h: &ComplexMatrix, tol_eig: f64) -> Result<SpectralDecomposition> {
    let n = h.dim();
    if !h.is_finite() {
        return Err(NhError::Domain("matrix has non-finite entries".into()));
    }
    let s = balancing_scales(h);
    let balanced = ComplexMatrix::from_fn(n, |i, j| h[(i, j)] * (s[j] / s[i]));
    let evd = balanced.to_faer().eigen().map_err(|e| NhError::Convergence {
        dim: n,
        reason: format!("{e:?}"),
        max_residual: f64::NAN,
        bound: f64::NAN,
    })?;
    let u = evd.U();
    let lambda = evd.S().column_vector();

    let mut pairs: Vec<(Complex64, Vec<Complex64>)> = (0..n)
        .map(|k| {
            let mut v: Vec<Complex64> = (0..n).map(|i| u[(i, k)] * s[i]).collect();
            normalize(&mut v);
            (lambda[k], v)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.im.total_cmp(&a.0.im).then(b.0.re.total_cmp(&a.0.re)));

    let bound = tol_eig * h.frobenius_norm().max(f64::MIN_POSITIVE);
    let mut residuals = Vec::with_capacity(n);
    for (value, v) in pairs.iter_mut() {
        let mut r = residual(h, *value, v);
        if !(r <= bound) {
            let refined = inverse_iteration(&balanced, &s, *value, v);
            let r2 = residual(h, *value, &refined);
            if r2 < r || !r.is_finite() {
                *v = refined;
                r = r2;
            }
        }
        if !r.is_finite() || r > bound {
            return Err(NhError::Convergence {
                dim: n,
                reason: format!("eigenpair residual for λ = {value} above bound"),
                max_residual: r,
                bound,
            });
        }
        residuals.push(r);
    }
    let (values, vectors) = pairs.into_iter().unzip();
    Ok(SpectralDecomposition {
        values,
        vectors,
        residuals,
    })
}

fn residual(h: &ComplexMatrix, value: Complex64, v: &[Complex64]) -> f64 {
    h.mul_vec(v)
        .iter()
        .zip(v)
        .map(|(a, b)| (a - b * value).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Eigenvector of `λ` by shifted inverse iteration on the balanced matrix,
/// returned in the original gauge and normalised.
///
/// Used when the dense solver's vector misses the residual bound, which
/// happens for nearly degenerate eigenvalues of strongly non-normal input.
fn inverse_iteration(balanced: &ComplexMatrix, s: &[f64], value: Complex64, start: &[Complex64]) -> Vec<Complex64> {
    let n = balanced.dim();
    let scale = balanced.frobenius_norm().max(f64::MIN_POSITIVE);
    let shift = value + Complex64::new(1e-13, 1e-13) * scale;
    let lu = balanced.shifted(shift).lu(1e-300 * scale);
    let mut x: Vec<Complex64> = (0..n)
        .map(|i| start[i] / s[i] + Complex64::from_polar(1.0 / (n as f64).sqrt(), i as f64))
        .collect();
    normalize(&mut x);
    for _ in 0..3 {
        x = lu.solve(&x);
        normalize(&mut x);
    }
    let mut v: Vec<Complex64> = x.iter().zip(s).map(|(z, si)| z * si).collect();
    normalize(&mut v);
    v
}

/// Index of the steady state: largest `Im λ`, ties broken by largest `Re λ`
/// and then the lowest index.
///
/// Eigenvalues whose imaginary parts agree to within `1e-9·max|λ|` count as
/// tied, so that mirror pairs `±x + iy` resolve deterministically.
pub fn steady_state_index(dec: &SpectralDecomposition) -> Option<usize> {
    let scale = dec.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let tol = 1e-9 * scale.max(1e-300);
    let top = dec.values.iter().map(|z| z.im).fold(f64::NEG_INFINITY, f64::max);
    let mut best: Option<usize> = None;
    for (i, z) in dec.values.iter().enumerate() {
        if z.im < top - tol {
            continue;
        }
        match best {
            Some(b) if dec.values[b].re >= z.re => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Steady state with its phase fixed: the largest-modulus component is real
/// and non-negative.
pub fn steady_state(dec: &SpectralDecomposition) -> Result<Vec<Complex64>> {
    let idx = steady_state_index(dec)
        .ok_or_else(|| NhError::Domain("empty spectral decomposition".into()))?;
    Ok(fix_phase(dec.vectors[idx].clone()))
}

/// Rotates `v` so its largest-modulus component (first one on ties) is real positive.
pub fn fix_phase(mut v: Vec<Complex64>) -> Vec<Complex64> {
    let mut k = 0;
    let mut best = -1.0;
    for (i, z) in v.iter().enumerate() {
        let m = z.norm();
        if m > best * (1.0 + 1e-12) {
            best = m;
            k = i;
        }
    }
    if best > 0.0 {
        let phase = v[k].conj() / v[k].norm();
        v.iter_mut().for_each(|z| *z *= phase);
        v[k] = Complex64::new(v[k].norm(), 0.0);
    }
    v
}

#[derive(Clone, Debug, Serialize)]
pub struct LocalizationProfile {
    /// Cumulative population per site, `N = r·L` entries.
    pub p: Vec<f64>,
    /// Slope of `ln(Σ_{sites in module n} P)` against `n` over the bulk.
    pub slope_per_module: f64,
    pub fit_r2: f64,
}

/// `P_j = Σ_m Σ_ν |ψ_m(j, ν)|²` and the bulk slope of its per-module log.
///
/// The outer 10% of modules on each side (at least one) are left out of the
/// fit.
pub fn cumulative_population(dec: &SpectralDecomposition, p: &ModelParams) -> Result<LocalizationProfile> {
    if dec.vectors.iter().any(|v| v.len() != p.dim()) {
        return Err(NhError::Domain(format!(
            "eigenvectors do not match the model dimension {}",
            p.dim()
        )));
    }
    let mut pops = vec![0.0; p.sites()];
    for v in &dec.vectors {
        for (idx, z) in v.iter().enumerate() {
            pops[idx / p.d] += z.norm_sqr();
        }
    }
    let per_module: Vec<f64> = pops.chunks(p.r).map(|c| c.iter().sum()).collect();
    let skip = ((p.l as f64) * 0.1).floor().max(1.0) as usize;
    let bulk: Vec<(f64, f64)> = (skip..p.l.saturating_sub(skip))
        .map(|n| (n as f64, per_module[n].max(f64::MIN_POSITIVE).ln()))
        .collect();
    let (slope, _, r2) = if bulk.len() >= 2 {
        linear_fit(&bulk)
    } else {
        (0.0, 0.0, 1.0)
    };
    Ok(LocalizationProfile {
        p: pops,
        slope_per_module: slope,
        fit_r2: r2,
    })
}

/// Convenience: OBC decomposition of `p` and its profile.
pub fn skin_profile(p: &ModelParams) -> Result<LocalizationProfile> {
    let obc = p.with_boundary(Boundary::Obc);
    let dec = full_spectrum(&build_hamiltonian(&obc)?)?;
    cumulative_population(&dec, &obc)
}

/// Least squares `y = slope·x + intercept`; returns `(slope, intercept, r²)`.
pub(crate) fn linear_fit(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 {
        ((sxy * sxy) / (sxx * syy)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    (slope, intercept, r2)
}

/// `1 / Σ|v_j|⁴` of the normalized vector.
pub fn participation_ratio(v: &[Complex64]) -> f64 {
    let n2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    if n2 == 0.0 {
        return 0.0;
    }
    let q: f64 = v.iter().map(|z| (z.norm_sqr() / n2).powi(2)).sum();
    1.0 / q
}

/// Greedy maximal-overlap assignment of `next` eigenvectors onto `previous`
/// ones: `result[i]` is the index in `next` continuing `previous[i]`.
pub fn match_by_overlap(previous: &[Vec<Complex64>], next: &SpectralDecomposition) -> Vec<usize> {
    let mut scored: Vec<(f64, usize, usize)> = Vec::with_capacity(previous.len() * next.len());
    for (i, a) in previous.iter().enumerate() {
        for (j, b) in next.vectors.iter().enumerate() {
            scored.push((inner(a, b).norm(), i, j));
        }
    }
    scored.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut assigned = vec![usize::MAX; previous.len()];
    let mut taken = vec![false; next.len()];
    for (_, i, j) in scored {
        if assigned[i] == usize::MAX && !taken[j] {
            assigned[i] = j;
            taken[j] = true;
        }
    }
    assigned
}

/// Smallest `|λ − z|` over the eigenvalues.
pub fn distance_to_spectrum(values: &[Complex64], z: Complex64) -> f64 {
    values.iter().map(|v| (v - z).norm()).fold(f64::INFINITY, f64::min)
}

/// Greedy sorted matching distance between two eigenvalue multisets.
pub fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let mut best = (f64::INFINITY, usize::MAX);
        for (j, y) in b.iter().enumerate() {
            if !used[j] {
                let d = (x - y).norm();
                if d < best.0 {
                    best = (d, j);
                }
            }
        }
        used[best.1] = true;
        worst = worst.max(best.0);
    }
    worst
}
