//! Fisher information of the steady state with respect to model couplings.
//!
//! State derivatives are central differences of gauge-aligned steady states:
//! both stencil states are rotated so that `⟨ψ(θ)|ψ(θ ± h)⟩` is real positive
//! before differencing.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{NhError, Result};
use crate::linalg::{inner, norm, ComplexMatrix, ZERO};
use crate::model::{build_current_operator, build_hamiltonian_with_cap, Boundary, ModelConfig, ModelParams, DEFAULT_DIM_CAP};
use crate::par::{self, Execution};
use crate::spectral::{fix_phase, full_spectrum_with_tol, steady_state_index, DEFAULT_TOL_EIG};

pub use crate::model::ParamLabel;

pub const DEFAULT_STEP: f64 = 1e-5;
/// Outcomes with probability below this are left out of classical sums.
pub const PROBABILITY_FLOOR: f64 = 1e-14;
/// Stencil states overlapping the base state less than this signal a level switch.
const MIN_STENCIL_OVERLAP: f64 = 0.9;

/// Parameters being estimated, their base values and finite-difference steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub labels: Vec<ParamLabel>,
    pub values: Vec<f64>,
    pub steps: Vec<f64>,
}

impl ParamSpec {
    pub fn new(labels: Vec<ParamLabel>, values: Vec<f64>, steps: Vec<f64>) -> Result<Self> {
        let l = labels.len();
        if !(1..=3).contains(&l) {
            return Err(NhError::InvalidParams(format!("between 1 and 3 parameters allowed, got {l}")));
        }
        if values.len() != l || steps.len() != l {
            return Err(NhError::InvalidParams("labels, values and steps differ in length".into()));
        }
        for (i, a) in labels.iter().enumerate() {
            if labels[..i].contains(a) {
                return Err(NhError::InvalidParams(format!("parameter {a} listed twice")));
            }
        }
        if steps.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err(NhError::InvalidParams("finite-difference steps must be positive".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(NhError::InvalidParams("parameter values must be finite".into()));
        }
        Ok(Self { labels, values, steps })
    }

    /// Spec at the current values of `cfg`, same step for every label.
    pub fn at(cfg: &ModelConfig, labels: &[ParamLabel], step: f64) -> Result<Self> {
        let values = labels.iter().map(|&l| cfg.get(l)).collect::<Result<Vec<_>>>()?;
        Self::new(labels.to_vec(), values, vec![step; labels.len()])
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Anything mapping a real parameter vector to a Hamiltonian.
pub trait ParametricHamiltonian: Sync {
    fn hamiltonian(&self, theta: &[f64]) -> Result<ComplexMatrix>;
}

impl<F> ParametricHamiltonian for F
where
    F: Fn(&[f64]) -> Result<ComplexMatrix> + Sync,
{
    fn hamiltonian(&self, theta: &[f64]) -> Result<ComplexMatrix> {
        self(theta)
    }
}

/// OBC lattice Hamiltonian as a function of the labelled couplings.
#[derive(Clone, Debug)]
pub struct ModelFamily {
    pub config: ModelConfig,
    pub labels: Vec<ParamLabel>,
    pub dim_cap: usize,
}

impl ModelFamily {
    pub fn new(config: &ModelConfig, labels: &[ParamLabel]) -> Self {
        Self {
            config: config.with_boundary(Boundary::Obc),
            labels: labels.to_vec(),
            dim_cap: DEFAULT_DIM_CAP,
        }
    }

    pub fn params_at(&self, theta: &[f64]) -> Result<ModelParams> {
        let mut cfg = self.config.clone();
        for (&label, &value) in self.labels.iter().zip(theta) {
            cfg = cfg.with(label, value)?;
        }
        cfg.resolve()
    }
}

impl ParametricHamiltonian for ModelFamily {
    fn hamiltonian(&self, theta: &[f64]) -> Result<ComplexMatrix> {
        build_hamiltonian_with_cap(&self.params_at(theta)?, self.dim_cap)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepPolicy {
    /// Plain central difference at the spec step.
    Fixed,
    /// `(4·D(h/2) − D(h))/3`.
    Richardson,
    /// Halve the step until successive differences shrink by a factor in
    /// `[3.5, 4.5]` (or fall below noise), at most `max_halvings` times.
    Adaptive { max_halvings: usize },
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy::Adaptive { max_halvings: 4 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FisherOptions {
    pub policy: StepPolicy,
    pub tol_eig: f64,
    pub exec: Execution,
}

impl Default for FisherOptions {
    fn default() -> Self {
        Self {
            policy: StepPolicy::default(),
            tol_eig: DEFAULT_TOL_EIG,
            exec: Execution::default(),
        }
    }
}

impl FisherOptions {
    pub fn fixed() -> Self {
        Self {
            policy: StepPolicy::Fixed,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug)]
struct Solved {
    state: Vec<Complex64>,
    max_residual: f64,
    /// Distance from the steady eigenvalue to the rest of the spectrum.
    isolation: f64,
}

fn solve(family: &dyn ParametricHamiltonian, theta: &[f64], tol_eig: f64) -> Result<(Solved, ComplexMatrix)> {
    let h = family.hamiltonian(theta)?;
    let dec = full_spectrum_with_tol(&h, tol_eig)?;
    let idx = steady_state_index(&dec).ok_or_else(|| NhError::Domain("empty Hamiltonian".into()))?;
    let value = dec.values[idx];
    let isolation = dec
        .values
        .iter()
        .enumerate()
        .filter(|&(m, _)| m != idx)
        .map(|(_, z)| (z - value).norm())
        .fold(f64::INFINITY, f64::min);
    let state = fix_phase(dec.vectors[idx].clone());
    Ok((
        Solved {
            state,
            max_residual: dec.max_residual(),
            isolation,
        },
        h,
    ))
}

/// Gauge-fixed steady state of `family` at `theta`.
pub fn steady_state_at(family: &dyn ParametricHamiltonian, theta: &[f64], tol_eig: f64) -> Result<Vec<Complex64>> {
    Ok(solve(family, theta, tol_eig)?.0.state)
}

/// Steady state of the OBC lattice at `ps.values + shift`.
pub fn probe_state(cfg: &ModelConfig, ps: &ParamSpec, shift: &[f64]) -> Result<Vec<Complex64>> {
    if shift.len() != ps.len() {
        return Err(NhError::InvalidParams("shift length differs from parameter count".into()));
    }
    let theta: Vec<f64> = ps.values.iter().zip(shift).map(|(v, s)| v + s).collect();
    steady_state_at(&ModelFamily::new(cfg, &ps.labels), &theta, DEFAULT_TOL_EIG)
}

/// `(ψ₊ − ψ₋)/2h` after rotating each stencil state onto `ψ₀`.
pub fn central_difference(psi0: &[Complex64], plus: &[Complex64], minus: &[Complex64], h: f64) -> Result<Vec<Complex64>> {
    let align = |v: &[Complex64]| -> Result<Vec<Complex64>> {
        let o = inner(psi0, v);
        if o.norm() < MIN_STENCIL_OVERLAP * norm(psi0) * norm(v) {
            return Err(NhError::DerivativeIllDefined {
                label: String::new(),
                reason: format!("stencil state overlaps the base state by only {:.3}", o.norm()),
            });
        }
        let phase = o.conj() / o.norm();
        Ok(v.iter().map(|z| z * phase).collect())
    };
    let (p, m) = (align(plus)?, align(minus)?);
    Ok(p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct Derivative {
    pub vector: Vec<Complex64>,
    /// Finest step used.
    pub step: f64,
    /// Ratio of successive step-halving differences, when measured.
    pub order_ratio: Option<f64>,
}

fn max_row_sum(m: &ComplexMatrix) -> f64 {
    (0..m.dim())
        .map(|i| m.row(i).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn difference_at(
    family: &dyn ParametricHamiltonian,
    theta: &[f64],
    base: &Solved,
    i: usize,
    h: f64,
    tol_eig: f64,
) -> Result<Vec<Complex64>> {
    let mut tp = theta.to_vec();
    let mut tm = theta.to_vec();
    tp[i] += h;
    tm[i] -= h;
    let (plus, hp) = solve(family, &tp, tol_eig)?;
    let (minus, hm) = solve(family, &tm, tol_eig)?;
    let dh = max_row_sum(&hp.sub(&hm)) / (2.0 * h);
    if base.isolation <= 10.0 * h * dh {
        return Err(NhError::DerivativeIllDefined {
            label: String::new(),
            reason: format!(
                "steady eigenvalue isolation {:e} below 10·h·‖∂H‖ = {:e}",
                base.isolation,
                10.0 * h * dh
            ),
        });
    }
    central_difference(&base.state, &plus.state, &minus.state, h)
}

fn diff_norm(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

fn derivative_with_base(
    family: &dyn ParametricHamiltonian,
    theta: &[f64],
    base: &Solved,
    i: usize,
    h: f64,
    opts: &FisherOptions,
) -> Result<Derivative> {
    let d = |step: f64| difference_at(family, theta, base, i, step, opts.tol_eig);
    match opts.policy {
        StepPolicy::Fixed => Ok(Derivative {
            vector: d(h)?,
            step: h,
            order_ratio: None,
        }),
        StepPolicy::Richardson => {
            let (d1, d2) = (d(h)?, d(h / 2.0)?);
            Ok(Derivative {
                vector: d1.iter().zip(&d2).map(|(a, b)| (4.0 * b - a) / 3.0).collect(),
                step: h / 2.0,
                order_ratio: None,
            })
        }
        StepPolicy::Adaptive { max_halvings } => {
            let mut step = h;
            let mut coarse = d(step)?;
            let mut mid = d(step / 2.0)?;
            let mut last_ratio = None;
            for _ in 0..=max_halvings {
                let fine = d(step / 4.0)?;
                let e1 = diff_norm(&coarse, &mid);
                let e2 = diff_norm(&mid, &fine);
                let scale = norm(&fine).max(f64::MIN_POSITIVE);
                let ratio = if e2 > 0.0 { e1 / e2 } else { f64::INFINITY };
                last_ratio = Some(ratio);
                if e1 <= 1e-7 * scale || (3.5..=4.5).contains(&ratio) {
                    return Ok(Derivative {
                        vector: fine,
                        step: step / 4.0,
                        order_ratio: Some(ratio),
                    });
                }
                if e2 <= 1e-7 * scale {
                    return Ok(Derivative {
                        vector: fine,
                        step: step / 4.0,
                        order_ratio: Some(ratio),
                    });
                }
                step /= 2.0;
                coarse = mid;
                mid = fine;
            }
            let e = diff_norm(&coarse, &mid);
            if e <= 1e-3 * norm(&mid) {
                Ok(Derivative {
                    vector: mid,
                    step: step / 2.0,
                    order_ratio: last_ratio,
                })
            } else {
                Err(NhError::DerivativeIllDefined {
                    label: String::new(),
                    reason: format!("finite differences did not converge (last ratio {last_ratio:?})"),
                })
            }
        }
    }
}

fn label_error(e: NhError, label: String) -> NhError {
    match e {
        NhError::DerivativeIllDefined { reason, .. } => NhError::DerivativeIllDefined { label, reason },
        other => other,
    }
}

/// `∂ψ/∂θ_i` of the steady state of `family` at `theta`.
pub fn state_derivative_of(
    family: &dyn ParametricHamiltonian,
    theta: &[f64],
    i: usize,
    h: f64,
    opts: &FisherOptions,
) -> Result<Derivative> {
    if i >= theta.len() {
        return Err(NhError::InvalidParams(format!("parameter index {i} out of range")));
    }
    let (base, _) = solve(family, theta, opts.tol_eig)?;
    derivative_with_base(family, theta, &base, i, h, opts).map_err(|e| label_error(e, format!("θ{i}")))
}

/// `∂ψ/∂θ_i` of the lattice steady state, `θ_i = ps.labels[i]`.
pub fn state_derivative(cfg: &ModelConfig, ps: &ParamSpec, i: usize, opts: &FisherOptions) -> Result<Derivative> {
    let family = ModelFamily::new(cfg, &ps.labels);
    state_derivative_of(&family, &ps.values, i, ps.steps[i], opts)
        .map_err(|e| label_error(e, ps.labels[i].to_string()))
}

/// Base state and all first derivatives.
///
/// Also returns the largest eigenpair residual of the base decomposition.
pub fn state_and_derivatives(
    family: &dyn ParametricHamiltonian,
    theta: &[f64],
    steps: &[f64],
    opts: &FisherOptions,
) -> Result<(Vec<Complex64>, Vec<Derivative>, f64)> {
    let (base, _) = solve(family, theta, opts.tol_eig)?;
    let indices: Vec<usize> = (0..theta.len()).collect();
    let derivs = par::map(opts.exec, &indices, |&i| {
        derivative_with_base(family, theta, &base, i, steps[i], opts).map_err(|e| label_error(e, format!("θ{i}")))
    });
    let derivs = derivs.into_iter().collect::<Result<Vec<_>>>()?;
    Ok((base.state, derivs, base.max_residual))
}

fn negativity_tol(scale: f64) -> f64 {
    1e-9 * scale.max(1.0)
}

/// `4(⟨∂ψ|∂ψ⟩ − |⟨∂ψ|ψ⟩|²)`.
pub fn qfi(psi: &[Complex64], dpsi: &[Complex64]) -> Result<f64> {
    let dd = inner(dpsi, dpsi).re;
    let value = 4.0 * (dd - inner(dpsi, psi).norm_sqr());
    if value < -negativity_tol(4.0 * dd) {
        return Err(NhError::NumericalInconsistency(format!("negative QFI {value:e}")));
    }
    Ok(value.max(0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FisherKind {
    Quantum,
    Classical,
}

/// Real symmetric positive-semidefinite Fisher matrix.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FisherMatrix {
    pub entries: Vec<Vec<f64>>,
    pub kind: FisherKind,
    pub basis_label: String,
    pub param_spec: Option<ParamSpec>,
}

impl FisherMatrix {
    /// Checks symmetry and positive semidefiniteness.
    pub fn new(entries: Vec<Vec<f64>>, kind: FisherKind, basis_label: impl Into<String>) -> Result<Self> {
        let l = entries.len();
        if entries.iter().any(|r| r.len() != l) {
            return Err(NhError::Domain("Fisher matrix must be square".into()));
        }
        let f = Self {
            entries,
            kind,
            basis_label: basis_label.into(),
            param_spec: None,
        };
        let scale = f.max_abs();
        for i in 0..l {
            for j in 0..i {
                if (f.entries[i][j] - f.entries[j][i]).abs() > 1e-9 * scale.max(1.0) {
                    return Err(NhError::NumericalInconsistency(format!(
                        "Fisher matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let min = f.eigenvalues()?.first().copied().unwrap_or(0.0);
        if min < -negativity_tol(scale) {
            return Err(NhError::NumericalInconsistency(format!(
                "Fisher matrix has negative eigenvalue {min:e}"
            )));
        }
        Ok(f)
    }

    pub fn with_spec(mut self, spec: ParamSpec) -> Self {
        self.param_spec = Some(spec);
        self
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i][j]
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max)
    }

    fn as_complex(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.dim(), |i, j| Complex64::new(self.entries[i][j], 0.0))
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        if self.dim() == 0 {
            return Ok(Vec::new());
        }
        Ok(self.as_complex().hermitian_eigen()?.0)
    }

    pub fn determinant(&self) -> f64 {
        self.as_complex().determinant().re
    }

    /// Largest eigenvalue of `self − other`.
    pub fn max_excess_over(&self, other: &FisherMatrix) -> Result<f64> {
        let l = self.dim();
        let diff = ComplexMatrix::from_fn(l, |i, j| Complex64::new(self.entries[i][j] - other.entries[i][j], 0.0));
        Ok(diff.hermitian_eigen()?.0.last().copied().unwrap_or(0.0))
    }
}

/// `4 Re(⟨∂_i ψ|∂_j ψ⟩ − ⟨∂_i ψ|ψ⟩⟨ψ|∂_j ψ⟩)`.
pub fn qfim(psi: &[Complex64], dpsi: &[Vec<Complex64>]) -> Result<FisherMatrix> {
    let l = dpsi.len();
    let proj: Vec<Complex64> = dpsi.iter().map(|d| inner(d, psi)).collect();
    let entries = (0..l)
        .map(|i| {
            (0..l)
                .map(|j| 4.0 * (inner(&dpsi[i], &dpsi[j]) - proj[i] * proj[j].conj()).re)
                .collect()
        })
        .collect();
    FisherMatrix::new(entries, FisherKind::Quantum, "quantum")
}

/// Orthonormal measurement basis.
#[derive(Clone, Debug)]
pub struct Povm {
    vectors: Vec<Vec<Complex64>>,
    pub label: String,
    standard: bool,
}

impl Povm {
    /// Validates orthonormality (1e−10) and completeness.
    pub fn new(vectors: Vec<Vec<Complex64>>, label: impl Into<String>) -> Result<Self> {
        let n = vectors.len();
        if vectors.iter().any(|v| v.len() != n) {
            return Err(NhError::Domain("a complete basis needs D vectors of length D".into()));
        }
        for i in 0..n {
            for j in 0..=i {
                let expected = if i == j { 1.0 } else { 0.0 };
                if (inner(&vectors[i], &vectors[j]) - Complex64::new(expected, 0.0)).norm() > 1e-10 {
                    return Err(NhError::Domain(format!("basis vectors {i} and {j} are not orthonormal")));
                }
            }
        }
        Ok(Self {
            vectors,
            label: label.into(),
            standard: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[Vec<Complex64>] {
        &self.vectors
    }

    /// `⟨s|v⟩` for every outcome `s`.
    pub fn amplitudes(&self, v: &[Complex64]) -> Vec<Complex64> {
        if self.standard {
            v.to_vec()
        } else {
            self.vectors.iter().map(|s| inner(s, v)).collect()
        }
    }
}

/// Projectors onto the lattice basis states.
pub fn position_basis(dim: usize) -> Povm {
    Povm {
        vectors: (0..dim)
            .map(|k| (0..dim).map(|i| if i == k { Complex64::new(1.0, 0.0) } else { ZERO }).collect())
            .collect(),
        label: "position".into(),
        standard: true,
    }
}

/// Eigenbasis of the total current operator.
pub fn current_basis(p: &ModelParams) -> Result<Povm> {
    let (_, vectors) = build_current_operator(p)?.hermitian_eigen()?;
    Povm::new(vectors, "current")
}

/// `Σ_s (∂_i p_s)(∂_j p_s)/p_s` over outcomes above the probability floor.
pub fn cfim(psi: &[Complex64], dpsi: &[Vec<Complex64>], basis: &Povm) -> Result<FisherMatrix> {
    let amps = basis.amplitudes(psi);
    let damps: Vec<Vec<Complex64>> = dpsi.iter().map(|d| basis.amplitudes(d)).collect();
    let l = dpsi.len();
    let mut entries = vec![vec![0.0; l]; l];
    for (s, a) in amps.iter().enumerate() {
        let ps = a.norm_sqr();
        if ps < PROBABILITY_FLOOR {
            continue;
        }
        let dp: Vec<f64> = damps.iter().map(|d| 2.0 * (a.conj() * d[s]).re).collect();
        for i in 0..l {
            for j in 0..l {
                entries[i][j] += dp[i] * dp[j] / ps;
            }
        }
    }
    FisherMatrix::new(entries, FisherKind::Classical, basis.label.clone())
}

pub fn cfi(psi: &[Complex64], dpsi: &[Complex64], basis: &Povm) -> f64 {
    cfim(psi, &[dpsi.to_vec()], basis).map(|f| f.get(0, 0)).unwrap_or(f64::NAN)
}

/// `Tr(F⁻¹)`, the single-shot bound on the summed variances.
pub fn total_variance_bound(f: &FisherMatrix) -> Result<f64> {
    let eig = f.eigenvalues()?;
    let (min, max) = match (eig.first(), eig.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(NhError::Domain("empty Fisher matrix".into())),
    };
    if !(max > 0.0) || min <= 1e-12 * max {
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        return Err(NhError::BoundUndefined { condition });
    }
    Ok(eig.iter().map(|x| 1.0 / x).sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisChoice {
    Position,
    Current,
}

#[derive(Clone, Debug, Serialize)]
pub struct FisherReport {
    pub qfim: FisherMatrix,
    pub cfim: Vec<FisherMatrix>,
    pub state: Vec<Complex64>,
    pub derivatives: Vec<Derivative>,
    /// Largest eigenpair residual at the base point.
    pub max_residual: f64,
}

/// QFIM and the requested CFIMs of the lattice steady state at `ps`.
pub fn fisher_information(
    cfg: &ModelConfig,
    ps: &ParamSpec,
    bases: &[BasisChoice],
    opts: &FisherOptions,
) -> Result<FisherReport> {
    let family = ModelFamily::new(cfg, &ps.labels);
    let (state, derivatives, max_residual) = state_and_derivatives(&family, &ps.values, &ps.steps, opts).map_err(|e| match e {
        NhError::DerivativeIllDefined { label, reason } => {
            let idx = label.trim_start_matches('θ').parse::<usize>().ok();
            let label = idx.and_then(|i| ps.labels.get(i)).map_or(label, |l| l.to_string());
            NhError::DerivativeIllDefined { label, reason }
        }
        other => other,
    })?;
    let dpsi: Vec<Vec<Complex64>> = derivatives.iter().map(|d| d.vector.clone()).collect();
    let q = qfim(&state, &dpsi)?.with_spec(ps.clone());
    let p = family.params_at(&ps.values)?;
    let mut classical = Vec::with_capacity(bases.len());
    for b in bases {
        let povm = match b {
            BasisChoice::Position => position_basis(p.dim()),
            BasisChoice::Current => current_basis(&p)?,
        };
        classical.push(cfim(&state, &dpsi, &povm)?.with_spec(ps.clone()));
    }
    Ok(FisherReport {
        qfim: q,
        cfim: classical,
        state,
        derivatives,
        max_residual,
    })
}

/// Single-parameter QFI of the lattice steady state.
pub fn qfi_at(cfg: &ModelConfig, label: ParamLabel, step: f64, opts: &FisherOptions) -> Result<f64> {
    let ps = ParamSpec::at(cfg, &[label], step)?;
    let report = fisher_information(cfg, &ps, &[], opts)?;
    Ok(report.qfim.get(0, 0))
}
