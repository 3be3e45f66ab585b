//! Parameter sweeps, peak refinement, power-law fits and figure presets.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{NhError, Result};
use crate::gbz::{point_gap_residual, point_gap_signed, GbzContour, DEFAULT_CONTOUR_POINTS};
use crate::metrology::{
    fisher_information, total_variance_bound, BasisChoice, FisherOptions, ParamSpec, StepPolicy, DEFAULT_STEP,
};
use crate::model::{
    build_hamiltonian, Boundary, CouplingPreset, ModelConfig, ModelParams, ParamLabel,
};
use crate::par::{self, Execution};
use crate::spectral::{cumulative_population, full_spectrum_with_tol, participation_ratio, steady_state};
use crate::topology::{band_winding_with, spectral_winding_with};

/// Largest tolerated fraction of failed sweep rows.
pub const MAX_FAILED_FRACTION: f64 = 0.1;
pub const PEAK_TOL: f64 = 1e-6;
pub const DEFAULT_L_GRID: [usize; 6] = [10, 20, 34, 50, 70, 100];
pub const MIN_FIT_POINTS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Observable {
    Qfi,
    CfiPosition,
    CfiCurrent,
    WindingBand,
    WindingSpectral,
    GapResidual,
    Slope,
    Pr,
}

impl Observable {
    pub const ALL: [Observable; 8] = [
        Observable::Qfi,
        Observable::CfiPosition,
        Observable::CfiCurrent,
        Observable::WindingBand,
        Observable::WindingSpectral,
        Observable::GapResidual,
        Observable::Slope,
        Observable::Pr,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Observable::Qfi => "QFI",
            Observable::CfiPosition => "CFI_POSITION",
            Observable::CfiCurrent => "CFI_CURRENT",
            Observable::WindingBand => "WINDING_BAND",
            Observable::WindingSpectral => "WINDING_SPECTRAL",
            Observable::GapResidual => "GAP_RESIDUAL",
            Observable::Slope => "SLOPE",
            Observable::Pr => "PR",
        }
    }

    fn needs_fisher(&self) -> bool {
        matches!(self, Observable::Qfi | Observable::CfiPosition | Observable::CfiCurrent)
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Observable {
    type Err = NhError;

    fn from_str(s: &str) -> Result<Self> {
        Observable::ALL
            .into_iter()
            .find(|o| o.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| NhError::Config(format!("unknown observable '{s}'")))
    }
}

/// Numerical settings shared by every grid point of a sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepOptions {
    pub fisher: FisherOptions,
    pub step: f64,
    pub contour_points: usize,
    pub n_k: usize,
    pub e_ref: Complex64,
    pub exec: Execution,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            fisher: FisherOptions {
                policy: StepPolicy::Fixed,
                exec: Execution::Sequential,
                ..FisherOptions::default()
            },
            step: DEFAULT_STEP,
            contour_points: DEFAULT_CONTOUR_POINTS,
            n_k: 512,
            e_ref: Complex64::new(0.0, 0.0),
            exec: Execution::Parallel,
        }
    }
}

impl SweepOptions {
    pub fn with_exec(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub base: ModelConfig,
    pub axis: ParamLabel,
    pub grid: Vec<f64>,
    pub observables: Vec<Observable>,
    pub options: SweepOptions,
}

impl SweepSpec {
    pub fn new(
        base: ModelConfig,
        axis: ParamLabel,
        grid: Vec<f64>,
        observables: Vec<Observable>,
        options: SweepOptions,
    ) -> Result<Self> {
        if grid.is_empty() {
            return Err(NhError::Domain("sweep grid is empty".into()));
        }
        if grid.iter().any(|x| !x.is_finite()) {
            return Err(NhError::Domain("sweep grid has non-finite values".into()));
        }
        let up = grid.windows(2).all(|w| w[0] < w[1]);
        let down = grid.windows(2).all(|w| w[0] > w[1]);
        if !(up || down) {
            return Err(NhError::Domain("sweep grid must be strictly monotone".into()));
        }
        if observables.is_empty() {
            return Err(NhError::Domain("no observables requested".into()));
        }
        for (i, o) in observables.iter().enumerate() {
            if observables[..i].contains(o) {
                return Err(NhError::Domain(format!("observable {o} requested twice")));
            }
        }
        base.get(axis)?;
        Ok(Self {
            base,
            axis,
            grid,
            observables,
            options,
        })
    }
}

/// `n` evenly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|i| if i == n - 1 { b } else { a + (b - a) * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub x: f64,
    /// NaN where the matching entry of `errors` is set.
    pub values: Vec<f64>,
    pub errors: Vec<Option<String>>,
}

impl SweepRow {
    pub fn failed(&self) -> bool {
        self.errors.iter().any(Option::is_some)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepTable {
    pub axis: ParamLabel,
    pub observables: Vec<Observable>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn column_index(&self, obs: Observable) -> Result<usize> {
        self.observables
            .iter()
            .position(|&o| o == obs)
            .ok_or_else(|| NhError::Domain(format!("column {obs} not in table")))
    }

    /// `(x, value)` pairs of the successful entries of `obs`.
    pub fn column(&self, obs: Observable) -> Result<Vec<(f64, f64)>> {
        let i = self.column_index(obs)?;
        Ok(self
            .rows
            .iter()
            .filter(|r| r.errors[i].is_none())
            .map(|r| (r.x, r.values[i]))
            .collect())
    }

    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.failed()).count()
    }
}

/// All requested observables at one parameter value.
pub fn evaluate_point(spec: &SweepSpec, x: f64) -> Vec<Result<f64>> {
    evaluate(&spec.base, spec.axis, x, &spec.observables, &spec.options)
}

fn evaluate(
    base: &ModelConfig,
    axis: ParamLabel,
    x: f64,
    observables: &[Observable],
    opts: &SweepOptions,
) -> Vec<Result<f64>> {
    let cfg = match base.with(axis, x).and_then(|c| c.resolve().map(|p| (c, p))) {
        Ok(v) => v,
        Err(e) => return observables.iter().map(|_| Err(clone_err(&e))).collect(),
    };
    let (cfg, p) = cfg;
    let obc = p.with_boundary(Boundary::Obc);

    let fisher = if observables.iter().any(Observable::needs_fisher) {
        let mut bases = Vec::new();
        if observables.contains(&Observable::CfiPosition) {
            bases.push(BasisChoice::Position);
        }
        if observables.contains(&Observable::CfiCurrent) {
            bases.push(BasisChoice::Current);
        }
        let report = ParamSpec::at(&cfg, &[axis], opts.step)
            .and_then(|ps| fisher_information(&cfg, &ps, &bases, &opts.fisher));
        Some(report.map(|r| {
            let pos = bases.iter().position(|b| *b == BasisChoice::Position);
            let cur = bases.iter().position(|b| *b == BasisChoice::Current);
            (
                r.qfim.get(0, 0),
                pos.map(|i| r.cfim[i].get(0, 0)),
                cur.map(|i| r.cfim[i].get(0, 0)),
            )
        }))
    } else {
        None
    };

    let needs_obc = observables.iter().any(|o| matches!(o, Observable::Slope | Observable::Pr));
    let obc_dec = needs_obc.then(|| build_hamiltonian(&obc).and_then(|h| full_spectrum_with_tol(&h, opts.fisher.tol_eig)));

    observables
        .iter()
        .map(|obs| -> Result<f64> {
            match obs {
                Observable::Qfi | Observable::CfiPosition | Observable::CfiCurrent => {
                    let (q, pos, cur) = match fisher.as_ref().expect("computed above") {
                        Ok(v) => *v,
                        Err(e) => return Err(clone_err(e)),
                    };
                    Ok(match obs {
                        Observable::Qfi => q,
                        Observable::CfiPosition => pos.expect("position basis requested"),
                        _ => cur.expect("current basis requested"),
                    })
                }
                Observable::WindingBand => {
                    let contour = GbzContour::for_model(&p, opts.contour_points)?;
                    Ok(band_winding_with(&p, &contour, Execution::Sequential)?.value as f64)
                }
                Observable::WindingSpectral => {
                    let pbc = p.with_boundary(Boundary::Pbc);
                    Ok(spectral_winding_with(&pbc, opts.e_ref, opts.n_k, Execution::Sequential)?.value as f64)
                }
                Observable::GapResidual => point_gap_residual(&p),
                Observable::Slope | Observable::Pr => {
                    let dec = match obc_dec.as_ref().expect("computed above") {
                        Ok(d) => d,
                        Err(e) => return Err(clone_err(e)),
                    };
                    if *obs == Observable::Slope {
                        Ok(cumulative_population(dec, &obc)?.slope_per_module)
                    } else {
                        Ok(participation_ratio(&steady_state(dec)?))
                    }
                }
            }
        })
        .collect()
}

/// Errors hold no shared resources except io; those are re-described.
fn clone_err(e: &NhError) -> NhError {
    match e {
        NhError::InvalidParams(s) => NhError::InvalidParams(s.clone()),
        NhError::DimensionCap { dim, cap } => NhError::DimensionCap { dim: *dim, cap: *cap },
        NhError::Domain(s) => NhError::Domain(s.clone()),
        NhError::Singular(s) => NhError::Singular(s.clone()),
        NhError::Unsupported(s) => NhError::Unsupported(s.clone()),
        NhError::Convergence {
            dim,
            reason,
            max_residual,
            bound,
        } => NhError::Convergence {
            dim: *dim,
            reason: reason.clone(),
            max_residual: *max_residual,
            bound: *bound,
        },
        NhError::IllConditionedContour { distance, tol } => NhError::IllConditionedContour {
            distance: *distance,
            tol: *tol,
        },
        NhError::AtTransition(s) => NhError::AtTransition(s.clone()),
        NhError::NonIntegerWinding { raw_phase } => NhError::NonIntegerWinding { raw_phase: *raw_phase },
        NhError::DerivativeIllDefined { label, reason } => NhError::DerivativeIllDefined {
            label: label.clone(),
            reason: reason.clone(),
        },
        NhError::NumericalInconsistency(s) => NhError::NumericalInconsistency(s.clone()),
        NhError::BoundUndefined { condition } => NhError::BoundUndefined { condition: *condition },
        NhError::TrackingAmbiguity { refinements } => NhError::TrackingAmbiguity {
            refinements: *refinements,
        },
        NhError::SweepFailed { failed, total } => NhError::SweepFailed {
            failed: *failed,
            total: *total,
        },
        other => NhError::NumericalInconsistency(other.to_string()),
    }
}

/// One row per grid point, in grid order.
///
/// Failed cells carry the error tag. More than 10% failed rows is an error.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable> {
    let rows = par::map(spec.options.exec, &spec.grid, |&x| {
        let cells = evaluate_point(spec, x);
        let mut values = Vec::with_capacity(cells.len());
        let mut errors = Vec::with_capacity(cells.len());
        for c in cells {
            match c {
                Ok(v) => {
                    values.push(v);
                    errors.push(None);
                }
                Err(e) => {
                    values.push(f64::NAN);
                    errors.push(Some(e.tag().to_string()));
                }
            }
        }
        SweepRow { x, values, errors }
    });
    let table = SweepTable {
        axis: spec.axis,
        observables: spec.observables.clone(),
        rows,
    };
    let failed = table.failed_rows();
    let total = table.rows.len();
    if failed as f64 > MAX_FAILED_FRACTION * total as f64 {
        return Err(NhError::SweepFailed { failed, total });
    }
    Ok(table)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Peak {
    pub location: f64,
    pub value: f64,
    /// Coarse maximum sat on the first or last grid point.
    pub boundary: bool,
    pub evaluations: usize,
}

/// Golden-section maximisation on `[lo, hi]` down to width `tol`.
///
/// Failed evaluations count as `−∞`. Returns the best point seen and the
/// number of evaluations.
pub fn golden_section_max<F>(f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64, usize)
where
    F: Fn(f64) -> Result<f64>,
{
    let g = |x: f64| f(x).ok().filter(|v| !v.is_nan()).unwrap_or(f64::NEG_INFINITY);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (g(c), g(d));
    let mut evals = 2;
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = g(c);
            if fc > best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = g(d);
            if fd > best.1 {
                best = (d, fd);
            }
        }
        evals += 1;
    }
    (best.0, best.1, evals)
}

/// Coarse argmax of `(xs, ys)` refined by golden-section search of `f`
/// between the neighbouring grid points.
pub fn refine_peak<F>(xs: &[f64], ys: &[f64], f: F, tol: f64) -> Result<Peak>
where
    F: Fn(f64) -> Result<f64>,
{
    if xs.len() != ys.len() {
        return Err(NhError::Domain("x and y differ in length".into()));
    }
    if xs.len() < 3 {
        return Err(NhError::Domain(format!("peak search needs at least 3 points, got {}", xs.len())));
    }
    let (i, &y0) = ys
        .iter()
        .enumerate()
        .filter(|(_, y)| !y.is_nan())
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| NhError::Domain("column has no numeric values".into()))?;
    let n = xs.len();
    let boundary = i == 0 || i == n - 1;
    let lo = xs[i.saturating_sub(1)];
    let hi = xs[(i + 1).min(n - 1)];
    let (x, y, evals) = golden_section_max(&f, lo, hi, tol);
    Ok(if y > y0 {
        Peak {
            location: x,
            value: y,
            boundary,
            evaluations: evals,
        }
    } else {
        Peak {
            location: xs[i],
            value: y0,
            boundary,
            evaluations: evals,
        }
    })
}

/// Peak of `column`, re-evaluating the observable at golden-section probes.
pub fn find_peak(spec: &SweepSpec, table: &SweepTable, column: Observable) -> Result<Peak> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = table.column(column)?.into_iter().unzip();
    let f = |x: f64| {
        evaluate(&spec.base, spec.axis, x, &[column], &spec.options)
            .pop()
            .expect("one observable")
    };
    refine_peak(&xs, &ys, f, PEAK_TOL)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub r2: f64,
    pub n_grid: Vec<f64>,
}

/// Least squares of `ln y` on `ln N`: `y ≈ prefactor·N^exponent`.
pub fn fit_power_law(n: &[f64], y: &[f64]) -> Result<ScalingFit> {
    if n.len() != y.len() {
        return Err(NhError::Domain("N and y differ in length".into()));
    }
    if n.len() < MIN_FIT_POINTS {
        return Err(NhError::Domain(format!(
            "power-law fit needs at least {MIN_FIT_POINTS} points, got {}",
            n.len()
        )));
    }
    if !n.windows(2).all(|w| w[0] < w[1]) || n[0] <= 0.0 {
        return Err(NhError::Domain("N grid must be positive and strictly increasing".into()));
    }
    if let Some(bad) = y.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(NhError::Domain(format!("power-law fit needs positive y, got {bad}")));
    }
    let pts: Vec<(f64, f64)> = n.iter().zip(y).map(|(a, b)| (a.ln(), b.ln())).collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Ok(ScalingFit {
        exponent: b,
        prefactor: a.exp(),
        r2,
        n_grid: n.to_vec(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingPoint {
    pub l: usize,
    /// Site count `r·L`.
    pub n: usize,
    pub location: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingResult {
    pub fit: ScalingFit,
    pub points: Vec<ScalingPoint>,
}

fn check_l_grid(ls: &[usize]) -> Result<()> {
    if ls.len() < MIN_FIT_POINTS || !ls.windows(2).all(|w| w[0] < w[1]) || ls[0] == 0 {
        return Err(NhError::Domain(format!(
            "module grid must be strictly increasing with at least {MIN_FIT_POINTS} entries"
        )));
    }
    Ok(())
}

fn finish_scaling(points: Vec<ScalingPoint>) -> Result<ScalingResult> {
    let n: Vec<f64> = points.iter().map(|p| p.n as f64).collect();
    let y: Vec<f64> = points.iter().map(|p| p.value).collect();
    Ok(ScalingResult {
        fit: fit_power_law(&n, &y)?,
        points,
    })
}

/// Peak QFI along `axis` within `window` for each module count, fitted
/// against `N = r·L`.
pub fn peak_scaling(
    cfg: &ModelConfig,
    axis: ParamLabel,
    window: (f64, f64),
    coarse_points: usize,
    ls: &[usize],
    opts: &SweepOptions,
) -> Result<ScalingResult> {
    check_l_grid(ls)?;
    let mut points = Vec::with_capacity(ls.len());
    for &l in ls {
        let spec = SweepSpec::new(
            cfg.with_modules(l),
            axis,
            linspace(window.0, window.1, coarse_points),
            vec![Observable::Qfi],
            *opts,
        )?;
        let table = run_sweep(&spec)?;
        let peak = find_peak(&spec, &table, Observable::Qfi)?;
        points.push(ScalingPoint {
            l,
            n: cfg.params.r * l,
            location: peak.location,
            value: peak.value,
        });
    }
    finish_scaling(points)
}

/// `f` evaluated at fixed parameters for each module count, fitted against
/// `N = r·L`.
pub fn point_scaling<F>(cfg: &ModelConfig, ls: &[usize], exec: Execution, f: F) -> Result<ScalingResult>
where
    F: Fn(&ModelConfig) -> Result<f64> + Sync + Send,
{
    check_l_grid(ls)?;
    let values = par::map(exec, ls, |&l| f(&cfg.with_modules(l)));
    let points = ls
        .iter()
        .zip(values)
        .map(|(&l, v)| {
            Ok(ScalingPoint {
                l,
                n: cfg.params.r * l,
                location: f64::NAN,
                value: v?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    finish_scaling(points)
}

/// Single-parameter QFI at the current values of `cfg`.
pub fn qfi_value(cfg: &ModelConfig, axis: ParamLabel, opts: &SweepOptions) -> Result<f64> {
    let ps = ParamSpec::at(cfg, &[axis], opts.step)?;
    Ok(fisher_information(cfg, &ps, &[], &opts.fisher)?.qfim.get(0, 0))
}

/// `1/Tr(F⁻¹)` of the QFIM at `ps`.
pub fn inverse_trace_bound(cfg: &ModelConfig, ps: &ParamSpec, opts: &FisherOptions) -> Result<f64> {
    let report = fisher_information(cfg, ps, &[], opts)?;
    Ok(1.0 / total_variance_bound(&report.qfim)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DeltaExponent {
    pub delta: f64,
    /// Parameter value the QFI was evaluated at.
    pub x: f64,
    pub exponent: f64,
    pub r2: f64,
}

/// QFI scaling exponent at `critical ± δ`, stepping away from zero.
pub fn exponent_vs_delta(bundle: &PresetBundle, deltas: &[f64], opts: &SweepOptions) -> Result<Vec<DeltaExponent>> {
    let critical = bundle
        .critical
        .ok_or_else(|| NhError::Domain(format!("preset {} has no single critical point", bundle.name)))?;
    if deltas.iter().any(|d| !(*d >= 0.0)) {
        return Err(NhError::Domain("δ grid must be non-negative".into()));
    }
    let sign = if critical < 0.0 { -1.0 } else { 1.0 };
    deltas
        .iter()
        .map(|&delta| {
            let x = critical + sign * delta;
            let cfg = bundle.config.with(bundle.axis, x)?;
            let res = point_scaling(&cfg, &bundle.l_grid, opts.exec, |c| qfi_value(c, bundle.axis, opts))?;
            Ok(DeltaExponent {
                delta,
                x,
                exponent: res.fit.exponent,
                r2: res.fit.r2,
            })
        })
        .collect()
}

/// Root of the signed point-gap ratio along `axis` inside `[lo, hi]`.
pub fn point_gap_root(cfg: &ModelConfig, axis: ParamLabel, lo: f64, hi: f64) -> Result<f64> {
    let f = |x: f64| -> Result<f64> { point_gap_signed(&cfg.with(axis, x)?.resolve()?) };
    let (mut a, mut b) = (lo, hi);
    let (mut fa, fb) = (f(a)?, f(b)?);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(NhError::Domain(format!("no sign change of the point-gap ratio on [{lo}, {hi}]")));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PresetName {
    Fig2Hn,
    Fig2Ssh,
    Fig3,
    Fig4Hn,
    Fig4Ssh,
    Fig5Top,
    Fig5Bottom,
}

impl PresetName {
    pub const ALL: [PresetName; 7] = [
        PresetName::Fig2Hn,
        PresetName::Fig2Ssh,
        PresetName::Fig3,
        PresetName::Fig4Hn,
        PresetName::Fig4Ssh,
        PresetName::Fig5Top,
        PresetName::Fig5Bottom,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PresetName::Fig2Hn => "FIG2_HN",
            PresetName::Fig2Ssh => "FIG2_SSH",
            PresetName::Fig3 => "FIG3",
            PresetName::Fig4Hn => "FIG4_HN",
            PresetName::Fig4Ssh => "FIG4_SSH",
            PresetName::Fig5Top => "FIG5_TOP",
            PresetName::Fig5Bottom => "FIG5_BOTTOM",
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetName {
    type Err = NhError;

    fn from_str(s: &str) -> Result<Self> {
        PresetName::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| NhError::Config(format!("unknown preset '{s}'")))
    }
}

/// Everything needed to reproduce one figure panel.
#[derive(Clone, Debug, PartialEq)]
pub struct PresetBundle {
    pub name: PresetName,
    pub config: ModelConfig,
    pub axis: ParamLabel,
    pub grid: Vec<f64>,
    pub observables: Vec<Observable>,
    /// Estimated parameters at the working point.
    pub param_spec: ParamSpec,
    /// Critical value of `axis`, when there is a single one.
    pub critical: Option<f64>,
    /// Non-modular counterpart at its own critical point.
    pub comparison: Option<ModelConfig>,
    pub l_grid: Vec<usize>,
}

impl PresetBundle {
    pub fn sweep_spec(&self, options: SweepOptions) -> Result<SweepSpec> {
        SweepSpec::new(self.config.clone(), self.axis, self.grid.clone(), self.observables.clone(), options)
    }

    pub fn params(&self) -> Result<ModelParams> {
        self.config.resolve()
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn chain(d: usize, r: usize, l: usize, j0: f64, jr: Complex64) -> ModelParams {
    ModelParams {
        d,
        r,
        l,
        j0,
        jl: c(1.0, 0.0),
        jr,
        jm: c(0.0, 0.0),
        jmp: c(0.0, 0.0),
        boundary: Boundary::Obc,
    }
}

/// `start + i·step` computed as `(a + i)/scale` so that grid points are exact.
fn exact_grid(start: i64, stop: i64, scale: f64) -> Vec<f64> {
    (start..=stop).map(|i| i as f64 / scale).collect()
}

pub fn preset(name: PresetName) -> PresetBundle {
    let single = |cfg: &ModelConfig, axis: ParamLabel| {
        ParamSpec::at(cfg, &[axis], DEFAULT_STEP).expect("preset parameters are valid")
    };
    let l_grid = DEFAULT_L_GRID.to_vec();
    match name {
        PresetName::Fig2Hn => {
            let config = ModelConfig::new(chain(1, 3, 50, 0.0, c(-2.5, 0.0)), Some(CouplingPreset::reciprocal(2.0)));
            PresetBundle {
                name,
                param_spec: single(&config, ParamLabel::Jr),
                config,
                axis: ParamLabel::Jr,
                grid: exact_grid(-60, -20, 20.0),
                observables: vec![Observable::GapResidual, Observable::Slope, Observable::Pr],
                critical: Some(-2.0),
                comparison: None,
                l_grid,
            }
        }
        PresetName::Fig2Ssh => {
            let config = ModelConfig::new(chain(2, 2, 50, 2.0, c(1.2, 0.0)), Some(CouplingPreset::shifted(0.5)));
            PresetBundle {
                name,
                param_spec: single(&config, ParamLabel::Jr),
                config,
                axis: ParamLabel::Jr,
                grid: exact_grid(-50, 30, 20.0),
                observables: vec![Observable::GapResidual, Observable::Slope, Observable::Pr],
                critical: Some(-1.5),
                comparison: None,
                l_grid,
            }
        }
        PresetName::Fig3 => {
            let config = ModelConfig::new(chain(2, 2, 50, 1.25, c(1.0, 0.0)), Some(CouplingPreset::shifted(2.0)));
            PresetBundle {
                name,
                param_spec: single(&config, ParamLabel::Jr),
                config,
                axis: ParamLabel::Jr,
                grid: exact_grid(-300, 100, 100.0),
                observables: vec![Observable::WindingBand, Observable::GapResidual],
                critical: None,
                comparison: None,
                l_grid,
            }
        }
        PresetName::Fig4Hn => {
            let config = ModelConfig::new(chain(1, 3, 50, 0.0, c(-0.4, 0.0)), Some(CouplingPreset::reciprocal(0.4)));
            let comparison = ModelConfig::new(chain(1, 3, 50, 0.0, c(-1.0, 0.0)), Some(CouplingPreset::non_modular()));
            PresetBundle {
                name,
                param_spec: single(&config, ParamLabel::Jr),
                config,
                axis: ParamLabel::Jr,
                grid: exact_grid(-120, -20, 100.0),
                observables: vec![Observable::Qfi, Observable::CfiPosition],
                critical: Some(-0.4),
                comparison: Some(comparison),
                l_grid,
            }
        }
        PresetName::Fig4Ssh => {
            let config = ModelConfig::new(chain(2, 2, 50, 2.0, c(-1.5, 0.0)), Some(CouplingPreset::shifted(0.5)));
            let comparison = ModelConfig::new(chain(2, 2, 50, 2.0, c(-1.0, 0.0)), Some(CouplingPreset::non_modular()));
            PresetBundle {
                name,
                param_spec: single(&config, ParamLabel::Jr),
                config,
                axis: ParamLabel::Jr,
                grid: exact_grid(-200, -80, 100.0),
                observables: vec![Observable::Qfi, Observable::CfiPosition],
                critical: Some(-1.5),
                comparison: Some(comparison),
                l_grid,
            }
        }
        PresetName::Fig5Top => {
            let jx = -1.0 / 12f64.sqrt();
            let config = ModelConfig::new(
                chain(1, 3, 100, 0.0, c(jx, 0.5)),
                Some(CouplingPreset::reciprocal(1.0 / 3f64.sqrt())),
            );
            let comparison = ModelConfig::new(
                chain(1, 3, 100, 0.0, Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0)),
                Some(CouplingPreset::non_modular()),
            );
            let param_spec = ParamSpec::new(
                vec![ParamLabel::JrRe, ParamLabel::JrIm],
                vec![jx, 0.5],
                vec![DEFAULT_STEP, DEFAULT_STEP],
            )
            .expect("preset parameters are valid");
            PresetBundle {
                name,
                config,
                axis: ParamLabel::JrRe,
                grid: linspace(jx - 0.1, jx + 0.1, 41),
                observables: vec![Observable::Qfi, Observable::CfiPosition, Observable::CfiCurrent],
                param_spec,
                critical: Some(jx),
                comparison: Some(comparison),
                l_grid,
            }
        }
        PresetName::Fig5Bottom => {
            let mut p = chain(1, 3, 100, 0.0, c(-0.2, 0.0));
            p.jm = c(0.012, 0.0);
            p.jmp = c(0.3, 0.0);
            let config = ModelConfig::new(p, None);
            let param_spec = ParamSpec::new(
                vec![ParamLabel::Jr, ParamLabel::Jm, ParamLabel::JmP],
                vec![-0.2, 0.012, 0.3],
                vec![1e-6, 1e-7, 1e-6],
            )
            .expect("preset parameters are valid");
            PresetBundle {
                name,
                config,
                axis: ParamLabel::Jr,
                grid: exact_grid(-30, -10, 100.0),
                observables: vec![Observable::Qfi, Observable::CfiPosition],
                param_spec,
                critical: Some(-0.2),
                comparison: None,
                l_grid,
            }
        }
    }
}

#[derive(Serialize)]
struct ManifestEntry {
    name: String,
    d: usize,
    r: usize,
    #[serde(rename = "L")]
    l: usize,
    #[serde(rename = "J0")]
    j0: f64,
    #[serde(rename = "JL")]
    jl: [f64; 2],
    #[serde(rename = "JR")]
    jr: [f64; 2],
    #[serde(rename = "Jm")]
    jm: [f64; 2],
    #[serde(rename = "JmP")]
    jmp: [f64; 2],
    preset: Option<String>,
    #[serde(rename = "J")]
    j: Option<[f64; 2]>,
    axis: String,
    grid_start: f64,
    grid_stop: f64,
    grid_points: usize,
    observables: Vec<String>,
    param_labels: Vec<String>,
    param_values: Vec<f64>,
    param_steps: Vec<f64>,
    critical: Option<f64>,
    #[serde(rename = "L_grid")]
    l_grid: Vec<usize>,
}

#[derive(Serialize)]
struct Manifest {
    schema: u32,
    preset: Vec<ManifestEntry>,
}

/// TOML listing of every preset's resolved parameters.
pub fn preset_manifest() -> Result<String> {
    let pair = |z: Complex64| [z.re, z.im];
    let preset = PresetName::ALL
        .into_iter()
        .map(|name| {
            let b = preset(name);
            let p = b.params()?;
            Ok(ManifestEntry {
                name: name.to_string(),
                d: p.d,
                r: p.r,
                l: p.l,
                j0: p.j0,
                jl: pair(p.jl),
                jr: pair(p.jr),
                jm: pair(p.jm),
                jmp: pair(p.jmp),
                preset: b.config.preset.map(|cp| cp.kind.to_string()),
                j: b.config.preset.map(|cp| pair(cp.j)),
                axis: b.axis.to_string(),
                grid_start: b.grid[0],
                grid_stop: *b.grid.last().expect("non-empty grid"),
                grid_points: b.grid.len(),
                observables: b.observables.iter().map(|o| o.to_string()).collect(),
                param_labels: b.param_spec.labels.iter().map(|l| l.to_string()).collect(),
                param_values: b.param_spec.values.clone(),
                param_steps: b.param_spec.steps.clone(),
                critical: b.critical,
                l_grid: b.l_grid.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    toml::to_string(&Manifest { schema: 1, preset }).map_err(|e| NhError::Config(e.to_string()))
}
