//! Winding numbers, line gaps, analytic gap closings and edge states.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{NhError, Result};
use crate::gbz::{gbz_radius, point_gap_residual, GbzContour, DEFAULT_CONTOUR_POINTS};
use crate::model::{
    build_bloch, build_generalized_bloch, build_hamiltonian, chiral_blocks, Boundary, ModelConfig,
    ModelParams, ParamLabel, PresetKind,
};
use crate::par::{self, Execution};
use crate::spectral::{full_spectrum, SpectralDecomposition};

/// Gap below which a gap counts as closed, in coupling units.
pub const DEFAULT_TOL_GAP: f64 = 1e-6;
/// Largest accepted distance of a raw winding from its rounded value.
pub const WINDING_TOL: f64 = 0.05;
/// Upper limit on momentum samples for dense band plots.
pub const MAX_DENSE_K: usize = 1 << 16;
const MAX_CONTOUR_DOUBLINGS: usize = 6;
const MAX_TRACKING_REFINEMENTS: usize = 3;
const EDGE_WEIGHT_THRESHOLD: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GapKind {
    PointGap,
    LineGapCentral,
    LineGapSide,
}

#[derive(Clone, Debug, Serialize)]
pub struct GapReport {
    pub kind: GapKind,
    pub parameter_value: Complex64,
    pub min_gap: f64,
    pub closed: bool,
    /// Adjacent band pair, for line gaps.
    pub bands: Option<(usize, usize)>,
}

impl GapReport {
    pub fn new(kind: GapKind, parameter_value: Complex64, min_gap: f64, bands: Option<(usize, usize)>) -> Self {
        Self {
            kind,
            parameter_value,
            min_gap,
            closed: min_gap < DEFAULT_TOL_GAP,
            bands,
        }
    }
}

/// Point-gap report built from the criticality residual.
pub fn point_gap_report(p: &ModelParams) -> Result<GapReport> {
    Ok(GapReport::new(GapKind::PointGap, p.jr, point_gap_residual(p)?, None))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WindingContour {
    Gbz { radius: f64, n_points: usize },
    BrillouinZone { n_k: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WindingResult {
    pub value: i64,
    /// Accumulated phase over 2π, before rounding and with its sign.
    pub raw_phase: f64,
    pub contour: WindingContour,
}

/// Total unwrapped phase of a closed sampled curve over 2π, and the largest
/// single phase step.
fn accumulate_phase(values: &[Complex64]) -> (f64, f64) {
    let n = values.len();
    let mut total = 0.0;
    let mut max_step: f64 = 0.0;
    for j in 0..n {
        let step = (values[(j + 1) % n] / values[j]).arg();
        total += step;
        max_step = max_step.max(step.abs());
    }
    (total / (2.0 * PI), max_step)
}

fn k_grid(n: usize) -> Vec<f64> {
    (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect()
}

/// Winding of `det(H_k − E_ref)` over the Brillouin zone.
///
/// The grid is doubled while any phase step exceeds π/2 or the raw value is
/// not within [`WINDING_TOL`] of an integer.
pub fn spectral_winding(p: &ModelParams, e_ref: Complex64, n_k: usize) -> Result<WindingResult> {
    spectral_winding_with(p, e_ref, n_k, Execution::default())
}

pub fn spectral_winding_with(
    p: &ModelParams,
    e_ref: Complex64,
    n_k: usize,
    exec: Execution,
) -> Result<WindingResult> {
    p.validate()?;
    if n_k < 8 {
        return Err(NhError::Domain(format!("k-grid needs at least 8 points, got {n_k}")));
    }
    let mut n = n_k;
    let mut raw = f64::NAN;
    for _ in 0..=MAX_CONTOUR_DOUBLINGS {
        let ks = k_grid(n);
        let samples: Vec<Result<(Complex64, f64)>> = par::map(exec, &ks, |&k| {
            let h = build_bloch(p, k);
            let distance = h
                .eigenvalues()?
                .iter()
                .map(|z| (z - e_ref).norm())
                .fold(f64::INFINITY, f64::min);
            Ok((h.shifted(e_ref).determinant(), distance))
        });
        let samples = samples.into_iter().collect::<Result<Vec<_>>>()?;
        let distance = samples.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
        if distance <= DEFAULT_TOL_GAP {
            return Err(NhError::IllConditionedContour {
                distance,
                tol: DEFAULT_TOL_GAP,
            });
        }
        let dets: Vec<Complex64> = samples.iter().map(|s| s.0).collect();
        let (phase, max_step) = accumulate_phase(&dets);
        raw = phase;
        if max_step <= PI / 2.0 && (raw - raw.round()).abs() < WINDING_TOL {
            return Ok(WindingResult {
                value: raw.round() as i64,
                raw_phase: raw,
                contour: WindingContour::BrillouinZone { n_k: n },
            });
        }
        n *= 2;
    }
    Err(NhError::NonIntegerWinding { raw_phase: raw })
}

/// Winding of `det h⁺(β)` counter-clockwise along the contour.
///
/// `h⁺` carries a simple pole at `β = 0`, so the signed count is
/// `#zeros inside − 1`. The magnitude is reported as the value; the signed
/// accumulation stays in `raw_phase`.
pub fn band_winding(p: &ModelParams, contour: &GbzContour) -> Result<WindingResult> {
    band_winding_with(p, contour, Execution::default())
}

pub fn band_winding_with(p: &ModelParams, contour: &GbzContour, exec: Execution) -> Result<WindingResult> {
    p.validate()?;
    let mut contour = contour.clone();
    let mut raw = f64::NAN;
    for _ in 0..=MAX_CONTOUR_DOUBLINGS {
        let dets: Vec<Result<Complex64>> =
            par::map(exec, &contour.points, |&beta| Ok(chiral_blocks(p, beta)?.plus.determinant()));
        let dets = dets.into_iter().collect::<Result<Vec<_>>>()?;
        let scale = dets.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let smallest = dets.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        if !(scale > 0.0) || smallest <= 1e-9 * scale {
            return Err(NhError::AtTransition(format!(
                "det h+ vanishes on the contour (|det| = {smallest:e}, scale {scale:e})"
            )));
        }
        let (phase, max_step) = accumulate_phase(&dets);
        raw = phase;
        if max_step <= PI / 2.0 && (raw - raw.round()).abs() < WINDING_TOL {
            return Ok(WindingResult {
                value: raw.round().abs() as i64,
                raw_phase: raw,
                contour: WindingContour::Gbz {
                    radius: contour.radius,
                    n_points: contour.n_points(),
                },
            });
        }
        contour = contour.refined();
    }
    Err(NhError::NonIntegerWinding { raw_phase: raw })
}

/// Band winding on the analytic GBZ circle with the default resolution.
pub fn band_winding_gbz(p: &ModelParams) -> Result<WindingResult> {
    band_winding(p, &GbzContour::for_model(p, DEFAULT_CONTOUR_POINTS)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosingBranch {
    /// Central bands, Bloch `k = 0`.
    CentralK0,
    /// Central bands, Bloch `k = π`.
    CentralKPi,
    /// Side bands, Bloch `k = 0`.
    SideK0,
    /// Side bands, Bloch `k = π`.
    SideKPi,
    /// Central bands on the GBZ, `J_L J_m J_R J'_m = +J0⁴`.
    GbzCentralPhi0,
    /// Central bands on the GBZ, `J_L J_m J_R J'_m = −J0⁴`.
    GbzCentralPhiPi,
    /// Side bands on the GBZ, `η1² = 4(J0⁴ + J_L J_m J_R J'_m)`.
    GbzSide,
}

impl ClosingBranch {
    pub fn is_central(&self) -> bool {
        matches!(
            self,
            ClosingBranch::CentralK0
                | ClosingBranch::CentralKPi
                | ClosingBranch::GbzCentralPhi0
                | ClosingBranch::GbzCentralPhiPi
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GapClosing {
    pub jr: f64,
    pub branch: ClosingBranch,
}

/// Real roots of `a x² + b x + c`, ascending; a tangential root appears once.
fn real_quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if a.abs() <= 1e-14 * scale {
        return if b.abs() > 1e-14 * scale { vec![-c / b] } else { Vec::new() };
    }
    let disc = b * b - 4.0 * a * c;
    let tol = 1e-12 * (b * b + (4.0 * a * c).abs());
    if disc < -tol {
        return Vec::new();
    }
    if disc <= tol {
        return vec![-b / (2.0 * a)];
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let q = if q == 0.0 { -0.5 * disc.sqrt() } else { q };
    let mut roots = vec![q / a, c / q];
    roots.sort_by(f64::total_cmp);
    roots
}

/// Real `J0`, `J_L`, `J` of a `d = 2`, `r = 2` SHIFTED template.
fn shifted_template(cfg: &ModelConfig) -> Result<(f64, f64, f64)> {
    let p = &cfg.params;
    let preset = match cfg.preset {
        Some(preset) if preset.kind == PresetKind::Shifted => preset,
        _ => {
            return Err(NhError::Unsupported(
                "closed-form gap closings are only derived for the SHIFTED preset".into(),
            ))
        }
    };
    if p.d != 2 || p.r != 2 {
        return Err(NhError::Unsupported(format!(
            "closed-form gap closings need d = 2, r = 2 (got d = {}, r = {})",
            p.d, p.r
        )));
    }
    if preset.j.im != 0.0 || p.jl.im != 0.0 {
        return Err(NhError::Unsupported("J and JL must be real".into()));
    }
    Ok((p.j0, p.jl.re, preset.j.re))
}

fn tag(roots: Vec<f64>, branch: ClosingBranch) -> impl Iterator<Item = GapClosing> {
    roots.into_iter().map(move |jr| GapClosing { jr, branch })
}

/// Real `J_R` at which the Bloch bands touch.
///
/// With `J'_m = J_R + J` and `det h±` factorized, the central bands touch
/// where `J0² = ±J_R(J_R + J)` and the side bands where `η1² = 4η2(k)` for
/// `k ∈ {0, π}`, `η1 = 2J0² + J_m J'_m + J_L J_R`,
/// `η2(k) = (J0² − J_R J'_m e^{−ik})(J0² − J_L J_m e^{ik})`.
pub fn pbc_zero_gap_solutions(cfg: &ModelConfig) -> Result<Vec<GapClosing>> {
    let (j0, jl, j) = shifted_template(cfg)?;
    let j02 = j0 * j0;
    let jm = jl + j;
    let mut out: Vec<GapClosing> = Vec::new();
    out.extend(tag(real_quadratic_roots(1.0, j, -j02), ClosingBranch::CentralK0));
    out.extend(tag(real_quadratic_roots(1.0, j, j02), ClosingBranch::CentralKPi));
    let alpha = jl + jm;
    let gamma = 2.0 * j02 + jm * j;
    for (s, branch) in [(1.0, ClosingBranch::SideK0), (-1.0, ClosingBranch::SideKPi)] {
        let kappa = j02 - s * jl * jm;
        let roots = real_quadratic_roots(
            alpha * alpha + 4.0 * kappa * s,
            2.0 * alpha * gamma + 4.0 * kappa * s * j,
            gamma * gamma - 4.0 * kappa * j02,
        );
        out.extend(tag(roots, branch));
    }
    Ok(out)
}

/// Real `J_R` at which the GBZ bands touch.
///
/// Central: `J0⁴ = |J_L J_m J_R J'_m|`, both signs of the product. Side:
/// `η1² = 4(J0⁴ + J_L J_m J_R J'_m)`, where the two `β`-dependent terms of
/// `η2` cancel on the circle.
pub fn gbz_zero_gap_solutions(cfg: &ModelConfig) -> Result<Vec<GapClosing>> {
    let (j0, jl, j) = shifted_template(cfg)?;
    let j02 = j0 * j0;
    let j04 = j02 * j02;
    let jm = jl + j;
    let lm = jl * jm;
    if lm == 0.0 {
        return Err(NhError::Singular("JL·Jm vanishes".into()));
    }
    let mut out: Vec<GapClosing> = Vec::new();
    out.extend(tag(real_quadratic_roots(1.0, j, -j04 / lm), ClosingBranch::GbzCentralPhi0));
    out.extend(tag(real_quadratic_roots(1.0, j, j04 / lm), ClosingBranch::GbzCentralPhiPi));
    let alpha = jl + jm;
    let gamma = 2.0 * j02 + jm * j;
    out.extend(tag(
        real_quadratic_roots(
            alpha * alpha - 4.0 * lm,
            2.0 * alpha * gamma - 4.0 * lm * j,
            gamma * gamma - 4.0 * j04,
        ),
        ClosingBranch::GbzSide,
    ));
    Ok(out)
}

/// Bands sampled on the Brillouin zone or the GBZ circle and tracked by
/// continuity: `bands[b][j]` is band `b` at grid point `j`.
///
/// At the first grid point bands are ordered by `(Re, Im)`.
pub fn tracked_bands(p: &ModelParams, use_gbz: bool, n: usize, exec: Execution) -> Result<Vec<Vec<Complex64>>> {
    let radius = if use_gbz { gbz_radius(p)? } else { 1.0 };
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(NhError::Singular(format!("GBZ radius {radius} is degenerate")));
    }
    let phis = k_grid(n);
    let samples: Vec<Result<Vec<Complex64>>> = par::map(exec, &phis, |&phi| {
        let h = if use_gbz {
            build_generalized_bloch(p, Complex64::from_polar(radius, phi))?
        } else {
            build_bloch(p, phi)
        };
        h.eigenvalues()
    });
    let mut samples = samples.into_iter().collect::<Result<Vec<_>>>()?;
    samples[0].sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let nb = samples[0].len();
    let mut bands: Vec<Vec<Complex64>> = (0..nb).map(|b| vec![samples[0][b]]).collect();
    for row in samples.iter().skip(1) {
        let prev: Vec<Complex64> = bands.iter().map(|b| *b.last().unwrap()).collect();
        let order = assign_nearest(&prev, row)?;
        for (b, &j) in order.iter().enumerate() {
            bands[b].push(row[j]);
        }
    }
    Ok(bands)
}

/// Greedy global nearest-neighbour assignment of `next` onto `prev`.
fn assign_nearest(prev: &[Complex64], next: &[Complex64]) -> Result<Vec<usize>> {
    let n = prev.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for (b, x) in prev.iter().enumerate() {
        let mut dists: Vec<(f64, usize)> = next.iter().enumerate().map(|(j, y)| ((x - y).norm(), j)).collect();
        dists.sort_by(|a, b| a.0.total_cmp(&b.0));
        if dists.len() > 1 {
            let (d0, j0) = dists[0];
            let (d1, j1) = dists[1];
            if d1 - d0 < 1e-10 && (next[j0] - next[j1]).norm() > 1e-10 {
                return Err(NhError::TrackingAmbiguity { refinements: 0 });
            }
        }
        pairs.extend(dists.into_iter().map(|(d, j)| (d, b, j)));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut assigned = vec![usize::MAX; n];
    let mut taken = vec![false; n];
    for (_, b, j) in pairs {
        if assigned[b] == usize::MAX && !taken[j] {
            assigned[b] = j;
            taken[j] = true;
        }
    }
    Ok(assigned)
}

/// Smallest distance between any point of `a` and any point of `b`.
fn set_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let mut best = f64::INFINITY;
    for x in a {
        for y in b {
            best = best.min((x - y).norm_sqr());
        }
    }
    best.sqrt()
}

/// Minimum complex distance between every pair of adjacent tracked bands.
///
/// For an even band count the pair `(n/2 − 1, n/2)` is the central one.
pub fn line_gap_minima(p: &ModelParams, use_gbz: bool, grid_size: usize) -> Result<Vec<GapReport>> {
    line_gap_minima_with(p, use_gbz, grid_size, Execution::default())
}

pub fn line_gap_minima_with(
    p: &ModelParams,
    use_gbz: bool,
    grid_size: usize,
    exec: Execution,
) -> Result<Vec<GapReport>> {
    p.validate()?;
    if grid_size < 128 {
        return Err(NhError::Domain(format!("grid size must be at least 128, got {grid_size}")));
    }
    let mut n = grid_size;
    for attempt in 0..=MAX_TRACKING_REFINEMENTS {
        match tracked_bands(p, use_gbz, n, exec) {
            Ok(bands) => {
                let nb = bands.len();
                let pairs: Vec<usize> = (0..nb.saturating_sub(1)).collect();
                let gaps = par::map(exec, &pairs, |&b| set_distance(&bands[b], &bands[b + 1]));
                return Ok(pairs
                    .iter()
                    .zip(gaps)
                    .map(|(&b, gap)| {
                        let kind = if nb % 2 == 0 && b + 1 == nb / 2 {
                            GapKind::LineGapCentral
                        } else {
                            GapKind::LineGapSide
                        };
                        GapReport::new(kind, p.jr, gap, Some((b, b + 1)))
                    })
                    .collect());
            }
            Err(NhError::TrackingAmbiguity { .. }) if attempt < MAX_TRACKING_REFINEMENTS => n *= 2,
            Err(NhError::TrackingAmbiguity { .. }) => {
                return Err(NhError::TrackingAmbiguity {
                    refinements: MAX_TRACKING_REFINEMENTS,
                })
            }
            Err(e) => return Err(e),
        }
    }
    unreachable!("loop returns on its last iteration")
}

/// Connected components of a point cloud: points closer than `resolution`
/// are linked. Returns one label per point, labels numbered by first
/// appearance.
pub fn point_cloud_components(points: &[Complex64], resolution: f64) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..points.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let cell = |z: &Complex64| ((z.re / resolution).floor() as i64, (z.im / resolution).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, z) in points.iter().enumerate() {
        grid.entry(cell(z)).or_default().push(i);
    }
    for (i, z) in points.iter().enumerate() {
        let (cx, cy) = cell(z);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(others) = grid.get(&(cx + dx, cy + dy)) {
                    for &j in others {
                        if j > i && (points[j] - z).norm() <= resolution {
                            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                            if a != b {
                                parent[a.max(b)] = a.min(b);
                            }
                        }
                    }
                }
            }
        }
    }
    let mut names: HashMap<usize, usize> = HashMap::new();
    (0..points.len())
        .map(|i| {
            let root = find(&mut parent, i);
            let next = names.len();
            *names.entry(root).or_insert(next)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct LoopAnalysis {
    /// Connected components of the sampled PBC spectrum.
    pub components: usize,
    /// Components enclosing a nonzero area.
    pub loops: usize,
    /// Enclosed area per component.
    pub areas: Vec<f64>,
}

/// Tracked Bloch bands, doubling the momentum grid from `n_k` until
/// neighbouring samples of every band lie within `resolution / 2`.
pub fn dense_pbc_bands(p: &ModelParams, n_k: usize, resolution: f64) -> Result<(Vec<Vec<Complex64>>, usize)> {
    if !(resolution > 0.0) {
        return Err(NhError::Domain(format!("resolution must be positive, got {resolution}")));
    }
    let mut n = n_k.max(8);
    loop {
        let bands = tracked_bands(p, false, n, Execution::default())?;
        let step = bands
            .iter()
            .flat_map(|b| b.windows(2).map(|w| (w[1] - w[0]).norm()))
            .fold(0.0, f64::max);
        if step <= 0.5 * resolution || n >= MAX_DENSE_K {
            return Ok((bands, n));
        }
        n *= 2;
    }
}

/// Loop structure of the Bloch spectrum, sampled from `n_k` momenta upward.
///
/// Bands are followed around the Brillouin zone (several bands may join into
/// one closed curve) and the shoelace area of each closed curve is credited
/// to its component. A component is a loop if that area exceeds
/// `resolution²`.
pub fn pbc_loop_analysis(p: &ModelParams, n_k: usize, resolution: f64) -> Result<LoopAnalysis> {
    let (bands, n_k) = dense_pbc_bands(p, n_k, resolution)?;
    let points: Vec<Complex64> = bands.iter().flatten().copied().collect();
    let labels = point_cloud_components(&points, resolution);
    let components = labels.iter().copied().max().map_or(0, |m| m + 1);
    let nb = bands.len();
    let firsts: Vec<Complex64> = bands.iter().map(|b| b[0]).collect();
    let lasts: Vec<Complex64> = bands.iter().map(|b| *b.last().unwrap()).collect();
    let successor = assign_nearest(&lasts, &firsts).unwrap_or_else(|_| (0..nb).collect());
    let mut visited = vec![false; nb];
    let mut areas = vec![0.0; components];
    for start in 0..nb {
        if visited[start] {
            continue;
        }
        let mut curve: Vec<Complex64> = Vec::new();
        let mut b = start;
        while !visited[b] {
            visited[b] = true;
            curve.extend_from_slice(&bands[b]);
            b = successor[b];
        }
        let area = 0.5
            * (0..curve.len())
                .map(|i| {
                    let (u, v) = (curve[i], curve[(i + 1) % curve.len()]);
                    u.re * v.im - v.re * u.im
                })
                .sum::<f64>();
        areas[labels[start * n_k]] += area.abs();
    }
    let loops = areas.iter().filter(|&&a| a > resolution * resolution).count();
    Ok(LoopAnalysis {
        components,
        loops,
        areas,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EdgeState {
    pub energy: Complex64,
    pub edge_weight: f64,
}

/// Modules counted as "edge" on each side: 10% of `L`, at least one.
fn edge_modules(l: usize) -> usize {
    ((l as f64) * 0.1).floor().max(1.0) as usize
}

/// Fraction of `|ψ|²` in the outer 10% of modules.
pub fn edge_weight(v: &[Complex64], p: &ModelParams) -> f64 {
    let width = edge_modules(p.l) * p.cell_dim();
    let total: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    let n = v.len();
    let edge: f64 = v
        .iter()
        .enumerate()
        .filter(|(i, _)| *i < width || *i >= n - width)
        .map(|(_, z)| z.norm_sqr())
        .sum();
    edge / total
}

/// Edge weight after undoing the bulk skin profile `ψ_n ∝ radius^n`.
pub fn skin_corrected_edge_weight(v: &[Complex64], p: &ModelParams, radius: f64) -> f64 {
    let cell = p.cell_dim();
    let mid = (p.l as f64 - 1.0) / 2.0;
    let corrected: Vec<Complex64> = v
        .iter()
        .enumerate()
        .map(|(i, z)| z * (-((i / cell) as f64 - mid) * radius.ln()).exp())
        .collect();
    edge_weight(&corrected, p)
}

fn require_obc(p: &ModelParams) -> Result<()> {
    p.validate()?;
    if p.boundary != Boundary::Obc {
        return Err(NhError::Domain("edge states are defined for OBC only".into()));
    }
    Ok(())
}

/// OBC eigenpairs with `|E| < energy_window` and at least 90% of their weight
/// in the outer 10% of modules.
pub fn edge_states(p: &ModelParams, energy_window: f64) -> Result<Vec<EdgeState>> {
    require_obc(p)?;
    let dec = full_spectrum(&build_hamiltonian(p)?)?;
    Ok(edge_states_from(&dec, p, energy_window))
}

pub fn edge_states_from(dec: &SpectralDecomposition, p: &ModelParams, energy_window: f64) -> Vec<EdgeState> {
    dec.values
        .iter()
        .zip(&dec.vectors)
        .filter(|(e, _)| e.norm() < energy_window)
        .map(|(e, v)| EdgeState {
            energy: *e,
            edge_weight: edge_weight(v, p),
        })
        .filter(|s| s.edge_weight >= EDGE_WEIGHT_THRESHOLD)
        .collect()
}

/// Finite-size central gap `2·min|E|` over OBC bulk states.
///
/// A state counts as bulk when its skin-corrected edge weight is below 90%.
pub fn obc_central_gap(p: &ModelParams) -> Result<f64> {
    require_obc(p)?;
    let dec = full_spectrum(&build_hamiltonian(p)?)?;
    obc_central_gap_from(&dec, p)
}

pub fn obc_central_gap_from(dec: &SpectralDecomposition, p: &ModelParams) -> Result<f64> {
    let radius = gbz_radius(p)?;
    let radius = if radius > 0.0 && radius.is_finite() { radius } else { 1.0 };
    let smallest = dec
        .values
        .iter()
        .zip(&dec.vectors)
        .filter(|(_, v)| skin_corrected_edge_weight(v, p, radius) < EDGE_WEIGHT_THRESHOLD)
        .map(|(e, _)| e.norm())
        .fold(f64::INFINITY, f64::min);
    Ok(2.0 * smallest)
}

#[derive(Clone, Debug, Serialize)]
pub struct PhaseRow {
    pub jr: f64,
    /// `None` where the winding is undefined (gap closed on the contour).
    pub winding: Option<i64>,
    pub min_gap_central: f64,
    pub min_gap_side: f64,
    pub point_gap_residual: f64,
}

/// Band winding, GBZ line gaps and point-gap residual along a real `J_R` grid.
///
/// Gaps are NaN where band tracking stays ambiguous, as at exceptional points.
pub fn phase_diagram(
    cfg: &ModelConfig,
    grid: &[f64],
    grid_size: usize,
    contour_points: usize,
    exec: Execution,
) -> Result<Vec<PhaseRow>> {
    let rows = par::map(exec, grid, |&jr| -> Result<PhaseRow> {
        let p = cfg.with(ParamLabel::Jr, jr)?.resolve()?;
        let winding = match GbzContour::for_model(&p, contour_points)
            .and_then(|c| band_winding_with(&p, &c, Execution::Sequential))
        {
            Ok(w) => Some(w.value),
            Err(NhError::AtTransition(_)) | Err(NhError::Singular(_)) | Err(NhError::NonIntegerWinding { .. }) => None,
            Err(e) => return Err(e),
        };
        let (central, side) = match line_gap_minima_with(&p, true, grid_size, Execution::Sequential) {
            Ok(gaps) => split_gaps(&gaps),
            Err(NhError::Singular(_)) | Err(NhError::TrackingAmbiguity { .. }) => (f64::NAN, f64::NAN),
            Err(e) => return Err(e),
        };
        Ok(PhaseRow {
            jr,
            winding,
            min_gap_central: central,
            min_gap_side: side,
            point_gap_residual: point_gap_residual(&p).unwrap_or(f64::NAN),
        })
    });
    rows.into_iter().collect()
}

/// `(central, smallest side)` gap of a line-gap report list.
pub fn split_gaps(gaps: &[GapReport]) -> (f64, f64) {
    let pick = |kind: GapKind| {
        gaps.iter()
            .filter(|g| g.kind == kind)
            .map(|g| g.min_gap)
            .fold(f64::NAN, f64::min)
    };
    (pick(GapKind::LineGapCentral), pick(GapKind::LineGapSide))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CouplingPreset;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn uniform_hn(jl: f64, jr: f64) -> ModelParams {
        let mut p = ModelParams {
            d: 1,
            r: 2,
            l: 10,
            j0: 0.0,
            jl: c(jl, 0.0),
            jr: c(jr, 0.0),
            jm: c(0.0, 0.0),
            jmp: c(0.0, 0.0),
            boundary: Boundary::Pbc,
        };
        CouplingPreset::non_modular().apply(&mut p).unwrap();
        p
    }

    fn fig3(jr: f64) -> ModelConfig {
        ModelConfig::new(
            ModelParams {
                d: 2,
                r: 2,
                l: 50,
                j0: 1.25,
                jl: c(1.0, 0.0),
                jr: c(jr, 0.0),
                jm: c(0.0, 0.0),
                jmp: c(0.0, 0.0),
                boundary: Boundary::Obc,
            },
            Some(CouplingPreset::shifted(2.0)),
        )
    }

    #[test]
    fn hatano_nelson_spectral_winding() {
        let w = spectral_winding(&uniform_hn(1.0, 2.0), c(0.0, 0.0), 256).unwrap();
        assert_eq!(w.value.abs(), 1);
        assert!((w.raw_phase - w.value as f64).abs() < WINDING_TOL);
        let w = spectral_winding(&uniform_hn(1.0, 1.0), c(0.0, 0.5), 256).unwrap();
        assert_eq!(w.value, 0);
    }

    #[test]
    fn winding_refuses_reference_on_spectrum() {
        let p = uniform_hn(1.0, 2.0);
        assert!(matches!(
            spectral_winding(&p, c(3.0, 0.0), 256),
            Err(NhError::IllConditionedContour { .. })
        ));
    }

    #[test]
    fn quadratic_roots() {
        assert_eq!(real_quadratic_roots(1.0, -3.0, 2.0), vec![1.0, 2.0]);
        assert_eq!(real_quadratic_roots(1.0, 2.0, 1.0), vec![-1.0]);
        assert!(real_quadratic_roots(1.0, 0.0, 1.0).is_empty());
        assert_eq!(real_quadratic_roots(0.0, 2.0, -4.0), vec![2.0]);
    }

    #[test]
    fn pbc_closings_of_four_band_model() {
        let roots = pbc_zero_gap_solutions(&fig3(0.0)).unwrap();
        let has = |x: f64| roots.iter().any(|g| (g.jr - x).abs() < 5e-4);
        assert!(has(0.6008) && has(-2.6008) && has(-1.3822));
    }

    #[test]
    fn gbz_closings_of_four_band_model() {
        let roots = gbz_zero_gap_solutions(&fig3(0.0)).unwrap();
        let has = |x: f64| roots.iter().any(|g| (g.jr - x).abs() < 5e-4);
        for x in [0.3468, -2.3468, -0.5685, -1.4315, -1.75] {
            assert!(has(x), "{x} missing from {roots:?}");
        }
    }

    #[test]
    fn closings_need_shifted_four_band_template() {
        let mut cfg = fig3(0.0);
        cfg.preset = Some(CouplingPreset::reciprocal(2.0));
        assert!(matches!(pbc_zero_gap_solutions(&cfg), Err(NhError::Unsupported(_))));
        let mut cfg = fig3(0.0);
        cfg.params.r = 3;
        assert!(matches!(gbz_zero_gap_solutions(&cfg), Err(NhError::Unsupported(_))));
    }

    #[test]
    fn hermitian_ssh_line_gap() {
        let p = ModelParams {
            d: 2,
            r: 1,
            l: 10,
            j0: 0.6,
            jl: c(0.0, 0.0),
            jr: c(0.0, 0.0),
            jm: c(1.0, 0.0),
            jmp: c(1.0, 0.0),
            boundary: Boundary::Pbc,
        };
        let gaps = line_gap_minima(&p, false, 256).unwrap();
        assert_eq!(gaps.len(), 1);
        assert_eq!(gaps[0].kind, GapKind::LineGapCentral);
        assert!((gaps[0].min_gap - 2.0 * (0.6f64 - 1.0).abs()).abs() < 1e-9);
    }

    #[test]
    fn component_labelling() {
        let pts = vec![c(0.0, 0.0), c(0.005, 0.0), c(1.0, 1.0), c(0.0105, 0.0)];
        assert_eq!(point_cloud_components(&pts, 1e-2), vec![0, 0, 1, 0]);
    }

    #[test]
    fn hermitian_ssh_zero_modes() {
        let p = ModelParams {
            d: 2,
            r: 1,
            l: 30,
            j0: 0.5,
            jl: c(0.0, 0.0),
            jr: c(0.0, 0.0),
            jm: c(1.0, 0.0),
            jmp: c(1.0, 0.0),
            boundary: Boundary::Obc,
        };
        let states = edge_states(&p, 1e-3).unwrap();
        assert_eq!(states.len(), 2);
        assert!(states.iter().all(|s| s.energy.norm() < 1e-6));
    }

    #[test]
    fn edge_states_require_obc() {
        let p = fig3(1.0).resolve().unwrap().with_boundary(Boundary::Pbc);
        assert!(matches!(edge_states(&p, 0.05), Err(NhError::Domain(_))));
    }
}
