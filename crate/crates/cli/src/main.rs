use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_complex::Complex64;

use nhlab::config::{parse_label, RunConfig, ScalingMode};
use nhlab::gbz::{gbz_radius, point_gap_residual, GbzContour, DEFAULT_CONTOUR_POINTS};
use nhlab::harness::{
    find_peak, inverse_trace_bound, linspace, peak_scaling, point_scaling, preset, preset_manifest, qfi_value,
    run_sweep, PresetName, SweepSpec,
};
use nhlab::io::{self, format_float, OutputFormat, Table};
use nhlab::metrology::{fisher_information, total_variance_bound, BasisChoice};
use nhlab::model::build_hamiltonian_with_cap;
use nhlab::par::Execution;
use nhlab::spectral::{cumulative_population, full_spectrum_with_tol, steady_state_index};
use nhlab::topology::{
    band_winding_with, dense_pbc_bands, gbz_zero_gap_solutions, line_gap_minima, pbc_loop_analysis,
    pbc_zero_gap_solutions, phase_diagram, point_gap_report, spectral_winding, split_gaps, GapClosing,
    WindingResult,
};
use nhlab::model::DEFAULT_DIM_CAP;
use nhlab::{Boundary, ModelConfig, NhError, ParamLabel, Result};

#[derive(Parser, Debug)]
#[command(name = "nhlab", version, about = "Modular non-Hermitian lattices: spectra, topology and critical sensing")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; without it only the summary line is printed.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long, global = true)]
    format: Option<String>,
    /// Worker threads.
    #[arg(long, global = true, env = "NHLAB_THREADS")]
    threads: Option<usize>,
    /// Relative eigenpair residual bound.
    #[arg(long = "tol-eig", global = true)]
    tol_eig: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Eigenvalues and residuals of the real-space Hamiltonian.
    Spectrum,
    /// Cumulative OBC population and its skin slope.
    Skin,
    /// Point and line gaps, closing conditions, or a phase diagram over JR.
    Gaps,
    /// Band winding on the GBZ, or spectral winding where there is no chiral split.
    Winding,
    /// Single-parameter QFI and CFIs.
    Qfi,
    /// Multi-parameter QFIM and CFIMs.
    Qfim,
    /// Observables along one parameter axis.
    Sweep,
    /// Power-law fit of Fisher information against site count.
    Scaling,
    /// Dense PBC spectrum of a figure preset.
    Preset {
        /// FIG2_HN, FIG2_SSH, FIG3, FIG4_HN, FIG4_SSH, FIG5_TOP or FIG5_BOTTOM.
        name: Option<String>,
        /// Parameter override, e.g. JR=-2 or L=20.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Write the preset manifest instead.
        #[arg(long)]
        manifest: bool,
    },
}

struct Ctx {
    out: Option<PathBuf>,
    format: OutputFormat,
}

impl Ctx {
    fn emit(&self, table: &Table) -> Result<()> {
        if let Some(path) = &self.out {
            table.write(path, self.format)?;
        }
        Ok(())
    }
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| NhError::Config("--config is required for this command".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(tol) = cli.tol_eig {
        cfg.spectrum.get_or_insert_with(Default::default).tol_eig = Some(tol);
    }
    Ok(cfg)
}

fn resolve_format(cli: &Cli, cfg: Option<&RunConfig>) -> Result<OutputFormat> {
    let from_cfg = cfg.and_then(|c| c.output.as_ref()).and_then(|o| o.format.clone());
    cli.format.clone().or(from_cfg).map_or(Ok(OutputFormat::Csv), |s| s.parse())
}

fn resolve_out(cli: &Cli, cfg: Option<&RunConfig>) -> Option<PathBuf> {
    cli.out.clone().or_else(|| {
        cfg.and_then(|c| c.output.as_ref())
            .and_then(|o| o.path.as_ref())
            .map(PathBuf::from)
    })
}

fn check_tol(tol: Option<f64>) -> Result<()> {
    match tol {
        Some(t) if !(t > 0.0 && t.is_finite()) => Err(NhError::Config(format!("--tol-eig must be positive, got {t}"))),
        _ => Ok(()),
    }
}

fn run(cli: &Cli) -> Result<String> {
    check_tol(cli.tol_eig)?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(NhError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| NhError::Config(e.to_string()))?;
    }
    if let Command::Preset {
        name,
        overrides,
        manifest,
    } = &cli.command
    {
        let ctx = Ctx {
            out: cli.out.clone(),
            format: resolve_format(cli, None)?,
        };
        return cmd_preset(&ctx, name.as_deref(), overrides, *manifest);
    }
    let cfg = load(cli)?;
    let ctx = Ctx {
        out: resolve_out(cli, Some(&cfg)),
        format: resolve_format(cli, Some(&cfg))?,
    };
    match cli.command {
        Command::Spectrum => cmd_spectrum(&ctx, &cfg),
        Command::Skin => cmd_skin(&ctx, &cfg),
        Command::Gaps => cmd_gaps(&ctx, &cfg),
        Command::Winding => cmd_winding(&ctx, &cfg),
        Command::Qfi => cmd_fisher(&ctx, &cfg, true),
        Command::Qfim => cmd_fisher(&ctx, &cfg, false),
        Command::Sweep => cmd_sweep(&ctx, &cfg),
        Command::Scaling => cmd_scaling(&ctx, &cfg),
        Command::Preset { .. } => unreachable!("handled above"),
    }
}

fn dim_cap(cfg: &RunConfig) -> usize {
    cfg.spectrum.as_ref().and_then(|s| s.dim_cap).unwrap_or(DEFAULT_DIM_CAP)
}

fn cmd_spectrum(ctx: &Ctx, cfg: &RunConfig) -> Result<String> {
    let p = cfg.model_config()?.resolve()?;
    let dec = full_spectrum_with_tol(&build_hamiltonian_with_cap(&p, dim_cap(cfg))?, cfg.tol_eig())?;
    ctx.emit(&io::spectrum_table(&dec))?;
    let steady = steady_state_index(&dec).map(|i| dec.values[i]).unwrap_or_default();
    Ok(format!(
        "spectrum: dim={} boundary={} max_residual={} steady_state={}",
        dec.len(),
        p.boundary,
        format_float(dec.max_residual()),
        complex(steady)
    ))
}

fn complex(z: Complex64) -> String {
    format!("{}{:+}i", format_float(z.re), z.im)
}

fn cmd_skin(ctx: &Ctx, cfg: &RunConfig) -> Result<String> {
    let p = cfg.model_config()?.resolve()?.with_boundary(Boundary::Obc);
    let dec = full_spectrum_with_tol(&build_hamiltonian_with_cap(&p, dim_cap(cfg))?, cfg.tol_eig())?;
    let profile = cumulative_population(&dec, &p)?;
    ctx.emit(&io::profile_table(&profile))?;
    let expected = gbz_radius(&p).map(|r| format_float(2.0 * r.ln())).unwrap_or_else(|e| e.tag().into());
    Ok(format!(
        "skin: slope_per_module={} fit_r2={} expected_slope={expected}",
        format_float(profile.slope_per_module),
        format_float(profile.fit_r2)
    ))
}

fn closings_meta(list: &[GapClosing]) -> String {
    list.iter().map(|g| format_float(g.jr)).collect::<Vec<_>>().join(";")
}

fn cmd_gaps(ctx: &Ctx, cfg: &RunConfig) -> Result<String> {
    let mc = cfg.model_config()?;
    let topo = cfg.topology();
    let grid_size = topo.grid_size.unwrap_or(512);
    if let (Some(a), Some(b), Some(n)) = (topo.jr_start, topo.jr_stop, topo.jr_points) {
        let rows = phase_diagram(
            &mc,
            &linspace(a, b, n),
            grid_size,
            topo.contour_points.unwrap_or(DEFAULT_CONTOUR_POINTS),
            Execution::Parallel,
        )?;
        ctx.emit(&io::phase_table(&rows))?;
        let defined: Vec<i64> = rows.iter().filter_map(|r| r.winding).collect();
        let flips = defined.windows(2).filter(|w| w[0] != w[1]).count();
        return Ok(format!("gaps: phase_diagram rows={} undefined={} winding_changes={flips}",
            rows.len(),
            rows.len() - defined.len()));
    }
    let p = mc.resolve()?;
    let mut reports = vec![point_gap_report(&p)?];
    let pbc = line_gap_minima(&p, false, grid_size)?;
    let (pbc_central, _) = split_gaps(&pbc);
    reports.extend(pbc);
    let gbz = line_gap_minima(&p, true, grid_size)?;
    let (gbz_central, _) = split_gaps(&gbz);
    reports.extend(gbz);
    let mut table = io::gaps_table(&reports);
    let mut summary = format!(
        "gaps: point_gap_residual={} pbc_central={} gbz_central={}",
        format_float(reports[0].min_gap),
        format_float(pbc_central),
        format_float(gbz_central)
    );
    if let (Ok(a), Ok(b)) = (pbc_zero_gap_solutions(&mc), gbz_zero_gap_solutions(&mc)) {
        table = table
            .with_meta("pbc_closings", closings_meta(&a))
            .with_meta("gbz_closings", closings_meta(&b));
        summary.push_str(&format!(
            " pbc_closings={} gbz_closings={}",
            closings_meta(&a),
            closings_meta(&b)
        ));
    }
    ctx.emit(&table)?;
    Ok(summary)
}

fn cmd_winding(ctx: &Ctx, cfg: &RunConfig) -> Result<String> {
    let p = cfg.model_config()?.resolve()?;
    let topo = cfg.topology();
    let band = GbzContour::for_model(&p, topo.contour_points.unwrap_or(DEFAULT_CONTOUR_POINTS))
        .and_then(|c| band_winding_with(&p, &c, Execution::Parallel));
    let (kind, w): (&str, WindingResult) = match band {
        Ok(w) => ("band", w),
        Err(NhError::Unsupported(_)) => {
            let e_ref = Complex64::new(topo.e_ref_re.unwrap_or(0.0), topo.e_ref_im.unwrap_or(0.0));
            let pbc = p.with_boundary(Boundary::Pbc);
            ("spectral", spectral_winding(&pbc, e_ref, topo.n_k.unwrap_or(512))?)
        }
        Err(e) => return Err(e),
    };
    ctx.emit(&io::winding_table("JR_re", &[(p.jr.re, w.clone())]).with_meta("type", kind))?;
    Ok(format!("winding={} type={kind} raw_phase={}", w.value, format_float(w.raw_phase)))
}

fn cmd_fisher(ctx: &Ctx, cfg: &RunConfig, single: bool) -> Result<String> {
    let mc = cfg.model_config()?;
    let m = cfg.metrology();
    let ps = m.param_spec(&mc)?;
    if single && ps.len() != 1 {
        return Err(NhError::Config(format!(
            "qfi takes exactly one parameter, got {}; use qfim",
            ps.len()
        )));
    }
    let bases = m.bases()?;
    let report = fisher_information(&mc, &ps, &bases, &cfg.fisher_options()?)?;
    ctx.emit(&io::fisher_table(&report))?;
    let names: Vec<&str> = bases
        .iter()
        .map(|b| match b {
            BasisChoice::Position => "position",
            BasisChoice::Current => "current",
        })
        .collect();
    if single {
        let mut s = format!("qfi={}", format_float(report.qfim.get(0, 0)));
        for (n, c) in names.iter().zip(&report.cfim) {
            s.push_str(&format!(" cfi_{n}={}", format_float(c.get(0, 0))));
        }
        Ok(s)
    } else {
        let trace: f64 = (0..ps.len()).map(|i| report.qfim.get(i, i)).sum();
        let bound = total_variance_bound(&report.qfim)
            .map(|b| format_float(1.0 / b))
            .unwrap_or_else(|e| e.tag().into());
        Ok(format!(
            "qfim: params={} trace={} inverse_trace_bound={bound} det={}",
            ps.labels.iter().map(|l| l.as_str()).collect::<Vec<_>>().join(";"),
            format_float(trace),
            format_float(report.qfim.determinant())
        ))
    }
}

fn cmd_sweep(ctx: &Ctx, cfg: &RunConfig) -> Result<String> {
    let block = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| NhError::Config("sweep needs a [sweep] block".into()))?;
    let spec = SweepSpec::new(
        cfg.model_config()?,
        block.axis()?,
        block.grid()?,
        block.observables()?,
        cfg.sweep_options()?,
    )?;
    let table = run_sweep(&spec)?;
    let mut out = io::sweep_table(&table);
    let mut s = format!("sweep: rows={} failed={}", table.rows.len(), table.failed_rows());
    if let Some(obs) = block.peak()? {
        let peak = find_peak(&spec, &table, obs)?;
        out = out
            .with_meta("peak_observable", obs)
            .with_meta("peak_location", format_float(peak.location))
            .with_meta("peak_value", format_float(peak.value));
        s.push_str(&format!(
            " peak_{obs}={} at {}={} boundary={}",
            format_float(peak.value),
            spec.axis,
            format_float(peak.location),
            peak.boundary
        ));
    }
    ctx.emit(&out)?;
    Ok(s)
}

fn cmd_scaling(ctx: &Ctx, cfg: &RunConfig) -> Result<String> {
    let block = cfg
        .scaling
        .as_ref()
        .ok_or_else(|| NhError::Config("scaling needs a [scaling] block".into()))?;
    let mc = cfg.model_config()?;
    let opts = cfg.sweep_options()?;
    let axis = block.axis.as_deref().map(parse_label).transpose()?.unwrap_or(ParamLabel::Jr);
    let result = match block.mode()? {
        ScalingMode::Peak => {
            let window = block
                .window
                .ok_or_else(|| NhError::Config("peak scaling needs window = [lo, hi]".into()))?;
            peak_scaling(&mc, axis, (window[0], window[1]), block.points.unwrap_or(21), &block.l, &opts)?
        }
        ScalingMode::Point => point_scaling(&mc, &block.l, Execution::Parallel, |c| qfi_value(c, axis, &opts))?,
        ScalingMode::Bound => {
            let ps = cfg.metrology().param_spec(&mc)?;
            let fo = cfg.fisher_options()?;
            point_scaling(&mc, &block.l, Execution::Parallel, |c| inverse_trace_bound(c, &ps, &fo))?
        }
    };
    ctx.emit(&io::scaling_table(&result))?;
    Ok(format!(
        "scaling: exponent={} prefactor={} r2={}",
        format_float(result.fit.exponent),
        format_float(result.fit.prefactor),
        format_float(result.fit.r2)
    ))
}

fn apply_override(cfg: &ModelConfig, item: &str) -> Result<ModelConfig> {
    let (key, value) = item
        .split_once('=')
        .ok_or_else(|| NhError::Config(format!("override '{item}' is not KEY=VALUE")))?;
    if key == "L" {
        let l: usize = value
            .parse()
            .map_err(|_| NhError::Config(format!("L must be a positive integer, got '{value}'")))?;
        return Ok(cfg.with_modules(l));
    }
    let label = parse_label(key)?;
    let v: f64 = value
        .parse()
        .map_err(|_| NhError::Config(format!("override value '{value}' is not a number")))?;
    if !v.is_finite() {
        return Err(NhError::Config(format!("override {key} must be finite")));
    }
    cfg.with(label, v).map_err(|e| NhError::Config(e.to_string()))
}

fn cmd_preset(ctx: &Ctx, name: Option<&str>, overrides: &[String], manifest: bool) -> Result<String> {
    if manifest {
        let text = preset_manifest()?;
        if let Some(path) = &ctx.out {
            std::fs::write(path, &text)?;
        }
        return Ok(format!("preset: manifest entries={}", PresetName::ALL.len()));
    }
    let name: PresetName = name
        .ok_or_else(|| NhError::Config("preset needs a name or --manifest".into()))?
        .parse()?;
    let bundle = preset(name);
    let mut mc = bundle.config.clone();
    for item in overrides {
        mc = apply_override(&mc, item)?;
    }
    let p = mc.resolve()?.with_boundary(Boundary::Pbc);
    let resolution = 1e-2;
    let (bands, n_k) = dense_pbc_bands(&p, 512, resolution)?;
    let ks: Vec<f64> = (0..n_k).map(|j| 2.0 * std::f64::consts::PI * j as f64 / n_k as f64).collect();
    let loops = pbc_loop_analysis(&p, n_k, resolution)?;
    let residual = point_gap_residual(&p).map(format_float).unwrap_or_else(|e| e.tag().into());
    let table = io::bands_table(&ks, &bands)
        .with_meta("preset", name)
        .with_meta("n_k", n_k)
        .with_meta("components", loops.components)
        .with_meta("loops", loops.loops);
    ctx.emit(&table)?;
    Ok(format!(
        "preset={name} components={} loops={} point_gap_residual={residual} n_k={n_k}",
        loops.components, loops.loops
    ))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error kind={} message={}", e.tag(), e);
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
