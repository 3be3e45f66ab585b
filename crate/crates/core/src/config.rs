//! Strict TOML run configuration.
//!
//! ```toml
//! [model]
//! d = 1
//! r = 3
//! L = 50
//! JL_re = 1.0
//! JR_re = -2.5
//! preset = "RECIPROCAL_MODULAR"
//! J_re = 2.0
//! ```

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{NhError, Result};
use crate::harness::{linspace, Observable, SweepOptions};
use crate::metrology::{BasisChoice, FisherOptions, ParamSpec, StepPolicy, DEFAULT_STEP};
use crate::model::{Boundary, CouplingPreset, ModelConfig, ModelParams, ParamLabel, PresetKind};
use crate::spectral::DEFAULT_TOL_EIG;

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub d: usize,
    pub r: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "J0", default)]
    pub j0: f64,
    #[serde(rename = "JL_re", default = "one")]
    pub jl_re: f64,
    #[serde(rename = "JL_im", default)]
    pub jl_im: f64,
    #[serde(rename = "JR_re", default)]
    pub jr_re: f64,
    #[serde(rename = "JR_im", default)]
    pub jr_im: f64,
    #[serde(rename = "Jm_re", default, skip_serializing_if = "Option::is_none")]
    pub jm_re: Option<f64>,
    #[serde(rename = "Jm_im", default, skip_serializing_if = "Option::is_none")]
    pub jm_im: Option<f64>,
    #[serde(rename = "JmP_re", default, skip_serializing_if = "Option::is_none")]
    pub jmp_re: Option<f64>,
    #[serde(rename = "JmP_im", default, skip_serializing_if = "Option::is_none")]
    pub jmp_im: Option<f64>,
    #[serde(default = "default_boundary")]
    pub boundary: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(rename = "J_re", default, skip_serializing_if = "Option::is_none")]
    pub j_re: Option<f64>,
    #[serde(rename = "J_im", default, skip_serializing_if = "Option::is_none")]
    pub j_im: Option<f64>,
}

fn default_boundary() -> String {
    "OBC".into()
}

impl ModelBlock {
    pub fn to_model_config(&self) -> Result<ModelConfig> {
        let finite = [
            self.j0,
            self.jl_re,
            self.jl_im,
            self.jr_re,
            self.jr_im,
            self.jm_re.unwrap_or(0.0),
            self.jm_im.unwrap_or(0.0),
            self.jmp_re.unwrap_or(0.0),
            self.jmp_im.unwrap_or(0.0),
            self.j_re.unwrap_or(0.0),
            self.j_im.unwrap_or(0.0),
        ];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(NhError::Config("model couplings must be finite".into()));
        }
        let explicit_modular = [self.jm_re, self.jm_im, self.jmp_re, self.jmp_im].iter().any(Option::is_some);
        let has_j = self.j_re.is_some() || self.j_im.is_some();
        let preset = match &self.preset {
            Some(name) => {
                let kind: PresetKind = name.parse().map_err(|e: NhError| NhError::Config(e.to_string()))?;
                if explicit_modular {
                    return Err(NhError::Config(format!(
                        "Jm/JmP are derived from preset {kind} and must not be given"
                    )));
                }
                if kind != PresetKind::NonModular && !has_j {
                    return Err(NhError::Config(format!("preset {kind} needs J_re")));
                }
                Some(CouplingPreset::new(
                    kind,
                    Complex64::new(self.j_re.unwrap_or(0.0), self.j_im.unwrap_or(0.0)),
                ))
            }
            None => {
                if has_j {
                    return Err(NhError::Config("J_re/J_im need a preset".into()));
                }
                None
            }
        };
        let boundary: Boundary = self.boundary.parse().map_err(|e: NhError| NhError::Config(e.to_string()))?;
        let params = ModelParams {
            d: self.d,
            r: self.r,
            l: self.l,
            j0: self.j0,
            jl: Complex64::new(self.jl_re, self.jl_im),
            jr: Complex64::new(self.jr_re, self.jr_im),
            jm: Complex64::new(self.jm_re.unwrap_or(0.0), self.jm_im.unwrap_or(0.0)),
            jmp: Complex64::new(self.jmp_re.unwrap_or(0.0), self.jmp_im.unwrap_or(0.0)),
            boundary,
        };
        let cfg = ModelConfig::new(params, preset);
        cfg.resolve()?;
        Ok(cfg)
    }

    pub fn from_model_config(cfg: &ModelConfig) -> Self {
        let p = &cfg.params;
        let modular = cfg.preset.is_none();
        Self {
            d: p.d,
            r: p.r,
            l: p.l,
            j0: p.j0,
            jl_re: p.jl.re,
            jl_im: p.jl.im,
            jr_re: p.jr.re,
            jr_im: p.jr.im,
            jm_re: modular.then_some(p.jm.re),
            jm_im: modular.then_some(p.jm.im),
            jmp_re: modular.then_some(p.jmp.re),
            jmp_im: modular.then_some(p.jmp.im),
            boundary: p.boundary.to_string(),
            preset: cfg.preset.map(|c| c.kind.to_string()),
            j_re: cfg.preset.map(|c| c.j.re),
            j_im: cfg.preset.map(|c| c.j.im),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumBlock {
    pub tol_eig: Option<f64>,
    pub dim_cap: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub axis: String,
    pub grid: Option<Vec<f64>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub points: Option<usize>,
    pub observables: Vec<String>,
    /// Observable whose peak is refined and reported.
    pub peak: Option<String>,
}

impl SweepBlock {
    pub fn axis(&self) -> Result<ParamLabel> {
        parse_label(&self.axis)
    }

    pub fn grid(&self) -> Result<Vec<f64>> {
        match (&self.grid, self.start, self.stop, self.points) {
            (Some(g), None, None, None) => Ok(g.clone()),
            (None, Some(a), Some(b), Some(n)) => {
                if !(a.is_finite() && b.is_finite()) || n == 0 {
                    return Err(NhError::Config("sweep range must be finite with points ≥ 1".into()));
                }
                Ok(linspace(a, b, n))
            }
            _ => Err(NhError::Config(
                "sweep needs either grid or all of start, stop, points".into(),
            )),
        }
    }

    pub fn observables(&self) -> Result<Vec<Observable>> {
        self.observables.iter().map(|s| s.parse()).collect()
    }

    pub fn peak(&self) -> Result<Option<Observable>> {
        self.peak.as_deref().map(str::parse).transpose()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetrologyBlock {
    pub labels: Option<Vec<String>>,
    pub values: Option<Vec<f64>>,
    pub steps: Option<Vec<f64>>,
    pub step: Option<f64>,
    /// `fixed`, `richardson` or `adaptive`.
    pub policy: Option<String>,
    pub max_halvings: Option<usize>,
    /// Any of `position`, `current`.
    pub bases: Option<Vec<String>>,
}

impl MetrologyBlock {
    pub fn policy(&self) -> Result<StepPolicy> {
        let halvings = self.max_halvings.unwrap_or(4);
        match self.policy.as_deref() {
            None | Some("adaptive") => Ok(StepPolicy::Adaptive { max_halvings: halvings }),
            Some("fixed") => Ok(StepPolicy::Fixed),
            Some("richardson") => Ok(StepPolicy::Richardson),
            Some(other) => Err(NhError::Config(format!("unknown step policy '{other}'"))),
        }
    }

    pub fn bases(&self) -> Result<Vec<BasisChoice>> {
        let names = self.bases.clone().unwrap_or_else(|| vec!["position".into(), "current".into()]);
        names
            .iter()
            .map(|s| match s.as_str() {
                "position" => Ok(BasisChoice::Position),
                "current" => Ok(BasisChoice::Current),
                other => Err(NhError::Config(format!("unknown measurement basis '{other}'"))),
            })
            .collect()
    }

    /// Parameter spec against `cfg`; values default to the model's own.
    pub fn param_spec(&self, cfg: &ModelConfig) -> Result<ParamSpec> {
        let labels = match &self.labels {
            Some(ls) => ls.iter().map(|s| parse_label(s)).collect::<Result<Vec<_>>>()?,
            None => vec![ParamLabel::Jr],
        };
        let values = match &self.values {
            Some(v) => v.clone(),
            None => labels.iter().map(|&l| cfg.get(l)).collect::<Result<Vec<_>>>()?,
        };
        let steps = match (&self.steps, self.step) {
            (Some(_), Some(_)) => return Err(NhError::Config("give either step or steps".into())),
            (Some(s), None) => s.clone(),
            (None, h) => vec![h.unwrap_or(DEFAULT_STEP); labels.len()],
        };
        ParamSpec::new(labels, values, steps).map_err(|e| NhError::Config(e.to_string()))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyBlock {
    pub e_ref_re: Option<f64>,
    pub e_ref_im: Option<f64>,
    pub n_k: Option<usize>,
    pub contour_points: Option<usize>,
    pub grid_size: Option<usize>,
    pub energy_window: Option<f64>,
    pub loop_resolution: Option<f64>,
    /// Phase-diagram range over real `JR`.
    pub jr_start: Option<f64>,
    pub jr_stop: Option<f64>,
    pub jr_points: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingBlock {
    #[serde(rename = "L")]
    pub l: Vec<usize>,
    /// `peak` refines the QFI maximum in `window` per size; `point` evaluates
    /// the QFI at the model's own parameters; `bound` uses `1/Tr(F⁻¹)`.
    pub mode: Option<String>,
    pub axis: Option<String>,
    pub window: Option<[f64; 2]>,
    pub points: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalingMode {
    Peak,
    Point,
    Bound,
}

impl ScalingBlock {
    pub fn mode(&self) -> Result<ScalingMode> {
        match self.mode.as_deref() {
            None | Some("peak") => Ok(ScalingMode::Peak),
            Some("point") => Ok(ScalingMode::Point),
            Some("bound") => Ok(ScalingMode::Bound),
            Some(other) => Err(NhError::Config(format!("unknown scaling mode '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub path: Option<String>,
    pub format: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrology: Option<MetrologyBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<TopologyBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<ScalingBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputBlock>,
}

pub fn parse_label(s: &str) -> Result<ParamLabel> {
    s.parse().map_err(|e: NhError| NhError::Config(e.to_string()))
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| NhError::Config(e.to_string()))?;
        cfg.check_finite()?;
        cfg.model.to_model_config()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| NhError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| NhError::Config(e.to_string()))
    }

    pub fn from_model(cfg: &ModelConfig) -> Self {
        Self {
            model: ModelBlock::from_model_config(cfg),
            spectrum: None,
            sweep: None,
            metrology: None,
            topology: None,
            scaling: None,
            output: None,
        }
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        self.model.to_model_config()
    }

    pub fn tol_eig(&self) -> f64 {
        self.spectrum.as_ref().and_then(|s| s.tol_eig).unwrap_or(DEFAULT_TOL_EIG)
    }

    pub fn topology(&self) -> TopologyBlock {
        self.topology.clone().unwrap_or_default()
    }

    pub fn metrology(&self) -> MetrologyBlock {
        self.metrology.clone().unwrap_or_default()
    }

    pub fn fisher_options(&self) -> Result<FisherOptions> {
        Ok(FisherOptions {
            policy: self.metrology().policy()?,
            tol_eig: self.tol_eig(),
            ..FisherOptions::default()
        })
    }

    /// Sweep settings; the step policy defaults to a fixed stencil here.
    pub fn sweep_options(&self) -> Result<SweepOptions> {
        let m = self.metrology();
        let t = self.topology();
        let mut o = SweepOptions::default();
        if m.policy.is_some() {
            o.fisher.policy = m.policy()?;
        }
        o.fisher.tol_eig = self.tol_eig();
        if let Some(h) = m.step {
            o.step = h;
        }
        if let Some(n) = t.contour_points {
            o.contour_points = n;
        }
        if let Some(n) = t.n_k {
            o.n_k = n;
        }
        o.e_ref = Complex64::new(t.e_ref_re.unwrap_or(0.0), t.e_ref_im.unwrap_or(0.0));
        Ok(o)
    }

    fn check_finite(&self) -> Result<()> {
        let mut values: Vec<f64> = Vec::new();
        if let Some(s) = &self.spectrum {
            values.extend(s.tol_eig);
        }
        if let Some(s) = &self.sweep {
            values.extend(s.grid.iter().flatten());
            values.extend(s.start);
            values.extend(s.stop);
        }
        if let Some(m) = &self.metrology {
            values.extend(m.values.iter().flatten());
            values.extend(m.steps.iter().flatten());
            values.extend(m.step);
        }
        if let Some(t) = &self.topology {
            values.extend([t.e_ref_re, t.e_ref_im, t.energy_window, t.loop_resolution, t.jr_start, t.jr_stop].into_iter().flatten());
        }
        if let Some(s) = &self.scaling {
            values.extend(s.window.iter().flatten());
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(NhError::Config("all numeric values must be finite".into()));
        }
        Ok(())
    }
}
