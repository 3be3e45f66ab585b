//! Modular non-Hermitian tight-binding lattice.
//!
//! A chain of `L` modules, each holding `r` sites with `d` sublevels. Basis
//! states `|n, μ, ν⟩` are ordered lexicographically (module, site, sublevel),
//! so flat index = `(n·r + μ)·d + ν` with zero-based indices. With that
//! ordering every hop connects consecutive basis states and the OBC
//! Hamiltonian is tridiagonal.
//!
//! Hops (one bond per consecutive pair):
//! - sublevel `ν → ν+1` inside a site: `J0` both ways (Hermitian);
//! - site `(μ, d) → (μ+1, 1)` inside a module: `⟨μ,d|H|μ+1,1⟩ = JL`, `⟨μ+1,1|H|μ,d⟩ = JR`;
//! - module `(n, r, d) → (n+1, 1, 1)`: `⟨n,r,d|H|n+1,1,1⟩ = Jm`, reverse `JmP`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{NhError, Result};
use crate::linalg::{ComplexMatrix, ONE, ZERO};

/// Largest Hilbert-space dimension the real-space builders accept by default.
pub const DEFAULT_DIM_CAP: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Boundary {
    Obc,
    Pbc,
}

impl FromStr for Boundary {
    type Err = NhError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "OBC" => Ok(Boundary::Obc),
            "PBC" => Ok(Boundary::Pbc),
            other => Err(NhError::Config(format!("unknown boundary '{other}'"))),
        }
    }
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Obc => "OBC",
            Boundary::Pbc => "PBC",
        })
    }
}

/// Concrete couplings of one lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Sublevels per site.
    pub d: usize,
    /// Sites per module.
    pub r: usize,
    /// Number of modules.
    pub l: usize,
    /// Hermitian sublevel hop.
    pub j0: f64,
    pub jl: Complex64,
    pub jr: Complex64,
    pub jm: Complex64,
    pub jmp: Complex64,
    pub boundary: Boundary,
}

impl ModelParams {
    /// Module size `r·d`, i.e. the Bloch block dimension.
    pub fn cell_dim(&self) -> usize {
        self.r * self.d
    }

    /// Hilbert-space dimension `d·r·L`.
    pub fn dim(&self) -> usize {
        self.d * self.r * self.l
    }

    /// Site count `N = r·L`.
    pub fn sites(&self) -> usize {
        self.r * self.l
    }

    pub fn index(&self, module: usize, site: usize, level: usize) -> usize {
        (module * self.r + site) * self.d + level
    }

    pub fn with_boundary(&self, boundary: Boundary) -> Self {
        Self {
            boundary,
            ..self.clone()
        }
    }

    pub fn with_modules(&self, l: usize) -> Self {
        Self { l, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 1 || self.r < 1 {
            return Err(NhError::InvalidParams("d and r must be at least 1".into()));
        }
        if self.l < 2 {
            return Err(NhError::InvalidParams(format!(
                "need at least two modules, got L = {}",
                self.l
            )));
        }
        if self.cell_dim() < 2 {
            return Err(NhError::InvalidParams(
                "a module needs at least two internal states (r·d ≥ 2)".into(),
            ));
        }
        if self.d >= 2 && self.j0 == 0.0 {
            return Err(NhError::InvalidParams("J0 must be nonzero when d ≥ 2".into()));
        }
        let finite = |z: Complex64| z.re.is_finite() && z.im.is_finite();
        if !self.j0.is_finite() || ![self.jl, self.jr, self.jm, self.jmp].into_iter().all(finite) {
            return Err(NhError::InvalidParams("couplings must be finite".into()));
        }
        Ok(())
    }

    pub fn validate_with_cap(&self, cap: usize) -> Result<()> {
        self.validate()?;
        if self.dim() > cap {
            return Err(NhError::DimensionCap {
                dim: self.dim(),
                cap,
            });
        }
        Ok(())
    }

    /// Hops inside one module as `(i, j, H[i][j], H[j][i])` with `j = i + 1`
    /// and cell-local indices.
    fn intra_module_bonds(&self) -> Vec<(usize, usize, Complex64, Complex64)> {
        let j0 = Complex64::new(self.j0, 0.0);
        let mut bonds = Vec::with_capacity(self.cell_dim());
        for site in 0..self.r {
            for level in 0..self.d - 1 {
                let i = site * self.d + level;
                bonds.push((i, i + 1, j0, j0));
            }
            if site + 1 < self.r {
                let i = site * self.d + self.d - 1;
                bonds.push((i, i + 1, self.jl, self.jr));
            }
        }
        bonds
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PresetKind {
    /// `Jm = J`, `JmP = 1/J`.
    ReciprocalModular,
    /// `Jm = JL + J`, `JmP = JR + J`.
    Shifted,
    /// `Jm = JL`, `JmP = JR`: the plain chain without modular structure.
    NonModular,
}

impl FromStr for PresetKind {
    type Err = NhError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "RECIPROCAL_MODULAR" => Ok(PresetKind::ReciprocalModular),
            "SHIFTED" => Ok(PresetKind::Shifted),
            "NON_MODULAR" => Ok(PresetKind::NonModular),
            other => Err(NhError::Config(format!("unknown coupling preset '{other}'"))),
        }
    }
}

impl fmt::Display for PresetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PresetKind::ReciprocalModular => "RECIPROCAL_MODULAR",
            PresetKind::Shifted => "SHIFTED",
            PresetKind::NonModular => "NON_MODULAR",
        })
    }
}

/// Rule deriving the inter-module couplings from a single parameter `J`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingPreset {
    pub kind: PresetKind,
    pub j: Complex64,
}

impl CouplingPreset {
    pub fn new(kind: PresetKind, j: Complex64) -> Self {
        Self { kind, j }
    }

    pub fn reciprocal(j: f64) -> Self {
        Self::new(PresetKind::ReciprocalModular, Complex64::new(j, 0.0))
    }

    pub fn shifted(j: f64) -> Self {
        Self::new(PresetKind::Shifted, Complex64::new(j, 0.0))
    }

    pub fn non_modular() -> Self {
        Self::new(PresetKind::NonModular, ZERO)
    }

    /// Overwrites `Jm` and `JmP` of `p` according to the rule.
    pub fn apply(&self, p: &mut ModelParams) -> Result<()> {
        match self.kind {
            PresetKind::ReciprocalModular => {
                if self.j == ZERO {
                    return Err(NhError::InvalidParams(
                        "RECIPROCAL_MODULAR preset needs J ≠ 0".into(),
                    ));
                }
                p.jm = self.j;
                p.jmp = ONE / self.j;
            }
            PresetKind::Shifted => {
                p.jm = p.jl + self.j;
                p.jmp = p.jr + self.j;
            }
            PresetKind::NonModular => {
                p.jm = p.jl;
                p.jmp = p.jr;
            }
        }
        Ok(())
    }
}

/// Scalar handles on the couplings that experiments vary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ParamLabel {
    #[serde(rename = "JR_re")]
    JrRe,
    #[serde(rename = "JR_im")]
    JrIm,
    /// Real `JR` (imaginary part forced to zero).
    #[serde(rename = "JR")]
    Jr,
    #[serde(rename = "Jm")]
    Jm,
    #[serde(rename = "JmP")]
    JmP,
    /// Real preset parameter `J`.
    #[serde(rename = "J")]
    J,
}

impl ParamLabel {
    pub const ALL: [ParamLabel; 6] = [
        ParamLabel::JrRe,
        ParamLabel::JrIm,
        ParamLabel::Jr,
        ParamLabel::Jm,
        ParamLabel::JmP,
        ParamLabel::J,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ParamLabel::JrRe => "JR_re",
            ParamLabel::JrIm => "JR_im",
            ParamLabel::Jr => "JR",
            ParamLabel::Jm => "Jm",
            ParamLabel::JmP => "JmP",
            ParamLabel::J => "J",
        }
    }
}

impl fmt::Display for ParamLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ParamLabel {
    type Err = NhError;

    fn from_str(s: &str) -> Result<Self> {
        ParamLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| NhError::Config(format!("unknown parameter label '{s}'")))
    }
}

/// Model couplings plus an optional preset that derives `Jm`/`JmP`.
///
/// Parameter updates go through here so that preset-derived couplings follow
/// `JR` and `J`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub params: ModelParams,
    pub preset: Option<CouplingPreset>,
}

impl ModelConfig {
    pub fn new(params: ModelParams, preset: Option<CouplingPreset>) -> Self {
        Self { params, preset }
    }

    /// Concrete, validated couplings.
    pub fn resolve(&self) -> Result<ModelParams> {
        let mut p = self.params.clone();
        if let Some(preset) = &self.preset {
            preset.apply(&mut p)?;
        }
        p.validate()?;
        Ok(p)
    }

    pub fn get(&self, label: ParamLabel) -> Result<f64> {
        let p = self.resolve()?;
        Ok(match label {
            ParamLabel::JrRe | ParamLabel::Jr => p.jr.re,
            ParamLabel::JrIm => p.jr.im,
            ParamLabel::Jm => p.jm.re,
            ParamLabel::JmP => p.jmp.re,
            ParamLabel::J => self
                .preset
                .ok_or_else(|| NhError::InvalidParams("parameter J needs a coupling preset".into()))?
                .j
                .re,
        })
    }

    pub fn with(&self, label: ParamLabel, value: f64) -> Result<ModelConfig> {
        let mut next = self.clone();
        match label {
            ParamLabel::JrRe => next.params.jr.re = value,
            ParamLabel::JrIm => next.params.jr.im = value,
            ParamLabel::Jr => next.params.jr = Complex64::new(value, 0.0),
            ParamLabel::Jm | ParamLabel::JmP => {
                if self.preset.is_some() {
                    return Err(NhError::InvalidParams(format!(
                        "{label} is derived from the coupling preset and cannot be set directly"
                    )));
                }
                if label == ParamLabel::Jm {
                    next.params.jm = Complex64::new(value, 0.0);
                } else {
                    next.params.jmp = Complex64::new(value, 0.0);
                }
            }
            ParamLabel::J => match next.preset.as_mut() {
                Some(preset) => preset.j = Complex64::new(value, 0.0),
                None => {
                    return Err(NhError::InvalidParams(
                        "parameter J needs a coupling preset".into(),
                    ))
                }
            },
        }
        Ok(next)
    }

    pub fn with_modules(&self, l: usize) -> ModelConfig {
        ModelConfig {
            params: self.params.with_modules(l),
            preset: self.preset,
        }
    }

    pub fn with_boundary(&self, boundary: Boundary) -> ModelConfig {
        ModelConfig {
            params: self.params.with_boundary(boundary),
            preset: self.preset,
        }
    }
}

/// Real-space Hamiltonian with the default dimension cap.
pub fn build_hamiltonian(p: &ModelParams) -> Result<ComplexMatrix> {
    build_hamiltonian_with_cap(p, DEFAULT_DIM_CAP)
}

pub fn build_hamiltonian_with_cap(p: &ModelParams, cap: usize) -> Result<ComplexMatrix> {
    p.validate_with_cap(cap)?;
    let mut h = ComplexMatrix::zeros(p.dim());
    for (i, j, fwd, bwd) in real_space_bonds(p) {
        h[(i, j)] += fwd;
        h[(j, i)] += bwd;
    }
    Ok(h)
}

/// Every real-space bond as `(i, j, H[i][j], H[j][i])`.
fn real_space_bonds(p: &ModelParams) -> Vec<(usize, usize, Complex64, Complex64)> {
    let cell = p.cell_dim();
    let intra = p.intra_module_bonds();
    let mut bonds = Vec::with_capacity(p.dim());
    for n in 0..p.l {
        let offset = n * cell;
        bonds.extend(intra.iter().map(|&(i, j, f, b)| (offset + i, offset + j, f, b)));
        let last = offset + cell - 1;
        if n + 1 < p.l {
            bonds.push((last, last + 1, p.jm, p.jmp));
        } else if p.boundary == Boundary::Pbc {
            bonds.push((last, 0, p.jm, p.jmp));
        }
    }
    bonds
}

/// Single-module block with the inter-module bond folded in as
/// `⟨r,d|·|1,1⟩ += Jm·forward` and `⟨1,1|·|r,d⟩ += JmP·backward`.
fn folded_module(p: &ModelParams, forward: Complex64, backward: Complex64) -> ComplexMatrix {
    let n = p.cell_dim();
    let mut h = ComplexMatrix::zeros(n);
    for (i, j, f, b) in p.intra_module_bonds() {
        h[(i, j)] += f;
        h[(j, i)] += b;
    }
    h[(n - 1, 0)] += p.jm * forward;
    h[(0, n - 1)] += p.jmp * backward;
    h
}

/// Bloch Hamiltonian at quasi-momentum `k`.
pub fn build_bloch(p: &ModelParams, k: f64) -> ComplexMatrix {
    let phase = Complex64::from_polar(1.0, k);
    folded_module(p, phase, phase.conj())
}

/// Generalized Bloch Hamiltonian: `e^{ik} → β`, `e^{-ik} → 1/β`.
pub fn build_generalized_bloch(p: &ModelParams, beta: Complex64) -> Result<ComplexMatrix> {
    if beta == ZERO || !beta.re.is_finite() || !beta.im.is_finite() {
        return Err(NhError::Domain(format!("β must be finite and nonzero, got {beta}")));
    }
    Ok(folded_module(p, beta, ONE / beta))
}

/// Off-diagonal blocks of the sublattice-sorted generalized Bloch Hamiltonian.
#[derive(Clone, Debug)]
pub struct ChiralBlocks {
    /// Upper-right block (A rows, B columns).
    pub plus: ComplexMatrix,
    /// Lower-left block (B rows, A columns).
    pub minus: ComplexMatrix,
    /// `permutation[k]` is the original cell index placed at position `k`.
    pub permutation: Vec<usize>,
}

impl ChiralBlocks {
    /// Sorted-basis matrix `[[0, h+], [h-, 0]]`.
    pub fn sorted_matrix(&self) -> ComplexMatrix {
        let half = self.plus.dim();
        ComplexMatrix::from_fn(2 * half, |i, j| match (i < half, j < half) {
            (true, false) => self.plus[(i, j - half)],
            (false, true) => self.minus[(i - half, j)],
            _ => ZERO,
        })
    }

    /// Undo the sublattice sort.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let sorted = self.sorted_matrix();
        let n = sorted.dim();
        let mut position = vec![0; n];
        for (k, &orig) in self.permutation.iter().enumerate() {
            position[orig] = k;
        }
        ComplexMatrix::from_fn(n, |i, j| sorted[(position[i], position[j])])
    }

    /// Chiral operator `diag(+1,…,+1,−1,…,−1)` in the sorted basis.
    pub fn chiral_operator(&self) -> ComplexMatrix {
        let half = self.plus.dim();
        ComplexMatrix::from_fn(2 * half, |i, j| match (i == j, i < half) {
            (true, true) => ONE,
            (true, false) => -ONE,
            _ => ZERO,
        })
    }
}

/// Splits `H_β` into chiral blocks using even cell indices as sublattice A.
///
/// Every hop in the module joins consecutive cell indices, plus the folded
/// corner bond between the first and last state; the alternating labelling is
/// therefore bipartite exactly when `r·d` is even.
pub fn chiral_blocks(p: &ModelParams, beta: Complex64) -> Result<ChiralBlocks> {
    let n = p.cell_dim();
    if n % 2 != 0 {
        return Err(NhError::Unsupported(format!(
            "module dimension r·d = {n} is odd; the alternating sublattice labelling is not bipartite"
        )));
    }
    let h = build_generalized_bloch(p, beta)?;
    for i in 0..n {
        for j in 0..n {
            if i % 2 == j % 2 && h[(i, j)] != ZERO {
                return Err(NhError::Unsupported(format!(
                    "entry ({i}, {j}) couples states of the same sublattice"
                )));
            }
        }
    }
    let permutation: Vec<usize> = (0..n).step_by(2).chain((1..n).step_by(2)).collect();
    let sorted = h.permuted(&permutation);
    let half = n / 2;
    let a: Vec<usize> = (0..half).collect();
    let b: Vec<usize> = (half..n).collect();
    Ok(ChiralBlocks {
        plus: sorted.block(&a, &b).to_square()?,
        minus: sorted.block(&b, &a).to_square()?,
        permutation,
    })
}

/// Total particle current `i(T − T†)`, `T = Σ |i⟩⟨i+1|` over every bond.
pub fn build_current_operator(p: &ModelParams) -> Result<ComplexMatrix> {
    p.validate_with_cap(DEFAULT_DIM_CAP)?;
    let i_unit = Complex64::new(0.0, 1.0);
    let mut current = ComplexMatrix::zeros(p.dim());
    for (i, j, _, _) in real_space_bonds(p) {
        current[(i, j)] += i_unit;
        current[(j, i)] -= i_unit;
    }
    Ok(current)
}
