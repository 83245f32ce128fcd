//! Experiment configuration (TOML) and the checks run before any work starts.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use lindblad_core::dynamics::{Ensemble, Projection};
use lindblad_core::eigenops::{Abscissa, OverlapConstraints};
use lindblad_core::models::Channel;
use lindblad_core::pauli::symmetric_dimension;
use lindblad_core::spectral::{GinibreKind, Window, GINIBRE_MAX, MAX_DIM};
use lindblad_core::superop::PAULI_MAX_SITES;
use lindblad_core::{ModelSpec, RealizationSource, RealizationTable};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Spectrum,
    Csr,
    Eigenops,
    Ipr,
    Overlaps,
    Toy,
    Purity,
    Renyi2,
    Opdyn,
    Anomalous,
    GinibreRef,
    SeedSweep,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Spectrum => "spectrum",
            Kind::Csr => "csr",
            Kind::Eigenops => "eigenops",
            Kind::Ipr => "ipr",
            Kind::Overlaps => "overlaps",
            Kind::Toy => "toy",
            Kind::Purity => "purity",
            Kind::Renyi2 => "renyi2",
            Kind::Opdyn => "opdyn",
            Kind::Anomalous => "anomalous",
            Kind::GinibreRef => "ginibre-ref",
            Kind::SeedSweep => "seed-sweep",
        }
    }

    fn needs_model(self) -> bool {
        self != Kind::GinibreRef
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExperimentConfig {
    /// Must agree with the command-line kind when present.
    pub kind: Option<Kind>,
    /// Output subdirectory; defaults to the kind.
    pub name: Option<String>,
    pub out: Option<PathBuf>,
    /// Extra realization tables (`*.txt`), merged over the built-ins.
    pub fixtures_dir: Option<PathBuf>,
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub analysis: Analysis,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub dynamics: DynamicsConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub ginibre: GinibreConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", default)]
pub struct Analysis {
    pub window: Window,
    pub bins: usize,
    /// Coarse-graining width; 0.5 for Ising and 0.08·|X̄| otherwise when unset.
    pub delta: Option<f64>,
    /// Size sectors to export; every sector when unset.
    pub sectors: Option<Vec<usize>>,
    pub abscissa: Abscissa,
    pub rescale: bool,
    /// Window centres for IPR curves; the spectrum is tiled when unset.
    pub grid: Option<Vec<f64>>,
    pub delta_omega: f64,
    pub omega_max: Option<f64>,
    pub omega_points: usize,
    pub overlap: OverlapConstraints,
    /// Pauli string (e.g. "IZI") whose conjugation 𝒜 = P ⊗ P* enters the overlaps; identity when unset.
    pub overlap_operator: Option<String>,
    /// Site weights for the toy chain; uniform when unset.
    pub toy_weights: Option<Vec<f64>>,
}

impl Default for Analysis {
    fn default() -> Self {
        Self {
            window: Window::Bulk,
            bins: 40,
            delta: None,
            sectors: None,
            abscissa: Abscissa::Raw,
            rescale: false,
            grid: None,
            delta_omega: 0.1,
            omega_max: None,
            omega_points: 100,
            overlap: OverlapConstraints::default(),
            overlap_operator: None,
            toy_weights: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", default)]
pub struct EnsembleConfig {
    /// Initial-state family, e.g. `{ kind = "rank-chi", chi = 1 }`.
    pub state: Ensemble,
    pub projector: Option<Projection>,
    /// Number of initial states; state k uses seed `seed + k`.
    pub count: usize,
    pub seed: u64,
    /// Rényi-2 probe: Pauli (1, 2, 3 = X, Y, Z) at `site`, the chain centre when unset.
    pub renyi_pauli: u8,
    pub renyi_site: Option<usize>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self { state: Ensemble::RankChi { chi: 1 }, projector: None, count: 50, seed: 0, renyi_pauli: 2, renyi_site: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    Linear,
    Geometric,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Propagator {
    /// Eigen-expansion unless the eigenbasis is ill-conditioned.
    Auto,
    Integrator,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", default)]
pub struct DynamicsConfig {
    /// Linear for state runs and geometric for operator runs when unset.
    pub spacing: Option<Spacing>,
    /// First nonzero time of a geometric grid.
    pub t_min: f64,
    /// Final time; otherwise `extent` in units of the natural scale: 1/D per
    /// state for purity, 1/√Σ for Rényi-2 and 1/|λ₁| for operator runs.
    pub t_max: Option<f64>,
    /// Defaults: 1 for state runs, 20 for operator runs.
    pub extent: Option<f64>,
    pub points: usize,
    pub propagator: Propagator,
    /// Named initial operator (see `list-fixtures`).
    pub operator: String,
    pub operator_seed: u64,
    /// Keep only jumps of this channel in the per-size rate table.
    pub rate_channel: Option<Channel>,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            spacing: None,
            t_min: 0.01,
            t_max: None,
            extent: None,
            points: 40,
            propagator: Propagator::Auto,
            operator: "figs-init-op".into(),
            operator_seed: 0,
            rate_channel: None,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", default)]
pub struct SweepConfig {
    /// Tabulated seeds.
    pub fixtures: Vec<u64>,
    /// Seeds drawn from the PRNG, inclusive range.
    pub sampled: Option<[u64; 2]>,
    /// Chain lengths; the model's N when empty.
    pub sizes: Vec<usize>,
    /// S[l̂₁]/N at or above this marks a seed as anomalous.
    pub threshold: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", default)]
pub struct GinibreConfig {
    pub kind: GinibreKind,
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    /// CSR window radius as a fraction of the cloud radius.
    pub radius_fraction: f64,
    pub poisson: bool,
    /// Matrix size for the |α| statistics (0 skips them).
    pub alpha_n: usize,
    /// Matrices pooled for the |α| statistics.
    pub alpha_samples: usize,
    /// Real-Ginibre sizes for the real-eigenvalue count.
    pub real_sizes: Vec<usize>,
}

impl Default for GinibreConfig {
    fn default() -> Self {
        Self { kind: GinibreKind::Complex, n: 2000, samples: 10, seed: 0, radius_fraction: 0.9, poisson: true, alpha_n: 0, alpha_samples: 1, real_sizes: Vec::new() }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        // toml reports the offending line, column and field
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn table(&self) -> Result<RealizationTable, CliError> {
        match &self.fixtures_dir {
            Some(d) => RealizationTable::with_custom_dir(d).map_err(|e| CliError::Config(format!("fixtures-dir: {e}"))),
            None => Ok(RealizationTable::builtin()),
        }
    }

    pub fn model(&self) -> Result<&ModelSpec, CliError> {
        self.model.as_ref().ok_or_else(|| CliError::Config("missing [model] section".into()))
    }

    /// Realization sources of a seed sweep, in output order.
    pub fn sweep_sources(&self) -> Vec<RealizationSource> {
        let mut v: Vec<RealizationSource> = self.sweep.fixtures.iter().map(|&s| RealizationSource::Fixture(s)).collect();
        if let Some([a, b]) = self.sweep.sampled {
            v.extend((a..=b).map(RealizationSource::Sampled));
        }
        v
    }

    pub fn sweep_sizes(&self) -> Result<Vec<usize>, CliError> {
        Ok(if self.sweep.sizes.is_empty() { vec![self.model()?.n()] } else { self.sweep.sizes.clone() })
    }

    /// Schema, guard and fixture checks; nothing is computed or written.
    pub fn validate(&self, kind: Kind) -> Result<(), CliError> {
        if let Some(k) = self.kind {
            if k != kind {
                return Err(CliError::Config(format!("config is for kind {k}, invoked as {kind}")));
            }
        }
        if let Some(name) = &self.name {
            if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
                return Err(CliError::Config(format!("name {name:?} must be a plain directory name")));
            }
        }
        let table = self.table()?;
        if kind.needs_model() {
            let model = self.model()?;
            model.validate().map_err(CliError::from_core)?;
            if kind == Kind::SeedSweep {
                let sources = self.sweep_sources();
                if sources.is_empty() {
                    return Err(CliError::Config("sweep: no seeds (set sweep.fixtures or sweep.sampled)".into()));
                }
                if let Some([a, b]) = self.sweep.sampled {
                    if a > b {
                        return Err(CliError::Config(format!("sweep.sampled: empty range [{a}, {b}]")));
                    }
                }
                if !matches!(model, ModelSpec::RandomLocal { .. } | ModelSpec::NonInteracting { .. } | ModelSpec::TwoSiteOnly { .. }) {
                    return Err(CliError::Config(format!("sweep: model family {} has no realization to vary", model.family())));
                }
                for s in &sources {
                    s.resolve(&table).map_err(|e| CliError::Config(format!("sweep: {e}")))?;
                }
                for n in self.sweep_sizes()? {
                    let m = model.with_n(n);
                    m.validate().map_err(CliError::from_core)?;
                    guard_dense(&m)?;
                }
            } else {
                resolve(model, &table)?;
                guard_dense(model)?;
            }
            self.validate_analysis(kind, model)?;
        } else {
            self.validate_ginibre()?;
        }
        Ok(())
    }

    fn validate_analysis(&self, kind: Kind, model: &ModelSpec) -> Result<(), CliError> {
        let n = model.n();
        let a = &self.analysis;
        if a.bins == 0 {
            return Err(CliError::Config("analysis.bins must be positive".into()));
        }
        if let Some(d) = a.delta {
            if !(d > 0.0 && d.is_finite()) {
                return Err(CliError::Config(format!("analysis.delta must be positive, got {d}")));
            }
        }
        if let Some(s) = a.sectors.as_ref().and_then(|v| v.iter().find(|&&s| s > n)) {
            return Err(CliError::Config(format!("analysis.sectors: size {s} exceeds N = {n}")));
        }
        if kind == Kind::Overlaps {
            if !(a.delta_omega > 0.0) || a.omega_points == 0 {
                return Err(CliError::Config("analysis.delta-omega and analysis.omega-points must be positive".into()));
            }
            if let Some(p) = &a.overlap_operator {
                if p.len() != n || !p.chars().all(|c| "IXYZ".contains(c)) {
                    return Err(CliError::Config(format!("analysis.overlap-operator {p:?} must be {n} letters from IXYZ")));
                }
            }
        }
        if kind == Kind::Toy {
            if !matches!(model, ModelSpec::RandomLocal { .. } | ModelSpec::NonInteracting { .. }) {
                return Err(CliError::Config("toy: needs a random-local or non-interacting model".into()));
            }
            if let Some(w) = &a.toy_weights {
                if w.len() != n || w.iter().any(|x| !x.is_finite()) {
                    return Err(CliError::Config(format!("analysis.toy-weights needs {n} finite entries")));
                }
            }
        }
        let d = &self.dynamics;
        if matches!(kind, Kind::Purity | Kind::Renyi2 | Kind::Opdyn | Kind::Anomalous) {
            if d.points < 2 {
                return Err(CliError::Config("dynamics.points must be at least 2".into()));
            }
            if d.extent.is_some_and(|x| !(x > 0.0)) || !(d.t_min > 0.0) || d.t_max.is_some_and(|t| !(t > 0.0)) {
                return Err(CliError::Config("dynamics.extent, t-min and t-max must be positive".into()));
            }
            if d.spacing == Some(Spacing::Geometric) && d.t_max.is_some_and(|t| t <= d.t_min) {
                return Err(CliError::Config("dynamics.t-max must exceed t-min on a geometric grid".into()));
            }
        }
        if matches!(kind, Kind::Opdyn | Kind::Anomalous) && !["figs-init-op", "rand-init-op"].contains(&d.operator.as_str()) {
            return Err(CliError::Config(format!("dynamics.operator: unknown named operator {:?}", d.operator)));
        }
        if matches!(kind, Kind::Purity | Kind::Renyi2) {
            let e = &self.ensemble;
            if e.count == 0 {
                return Err(CliError::Config("ensemble.count must be positive".into()));
            }
            match &e.state {
                Ensemble::RankChi { chi } if *chi == 0 => return Err(CliError::Config("ensemble.chi must be positive".into())),
                Ensemble::Explicit { amplitudes } if amplitudes.len() != 1 << n => {
                    return Err(CliError::Config(format!("ensemble amplitudes: expected {} entries", 1usize << n)))
                }
                _ => {}
            }
            if let Some(p) = e.projector {
                if p.site >= n || !(1..=3).contains(&p.pauli) {
                    return Err(CliError::Config(format!("ensemble.projector {p:?} does not fit N = {n}")));
                }
            }
            if kind == Kind::Renyi2 && (!(1..=3).contains(&e.renyi_pauli) || e.renyi_site.is_some_and(|s| s >= n)) {
                return Err(CliError::Config("ensemble.renyi-pauli must be 1..3 and renyi-site inside the chain".into()));
            }
        }
        Ok(())
    }

    fn validate_ginibre(&self) -> Result<(), CliError> {
        let g = &self.ginibre;
        for &n in std::iter::once(&g.n).chain(&g.real_sizes).chain((g.alpha_n > 0).then_some(&g.alpha_n)) {
            if n > GINIBRE_MAX {
                return Err(CliError::Guard(format!("Ginibre size {n} exceeds {GINIBRE_MAX}")));
            }
            if n < 3 {
                return Err(CliError::Config(format!("Ginibre size {n} is too small for spacing ratios")));
            }
        }
        if g.samples == 0 || g.alpha_samples == 0 || !(g.radius_fraction > 0.0 && g.radius_fraction <= 1.0) {
            return Err(CliError::Config("ginibre.samples and alpha-samples must be positive and radius-fraction in (0, 1]".into()));
        }
        Ok(())
    }
}

fn resolve(model: &ModelSpec, table: &RealizationTable) -> Result<(), CliError> {
    let source = match model {
        ModelSpec::RandomLocal { realization, .. } | ModelSpec::NonInteracting { realization, .. } | ModelSpec::TwoSiteOnly { realization, .. } => realization,
        _ => return Ok(()),
    };
    source.resolve(table).map(|_| ()).map_err(|e| CliError::Config(format!("model.realization: {e}")))
}

/// Refuses models whose superoperator would not fit the dense pipeline.
pub fn guard_dense(model: &ModelSpec) -> Result<(), CliError> {
    let n = model.n();
    if n > PAULI_MAX_SITES {
        return Err(CliError::Guard(format!("N = {n} exceeds the dense superoperator limit N = {PAULI_MAX_SITES}")));
    }
    let dim = if model.reflection_symmetric() { symmetric_dimension(n) } else { 1usize << (2 * n) };
    if dim > MAX_DIM {
        return Err(CliError::Guard(format!("superoperator dimension {dim} (N = {n}) exceeds the eigensolver limit {MAX_DIM}")));
    }
    Ok(())
}
