//! Pipelines behind each experiment kind.

use std::sync::Mutex;

use lindblad_core::cache::{model_hash, Cache};
use lindblad_core::dynamics::{self, InitialStateSpec, Projection, Trajectory};
use lindblad_core::eigenops::{self, coarse_grain, coarse_ipr, eigen_size_profile, mean_size, slow_mode_size, superop_overlap_profile, Side};
use lindblad_core::models::PRNG_NAME;
use lindblad_core::spectral::{self, csr, csr_stats, decompose, shape_stats, CsrSample, GinibreKind, Window};
use lindblad_core::superop::{assemble_default, assemble_in_basis, conjugation_superop};
use lindblad_core::toy::{default_site_weights, toy_profile_check};
use lindblad_core::{stats, ModelInstance, ModelSpec, OperatorVector, PauliBasis, PauliString, PauliSum, RealizationSource, RealizationTable};
use lindblad_core::{SpectralDecomposition, SuperOperator, C64};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Kind, Propagator, Spacing};
use crate::error::CliError;
use crate::output::{cplx, num, opt, Output};

/// Shared state of one run.
pub struct Ctx<'a> {
    pub cfg: &'a ExperimentConfig,
    pub table: RealizationTable,
    pub cache: Option<Cache>,
    pub out: &'a Output,
    notes: Mutex<Vec<String>>,
    seeds: Mutex<Vec<u64>>,
}

/// Summary returned to the manifest.
pub struct RunSummary {
    pub results: Value,
    pub notes: Vec<String>,
    pub seeds: Vec<u64>,
    pub model_hash: Option<String>,
    pub prng: &'static str,
}

struct Prepared {
    instance: ModelInstance,
    l: SuperOperator,
    dec: SpectralDecomposition,
}

impl<'a> Ctx<'a> {
    pub fn new(cfg: &'a ExperimentConfig, cache: Option<Cache>, out: &'a Output) -> Result<Self, CliError> {
        Ok(Self { cfg, table: cfg.table()?, cache, out, notes: Mutex::new(Vec::new()), seeds: Mutex::new(Vec::new()) })
    }

    fn note(&self, s: String) {
        self.notes.lock().expect("note log poisoned").push(s);
    }

    fn seed(&self, s: u64) {
        self.seeds.lock().expect("seed log poisoned").push(s);
    }

    fn prepare(&self, spec: &ModelSpec) -> Result<Prepared, CliError> {
        self.prepare_in(spec, false)
    }

    /// `full` skips the reflection-even reduction, for states that are not mirror symmetric.
    fn prepare_in(&self, spec: &ModelSpec, full: bool) -> Result<Prepared, CliError> {
        let instance = spec.build(&self.table)?;
        let symmetric = spec.reflection_symmetric() && !full;
        let tag = if symmetric { "symmetric-even-pauli" } else { "full-pauli" };
        let cached_l = match &self.cache {
            Some(c) => c.load_superop(spec, tag)?,
            None => None,
        };
        let l = match cached_l {
            Some(l) => l,
            None => {
                let l = if symmetric { assemble_default(&instance)? } else { assemble_in_basis(&instance, PauliBasis::full(instance.n)?)? };
                if let Some(c) = &self.cache {
                    c.store_superop(&l)?;
                }
                l
            }
        };
        let cached_dec = match &self.cache {
            Some(c) => c.load_decomposition(spec, tag)?,
            None => None,
        };
        let dec = match cached_dec {
            Some(d) => d,
            None => {
                let d = decompose(&l)?;
                if let Some(c) = &self.cache {
                    c.store_decomposition(spec, &d)?;
                }
                d
            }
        };
        Ok(Prepared { instance, l, dec })
    }

    fn prepare_main(&self) -> Result<Prepared, CliError> {
        self.prepare_main_in(false)
    }

    fn prepare_main_in(&self, full: bool) -> Result<Prepared, CliError> {
        let spec = self.cfg.model()?;
        if let ModelSpec::NonLocalRandom { seed, .. } = spec {
            self.seed(*seed);
        }
        if let ModelSpec::RandomLocal { realization: RealizationSource::Sampled(s), .. } = spec {
            self.seed(*s);
        }
        self.prepare_in(spec, full)
    }

    /// A single-site operator keeps mirror symmetry only on the centre site of an odd chain.
    fn prepare_for_sites(&self, sites: &[usize]) -> Result<Prepared, CliError> {
        let n = self.cfg.model()?.n();
        let full = sites.iter().any(|&s| n % 2 == 0 || s != (n - 1) / 2);
        if full && self.cfg.model()?.reflection_symmetric() {
            self.note(format!("single-site operators on sites {sites:?} break mirror symmetry; using the full Pauli basis"));
        }
        self.prepare_main_in(full)
    }
}

pub fn run(kind: Kind, ctx: &Ctx) -> Result<RunSummary, CliError> {
    let results = match kind {
        Kind::Spectrum => spectrum(ctx)?,
        Kind::Csr => csr_kind(ctx)?,
        Kind::Eigenops => eigenops_kind(ctx)?,
        Kind::Ipr => ipr(ctx)?,
        Kind::Overlaps => overlaps(ctx)?,
        Kind::Toy => toy(ctx)?,
        Kind::Purity => purity(ctx)?,
        Kind::Renyi2 => renyi2(ctx)?,
        Kind::Opdyn => opdyn(ctx)?,
        Kind::Anomalous => anomalous(ctx)?,
        Kind::GinibreRef => ginibre_ref(ctx)?,
        Kind::SeedSweep => seed_sweep(ctx)?,
    };
    let mut seeds = ctx.seeds.lock().expect("seed log poisoned").clone();
    seeds.sort_unstable();
    seeds.dedup();
    let model_hash = ctx.cfg.model.as_ref().filter(|_| kind != Kind::GinibreRef && kind != Kind::SeedSweep).map(|m| {
        let tag = if m.reflection_symmetric() { "symmetric-even-pauli" } else { "full-pauli" };
        model_hash(m, tag)
    });
    Ok(RunSummary { results, notes: ctx.notes.lock().expect("note log poisoned").clone(), seeds, model_hash, prng: PRNG_NAME })
}

fn write_spectrum(ctx: &Ctx, dec: &SpectralDecomposition) -> Result<Value, CliError> {
    let eigs = dec.eigenvalues();
    let shape = shape_stats(eigs)?;
    let window = ctx.cfg.analysis.window;
    let alpha = dec.abs_alpha();
    let rows = eigs.iter().zip(&alpha).enumerate().map(|(k, (z, a))| {
        let [re, im] = cplx(*z);
        vec![k.to_string(), re, im, num(*a), u8::from(window.contains(*z, &shape)).to_string()]
    });
    ctx.out.csv("fig1_spectrum.csv", &["index", "re", "im", "abs_alpha", "in_window"], rows)?;
    Ok(json!({ "dim": dec.dim(), "shape": shape, "window": window, "biorthogonality_residual": dec.biorthogonality_residual() }))
}

fn spectrum(ctx: &Ctx) -> Result<Value, CliError> {
    let p = ctx.prepare_main()?;
    let mut v = write_spectrum(ctx, &p.dec)?;
    v["full_residual"] = json!(p.dec.full_residual(&p.l));
    v["trace_residual"] = json!(p.l.trace_residual());
    ctx.out.json("spectrum_stats.json", &v)?;
    // eigenvector arrays in the cache layout, inventoried with the rest
    Cache::new(ctx.out.dir().join("eigen")).store_decomposition(ctx.cfg.model()?, &p.dec)?;
    ctx.out.adopt_tree("eigen")?;
    Ok(v)
}

fn write_csr(ctx: &Ctx, prefix: &str, label: &str, sample: &CsrSample<f64>, bins: usize) -> Result<Value, CliError> {
    let st = csr_stats(sample, bins)?;
    let rows = st.radial_hist.0.iter().zip(&st.radial_hist.1).map(|(c, d)| vec![label.to_string(), "abs".into(), num(*c), num(*d)]);
    let ang = st.angular_hist.0.iter().zip(&st.angular_hist.1).map(|(c, d)| vec![label.to_string(), "arg".into(), num(*c), num(*d)]);
    ctx.out.csv(&format!("{prefix}_hist.csv"), &["ensemble", "quantity", "centre", "density"], rows.chain(ang))?;
    Ok(json!({ "count": st.count, "mean_abs": st.mean_abs, "mean_cos_theta": st.mean_cos_theta, "duplicates": sample.duplicates, "window": sample.source_window }))
}

fn csr_kind(ctx: &Ctx) -> Result<Value, CliError> {
    let p = ctx.prepare_main()?;
    let spectrum = write_spectrum(ctx, &p.dec)?;
    let sample = csr(p.dec.eigenvalues(), ctx.cfg.analysis.window)?;
    let rows = sample.z.iter().zip(&sample.indices).map(|(z, i)| {
        let [re, im] = cplx(*z);
        vec![i.to_string(), re, im]
    });
    ctx.out.csv("fig2_csr.csv", &["index", "re_z", "im_z"], rows)?;
    let stats = write_csr(ctx, "fig2_csr", "model", &sample, ctx.cfg.analysis.bins)?;
    let v = json!({ "spectrum": spectrum, "csr": stats });
    ctx.out.json("csr_stats.json", &v)?;
    Ok(v)
}

fn default_delta(ctx: &Ctx, dec: &SpectralDecomposition) -> Result<f64, CliError> {
    Ok(match (ctx.cfg.analysis.delta, ctx.cfg.model()?) {
        (Some(d), _) => d,
        (None, ModelSpec::DissipativeIsing { .. }) => 0.5,
        (None, _) => 0.08 * shape_stats(dec.eigenvalues())?.x_bar.abs(),
    })
}

fn sectors(ctx: &Ctx, n: usize) -> Vec<usize> {
    ctx.cfg.analysis.sectors.clone().unwrap_or_else(|| (0..=n).collect())
}

fn side_name(side: Side) -> &'static str {
    match side {
        Side::Left => "left",
        Side::Right => "right",
    }
}

fn eigenops_kind(ctx: &Ctx) -> Result<Value, CliError> {
    let p = ctx.prepare_main()?;
    let n = p.instance.n;
    let profile = eigen_size_profile(&p.dec)?;
    let mut header: Vec<String> = ["mode", "re", "im", "side", "mean_size"].map(String::from).to_vec();
    header.extend((0..=n).map(|s| format!("p_{s}")));
    let mut rows = Vec::new();
    for side in [Side::Right, Side::Left] {
        for (k, (z, ps)) in profile.eigenvalues.iter().zip(profile.side(side)).enumerate() {
            let [re, im] = cplx(*z);
            let mut row = vec![k.to_string(), re, im, side_name(side).into(), num(mean_size(ps))];
            row.extend(ps.iter().map(|x| num(*x)));
            rows.push(row);
        }
    }
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    ctx.out.csv("fig4_size_profile.csv", &h, rows)?;
    let delta = default_delta(ctx, &p.dec)?;
    for side in [Side::Right, Side::Left] {
        let mut rows = Vec::new();
        for s in sectors(ctx, n) {
            for w in coarse_grain(&profile, delta, side, s)?.windows {
                rows.push(vec![s.to_string(), num(w.x0), w.count.to_string(), opt(w.mean), num(w.std), num(w.min), num(w.max), num(w.err_top), num(w.err_bottom)]);
            }
        }
        let name = format!("fig4_{}_coarse_ps.csv", side_name(side));
        ctx.out.csv(&name, &["s", "x0", "count", "mean", "std", "min", "max", "err_top", "err_bottom"], rows)?;
    }
    let a = &ctx.cfg.analysis;
    let alpha = spectral::alpha_stats(p.dec.eigenvalues(), &p.dec.abs_alpha(), a.window, a.bins)?;
    let rows = alpha.centres.iter().zip(alpha.hist.iter().zip(&alpha.reference)).map(|(c, (h, r))| vec![num(*c), num(*h), num(*r)]);
    ctx.out.csv("fig3_alpha.csv", &["centre", "density", "reference"], rows)?;
    let slow = slow_mode_size(&p.dec)?;
    let rows = (0..=n).map(|s| vec![s.to_string(), num(slow.p_left[s]), num(slow.p_right[s])]);
    ctx.out.csv("fig8_slow_mode.csv", &["s", "p_left", "p_right"], rows)?;
    let v = json!({
        "delta": delta,
        "max_trace_weight": eigenops::max_trace_weight(&profile),
        "alpha": { "count": alpha.values.len(), "mean": alpha.mean, "std": alpha.std, "ks_distance": alpha.ks_distance },
        "slow_mode": { "lambda": [slow.lambda.re, slow.lambda.im], "size_left": slow.size_left, "size_right": slow.size_right,
                       "dominant_left": slow.dominant_left, "dominant_right": slow.dominant_right },
    });
    ctx.out.json("eigenops_stats.json", &v)?;
    Ok(v)
}

fn ipr(ctx: &Ctx) -> Result<Value, CliError> {
    let p = ctx.prepare_main()?;
    let n = p.instance.n;
    let a = &ctx.cfg.analysis;
    let delta = default_delta(ctx, &p.dec)?;
    let basis = eigenops::pauli_basis_of(&p.dec)?;
    let mut sector_counts = Vec::new();
    for side in [Side::Right, Side::Left] {
        let mut rows = Vec::new();
        for s in sectors(ctx, n) {
            let b = basis.sector_count(s);
            if b == 0 {
                continue;
            }
            let cp = coarse_ipr(&p.dec, delta, side, s, a.abscissa, a.rescale, a.grid.as_deref())?;
            for w in cp.windows {
                rows.push(vec![s.to_string(), b.to_string(), num(w.x0), w.count.to_string(), opt(w.mean), num(w.std), num(w.min), num(w.max)]);
            }
            if side == Side::Right {
                sector_counts.push(json!({ "s": s, "b": b }));
            }
        }
        let name = format!("fig6_{}_ipr.csv", side_name(side));
        ctx.out.csv(&name, &["s", "b_n_s", "x0", "count", "mean", "std", "min", "max"], rows)?;
    }
    let shape = shape_stats(p.dec.eigenvalues())?;
    let v = json!({ "delta": delta, "abscissa": a.abscissa, "rescaled": a.rescale, "shape": shape, "sectors": sector_counts });
    ctx.out.json("ipr_stats.json", &v)?;
    Ok(v)
}

fn overlaps(ctx: &Ctx) -> Result<Value, CliError> {
    let p = ctx.prepare_main()?;
    let a = &ctx.cfg.analysis;
    let basis = eigenops::pauli_basis_of(&p.dec)?;
    let asup = match &a.overlap_operator {
        Some(code) => {
            let codes: Vec<u8> = code.chars().map(|c| "IXYZ".find(c).unwrap_or(0) as u8).collect();
            let sum = PauliSum { terms: vec![(PauliString::from_codes(&codes), C64::new(1.0, 0.0))] };
            Some(conjugation_superop(&sum, basis)?)
        }
        None => None,
    };
    let shape = shape_stats(p.dec.eigenvalues())?;
    let omax = a.omega_max.unwrap_or(6.0 * shape.sigma_x.max(shape.sigma_y));
    let omegas: Vec<f64> = (1..=a.omega_points).map(|k| omax * k as f64 / a.omega_points as f64).collect();
    let pts = superop_overlap_profile(&p.dec, asup.as_ref().map(|s| s.matrix()), &omegas, a.delta_omega, a.overlap)?;
    let rows = pts.iter().map(|q| vec![num(q.omega), q.pairs.to_string(), opt(q.value)]);
    ctx.out.csv("figA8_overlaps.csv", &["omega", "pairs", "value"], rows)?;
    let v = json!({ "operator": a.overlap_operator.as_deref().unwrap_or("identity"), "delta_omega": a.delta_omega, "constraints": a.overlap, "dim": p.dec.dim() });
    ctx.out.json("overlaps_stats.json", &v)?;
    Ok(v)
}

fn toy(ctx: &Ctx) -> Result<Value, CliError> {
    let spec = ctx.cfg.model()?;
    let (n, j, gamma1, realization) = match spec {
        ModelSpec::RandomLocal { n, j, gamma1, realization, .. } | ModelSpec::NonInteracting { n, j, gamma1, realization } => (*n, *j, *gamma1, realization),
        _ => return Err(CliError::Config("toy: needs a random-local or non-interacting model".into())),
    };
    let r = realization.resolve(&ctx.table)?;
    let weights = ctx.cfg.analysis.toy_weights.clone().unwrap_or_else(|| default_site_weights(n));
    let cmp = toy_profile_check(&r, j, gamma1, &weights)?;
    let rows = cmp.rows.iter().map(|row| {
        let [re, im] = cplx(row.lambda);
        vec![row.mode.to_string(), re, im, row.excitations.to_string(), side_name(row.side).into(), row.s.to_string(), num(row.numeric), num(row.analytic), num(row.mu_one)]
    });
    ctx.out.csv("fig5_toy_profiles.csv", &["mode", "re", "im", "excitations", "side", "s", "numeric", "analytic", "mu_one"], rows)?;
    let max_dev = cmp.max_right_deviation.max(cmp.max_left_deviation);
    let v = json!({
        "weights": weights, "spectrum_distance": cmp.spectrum_distance, "max_right_deviation": cmp.max_right_deviation,
        "max_left_deviation": cmp.max_left_deviation, "max_deviation": max_dev, "single_site": cmp.single,
    });
    ctx.out.json("toy_stats.json", &v)?;
    Ok(v)
}

fn grid(ctx: &Ctx, natural: f64, default_extent: f64, default_spacing: Spacing) -> Result<Vec<f64>, CliError> {
    let d = &ctx.cfg.dynamics;
    let t_max = d.t_max.unwrap_or(d.extent.unwrap_or(default_extent) * natural);
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(CliError::Numeric(lindblad_core::Error::Precondition(format!("time scale {natural} gives no usable grid"))));
    }
    Ok(match d.spacing.unwrap_or(default_spacing) {
        Spacing::Linear => dynamics::linear_grid(t_max, d.points - 1),
        Spacing::Geometric => dynamics::geometric_grid(d.t_min.min(t_max / 2.0), t_max, d.points - 1)?,
    })
}

fn evolve_state(ctx: &Ctx, p: &Prepared, rho: &OperatorVector, times: &[f64]) -> Result<Trajectory, CliError> {
    Ok(match ctx.cfg.dynamics.propagator {
        Propagator::Auto => dynamics::evolve_state(&p.l, Some(&p.dec), rho, times)?,
        Propagator::Integrator => dynamics::evolve_state_integrator(&p.l, rho, times)?,
    })
}

fn evolve_operator(ctx: &Ctx, p: &Prepared, a: &OperatorVector, times: &[f64]) -> Result<Trajectory, CliError> {
    Ok(match ctx.cfg.dynamics.propagator {
        Propagator::Auto => dynamics::evolve_operator(&p.l, Some(&p.dec), a, times)?,
        Propagator::Integrator => dynamics::evolve_operator_integrator(&p.l, a, times)?,
    })
}

fn note_method(ctx: &Ctx, traj: &Trajectory) {
    if ctx.cfg.dynamics.propagator == Propagator::Auto && traj.method == dynamics::Method::Integrator {
        ctx.note(format!("eigenbasis completeness residual {:?} above tolerance; trajectories use the integrator", traj.completeness));
    }
}

fn method_name(traj: &Trajectory) -> &'static str {
    match traj.method {
        dynamics::Method::Spectral => "spectral",
        dynamics::Method::Integrator => "integrator",
    }
}

fn state_specs(ctx: &Ctx, projector: Option<Projection>) -> Vec<InitialStateSpec> {
    let e = &ctx.cfg.ensemble;
    (0..e.count as u64)
        .map(|k| {
            ctx.seed(e.seed + k);
            InitialStateSpec { ensemble: e.state.clone(), projector, seed: e.seed + k }
        })
        .collect()
}

fn purity(ctx: &Ctx) -> Result<Value, CliError> {
    let p = ctx.prepare_for_sites(&ctx.cfg.ensemble.projector.map(|p| p.site).into_iter().collect::<Vec<_>>())?;
    let basis = eigenops::pauli_basis_of(&p.dec)?;
    let specs = state_specs(ctx, ctx.cfg.ensemble.projector);
    let per_state: Vec<_> = specs
        .par_iter()
        .map(|spec| -> Result<_, CliError> {
            let rho = dynamics::sample_state(spec, basis.clone())?;
            let d = dynamics::decoherence_rate_superop(&p.l, rho.coeffs());
            let times = grid(ctx, 1.0 / d, 1.0, Spacing::Linear)?;
            let traj = evolve_state(ctx, &p, &rho, &times)?;
            let purity = traj.norm_sqr();
            let fit = dynamics::fit_early_exponent(&times, &purity).ok();
            let dev = dynamics::purity_deviation(&p.l, rho.coeffs()).ok();
            let series = dynamics::deviation_series(&times, &purity, d);
            Ok((spec.seed, d, times, purity, series, fit, dev, method_name(&traj), traj))
        })
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for (k, (seed, d, times, purity, series, fit, dev, method, traj)) in per_state.iter().enumerate() {
        note_method(ctx, traj);
        for ((t, pu), dv) in times.iter().zip(purity).zip(series) {
            rows.push(vec![k.to_string(), seed.to_string(), num(*t), num(*pu), num(purity[0] * (-d * t).exp()), num(*dv)]);
        }
        fits.push(vec![
            k.to_string(),
            seed.to_string(),
            num(purity[0]),
            num(*d),
            opt(fit.as_ref().map(|f| f.b)),
            opt(fit.as_ref().map(|f| f.window_end)),
            opt(fit.as_ref().map(|f| f.rms)),
            opt(dev.as_ref().map(|x| x.sigma2)),
            opt(dev.as_ref().map(|x| x.delta_at_inv_d)),
            method.to_string(),
        ]);
    }
    ctx.out.csv("fig9_purity.csv", &["state", "seed", "t", "purity", "estimate", "deviation"], rows)?;
    ctx.out.csv("fig9_purity_fits.csv", &["state", "seed", "p0", "d", "b", "window_end", "rms", "sigma2", "delta_inv_d", "method"], fits)?;
    let ds: Vec<f64> = per_state.iter().map(|s| s.1).collect();
    let bs: Vec<f64> = per_state.iter().filter_map(|s| s.5.as_ref().map(|f| f.b)).collect();
    let rel: Vec<f64> = per_state.iter().filter_map(|s| s.5.as_ref().map(|f| (f.b - s.1).abs() / s.1)).collect();
    let deltas: Vec<f64> = per_state.iter().filter_map(|s| s.6.as_ref().map(|x| x.delta_at_inv_d)).collect();
    let v = json!({
        "states": per_state.len(),
        "mean_d": stats::mean(&ds), "mean_b": stats::mean(&bs), "std_b": stats::std(&bs),
        "max_relative_error": rel.iter().copied().fold(0.0, f64::max), "mean_delta_inv_d": stats::mean(&deltas),
    });
    ctx.out.json("purity_stats.json", &v)?;
    Ok(v)
}

fn renyi2(ctx: &Ctx) -> Result<Value, CliError> {
    let n = ctx.cfg.model()?.n();
    let e = &ctx.cfg.ensemble;
    let site = e.renyi_site.unwrap_or((n - 1) / 2);
    let projector = e.projector.unwrap_or(Projection { site, pauli: e.renyi_pauli });
    let mut sites = vec![site, projector.site];
    sites.dedup();
    let p = ctx.prepare_for_sites(&sites)?;
    let basis = eigenops::pauli_basis_of(&p.dec)?;
    let asup = dynamics::renyi_superop(n, site, e.renyi_pauli, basis.clone())?;
    let specs = state_specs(ctx, Some(projector));
    let per_state: Vec<_> = specs
        .par_iter()
        .map(|spec| -> Result<_, CliError> {
            let rho = dynamics::sample_state(spec, basis.clone())?;
            let p0 = rho.norm_sqr();
            let sigma = dynamics::renyi2_sigma(&p.l, &asup, rho.coeffs())? / p0;
            let lin = dynamics::renyi2_linear_coefficient(&p.l, &asup, rho.coeffs())?;
            let times = grid(ctx, 1.0 / sigma.abs().sqrt(), 1.0, Spacing::Linear)?;
            let traj = evolve_state(ctx, &p, &rho, &times)?;
            let r = dynamics::renyi2(&traj, &asup)?;
            Ok((spec.seed, p0, sigma, lin, times, r, traj))
        })
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    for (k, (seed, _, sigma, _, times, r, traj)) in per_state.iter().enumerate() {
        note_method(ctx, traj);
        for (t, x) in times.iter().zip(r) {
            rows.push(vec![k.to_string(), seed.to_string(), num(*t), num(*x), num((-sigma * t * t).exp())]);
        }
    }
    ctx.out.csv("fig9_renyi2.csv", &["state", "seed", "t", "renyi", "gaussian"], rows)?;
    let fits = per_state.iter().enumerate().map(|(k, s)| vec![k.to_string(), s.0.to_string(), num(s.1), num(s.2), num(s.3)]);
    ctx.out.csv("fig9_renyi2_fits.csv", &["state", "seed", "p0", "sigma", "linear_coefficient"], fits)?;
    let sig: Vec<f64> = per_state.iter().map(|s| s.2).collect();
    let v = json!({
        "site": site, "pauli": e.renyi_pauli, "projector": projector, "states": per_state.len(),
        "mean_sigma": stats::mean(&sig), "max_abs_linear_coefficient": per_state.iter().map(|s| s.3.abs()).fold(0.0, f64::max),
    });
    ctx.out.json("renyi2_stats.json", &v)?;
    Ok(v)
}

fn initial_operator(ctx: &Ctx, p: &Prepared) -> Result<OperatorVector, CliError> {
    let basis = eigenops::pauli_basis_of(&p.dec)?;
    let d = &ctx.cfg.dynamics;
    Ok(match d.operator.as_str() {
        "rand-init-op" => {
            ctx.seed(d.operator_seed);
            dynamics::rand_init_op(basis, d.operator_seed)?
        }
        _ => dynamics::figs_init_op(basis)?,
    })
}

fn slow_rate(dec: &SpectralDecomposition) -> Result<f64, CliError> {
    Ok(dec.eigenvalues()[dec.slowest_index()?].re.abs())
}

fn write_series(ctx: &Ctx, prefix: &str, series: &dynamics::OperatorSeries, n: usize) -> Result<(), CliError> {
    let rows = series.times.iter().zip(&series.norm).zip(&series.trace).map(|((t, nm), tr)| {
        let [re, im] = cplx(*tr);
        vec![num(*t), num(*nm), re, im]
    });
    ctx.out.csv(&format!("{prefix}_norm.csv"), &["t", "norm", "trace_re", "trace_im"], rows)?;
    let mut header = vec!["t".to_string()];
    header.extend((0..=n).map(|s| format!("p_{s}")));
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = series.times.iter().zip(&series.p_s).map(|(t, ps)| std::iter::once(num(*t)).chain(ps.iter().map(|x| num(*x))).collect::<Vec<_>>());
    ctx.out.csv(&format!("{prefix}_size_distribution.csv"), &h, rows)?;
    let rows = series.times.iter().enumerate().map(|(i, t)| {
        vec![num(*t), num(series.size[i]), opt(series.size_otoc.as_ref().map(|v| v[i])), num(series.ipr[i])]
    });
    ctx.out.csv(&format!("{prefix}_size.csv"), &["t", "size", "size_otoc", "ipr"], rows)
}

fn opdyn(ctx: &Ctx) -> Result<Value, CliError> {
    let p = ctx.prepare_main()?;
    let n = p.instance.n;
    let a = initial_operator(ctx, &p)?;
    let times = grid(ctx, 1.0 / slow_rate(&p.dec)?, 20.0, Spacing::Geometric)?;
    let traj = evolve_operator(ctx, &p, &a, &times)?;
    note_method(ctx, &traj);
    let series = dynamics::operator_series(&traj)?;
    write_series(ctx, "fig11", &series, n)?;
    let rates = dynamics::per_basis_rate_table(&p.instance, ctx.cfg.dynamics.rate_channel)?;
    let rows = rates.iter().map(|r| vec![r.s.to_string(), r.count.to_string(), num(r.mean), num(r.std), num(r.min), num(r.max)]);
    ctx.out.csv("fig10_rates.csv", &["s", "count", "mean", "std", "min", "max"], rows)?;
    let fit = dynamics::rate_size_fit(&rates)?;
    let rho = dynamics::steady_state(&p.dec)?;
    let n_inf = dynamics::expectation(&a, &rho).norm_sqr() * (1u64 << n) as f64;
    let shape = shape_stats(p.dec.eigenvalues())?;
    let ts = dynamics::timescales(&series, &shape, n_inf);
    let v = json!({
        "operator": ctx.cfg.dynamics.operator, "method": method_name(&traj), "n_inf": n_inf, "timescales": ts,
        "rate_fit": { "slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2 },
        "late_size": series.size.last(),
    });
    ctx.out.json("fig13_timescales.json", &v)?;
    Ok(v)
}

fn anomalous(ctx: &Ctx) -> Result<Value, CliError> {
    let p = ctx.prepare_main()?;
    let n = p.instance.n;
    let a = initial_operator(ctx, &p)?;
    let times = grid(ctx, 1.0 / slow_rate(&p.dec)?, 20.0, Spacing::Geometric)?;
    let (traj, series, report) = dynamics::anomalous_protocol(&p.l, &p.dec, &a, &times)?;
    note_method(ctx, &traj);
    write_series(ctx, "fig12", &series, n)?;
    let slow = slow_mode_size(&p.dec)?;
    let v = json!({
        "report": report, "late_size_over_n": report.late_size / n as f64,
        "slow_mode": { "size_left": slow.size_left, "size_right": slow.size_right, "lambda": [slow.lambda.re, slow.lambda.im] },
    });
    ctx.out.json("anomalous_stats.json", &v)?;
    Ok(v)
}

fn with_realization(spec: &ModelSpec, source: &RealizationSource, n: usize) -> ModelSpec {
    let mut s = spec.with_n(n);
    match &mut s {
        ModelSpec::RandomLocal { realization, .. } | ModelSpec::NonInteracting { realization, .. } | ModelSpec::TwoSiteOnly { realization, .. } => {
            *realization = source.clone()
        }
        _ => {}
    }
    s
}

fn seed_sweep(ctx: &Ctx) -> Result<Value, CliError> {
    let spec = ctx.cfg.model()?;
    let threshold = ctx.cfg.sweep.threshold.unwrap_or(0.9);
    let sizes = ctx.cfg.sweep_sizes()?;
    let sources = ctx.cfg.sweep_sources();
    for s in &sources {
        if let RealizationSource::Sampled(x) = s {
            ctx.seed(*x);
        }
    }
    let tasks: Vec<(usize, &RealizationSource)> = sizes.iter().flat_map(|&n| sources.iter().map(move |s| (n, s))).collect();
    let results: Vec<_> = tasks
        .par_iter()
        .map(|(n, source)| -> Result<_, CliError> {
            let p = ctx.prepare(&with_realization(spec, source, *n))?;
            Ok(slow_mode_size(&p.dec)?)
        })
        .collect::<Result<_, _>>()?;
    let label = |s: &RealizationSource| match s {
        RealizationSource::Fixture(x) => ("fixture", x.to_string()),
        RealizationSource::Sampled(x) => ("sampled", x.to_string()),
        RealizationSource::Explicit(_) => ("explicit", String::new()),
    };
    let rows = tasks.iter().zip(&results).map(|((n, source), m)| {
        let (kind, seed) = label(source);
        let [re, im] = cplx(m.lambda);
        let nf = *n as f64;
        vec![
            kind.to_string(),
            seed,
            n.to_string(),
            re,
            im,
            num(m.size_left / nf),
            num(m.size_right / nf),
            m.dominant_left.to_string(),
            m.dominant_right.to_string(),
            u8::from(m.size_left / nf >= threshold).to_string(),
        ]
    });
    let header = ["source", "seed", "n", "lambda_re", "lambda_im", "size_left_over_n", "size_right_over_n", "dominant_left", "dominant_right", "anomalous"];
    ctx.out.csv("fig8_seed_sweep.csv", &header, rows)?;
    let fractions: Vec<Value> = sizes
        .iter()
        .map(|&n| {
            let hits: Vec<bool> = tasks.iter().zip(&results).filter(|((m, _), _)| *m == n).map(|(_, r)| r.size_left / n as f64 >= threshold).collect();
            json!({ "n": n, "seeds": hits.len(), "anomalous_fraction": hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64 })
        })
        .collect();
    let v = json!({ "threshold": threshold, "by_size": fractions });
    ctx.out.json("seed_sweep_stats.json", &v)?;
    Ok(v)
}

fn ginibre_ref(ctx: &Ctx) -> Result<Value, CliError> {
    let g = &ctx.cfg.ginibre;
    let bins = ctx.cfg.analysis.bins;
    let seeds: Vec<u64> = (0..g.samples as u64).map(|k| g.seed + k).collect();
    seeds.iter().for_each(|&s| ctx.seed(s));
    let cloud_radius = match g.kind {
        GinibreKind::Complex | GinibreKind::Real => (g.n as f64).sqrt(),
    };
    let disk = |r: f64| Window::Disk { re: 0.0, im: 0.0, radius: g.radius_fraction * r };
    let ginibre: Vec<CsrSample<f64>> = seeds
        .par_iter()
        .map(|&s| -> Result<_, CliError> { Ok(csr(&spectral::sample_ginibre(g.n, g.kind, s)?, disk(cloud_radius))?) })
        .collect::<Result<_, _>>()?;
    let poisson: Vec<CsrSample<f64>> = if g.poisson {
        seeds.par_iter().map(|&s| Ok(csr(&spectral::sample_poisson_disk(g.n, s), disk(1.0))?)).collect::<Result<_, CliError>>()?
    } else {
        Vec::new()
    };
    let mut rows = Vec::new();
    let mut summary = serde_json::Map::new();
    for (label, samples) in [("ginibre", &ginibre), ("poisson", &poisson)] {
        if samples.is_empty() {
            continue;
        }
        let mut abs = Vec::new();
        let mut cos = Vec::new();
        for (k, smp) in samples.iter().enumerate() {
            let st = csr_stats(smp, bins)?;
            rows.push(vec![label.to_string(), k.to_string(), seeds[k].to_string(), st.count.to_string(), num(st.mean_abs), num(st.mean_cos_theta)]);
            abs.push(st.mean_abs);
            cos.push(st.mean_cos_theta);
        }
        let pooled = CsrSample {
            z: samples.iter().flat_map(|s| s.z.iter().copied()).collect(),
            indices: samples.iter().flat_map(|s| s.indices.iter().copied()).collect(),
            duplicates: samples.iter().map(|s| s.duplicates).sum(),
            source_window: samples[0].source_window.clone(),
        };
        let mut pooled_stats = write_csr(ctx, &format!("fig2_{label}"), label, &pooled, bins)?;
        pooled_stats["sample_mean_abs"] = json!(stats::mean(&abs));
        pooled_stats["sample_std_abs"] = json!(stats::std(&abs));
        pooled_stats["sample_mean_cos_theta"] = json!(stats::mean(&cos));
        pooled_stats["sample_std_cos_theta"] = json!(stats::std(&cos));
        summary.insert(label.to_string(), pooled_stats);
    }
    ctx.out.csv("fig2_reference_samples.csv", &["ensemble", "sample", "seed", "count", "mean_abs", "mean_cos_theta"], rows)?;
    if g.alpha_n > 0 {
        let samples = (g.seed..g.seed + g.alpha_samples as u64).into_par_iter().map(|s| spectral::ginibre_alpha(g.alpha_n, s)).collect::<Result<Vec<_>, _>>()?;
        let st = spectral::ginibre_alpha_stats(&samples, g.radius_fraction, bins)?;
        let rows = st.centres.iter().zip(st.hist.iter().zip(&st.reference)).map(|(c, (h, r))| vec![num(*c), num(*h), num(*r)]);
        ctx.out.csv("fig3_ginibre_alpha.csv", &["centre", "density", "reference"], rows)?;
        summary.insert("alpha".into(), json!({ "n": g.alpha_n, "samples": g.alpha_samples, "count": st.values.len(), "mean": st.mean, "ks_distance": st.ks_distance }));
    }
    if !g.real_sizes.is_empty() {
        let counts: Vec<Vec<f64>> = g
            .real_sizes
            .iter()
            .map(|&d| {
                seeds
                    .par_iter()
                    .map(|&s| Ok(shape_stats(&spectral::sample_ginibre(d, GinibreKind::Real, s)?)?.n_real as f64))
                    .collect::<Result<Vec<f64>, CliError>>()
            })
            .collect::<Result<_, _>>()?;
        let means: Vec<f64> = counts.iter().map(|c| stats::mean(c)).collect();
        let rows = g.real_sizes.iter().zip(&counts).map(|(d, c)| vec![d.to_string(), c.len().to_string(), num(stats::mean(c)), num(stats::std(c))]);
        ctx.out.csv("figA3_real_ginibre.csv", &["n", "samples", "mean_n_real", "std_n_real"], rows)?;
        let fit = (g.real_sizes.len() >= 2)
            .then(|| stats::power_law_fit(&g.real_sizes.iter().map(|&d| d as f64).collect::<Vec<_>>(), &means).ok())
            .flatten();
        summary.insert("n_real_exponent".into(), json!(fit.map(|f| f.slope)));
    }
    let v = Value::Object(summary);
    ctx.out.json("ginibre_stats.json", &v)?;
    Ok(v)
}
