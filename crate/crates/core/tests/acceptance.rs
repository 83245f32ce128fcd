//! Desk-scale acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the verdict lines always reach the
//! terminal; the process exits nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::Instant;

use lindblad_core::dynamics::*;
use lindblad_core::eigenops::{self, coarse_grain, coarse_ipr, collapse_check, eigen_size_profile, max_trace_weight, slow_mode_size, Abscissa, Side};
use lindblad_core::linalg::{self, C64, ONE};
use lindblad_core::models::{build_ising, build_random_local, build_two_site_only, Channel};
use lindblad_core::spectral::{self, csr, csr_stats, decompose, shape_stats, GinibreKind, Window};
use lindblad_core::superop::{assemble, assemble_by_action, assemble_default, assemble_in_basis};
use lindblad_core::toy::{compose_ni_spectrum, default_site_weights, solve_single_site, toy_profile_check};
use lindblad_core::*;

const GINUE_ABS: f64 = 0.738;
const GINUE_COS: f64 = -0.24;
const POISSON_ABS: f64 = 2.0 / 3.0;

struct Model {
    l: SuperOperator,
    dec: SpectralDecomposition,
    instance: ModelInstance,
}

fn prepare(instance: ModelInstance) -> Model {
    let l = assemble_default(&instance).expect("assemble");
    let dec = decompose(&l).expect("decompose");
    Model { l, dec, instance }
}

fn table() -> &'static RealizationTable {
    static T: OnceLock<RealizationTable> = OnceLock::new();
    T.get_or_init(RealizationTable::builtin)
}

fn ising(n: usize) -> &'static Model {
    static M: [OnceLock<Model>; 7] = [const { OnceLock::new() }; 7];
    M[n].get_or_init(|| prepare(build_ising(n, 1.0, 1.3, 1.2, 0.8).unwrap()))
}

fn seed4(n: usize) -> &'static Model {
    static M: [OnceLock<Model>; 7] = [const { OnceLock::new() }; 7];
    M[n].get_or_init(|| prepare(build_random_local(n, 1.0, 0.25, 0.25, table().get(4).unwrap()).unwrap()))
}

type Outcome = (bool, String);

fn structural() -> Outcome {
    let mut worst = (0.0f64, 0.0f64, 0.0f64, f64::NEG_INFINITY);
    let mut unique = true;
    let mut check = |m: &Model| {
        let d = &m.dec;
        let tr = m.l.trace_residual() * m.l.frobenius();
        let conj = d.conjugation_residual();
        let ok = d.steady_index().is_ok();
        unique &= ok;
        // l₀ ∝ I: the identity coordinate carries the whole unit-norm left vector
        let l0 = ok.then(|| d.left_vec(d.steady_index().unwrap()));
        let id = m.l.basis().identity_vector();
        let id_dev = l0.map_or(1.0, |v| 1.0 - linalg::dot(&id, &v).norm() / (linalg::norm(&id) * linalg::norm(&v)));
        let max_re = d.eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        worst = (worst.0.max(tr), worst.1.max(conj), worst.2.max(id_dev), worst.3.max(max_re));
    };
    for n in 3..=6 {
        check(ising(n));
    }
    for seed in [1, 2, 3, 4, 17, 20] {
        for n in 3..=5 {
            let m = if seed == 4 { seed4(n) } else { &prepare(build_random_local(n, 1.0, 0.25, 0.25, table().get(seed).unwrap()).unwrap()) };
            check(m);
        }
    }
    let pass = worst.0 <= 1e-10 && worst.1 <= 1e-8 && worst.2 <= 1e-8 && worst.3 <= 1e-8 && unique;
    (pass, format!("|<<I|L| {:.1e}, conj {:.1e}, 1-|<l0|I>| {:.1e}, max Re {:.1e}, unique steady {unique}", worst.0, worst.1, worst.2, worst.3))
}

fn oracles() -> Outcome {
    let mut assembly = 0.0f64;
    for n in 1..=4 {
        let models = [build_ising(n.max(2), 1.0, 1.3, 1.2, 0.8).unwrap(), build_random_local(n, 1.0, 0.25, 0.25, table().get(17).unwrap()).unwrap()];
        for m in &models {
            let (a, b) = (assemble(m).unwrap(), assemble_by_action(m).unwrap());
            assembly = assembly.max(linalg::max_abs_diff(a.matrix(), b.matrix()));
        }
    }
    let mut prop = 0.0f64;
    let times = linear_grid(10.0, 10);
    for m in [ising(4), ising(5), seed4(5)] {
        let basis = m.l.basis().pauli().unwrap().clone();
        let spec = InitialStateSpec { ensemble: Ensemble::RankChi { chi: 2 }, projector: None, seed: 7 };
        let rho = sample_state(&spec, basis.clone()).unwrap();
        let a = evolve_state(&m.l, Some(&m.dec), &rho, &times).unwrap();
        let b = evolve_state_integrator(&m.l, &rho, &times).unwrap();
        let op = figs_init_op(basis).unwrap();
        let c = evolve_operator(&m.l, Some(&m.dec), &op, &times).unwrap();
        let d = evolve_operator_integrator(&m.l, &op, &times).unwrap();
        assert!(a.method == Method::Spectral && c.method == Method::Spectral);
        for (x, y) in a.vectors.iter().zip(&b.vectors).chain(c.vectors.iter().zip(&d.vectors)) {
            prop = prop.max(linalg::diff_norm(x, y));
        }
    }
    (assembly <= 1e-10 && prop <= 1e-8, format!("assembly max diff {assembly:.1e} (N<=4), spectral vs RK4 {prop:.1e} (N<=5, both pictures)"))
}

fn single_site_spectra() -> Outcome {
    let one = |terms: Vec<(u8, C64)>| {
        let t = PauliSum { terms: terms.into_iter().map(|(p, c)| (PauliString::single(1, 0, p), c)).collect() };
        ModelInstance::from_terms(1, PauliSum::default(), vec![("j".into(), Channel::SingleSite, t)]).unwrap()
    };
    let gamma: f64 = 0.7;
    let g = gamma.sqrt() / 2.0;
    let damping = one(vec![(1, C64::new(g, 0.0)), (2, C64::new(0.0, -g))]);
    let dephasing = one(vec![(3, C64::new(g, 0.0))]);
    let dist = |m: &ModelInstance, want: [f64; 4]| {
        let e = assemble(m).unwrap().matrix().eigenvalues().unwrap();
        spectral::multiset_distance(&e, &want.map(|x| C64::new(x, 0.0)))
    };
    let a = dist(&damping, [0.0, -gamma, -gamma, -2.0 * gamma]);
    let b = dist(&dephasing, [0.0, 0.0, -gamma, -gamma]);
    (a <= 1e-10 && b <= 1e-10, format!("damping {a:.1e}, dephasing {b:.1e}"))
}

fn toy_model() -> Outcome {
    let r = table().get(1).unwrap();
    let (mut prof, mut spec) = (0.0f64, 0.0f64);
    for n in 3..=5 {
        let cmp = toy_profile_check(r, 1.0, 0.25, &default_site_weights(n)).unwrap();
        prof = prof.max(cmp.max_right_deviation).max(cmp.max_left_deviation);
        spec = spec.max(cmp.spectrum_distance);
    }
    // identical sites: composed sums against the uniform chain
    let one = models::build_random_local_general(1, 1.0, 0.0, 0.25, 0.0, r, None).unwrap();
    let single = solve_single_site(&assemble_in_basis(&one, PauliBasis::full(1).unwrap()).unwrap()).unwrap();
    let mut uniform = 0.0f64;
    for n in 3..=4 {
        let chain = models::build_non_interacting(n, 1.0, 0.25, r).unwrap();
        let dec = decompose(&assemble_in_basis(&chain, PauliBasis::full(n).unwrap()).unwrap()).unwrap();
        let composed: Vec<C64> = compose_ni_spectrum(&single, n).unwrap().iter().map(|m| m.lambda).collect();
        uniform = uniform.max(spectral::multiset_distance(dec.eigenvalues(), &composed));
    }
    // p_ss = 1/2: Hermitian single-site jump
    let mut h = r.clone();
    h.k = [C64::new(0.8, 0.0), C64::new(-0.3, 0.0), C64::new(1.1, 0.0)];
    let cmp = toy_profile_check(&h, 1.0, 0.25, &default_site_weights(4)).unwrap();
    let delta_exact = cmp.rows.iter().all(|row| row.analytic == if row.s == row.excitations { 1.0 } else { 0.0 });
    let delta_numeric = cmp.rows.iter().map(|row| (row.numeric - row.analytic).abs()).fold(0.0, f64::max);
    let pass = prof <= 1e-8 && spec <= 1e-8 && uniform <= 1e-8 && delta_exact && delta_numeric <= 1e-8 && (cmp.single.p_ss - 0.5).abs() < 1e-12;
    (pass, format!("profiles {prof:.1e}, spectrum {spec:.1e} (weighted) {uniform:.1e} (uniform), p_ss=1/2 deltas exact {delta_exact} numeric {delta_numeric:.1e}"))
}

fn disk_csr(eigs: &[C64], radius: f64) -> (f64, f64) {
    let s = csr_stats(&csr(eigs, Window::Disk { re: 0.0, im: 0.0, radius }).unwrap(), 20).unwrap();
    (s.mean_abs, s.mean_cos_theta)
}

fn ginibre_reference() -> Outcome {
    let n = 2000;
    let (mut za, mut zc, mut pa, mut pc) = (vec![], vec![], vec![], vec![]);
    for seed in 0..10u64 {
        let e = spectral::sample_ginibre(n, GinibreKind::Complex, seed).unwrap();
        let (a, c) = disk_csr(&e, 0.9 * (n as f64).sqrt());
        za.push(a);
        zc.push(c);
        let pts = spectral::sample_poisson_disk(n, 1000 + seed);
        let (a, c) = disk_csr(&pts, 0.9);
        pa.push(a);
        pc.push(c);
    }
    let (zabs, zcos, pabs, pcos) = (stats::mean(&za), stats::mean(&zc), stats::mean(&pa), stats::mean(&pc));
    let st = spectral::ginibre_alpha_stats(&[spectral::ginibre_alpha(n, 77).unwrap()], 0.9, 40).unwrap();
    let pass = (zabs - GINUE_ABS).abs() <= 0.01
        && (zcos - GINUE_COS).abs() <= 0.01
        && (pabs - POISSON_ABS).abs() <= 0.01
        && pcos.abs() <= 0.01
        && st.ks_distance <= 0.05;
    (pass, format!("GinUE <|z|> {zabs:.4} <cos> {zcos:.4}; Poisson <|z|> {pabs:.4} <cos> {pcos:.4}; |alpha| KS {:.4}", st.ks_distance))
}

fn model_csr() -> Outcome {
    let s = csr_stats(&csr(ising(6).dec.eigenvalues(), Window::Bulk).unwrap(), 20).unwrap();
    let closer = (s.mean_abs - GINUE_ABS).abs() < (s.mean_abs - POISSON_ABS).abs();
    let pass = (s.mean_abs - GINUE_ABS).abs() <= 0.05 && closer && (-0.30..=-0.10).contains(&s.mean_cos_theta);
    (pass, format!("Ising N=6 bulk: <|z|> {:.4}, <cos> {:.4}, {} ratios", s.mean_abs, s.mean_cos_theta, s.count))
}

fn size_eigenvalue() -> Outcome {
    let m = ising(6);
    let profile = eigen_size_profile(&m.dec).unwrap();
    let shape = shape_stats(m.dec.eigenvalues()).unwrap();
    let cg = coarse_grain(&profile, 0.5, Side::Right, 1).unwrap();
    let centre = cg.nearest(shape.x_bar).and_then(|w| w.mean).unwrap_or(f64::NAN);
    let edge = cg.nearest(0.0).and_then(|w| w.mean).unwrap_or(f64::NAN);
    let p0 = max_trace_weight(&profile);
    (centre <= 1e-2 * edge && p0 <= 1e-10, format!("p~R_1 centre {centre:.2e} vs near 0 {edge:.2e} (ratio {:.1e}); max p0(r_j) {p0:.1e}", centre / edge))
}

fn ipr_scrambling() -> Outcome {
    let grid: Vec<f64> = (-10..=10).map(|k| k as f64 * 0.1).collect();
    let mut worst_ratio = (f64::INFINITY, 0.0f64);
    let mut collapsed = true;
    let mut band_points = 0;
    for side in [Side::Right, Side::Left] {
        let mut curves = vec![];
        for n in [5, 6] {
            let dec = &ising(n).dec;
            // the raw-axis width 0.5, expressed on the standardized axis
            let delta = 0.5 / shape_stats(dec.eigenvalues()).unwrap().sigma_x;
            let b = eigenops::pauli_basis_of(dec).unwrap().sector_count(n) as f64;
            let raw = coarse_ipr(dec, delta, side, n, Abscissa::Standardized, false, Some(&[0.0])).unwrap();
            let r = raw.windows[0].mean.unwrap() / (b / 2.0);
            worst_ratio = (worst_ratio.0.min(r), worst_ratio.1.max(r));
            curves.push(coarse_ipr(dec, delta, side, n, Abscissa::Standardized, true, Some(&grid)).unwrap());
        }
        let rep = collapse_check(&curves, (-1.0, 1.0));
        collapsed &= rep.within_bands;
        band_points += rep.points.len();
    }
    let pass = worst_ratio.0 >= 0.5 && worst_ratio.1 <= 2.0 && collapsed;
    (pass, format!("bulk-centre IPR/(b_N(N)/2) in [{:.3}, {:.3}]; N=5/6 collapse within std bands {collapsed} over {band_points} windows", worst_ratio.0, worst_ratio.1))
}

fn shape_scaling() -> Outcome {
    let ns: Vec<f64> = (3..=6).map(|n| n as f64).collect();
    let shapes: Vec<_> = (3..=6).map(|n| shape_stats(ising(n).dec.eigenvalues()).unwrap()).collect();
    let xb = stats::power_law_fit(&ns, &shapes.iter().map(|s| s.x_bar).collect::<Vec<_>>()).unwrap();
    let sx = stats::power_law_fit(&ns, &shapes.iter().map(|s| s.sigma_x).collect::<Vec<_>>()).unwrap();
    let sizes = [100usize, 200, 400, 800, 1600];
    let counts: Vec<f64> = sizes
        .iter()
        .map(|&d| {
            let k: Vec<f64> = (0..10u64)
                .map(|seed| shape_stats(&spectral::sample_ginibre(d, GinibreKind::Real, seed).unwrap()).unwrap().n_real as f64)
                .collect();
            stats::mean(&k)
        })
        .collect();
    let nr = stats::power_law_fit(&sizes.map(|d| d as f64), &counts).unwrap();
    let pass = (xb.slope - 1.0).abs() <= 0.15 && (sx.slope - 0.5).abs() <= 0.15 && (nr.slope - 0.5).abs() <= 0.1;
    (pass, format!("X̄ exponent {:.3}, σ_X exponent {:.3}, real-Ginibre n_real exponent {:.3}", xb.slope, sx.slope, nr.slope))
}

fn purity_fit(m: &Model, states: u64) -> (f64, f64) {
    let basis = m.l.basis().pauli().unwrap().clone();
    let mut worst = 0.0f64;
    let mut bs = vec![];
    for seed in 0..states {
        let spec = InitialStateSpec { ensemble: Ensemble::RankChi { chi: 1 }, projector: None, seed };
        let rho = sample_state(&spec, basis.clone()).unwrap();
        let d = decoherence_rate_superop(&m.l, rho.coeffs());
        let times = linear_grid(1.0 / d, 40);
        let traj = evolve_state(&m.l, Some(&m.dec), &rho, &times).unwrap();
        let fit = fit_early_exponent(&times, &traj.norm_sqr()).unwrap();
        worst = worst.max((fit.b - d).abs() / d);
        bs.push(fit.b);
    }
    (worst, stats::std(&bs))
}

fn decoherence() -> Outcome {
    let n = 4;
    let gamma: f64 = 0.35;
    let jumps = (0..n)
        .map(|j| (format!("z{j}"), Channel::SingleSite, PauliSum { terms: vec![(PauliString::single(n, j, 3), C64::new(gamma.sqrt() / 2.0, 0.0))] }))
        .collect();
    let deph = ModelInstance::from_terms(n, PauliSum::default(), jumps).unwrap();
    let mixed = linalg::scale(&linalg::identity(16), C64::new(1.0 / 16.0, 0.0));
    let d_mixed = decoherence_rate(&mixed, &seed4(4).instance).abs().max(decoherence_rate(&mixed, &deph).abs());
    let plus = InitialStateSpec { ensemble: Ensemble::Explicit { amplitudes: vec![[0.25, 0.0]; 16] }, projector: None, seed: 0 };
    let d_plus = decoherence_rate(&sample_density(&plus, n).unwrap(), &deph);
    let (w6, std6) = purity_fit(seed4(6), 50);
    let (_, std5) = purity_fit(seed4(5), 50);
    let pass = d_mixed == 0.0 && (d_plus - n as f64 * gamma).abs() <= 1e-10 && w6 <= 0.10 && std6 < std5;
    (pass, format!("D(mixed) {d_mixed:.1e}, D(|+>) - Nγ {:.1e}, N=6 worst |b-D|/D {w6:.4} (window t <= 1/D), std b N=5 {std5:.4} -> N=6 {std6:.4}", d_plus - n as f64 * gamma))
}

fn renyi() -> Outcome {
    let n = 5;
    let r = table().get(4).unwrap();
    let m = prepare(build_random_local(n, 1.0, 0.05, 0.05, r).unwrap());
    let basis = m.l.basis().pauli().unwrap().clone();
    let asup = renyi_superop(n, 2, 2, basis.clone()).unwrap();
    let (mut lin, mut fd, mut worst) = (0.0f64, 0.0f64, 0.0f64);
    for seed in 0..20 {
        let spec = InitialStateSpec { ensemble: Ensemble::RankChi { chi: 1 }, projector: Some(Projection::central(n, 2)), seed };
        let rho = sample_state(&spec, basis.clone()).unwrap();
        lin = lin.max(renyi2_linear_coefficient(&m.l, &asup, rho.coeffs()).unwrap().abs());
        // one-sided slope, Richardson-extrapolated from steps h and h/2
        let h = 1e-5;
        let t = evolve_state_integrator(&m.l, &rho, &[0.0, h / 2.0, h]).unwrap();
        let rr = renyi2(&t, &asup).unwrap();
        fd = fd.max((2.0 * (rr[1] - rr[0]) / (h / 2.0) - (rr[2] - rr[0]) / h).abs());
        let sigma = renyi2_sigma(&m.l, &asup, rho.coeffs()).unwrap() / rho.norm_sqr();
        let times = linear_grid(2.0, 400);
        let traj = evolve_state(&m.l, Some(&m.dec), &rho, &times).unwrap();
        for (t, x) in times.iter().zip(renyi2(&traj, &asup).unwrap()) {
            if x < 0.8 {
                break;
            }
            worst = worst.max((x - (-sigma * t * t).exp()).abs() / x);
        }
    }
    let pass = lin <= 1e-8 && fd <= 1e-8 && worst <= 0.05;
    (pass, format!("dR/dt(0) analytic {lin:.1e}, finite-difference {fd:.1e}; worst |R_Y - e^(-Σt²)|/R_Y down to R_Y=0.8 {worst:.4} (N=5, γ=0.05, 20 states)"))
}

fn operator_dynamics() -> Outcome {
    let m = ising(5);
    let basis = m.l.basis().pauli().unwrap().clone();
    let mut s0 = 0.0f64;
    for site in 0..5 {
        for op in 1..=3 {
            let a = OperatorVector::from_strings(PauliBasis::full(5).unwrap(), &[(PauliString::single(5, site, op), ONE)]).unwrap();
            s0 = s0.max((otoc_size(&a.to_dense().unwrap(), 5).unwrap() - 1.0).abs());
        }
    }
    let unitary = prepare(build_ising(5, 1.0, 1.3, 1.2, 0.0).unwrap());
    let a = figs_init_op(unitary.l.basis().pauli().unwrap().clone()).unwrap();
    // early growth on a geometric grid, then a long-time average over [200, 2200]
    let mut times = geometric_grid(0.05, 100.0, 60).unwrap();
    times.extend((0..400).map(|k| 200.0 + 5.0 * k as f64));
    let series = operator_series(&evolve_operator(&unitary.l, Some(&unitary.dec), &a, &times).unwrap()).unwrap();
    let otoc_dev = series.size_otoc.as_ref().unwrap().iter().zip(&series.size).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let plateau = stats::mean(&series.size[series.size.len() - 400..]);
    let rel = (plateau - 0.75 * 5.0).abs() / 3.75;
    let fit = rate_size_fit(&per_basis_rate_table(&seed4(5).instance, Some(Channel::SingleSite)).unwrap()).unwrap();
    let d = &m.dec;
    let lam = d.eigenvalues()[d.slowest_index().unwrap()].re.abs();
    let op = figs_init_op(basis).unwrap();
    let late = evolve_operator(&m.l, Some(d), &op, &[30.0 / lam]).unwrap();
    let n_inf = expectation(&op, &steady_state(d).unwrap()).norm_sqr() * 32.0;
    let norm_dev = (late.norm_sqr()[0] - n_inf).abs();
    let pass = s0 <= 1e-12 && otoc_dev <= 1e-8 && rel <= 0.10 && fit.slope > 0.0 && fit.r2 >= 0.95 && norm_dev <= 1e-6;
    (
        pass,
        format!(
            "S(0) dev {s0:.1e}; OTOC vs Σ s·p_s {otoc_dev:.1e}; γ=0 plateau {plateau:.3} vs 3N/4 = 3.75; rate vs s slope {:.3} R² {:.4}; |N(t) - N_inf| {norm_dev:.1e}",
            fit.slope, fit.r2
        ),
    )
}

fn anomalous() -> Outcome {
    let screen = |n: usize, source: &RealizationSource| -> Option<f64> {
        let r = source.resolve(table()).ok()?;
        let dec = decompose(&assemble_default(&build_two_site_only(n, 1.0, &r).ok()?).ok()?).ok()?;
        Some(slow_mode_size(&dec).ok()?.size_left / n as f64)
    };
    let mut sources = vec![RealizationSource::Fixture(4)];
    sources.extend((1..=99).map(RealizationSource::Sampled));
    let mut fraction = [0.0; 2];
    let mut chosen = None;
    for (i, n) in [4usize, 5].into_iter().enumerate() {
        let hits: Vec<bool> = sources.iter().map(|s| screen(n, s).is_some_and(|x| x >= 0.9)).collect();
        fraction[i] = hits.iter().filter(|&&h| h).count() as f64 / sources.len() as f64;
        if n == 5 {
            chosen = hits.iter().position(|&h| h).map(|k| sources[k].clone());
        }
    }
    let Some(source) = chosen else {
        return (false, format!("no seed passes the screen (fractions {fraction:?})"));
    };
    let r = source.resolve(table()).unwrap();
    let late = |n: usize, g1: f64| {
        let m = prepare(build_random_local(n, 1.0, g1, 1.0, &r).unwrap());
        let lam = m.dec.eigenvalues()[m.dec.slowest_index().unwrap()].re.abs();
        let a = figs_init_op(m.l.basis().pauli().unwrap().clone()).unwrap();
        let times = geometric_grid(0.01, 20.0 / lam, 60).unwrap();
        anomalous_protocol(&m.l, &m.dec, &a, &times).unwrap().2.late_size
    };
    let big = late(5, 0.05) / 5.0;
    let (s4, s5) = (late(4, 0.8), late(5, 0.8));
    let pass = fraction[0] > 0.0 && fraction[1] > 0.0 && big >= 0.8 && s4 <= 2.0 && s5 <= 2.0 && (s5 - s4).abs() <= 0.25;
    (pass, format!("screen fractions N=4 {:.2}, N=5 {:.2}; {source:?} γ1=0.05: late S/N {big:.3}; γ1=0.8: late S {s4:.3} (N=4), {s5:.3} (N=5)", fraction[0], fraction[1]))
}

fn main() {
    // `cargo test -- <filter>` passes arguments through; honour a plain substring filter
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("structural invariants", structural),
        ("oracle equivalence", oracles),
        ("single-site spectra", single_site_spectra),
        ("toy model", toy_model),
        ("ginibre reference", ginibre_reference),
        ("model csr", model_csr),
        ("size-eigenvalue correlation", size_eigenvalue),
        ("ipr scrambling", ipr_scrambling),
        ("spectral shape scaling", shape_scaling),
        ("decoherence", decoherence),
        ("renyi-2", renyi),
        ("operator dynamics", operator_dynamics),
        ("anomalous regime", anomalous),
    ];
    let mut failed = 0;
    let mut ran = 0;
    for (name, run) in criteria {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let (pass, detail) = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            (false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        failed += usize::from(!pass);
        println!("{} {name}: {detail} [{:.1}s]", if pass { "PASS" } else { "FAIL" }, start.elapsed().as_secs_f64());
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
