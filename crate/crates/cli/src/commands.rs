use std::path::PathBuf;

use photonic_quench::coupling::{analytic_n5, minimal_profile, optimize_transmittances, pst_profile, table_profile, CouplingProfile};
use photonic_quench::ecc::{
    cascade_state, dephased_rainbow, entanglement_fractions, fractions_at_optimum, fringe_scan, pair_state_from_spin, phase_grid, rainbow_pair_state, EccSettings,
    FringePhase,
};
use photonic_quench::mesh::{chip_profile, compile_unitary, layout_dtqw};
use photonic_quench::spin::{entanglement_fraction_direct, evolve, neel_state, rainbow_fidelity};
use photonic_quench::tomography::{
    fit, monte_carlo_errors, synthesize_measurements, CircuitModel, FitOptions, MeasurementSet, Pol, DEFAULT_PAIRS,
};
use photonic_quench::twophoton::{correlation_matrix, similarity, PairState, TwoPhotonInput, BOSONIC, FERMIONIC};
use photonic_quench::walk::{evolve as walk_evolve, transfer_quality, Coin, WalkerState};
use photonic_quench::{ComplexMatrix, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config;
use crate::output::{note, Output};
use crate::CliError;

/// Settings shared by every subcommand invocation.
pub struct Run {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl Run {
    /// Loads the section, applies the `--seed` override and hashes the result.
    fn prepare<T>(&self, command: &str) -> Result<(T, Output), CliError>
    where
        T: for<'de> Deserialize<'de> + Serialize + Seeded,
    {
        let mut cfg: T = config::load(self.config.as_deref(), command)?;
        if let Some(s) = self.seed {
            cfg.set_seed(s);
        }
        let config_hash = config::hash(command, &cfg);
        Ok((cfg, Output { path: self.out.clone(), config_hash }))
    }
}

pub trait Seeded {
    fn set_seed(&mut self, seed: u64);
}

macro_rules! seeded {
    ($($t:ty),*) => {$(
        impl Seeded for $t {
            fn set_seed(&mut self, seed: u64) {
                self.seed = seed;
            }
        }
    )*};
}

fn fmt(x: f64) -> String {
    format!("{x:.10}")
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn build_profile(kind: &str, n: usize, m: usize, t_bulk: Option<f64>, t_ends: Option<f64>, ts: Option<&[f64]>) -> Result<CouplingProfile, CliError> {
    Ok(match kind {
        "pst" => pst_profile(n, m)?,
        "minimal" => minimal_profile(n, m)?.profile,
        "table" => {
            let (b, e) = t_bulk.zip(t_ends).ok_or_else(|| invalid("profile = table needs t_bulk and t_ends"))?;
            table_profile(n, m, b, e)?
        }
        "transmittances" => {
            let ts = ts.ok_or_else(|| invalid("profile = transmittances needs a transmittances list"))?;
            CouplingProfile::from_transmittances(n, m, ts)?
        }
        "chip" => chip_profile(),
        other => return Err(invalid(format!("unknown profile kind '{other}'"))),
    })
}

// ---- tables

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TablesConfig {
    #[serde(default = "default_n")]
    n_sites: usize,
    #[serde(default)]
    steps: Option<Vec<usize>>,
    #[serde(default)]
    analytic: bool,
    #[serde(default)]
    seed: u64,
}

fn default_n() -> usize {
    5
}

seeded!(TablesConfig, TransferConfig, CorrelateConfig, FringesConfig, QuenchConfig, SynthesizeConfig, FitConfig);

pub fn tables(run: &Run) -> Result<(), CliError> {
    let (cfg, out): (TablesConfig, _) = run.prepare("tables")?;
    let n = cfg.n_sites;
    let steps = match (&cfg.steps, n) {
        (Some(s), _) => s.clone(),
        (None, 6) => (7..=23).step_by(2).collect(),
        (None, 5 | 7) => (6..=22).step_by(2).collect(),
        (None, _) => return Err(invalid(format!("n_sites = {n} has no published step list; give steps = [...]"))),
    };
    if cfg.analytic && n != 5 {
        return Err(invalid("the analytic formulas only hold for n_sites = 5"));
    }
    let mut rows = Vec::new();
    for m in steps {
        let (tb, te, q) = if cfg.analytic {
            let (tb, te) = analytic_n5(m);
            (tb, te, transfer_quality(&table_profile(n, m, tb, te)?))
        } else {
            let o = optimize_transmittances(n, m)?;
            (o.t_bulk, o.t_ends, o.q)
        };
        rows.push(format!("{m},{},{},{}", fmt(tb), fmt(te), fmt(q)));
    }
    note(&out.config_hash, &format!("tables: N={n}, {} rows{}", rows.len(), if cfg.analytic { " (analytic)" } else { "" }));
    out.csv("M,T_bulk,T_ends,Q", &rows)
}

// ---- transfer

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TransferConfig {
    #[serde(default = "default_n")]
    n_sites: usize,
    #[serde(default = "default_steps")]
    n_steps: usize,
    #[serde(default = "default_profile")]
    profile: String,
    #[serde(default)]
    t_bulk: Option<f64>,
    #[serde(default)]
    t_ends: Option<f64>,
    #[serde(default)]
    transmittances: Option<Vec<f64>>,
    #[serde(default)]
    seed: u64,
}

fn default_steps() -> usize {
    6
}

fn default_profile() -> String {
    "pst".into()
}

pub fn transfer(run: &Run) -> Result<(), CliError> {
    let (cfg, out): (TransferConfig, _) = run.prepare("transfer")?;
    let p = build_profile(&cfg.profile, cfg.n_sites, cfg.n_steps, cfg.t_bulk, cfg.t_ends, cfg.transmittances.as_deref())?;
    let n = p.n_sites();
    let mut state = WalkerState::basis(n, 1, Coin::Right)?;
    let mut rows = Vec::new();
    for step in 0..=p.n_steps() {
        if step > 0 {
            state = walk_evolve(&state, &p, 1)?;
        }
        for (site, prob) in state.site_probabilities().iter().enumerate() {
            rows.push(format!("{step},{site},{}", fmt(*prob)));
        }
    }
    note(&out.config_hash, &format!("transfer: N={n} M={} Q={:.6}", p.n_steps(), transfer_quality(&p)));
    out.csv("step,site,probability", &rows)
}

// ---- correlate

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelateConfig {
    #[serde(default = "default_chip")]
    profile: String,
    #[serde(default = "default_n")]
    n_sites: usize,
    #[serde(default = "default_steps")]
    n_steps: usize,
    #[serde(default)]
    t_bulk: Option<f64>,
    #[serde(default)]
    t_ends: Option<f64>,
    #[serde(default)]
    transmittances: Option<Vec<f64>>,
    #[serde(default = "default_inputs")]
    inputs: [usize; 2],
    #[serde(default)]
    seed: u64,
}

fn default_chip() -> String {
    "chip".into()
}

fn default_inputs() -> [usize; 2] {
    [2, 4]
}

pub fn correlate(run: &Run) -> Result<(), CliError> {
    let (cfg, out): (CorrelateConfig, _) = run.prepare("correlate")?;
    let p = build_profile(&cfg.profile, cfg.n_sites, cfg.n_steps, cfg.t_bulk, cfg.t_ends, cfg.transmittances.as_deref())?;
    let u = compile_unitary(&layout_dtqw(&p));
    let [i, j] = cfg.inputs;
    let boson = correlation_matrix(&TwoPhotonInput::symmetric(i, j, BOSONIC, u.clone())?);
    let fermion = correlation_matrix(&TwoPhotonInput::symmetric(i, j, FERMIONIC, u)?);
    let mut rows = Vec::new();
    for (label, g) in [("boson", &boson), ("fermion", &fermion)] {
        for r in 1..=g.dim() {
            for s in 1..=g.dim() {
                rows.push(format!("{label},{r},{s},{}", fmt(g.get(r, s))));
            }
        }
    }
    let h = &out.config_hash;
    for (label, g) in [("boson", &boson), ("fermion", &fermion)] {
        let diag = g.diagonal_mass();
        note(h, &format!("{label}: diagonal mass {diag:.6}, off-diagonal mass {:.6}", g.total() - diag));
    }
    note(h, &format!("similarity boson/fermion {:.6}", similarity(&boson, &fermion)?));
    note(h, &format!("similarity boson/boson {:.6}", similarity(&boson, &boson)?));
    out.csv("symmetry,row,col,gamma", &rows)
}

// ---- fringes

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FringesConfig {
    #[serde(default = "default_state")]
    state: String,
    #[serde(default = "default_phase")]
    phase: String,
    #[serde(default = "default_points")]
    points: usize,
    #[serde(default = "default_eta")]
    eta5: f64,
    #[serde(default)]
    other_phase: f64,
    #[serde(default)]
    seed: u64,
}

fn default_state() -> String {
    "rainbow".into()
}

fn default_phase() -> String {
    "phi5".into()
}

fn default_points() -> usize {
    36
}

fn default_eta() -> f64 {
    1.0
}

fn chip_pair_state() -> Result<PairState, CliError> {
    let u = compile_unitary(&layout_dtqw(&chip_profile()));
    Ok(PairState::from_input(&TwoPhotonInput::symmetric(2, 4, FERMIONIC, u)?))
}

pub fn fringes(run: &Run) -> Result<(), CliError> {
    let (cfg, out): (FringesConfig, _) = run.prepare("fringes")?;
    let which = match cfg.phase.as_str() {
        "phi2" => FringePhase::Phi2,
        "phi5" => FringePhase::Phi5,
        other => return Err(invalid(format!("phase must be phi2 or phi5, got '{other}'"))),
    };
    let mixture: Vec<(f64, PairState)> = match cfg.state.as_str() {
        "rainbow" => vec![(1.0, rainbow_pair_state())],
        "dephased" => dephased_rainbow(),
        "chip" => vec![(1.0, chip_pair_state()?)],
        other => return Err(invalid(format!("unknown state '{other}'"))),
    };
    if cfg.points < 3 {
        return Err(invalid("points must be at least 3"));
    }
    let base = EccSettings::new(0.0, 0.0, cfg.eta5)?.with_phase(which.other(), cfg.other_phase);
    let scan = fringe_scan(&mixture, &base, which, &phase_grid(cfg.points))?;
    for (q, f) in scan.fits()? {
        note(&out.config_hash, &format!("{}: A={:.6} B={:.6} phi0={:.6} V={:.6} residual={:.2e}", q.label(), f.a, f.b, f.phi0, f.visibility, f.residual));
    }
    out.emit(&scan.to_csv())
}

// ---- quench

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct QuenchConfig {
    #[serde(default = "default_n")]
    n_sites: usize,
    #[serde(default = "default_model")]
    model: String,
    #[serde(default = "default_profile")]
    couplings: String,
    #[serde(default)]
    time: Option<f64>,
    #[serde(default = "default_eta")]
    eta5: f64,
    #[serde(default = "default_points")]
    fringe_points: usize,
    #[serde(default)]
    seed: u64,
}

fn default_model() -> String {
    "ideal".into()
}

fn visibilities(mixture: &[(f64, PairState)], base: &EccSettings, points: usize) -> Result<Vec<(String, f64)>, CliError> {
    let mut out = Vec::new();
    for which in [FringePhase::Phi2, FringePhase::Phi5] {
        let base = base.with_phase(which, 0.0);
        for (q, f) in fringe_scan(mixture, &base, which, &phase_grid(points))?.fits()? {
            out.push((format!("visibility_{}", q.label()), f.visibility));
        }
    }
    Ok(out)
}

fn pair_overlap(a: &PairState, b: &PairState) -> f64 {
    let (x, y) = (a.amplitudes(), b.amplitudes());
    let n = x.dim();
    let mut s = C64::new(0.0, 0.0);
    for r in 0..n {
        for c in 0..n {
            s += x[(r, c)].conj() * y[(r, c)];
        }
    }
    s.norm_sqr()
}

pub fn quench(run: &Run) -> Result<(), CliError> {
    let (cfg, out): (QuenchConfig, _) = run.prepare("quench")?;
    let mut rows: Vec<(String, f64)> = Vec::new();
    match cfg.model.as_str() {
        "ideal" => {
            let n = cfg.n_sites;
            let (couplings, t_star) = match cfg.couplings.as_str() {
                "pst" => (photonic_quench::coupling::pst_couplings(n), (n + 1) as f64 / 2.0),
                "minimal" => {
                    let m = minimal_profile(n, 1)?;
                    (m.profile.couplings().to_vec(), m.transfer_time / 2.0)
                }
                other => return Err(invalid(format!("couplings must be pst or minimal, got '{other}'"))),
            };
            let t = cfg.time.unwrap_or(t_star);
            let s = evolve(&neel_state(n)?, &couplings, t)?;
            rows.push(("time".into(), t));
            rows.push(("rainbow_fidelity".into(), rainbow_fidelity(&s)));
            for k in 1..=n / 2 {
                rows.push((format!("E_{k}{}_direct", n + 1 - k), entanglement_fraction_direct(&s, k, n + 1 - k)?));
            }
            if n == 5 {
                let pair = pair_state_from_spin(&s)?;
                let settings = EccSettings::new(0.0, 0.0, cfg.eta5)?;
                let (e15, e24) = entanglement_fractions(&cascade_state(&pair, &settings)?);
                rows.push(("E_15".into(), e15));
                rows.push(("E_24".into(), e24));
                rows.extend(visibilities(&[(1.0, pair)], &settings, cfg.fringe_points)?);
            }
        }
        "chip" => {
            if cfg.time.is_some() || cfg.n_sites != 5 {
                return Err(invalid("the chip model is the fixed six-step N=5 device; time and n_sites do not apply"));
            }
            let pair = chip_pair_state()?;
            let mix = [(1.0, pair.clone())];
            let rep = fractions_at_optimum(&mix, cfg.eta5)?;
            rows.push(("phi2".into(), rep.phi2));
            rows.push(("phi5".into(), rep.phi5));
            rows.push(("rainbow_fidelity".into(), pair_overlap(&rainbow_pair_state(), &pair)));
            rows.push(("E_15".into(), rep.e15));
            rows.push(("E_24".into(), rep.e24));
            rows.extend(visibilities(&mix, &EccSettings::new(rep.phi2, rep.phi5, cfg.eta5)?, cfg.fringe_points)?);
        }
        other => return Err(invalid(format!("model must be ideal or chip, got '{other}'"))),
    }
    for (k, v) in &rows {
        note(&out.config_hash, &format!("{k} = {v:.9}"));
    }
    let body: Vec<String> = rows.iter().map(|(k, v)| format!("{k},{}", fmt(*v))).collect();
    out.csv("quantity,value", &body)
}

// ---- tomography

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesizeConfig {
    #[serde(default = "default_noise")]
    noise: f64,
    #[serde(default = "default_truth")]
    truth: String,
    #[serde(default = "default_spread")]
    spread: f64,
    #[serde(default)]
    distinct_v: bool,
    #[serde(default)]
    seed: u64,
}

fn default_noise() -> f64 {
    0.01
}

fn default_truth() -> String {
    "perturbed".into()
}

fn default_spread() -> f64 {
    0.05
}

/// Chip design values with every transmittance shifted uniformly within
/// `spread` and random phases in (0.2, 1.2).
fn perturbed_truth(model: &CircuitModel, spread: f64, rng: &mut ChaCha8Rng) -> Result<ComplexMatrix, CliError> {
    let design: Vec<f64> = layout_dtqw(&chip_profile()).layers().iter().flat_map(|l| l.couplers.iter().map(|c| c.transmittance)).collect();
    let ts: Vec<f64> = design.iter().map(|t| (t + rng.random_range(-spread..=spread)).clamp(0.0, 1.0)).collect();
    let phases: Vec<f64> = (0..model.n_phases()).map(|_| rng.random_range(0.2..1.2)).collect();
    Ok(model.compile(&model.params_from(&ts, &phases)?)?)
}

pub fn tomography_synthesize(run: &Run) -> Result<(), CliError> {
    let (cfg, out): (SynthesizeConfig, _) = run.prepare("tomography-synthesize")?;
    if cfg.spread.is_nan() || cfg.spread < 0.0 {
        return Err(invalid("spread must be nonnegative"));
    }
    let model = CircuitModel::chip();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (u_h, u_v) = match cfg.truth.as_str() {
        "chip" => {
            let u = compile_unitary(&layout_dtqw(&chip_profile()));
            (u.clone(), u)
        }
        "perturbed" => {
            let h = perturbed_truth(&model, cfg.spread, &mut rng)?;
            let v = if cfg.distinct_v { perturbed_truth(&model, cfg.spread, &mut rng)? } else { h.clone() };
            (h, v)
        }
        other => return Err(invalid(format!("truth must be chip or perturbed, got '{other}'"))),
    };
    let data = synthesize_measurements(&u_h, &u_v, cfg.noise, cfg.seed, &DEFAULT_PAIRS)?;
    note(&out.config_hash, &format!("synthesized {} data points (noise {})", data.len(), cfg.noise));
    out.emit(&data.to_text())
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    data: String,
    #[serde(default = "default_starts")]
    starts: usize,
    #[serde(default = "default_hops")]
    hops: usize,
    #[serde(default = "default_mc")]
    mc_samples: usize,
    #[serde(default)]
    drop_layer: Option<usize>,
    #[serde(default)]
    seed: u64,
}

fn default_starts() -> usize {
    16
}

fn default_hops() -> usize {
    8
}

fn default_mc() -> usize {
    20
}

pub fn tomography_fit(run: &Run) -> Result<(), CliError> {
    let (cfg, out): (FitConfig, _) = run.prepare("tomography-fit")?;
    let data = MeasurementSet::from_text(&std::fs::read_to_string(&cfg.data)?)?;
    let mut template = layout_dtqw(&chip_profile());
    if let Some(k) = cfg.drop_layer {
        if k >= template.layers().len() {
            return Err(invalid(format!("drop_layer {k} out of range")));
        }
        template = template.without_layer(k);
    }
    let model = CircuitModel::from_template(&template, &DEFAULT_PAIRS)?;
    let opts = FitOptions { starts: cfg.starts, hops: cfg.hops, seed: cfg.seed, ..Default::default() };
    let h = &out.config_hash;
    let r = match fit(&data, &model, &opts) {
        Ok(r) => r,
        Err(photonic_quench::Error::Convergence { starts, best }) => {
            note(h, &format!("no acceptable fit after {starts} starts: chi2 {:.4e} over {} data", best.residual, best.n_data));
            return Err(photonic_quench::Error::Convergence { starts, best }.into());
        }
        Err(e) => return Err(e.into()),
    };
    note(h, &format!("chi2 H {:.4} / V {:.4} over {} data", r.h.residual, r.v.residual, r.n_data));
    note(h, &format!("fidelity(u_h, u_v) = {:.6}", r.polarization_fidelity()));
    if cfg.mc_samples > 0 {
        let mc = monte_carlo_errors(&data, &model, &r, cfg.mc_samples, cfg.seed)?;
        for pol in [Pol::H, Pol::V] {
            let (m, s) = mc.fidelity_summary(pol);
            note(h, &format!("Monte Carlo {pol:?}: F = {m:.6} +- {s:.6}"));
        }
    }
    let mut rows = Vec::new();
    for (label, u) in [("H", &r.h.unitary), ("V", &r.v.unitary)] {
        let g = photonic_quench::tomography::canonical_gauge(u);
        for row in 0..g.dim() {
            for col in 0..g.dim() {
                let z = g[(row, col)];
                rows.push(format!("{label},{},{},{},{}", row + 1, col + 1, fmt(z.re), fmt(z.im)));
            }
        }
    }
    out.csv("polarization,row,col,re,im", &rows)
}
