//! Reconstruction of a mesh unitary from splitting ratios and two-photon
//! visibilities by chi-square minimisation over circuit parameters.
//!
//! Each coupler of the template gets a parameter `u` with `T = sin^2(u)`.
//! A subset of couplers also carries a phase on its upper input arm. The
//! subset is picked greedily so that the data Jacobian keeps full column
//! rank, which removes the gauge directions the data cannot see.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{unitary_fidelity, ComplexMatrix, C64};
use crate::mesh::WaveguideMesh;
use crate::optim::{levenberg_marquardt, nelder_mead, NelderMeadOptions};
use crate::twophoton::hom_visibility;

/// Mode quadruple `(i, j, r, s)` of a visibility measurement.
type Quad = (usize, usize, usize, usize);
/// Monte Carlo draw: parameters, fidelity to the central fit, gauge offsets.
type Sample = (Vec<f64>, f64, Vec<f64>);

/// Input pairs used for the visibility data unless stated otherwise.
pub const DEFAULT_PAIRS: [(usize, usize); 6] = [(1, 2), (1, 3), (2, 3), (2, 4), (3, 4), (4, 5)];

/// Standard deviation recorded for noiseless data.
pub const SIGMA_FLOOR: f64 = 1e-4;

/// Visibility points whose distinguishable rate falls below this are not recorded.
pub const MIN_CLASSICAL_RATE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
struct ModelCoupler {
    mode_a: usize,
    phase_param: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
struct ModelLayer {
    fixed_phases: Vec<(usize, C64)>,
    couplers: Vec<ModelCoupler>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitModel {
    n_modes: usize,
    layers: Vec<ModelLayer>,
    n_couplers: usize,
    n_phases: usize,
    pairs: Vec<(usize, usize)>,
}

fn wrap_phase(p: f64) -> f64 {
    let w = (p + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

impl CircuitModel {
    /// Model over the layer structure of `template`, keeping its fixed phase
    /// elements and choosing the phase parameters by the rank test.
    pub fn from_template(template: &WaveguideMesh, pairs: &[(usize, usize)]) -> Result<Self> {
        let n = template.n_modes();
        for &(i, j) in pairs {
            if i == j || i == 0 || j == 0 || i > n || j > n {
                return Err(Error::index(format!("input pair ({i}, {j}) invalid for {n} modes")));
            }
        }
        let layers: Vec<ModelLayer> = template
            .layers()
            .iter()
            .map(|l| ModelLayer {
                fixed_phases: l.phases.iter().map(|p| (p.mode, C64::from_polar(1.0, p.phase))).collect(),
                couplers: l.couplers.iter().map(|c| ModelCoupler { mode_a: c.mode_a, phase_param: None }).collect(),
            })
            .collect();
        let n_couplers = layers.iter().map(|l| l.couplers.len()).sum();
        let mut model = Self { n_modes: n, layers, n_couplers, n_phases: 0, pairs: pairs.to_vec() };
        model.select_phases();
        Ok(model)
    }

    /// The six-layer chip template with the default input pairs.
    pub fn chip() -> Self {
        let mesh = crate::mesh::layout_dtqw(&crate::mesh::chip_profile());
        Self::from_template(&mesh, &DEFAULT_PAIRS).expect("chip template is valid")
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_couplers(&self) -> usize {
        self.n_couplers
    }

    pub fn n_phases(&self) -> usize {
        self.n_phases
    }

    pub fn n_params(&self) -> usize {
        self.n_couplers + self.n_phases
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// `(layer, mode_a)` of each coupler carrying a phase parameter, in parameter order.
    pub fn phase_sites(&self) -> Vec<(usize, usize)> {
        let mut out = vec![(0, 0); self.n_phases];
        for (k, l) in self.layers.iter().enumerate() {
            for c in &l.couplers {
                if let Some(p) = c.phase_param {
                    out[p] = (k, c.mode_a);
                }
            }
        }
        out
    }

    /// Parameter vector from transmittances (coupler order) and phases.
    pub fn params_from(&self, transmittances: &[f64], phases: &[f64]) -> Result<Vec<f64>> {
        if transmittances.len() != self.n_couplers {
            return Err(Error::Dimension { expected: self.n_couplers, got: transmittances.len() });
        }
        if phases.len() != self.n_phases {
            return Err(Error::Dimension { expected: self.n_phases, got: phases.len() });
        }
        let mut p: Vec<f64> = Vec::with_capacity(self.n_params());
        for &t in transmittances {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::range(format!("transmittance {t} outside [0, 1]")));
            }
            p.push(t.sqrt().asin());
        }
        p.extend_from_slice(phases);
        Ok(p)
    }

    pub fn transmittances(&self, params: &[f64]) -> Vec<f64> {
        params[..self.n_couplers].iter().map(|u| u.sin().powi(2)).collect()
    }

    pub fn phases<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        &params[self.n_couplers..]
    }

    /// Representative of the parameter class: `u` folded into `[0, pi/2]`,
    /// phases wrapped into `(-pi, pi]` and, since the data cannot tell a
    /// unitary from its complex conjugate, all phases negated if the first is negative.
    pub fn canonicalize(&self, params: &[f64]) -> Vec<f64> {
        let mut p = params.to_vec();
        for u in &mut p[..self.n_couplers] {
            *u = u.sin().abs().asin();
        }
        for ph in &mut p[self.n_couplers..] {
            *ph = wrap_phase(*ph);
        }
        if self.n_phases > 0 && p[self.n_couplers] < 0.0 {
            for ph in &mut p[self.n_couplers..] {
                *ph = wrap_phase(-*ph);
            }
        }
        p
    }

    fn compile_raw(&self, params: &[f64]) -> Vec<C64> {
        let n = self.n_modes;
        let mut u = vec![C64::new(0.0, 0.0); n * n];
        for k in 0..n {
            u[k * n + k] = C64::new(1.0, 0.0);
        }
        let mut ci = 0;
        for layer in &self.layers {
            for &(mode, ph) in &layer.fixed_phases {
                for c in 0..n {
                    u[(mode - 1) * n + c] *= ph;
                }
            }
            for cp in &layer.couplers {
                let (s, cs) = params[ci].sin_cos();
                let (s, cs) = (s.abs(), cs.abs());
                ci += 1;
                let r0 = (cp.mode_a - 1) * n;
                let r1 = cp.mode_a * n;
                let ph = cp.phase_param.map(|p| C64::from_polar(1.0, params[self.n_couplers + p]));
                for c in 0..n {
                    let x = match ph {
                        Some(ph) => u[r0 + c] * ph,
                        None => u[r0 + c],
                    };
                    let y = u[r1 + c];
                    u[r0 + c] = x * cs + y * s;
                    u[r1 + c] = x * s - y * cs;
                }
            }
        }
        u
    }

    pub fn compile(&self, params: &[f64]) -> Result<ComplexMatrix> {
        if params.len() != self.n_params() {
            return Err(Error::Dimension { expected: self.n_params(), got: params.len() });
        }
        let n = self.n_modes;
        let raw = self.compile_raw(params);
        Ok(ComplexMatrix::from_fn(n, |r, c| raw[r * n + c]))
    }

    /// Model predictions in data order: every splitting ratio, then every
    /// visibility for all `r < s` of every input pair.
    fn full_data(&self, params: &[f64]) -> Vec<f64> {
        let n = self.n_modes;
        let u = self.compile_raw(params);
        let at = |r: usize, c: usize| u[r * n + c];
        let mut d: Vec<f64> = Vec::with_capacity(n * n + self.pairs.len() * n * n / 2);
        for i in 0..n {
            for r in 0..n {
                d.push(at(r, i).norm_sqr());
            }
        }
        for &(i, j) in &self.pairs {
            for r in 0..n {
                for s in r + 1..n {
                    d.push(model_visibility(&at, i - 1, j - 1, r, s));
                }
            }
        }
        d
    }

    fn jacobian_rank(&self, params: &[f64]) -> usize {
        let base = self.full_data(params);
        let h = 1e-6;
        let np = params.len();
        let mut jac = DMatrix::<f64>::zeros(base.len(), np);
        for k in 0..np {
            let mut p = params.to_vec();
            p[k] += h;
            let up = self.full_data(&p);
            p[k] -= 2.0 * h;
            let down = self.full_data(&p);
            for (row, (a, b)) in up.iter().zip(&down).enumerate() {
                jac[(row, k)] = (a - b) / (2.0 * h);
            }
        }
        let sv = jac.svd(false, false).singular_values;
        let max = sv.max();
        sv.iter().filter(|&&v| v > 1e-7 * max).count()
    }

    fn select_phases(&mut self) {
        // candidates: couplers whose two modes have both been mixed before
        let mut candidates = Vec::new();
        let mut mixed = vec![false; self.n_modes + 2];
        for (k, layer) in self.layers.iter().enumerate() {
            for (ci, c) in layer.couplers.iter().enumerate() {
                if mixed[c.mode_a] && mixed[c.mode_a + 1] {
                    candidates.push((k, ci));
                }
            }
            for c in &layer.couplers {
                mixed[c.mode_a] = true;
                mixed[c.mode_a + 1] = true;
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let generic: Vec<f64> = (0..self.n_couplers + candidates.len())
            .map(|k| if k < self.n_couplers { rng.random_range(0.5..1.1) } else { rng.random_range(-1.0..1.0) })
            .collect();
        for (k, ci) in candidates {
            self.layers[k].couplers[ci].phase_param = Some(self.n_phases);
            self.n_phases += 1;
            let p: Vec<f64> = generic[..self.n_params()].to_vec();
            if self.jacobian_rank(&p) < self.n_params() {
                self.layers[k].couplers[ci].phase_param = None;
                self.n_phases -= 1;
            }
        }
    }
}

/// HOM visibility from a raw matrix accessor; zero where the classical rate vanishes.
fn model_visibility(at: &impl Fn(usize, usize) -> C64, i: usize, j: usize, r: usize, s: usize) -> f64 {
    let p_cl = (at(r, i) * at(s, j)).norm_sqr() + (at(r, j) * at(s, i)).norm_sqr();
    if p_cl < 1e-12 {
        return 0.0;
    }
    let p_q = (at(r, i) * at(s, j) + at(r, j) * at(s, i)).norm_sqr();
    (p_cl - p_q) / p_cl
}

/// Representative of `u` modulo input and output phases and complex
/// conjugation, none of which the data can see. Row 1 and column 1 are made
/// real and nonnegative, then the first entry with a sizeable imaginary part
/// (row-major) is made to have a positive one.
pub fn canonical_gauge(u: &ComplexMatrix) -> ComplexMatrix {
    let n = u.dim();
    let unit = |z: C64| if z.norm() > 1e-12 { z.conj() / z.norm() } else { C64::new(1.0, 0.0) };
    let col: Vec<C64> = (0..n).map(|c| unit(u[(0, c)])).collect();
    let mut row: Vec<C64> = (0..n).map(|r| unit(u[(r, 0)] * col[0])).collect();
    row[0] = C64::new(1.0, 0.0);
    let g = ComplexMatrix::from_fn(n, |r, c| u[(r, c)] * row[r] * col[c]);
    match (0..n * n).map(|k| g[(k / n, k % n)].im).find(|im| im.abs() > 1e-9) {
        Some(im) if im < 0.0 => g.conj(),
        _ => g,
    }
}

/// Real coordinates of the gauge representative: every modulus (row-major),
/// then the phase of every entry outside row 1 and column 1. Phases of
/// vanishing entries carry no information.
pub fn gauge_coordinates(u: &ComplexMatrix) -> Vec<f64> {
    let g = canonical_gauge(u);
    let n = g.dim();
    let mut out: Vec<f64> = (0..n * n).map(|k| g[(k / n, k % n)].norm()).collect();
    for r in 1..n {
        for c in 1..n {
            out.push(g[(r, c)].arg());
        }
    }
    out
}

/// Fidelity between the gauge representatives of `a` and `b`.
pub fn reconstruction_fidelity(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    unitary_fidelity(&canonical_gauge(a), &canonical_gauge(b))
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityDatum {
    pub inputs: (usize, usize),
    pub outputs: (usize, usize),
    pub value: f64,
    pub sigma: f64,
}

/// Data for one polarisation. `splitting[i-1][r-1]` is the fraction of light
/// entering mode i that leaves mode r.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizationData {
    pub splitting: Vec<Vec<f64>>,
    pub splitting_sigma: Vec<Vec<f64>>,
    pub visibilities: Vec<VisibilityDatum>,
}

impl PolarizationData {
    pub fn len(&self) -> usize {
        self.splitting.iter().map(Vec::len).sum::<usize>() + self.visibilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check_sigmas(&self) -> Result<()> {
        let ok = self.splitting_sigma.iter().flatten().chain(self.visibilities.iter().map(|v| &v.sigma)).all(|&s| s > 0.0 && s.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::validation("every datum needs a positive standard deviation"))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub n_modes: usize,
    pub h: PolarizationData,
    pub v: PolarizationData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pol {
    H,
    V,
}

impl MeasurementSet {
    pub fn pol(&self, pol: Pol) -> &PolarizationData {
        match pol {
            Pol::H => &self.h,
            Pol::V => &self.v,
        }
    }

    pub fn len(&self) -> usize {
        self.h.len() + self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "n_modes = {}", self.n_modes);
        out.push_str("visibility_convention = dip_positive\n");
        for (tag, d) in [("h", &self.h), ("v", &self.v)] {
            let _ = writeln!(out, "\n[splitting_{tag}]");
            for (i, row) in d.splitting.iter().enumerate() {
                let _ = write!(out, "{}", i + 1);
                for v in row {
                    let _ = write!(out, " {v}");
                }
                out.push('\n');
            }
        }
        for (tag, d) in [("h", &self.h), ("v", &self.v)] {
            let _ = writeln!(out, "\n[visibility_{tag}]");
            for v in &d.visibilities {
                let _ = writeln!(out, "{} {} {} {} {}", v.inputs.0, v.inputs.1, v.outputs.0, v.outputs.1, v.value);
            }
        }
        out.push_str("\n[sigma]\n");
        for (tag, d) in [("h", &self.h), ("v", &self.v)] {
            for (i, row) in d.splitting_sigma.iter().enumerate() {
                let _ = write!(out, "splitting_{tag} {}", i + 1);
                for v in row {
                    let _ = write!(out, " {v}");
                }
                out.push('\n');
            }
            for v in &d.visibilities {
                let _ = writeln!(out, "visibility_{tag} {} {} {} {} {}", v.inputs.0, v.inputs.1, v.outputs.0, v.outputs.1, v.sigma);
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut n_modes: Option<usize> = None;
        let mut flip = false;
        let mut section = String::new();
        let mut split: [Vec<(usize, Vec<f64>)>; 2] = [vec![], vec![]];
        let mut split_sigma: [Vec<(usize, Vec<f64>)>; 2] = [vec![], vec![]];
        let mut vis: [Vec<VisibilityDatum>; 2] = [vec![], vec![]];
        let mut vis_sigma: [Vec<(Quad, f64)>; 2] = [vec![], vec![]];
        let pol_index = |tag: &str| if tag.ends_with("_h") { 0 } else { 1 };

        for (k, raw) in text.lines().enumerate() {
            let line_no = k + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                match name {
                    "splitting_h" | "splitting_v" | "visibility_h" | "visibility_v" | "sigma" => section = name.to_string(),
                    other => return Err(Error::parse(line_no, format!("unknown section [{other}]"))),
                }
                continue;
            }
            if section.is_empty() {
                let (key, value) = line
                    .split_once('=')
                    .map(|(a, b)| (a.trim(), b.trim()))
                    .ok_or_else(|| Error::parse(line_no, "expected key = value"))?;
                match key {
                    "n_modes" => n_modes = Some(value.parse().map_err(|_| Error::parse(line_no, "bad n_modes"))?),
                    "visibility_convention" => {
                        flip = match value {
                            "dip_positive" => false,
                            "dip_negative" => true,
                            other => return Err(Error::parse(line_no, format!("unknown visibility convention '{other}'"))),
                        }
                    }
                    other => return Err(Error::parse(line_no, format!("unknown header key '{other}'"))),
                }
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            let nums = |toks: &[&str]| -> Result<Vec<f64>> {
                toks.iter().map(|t| t.parse::<f64>().map_err(|_| Error::parse(line_no, format!("cannot parse '{t}'")))).collect()
            };
            let idx = |t: &str| -> Result<usize> { t.parse::<usize>().map_err(|_| Error::parse(line_no, format!("bad index '{t}'"))) };
            match section.as_str() {
                "splitting_h" | "splitting_v" => {
                    let row = idx(tokens[0])?;
                    split[pol_index(&section)].push((row, nums(&tokens[1..])?));
                }
                "visibility_h" | "visibility_v" => {
                    if tokens.len() != 5 {
                        return Err(Error::parse(line_no, "visibility lines hold i j r s value"));
                    }
                    let value = nums(&tokens[4..])?[0];
                    vis[pol_index(&section)].push(VisibilityDatum {
                        inputs: (idx(tokens[0])?, idx(tokens[1])?),
                        outputs: (idx(tokens[2])?, idx(tokens[3])?),
                        value: if flip { -value } else { value },
                        sigma: f64::NAN,
                    });
                }
                "sigma" => match tokens[0] {
                    "splitting_h" | "splitting_v" => {
                        if tokens.len() < 2 {
                            return Err(Error::parse(line_no, "missing row index"));
                        }
                        split_sigma[pol_index(tokens[0])].push((idx(tokens[1])?, nums(&tokens[2..])?));
                    }
                    "visibility_h" | "visibility_v" => {
                        if tokens.len() != 6 {
                            return Err(Error::parse(line_no, "visibility sigma lines hold i j r s sigma"));
                        }
                        let key = (idx(tokens[1])?, idx(tokens[2])?, idx(tokens[3])?, idx(tokens[4])?);
                        vis_sigma[pol_index(tokens[0])].push((key, nums(&tokens[5..])?[0]));
                    }
                    other => return Err(Error::parse(line_no, format!("unknown sigma entry '{other}'"))),
                },
                _ => unreachable!("section names are checked above"),
            }
        }

        let n = n_modes.ok_or_else(|| Error::parse(0, "missing n_modes"))?;
        let build = |p: usize, split: &[(usize, Vec<f64>)], ssig: &[(usize, Vec<f64>)], vis: &[VisibilityDatum], vsig: &[(Quad, f64)]| -> Result<PolarizationData> {
            let rows = |list: &[(usize, Vec<f64>)], what: &str| -> Result<Vec<Vec<f64>>> {
                if list.len() != n {
                    return Err(Error::parse(0, format!("{what}: expected {n} rows, got {}", list.len())));
                }
                let mut out = vec![vec![]; n];
                for (i, row) in list {
                    if *i == 0 || *i > n || row.len() != n || !out[i - 1].is_empty() {
                        return Err(Error::parse(0, format!("{what}: bad row {i}")));
                    }
                    out[i - 1] = row.clone();
                }
                Ok(out)
            };
            let tag = if p == 0 { "h" } else { "v" };
            let splitting = rows(split, &format!("splitting_{tag}"))?;
            let splitting_sigma = rows(ssig, &format!("sigma splitting_{tag}"))?;
            if vis.len() != vsig.len() {
                return Err(Error::parse(0, format!("visibility_{tag}: {} values but {} sigmas", vis.len(), vsig.len())));
            }
            let mut visibilities = vis.to_vec();
            for (d, (key, s)) in visibilities.iter_mut().zip(vsig) {
                if (d.inputs.0, d.inputs.1, d.outputs.0, d.outputs.1) != *key {
                    return Err(Error::parse(0, format!("visibility_{tag}: sigma order does not match the data")));
                }
                d.sigma = *s;
            }
            Ok(PolarizationData { splitting, splitting_sigma, visibilities })
        };
        Ok(Self {
            n_modes: n,
            h: build(0, &split[0], &split_sigma[0], &vis[0], &vis_sigma[0])?,
            v: build(1, &split[1], &split_sigma[1], &vis[1], &vis_sigma[1])?,
        })
    }
}

fn synthesize_pol(u: &ComplexMatrix, noise: f64, pairs: &[(usize, usize)], rng: &mut ChaCha8Rng) -> Result<PolarizationData> {
    let n = u.dim();
    let sigma = if noise > 0.0 { noise } else { SIGMA_FLOOR };
    let normal = Normal::new(0.0, noise.max(0.0)).map_err(|e| Error::validation(e.to_string()))?;
    let draw = |rng: &mut ChaCha8Rng| if noise > 0.0 { normal.sample(rng) } else { 0.0 };
    let mut splitting = vec![vec![0.0; n]; n];
    for (i, row) in splitting.iter_mut().enumerate() {
        for (r, v) in row.iter_mut().enumerate() {
            *v = (u[(r, i)].norm_sqr() + draw(rng)).clamp(0.0, 1.0);
        }
    }
    let mut visibilities = Vec::new();
    for &(i, j) in pairs {
        for r in 1..=n {
            for s in r + 1..=n {
                let p_cl = (u[(r - 1, i - 1)] * u[(s - 1, j - 1)]).norm_sqr() + (u[(r - 1, j - 1)] * u[(s - 1, i - 1)]).norm_sqr();
                if p_cl <= MIN_CLASSICAL_RATE {
                    continue;
                }
                let v = hom_visibility(u, i, j, r, s)?;
                visibilities.push(VisibilityDatum { inputs: (i, j), outputs: (r, s), value: (v + draw(rng)).clamp(-1.0, 1.0), sigma });
            }
        }
    }
    Ok(PolarizationData { splitting, splitting_sigma: vec![vec![sigma; n]; n], visibilities })
}

/// Exact splitting ratios and visibilities of `u_h`, `u_v` plus Gaussian noise
/// of width `noise_sigma`, clamped to their physical ranges.
pub fn synthesize_measurements(u_h: &ComplexMatrix, u_v: &ComplexMatrix, noise_sigma: f64, seed: u64, pairs: &[(usize, usize)]) -> Result<MeasurementSet> {
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::range(format!("noise sigma {noise_sigma} must be finite and nonnegative")));
    }
    if u_h.dim() != u_v.dim() {
        return Err(Error::Dimension { expected: u_h.dim(), got: u_v.dim() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = synthesize_pol(u_h, noise_sigma, pairs, &mut rng)?;
    let v = synthesize_pol(u_v, noise_sigma, pairs, &mut rng)?;
    Ok(MeasurementSet { n_modes: u_h.dim(), h, v })
}

/// Precomputed lookup between data and the model's full prediction vector.
struct Objective<'a> {
    model: &'a CircuitModel,
    index: Vec<usize>,
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl<'a> Objective<'a> {
    fn new(model: &'a CircuitModel, data: &PolarizationData) -> Result<Self> {
        data.check_sigmas()?;
        let n = model.n_modes;
        if data.splitting.len() != n {
            return Err(Error::Dimension { expected: n, got: data.splitting.len() });
        }
        let mut index = Vec::new();
        let mut values = Vec::new();
        let mut weights = Vec::new();
        for i in 0..n {
            for r in 0..n {
                index.push(i * n + r);
                values.push(data.splitting[i][r]);
                weights.push(1.0 / data.splitting_sigma[i][r].powi(2));
            }
        }
        let per_pair = n * (n - 1) / 2;
        for d in &data.visibilities {
            let (i, j) = d.inputs;
            let (r, s) = d.outputs;
            let pos = model
                .pairs
                .iter()
                .position(|&p| p == (i, j))
                .ok_or_else(|| Error::validation(format!("input pair ({i}, {j}) is not part of the model")))?;
            if !(r < s && s <= n && r >= 1) {
                return Err(Error::index(format!("output pair ({r}, {s}) invalid")));
            }
            // offset of (r, s) among r < s pairs, row-major
            let (r0, s0) = (r - 1, s - 1);
            let off = r0 * (2 * n - r0 - 1) / 2 + (s0 - r0 - 1);
            index.push(n * n + pos * per_pair + off);
            values.push(d.value);
            weights.push(1.0 / d.sigma.powi(2));
        }
        Ok(Self { model, index, values, weights })
    }

    fn residuals(&self, params: &[f64]) -> Vec<f64> {
        let pred = self.model.full_data(params);
        self.index
            .iter()
            .zip(&self.values)
            .zip(&self.weights)
            .map(|((&k, v), w)| (pred[k] - v) * w.sqrt())
            .collect()
    }

    fn chi2(&self, params: &[f64]) -> f64 {
        let pred = self.model.full_data(params);
        self.index
            .iter()
            .zip(&self.values)
            .zip(&self.weights)
            .map(|((&k, v), w)| (pred[k] - v).powi(2) * w)
            .sum()
    }
}

/// `sum ((model - measured) / sigma)^2` over one polarisation's data.
pub fn chi_square(model: &CircuitModel, params: &[f64], data: &MeasurementSet, pol: Pol) -> Result<f64> {
    if params.len() != model.n_params() {
        return Err(Error::Dimension { expected: model.n_params(), got: params.len() });
    }
    Ok(Objective::new(model, data.pol(pol))?.chi2(params))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub starts: usize,
    pub seed: u64,
    pub max_evals: usize,
    /// Perturb-and-refine rounds after each start's first descent.
    pub hops: usize,
    /// Width of the Gaussian kick applied to every parameter in a hop.
    pub hop_width: f64,
    /// A fit is accepted when chi-square per datum is at most this.
    pub accept_reduced_chi2: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { starts: 16, seed: 0, max_evals: 4_000, hops: 8, hop_width: 0.3, accept_reduced_chi2: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolFit {
    pub params: Vec<f64>,
    pub unitary: ComplexMatrix,
    pub residual: f64,
    pub n_data: usize,
    /// Chi-square at each start's initial point.
    pub start_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub h: PolFit,
    pub v: PolFit,
    /// Total chi-square of both polarisations.
    pub residual: f64,
    pub n_data: usize,
}

impl FitResult {
    /// `F(u_h, u_v)`: how polarisation-insensitive the reconstructed device is.
    pub fn polarization_fidelity(&self) -> f64 {
        reconstruction_fidelity(&self.h.unitary, &self.v.unitary).unwrap_or(0.0)
    }
}

fn prior_sample(model: &CircuitModel, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..model.n_params())
        .map(|k| if k < model.n_couplers { rng.random_range(0.0..FRAC_PI_2) } else { rng.random_range(-PI..PI) })
        .collect()
}

/// Levenberg-Marquardt from `x0`, finished with a simplex pass.
fn polish(obj: &Objective, x0: &[f64], max_evals: usize) -> (Vec<f64>, f64) {
    let lm = levenberg_marquardt(|p| obj.residuals(p), x0, 200);
    let mut opts = NelderMeadOptions::new(x0.len(), 1e-3);
    opts.max_evals = max_evals;
    let nm = nelder_mead(|p| obj.chi2(p), &lm.x, &opts);
    if nm.f < lm.f {
        (nm.x, nm.f)
    } else {
        (lm.x, lm.f)
    }
}

fn fit_pol(model: &CircuitModel, data: &PolarizationData, opts: &FitOptions, seed: u64) -> Result<PolFit> {
    let obj = Objective::new(model, data)?;
    let kick = Normal::new(0.0, opts.hop_width).map_err(|e| Error::validation(e.to_string()))?;
    let runs: Vec<(Vec<f64>, f64, f64)> = (0..opts.starts.max(1))
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let x0 = prior_sample(model, &mut rng);
            let (mut x, mut f) = polish(&obj, &x0, opts.max_evals);
            for _ in 0..opts.hops {
                let trial: Vec<f64> = x.iter().map(|v| v + kick.sample(&mut rng)).collect();
                let (y, g) = polish(&obj, &trial, opts.max_evals);
                if g < f {
                    x = y;
                    f = g;
                }
            }
            (x, f, obj.chi2(&x0))
        })
        .collect();
    // ordered reduction keeps the earliest start on ties
    let best = (0..runs.len()).fold(0, |b, k| if runs[k].1 < runs[b].1 { k } else { b });
    let params = model.canonicalize(&runs[best].0);
    Ok(PolFit {
        unitary: model.compile(&params)?,
        residual: runs[best].1,
        n_data: obj.values.len(),
        start_values: runs.iter().map(|r| r.2).collect(),
        params,
    })
}

/// Multi-start fit of both polarisations. Fails with [`Error::Convergence`]
/// (carrying the best result) when the chi-square per datum stays above the
/// acceptance level.
pub fn fit(data: &MeasurementSet, model: &CircuitModel, opts: &FitOptions) -> Result<FitResult> {
    if data.n_modes != model.n_modes {
        return Err(Error::Dimension { expected: model.n_modes, got: data.n_modes });
    }
    let h = fit_pol(model, &data.h, opts, opts.seed)?;
    let v = fit_pol(model, &data.v, opts, opts.seed.wrapping_add(0xabcdef))?;
    let result = FitResult { residual: h.residual + v.residual, n_data: h.n_data + v.n_data, h, v };
    let per_pol_ok = [&result.h, &result.v].iter().all(|p| p.residual <= opts.accept_reduced_chi2 * p.n_data as f64);
    if per_pol_ok {
        Ok(result)
    } else {
        Err(Error::Convergence { starts: opts.starts, best: Box::new(result) })
    }
}

fn resample(data: &PolarizationData, rng: &mut ChaCha8Rng) -> PolarizationData {
    let mut out = data.clone();
    for (row, srow) in out.splitting.iter_mut().zip(&data.splitting_sigma) {
        for (v, s) in row.iter_mut().zip(srow) {
            *v += Normal::new(0.0, *s).expect("positive sigma").sample(rng);
        }
    }
    for d in &mut out.visibilities {
        d.value += Normal::new(0.0, d.sigma).expect("positive sigma").sample(rng);
    }
    out
}

/// Shifts angles of `p` by multiples of the period so they sit closest to `centre`.
fn align(model: &CircuitModel, p: &[f64], centre: &[f64]) -> Vec<f64> {
    p.iter()
        .zip(centre)
        .enumerate()
        .map(|(k, (&x, &c))| if k < model.n_couplers { x } else { c + wrap_phase(x - c) })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloReport {
    pub param_std_h: Vec<f64>,
    pub param_std_v: Vec<f64>,
    /// Spread of each [`gauge_coordinates`] entry.
    pub gauge_std_h: Vec<f64>,
    pub gauge_std_v: Vec<f64>,
    /// Fidelity of each resampled fit with the central fit.
    pub fidelities_h: Vec<f64>,
    pub fidelities_v: Vec<f64>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

impl MonteCarloReport {
    pub fn fidelity_summary(&self, pol: Pol) -> (f64, f64) {
        mean_std(match pol {
            Pol::H => &self.fidelities_h,
            Pol::V => &self.fidelities_v,
        })
    }
}

/// Resamples every datum within its sigma, refits from the central fit and
/// reports parameter spreads and fidelities with the central unitary.
pub fn monte_carlo_errors(data: &MeasurementSet, model: &CircuitModel, central: &FitResult, n_samples: usize, seed: u64) -> Result<MonteCarloReport> {
    if n_samples < 20 {
        return Err(Error::validation(format!("at least 20 Monte Carlo samples are needed, got {n_samples}")));
    }
    let samples: Vec<[Sample; 2]> = (0..n_samples)
        .into_par_iter()
        .map(|k| -> Result<[Sample; 2]> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64).wrapping_mul(0x2545_f491_4f6c_dd1d));
            let mut out: [(Vec<f64>, f64, Vec<f64>); 2] = Default::default();
            for (slot, (pol, fit)) in [(Pol::H, &central.h), (Pol::V, &central.v)].into_iter().enumerate() {
                let d = resample(data.pol(pol), &mut rng);
                let obj = Objective::new(model, &d)?;
                let (x, _) = polish(&obj, &fit.params, 30_000);
                let x = align(model, &model.canonicalize(&x), &fit.params);
                let u = model.compile(&x)?;
                let f = reconstruction_fidelity(&u, &fit.unitary)?;
                let centre = gauge_coordinates(&fit.unitary);
                let n2 = model.n_modes * model.n_modes;
                let g: Vec<f64> = gauge_coordinates(&u)
                    .iter()
                    .zip(&centre)
                    .enumerate()
                    .map(|(k, (&v, &c))| if k < n2 { v } else { c + wrap_phase(v - c) })
                    .collect();
                out[slot] = (x, f, g);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let std_of = |slot: usize| -> Vec<f64> {
        (0..model.n_params())
            .map(|p| mean_std(&samples.iter().map(|s| s[slot].0[p]).collect::<Vec<_>>()).1)
            .collect()
    };
    let gauge_std_of = |slot: usize| -> Vec<f64> {
        (0..samples[0][slot].2.len())
            .map(|p| mean_std(&samples.iter().map(|s| s[slot].2[p]).collect::<Vec<_>>()).1)
            .collect()
    };
    Ok(MonteCarloReport {
        param_std_h: std_of(0),
        param_std_v: std_of(1),
        gauge_std_h: gauge_std_of(0),
        gauge_std_v: gauge_std_of(1),
        fidelities_h: samples.iter().map(|s| s[0].1).collect(),
        fidelities_v: samples.iter().map(|s| s[1].1).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::is_unitary;
    use crate::mesh::{chip_unitary, compile_unitary, layout_dtqw, chip_profile};

    fn truth(model: &CircuitModel, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ts: Vec<f64> = (0..model.n_couplers()).map(|k| {
            let base = if [0, 3].contains(&(k % 4)) { 0.25 } else { 0.36 };
            base + rng.random_range(-0.05..0.05)
        }).collect();
        let phases: Vec<f64> = (0..model.n_phases()).map(|_| rng.random_range(0.2..1.2)).collect();
        model.params_from(&ts, &phases).unwrap()
    }

    #[test]
    fn chip_model_dimensions() {
        let m = CircuitModel::chip();
        assert_eq!(m.n_couplers(), 12);
        assert_eq!(m.n_params(), 16);
        assert_eq!(m.n_phases(), 4);
    }

    #[test]
    fn zero_phase_model_reproduces_mesh() {
        let m = CircuitModel::chip();
        let ts: Vec<f64> = [0.25, 0.36, 0.36, 0.25].repeat(3);
        // coupler order inside the chip layers: (1,3) then (2,4)
        let order: Vec<f64> = layout_dtqw(&chip_profile()).layers().iter().flat_map(|l| l.couplers.iter().map(|c| c.transmittance)).collect();
        assert_eq!(order.len(), ts.len());
        let p = m.params_from(&order, &vec![0.0; m.n_phases()]).unwrap();
        assert!(m.compile(&p).unwrap().max_abs_diff(&chip_unitary()) < 1e-14);
        assert!(is_unitary(&m.compile(&truth(&m, 3)).unwrap(), 1e-12));
    }

    #[test]
    fn noiseless_synthesis_is_exact() {
        let u = chip_unitary();
        let d = synthesize_measurements(&u, &u, 0.0, 1, &DEFAULT_PAIRS).unwrap();
        assert!((d.h.splitting[1][3] - u[(3, 1)].norm_sqr()).abs() < 1e-15);
        for v in &d.h.visibilities {
            let exact = hom_visibility(&u, v.inputs.0, v.inputs.1, v.outputs.0, v.outputs.1).unwrap();
            assert_eq!(v.value, exact);
            assert_eq!(v.sigma, SIGMA_FLOOR);
        }
    }

    #[test]
    fn noisy_synthesis_reproducible() {
        let u = chip_unitary();
        let a = synthesize_measurements(&u, &u, 0.01, 7, &DEFAULT_PAIRS).unwrap();
        let b = synthesize_measurements(&u, &u, 0.01, 7, &DEFAULT_PAIRS).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        let c = synthesize_measurements(&u, &u, 0.01, 8, &DEFAULT_PAIRS).unwrap();
        assert_ne!(a.to_text(), c.to_text());
        for row in &a.h.splitting {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 0.1);
        }
    }

    #[test]
    fn text_round_trip() {
        let u = chip_unitary();
        let d = synthesize_measurements(&u, &u.transpose(), 0.02, 3, &DEFAULT_PAIRS).unwrap();
        let text = d.to_text();
        let back = MeasurementSet::from_text(&text).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn dip_negative_files_are_flipped() {
        let u = chip_unitary();
        let d = synthesize_measurements(&u, &u, 0.0, 3, &DEFAULT_PAIRS).unwrap();
        let text = d.to_text();
        let flipped_values = {
            let mut d2 = d.clone();
            for v in d2.h.visibilities.iter_mut().chain(d2.v.visibilities.iter_mut()) {
                v.value = -v.value;
            }
            d2.to_text().replace("dip_positive", "dip_negative")
        };
        let back = MeasurementSet::from_text(&flipped_values).unwrap();
        assert_eq!(back.to_text(), text);
        assert!(MeasurementSet::from_text("n_modes = 5\n[bogus]\n").is_err());
    }

    #[test]
    fn chi_square_basics() {
        let m = CircuitModel::chip();
        let p = truth(&m, 11);
        let u = m.compile(&p).unwrap();
        let d = synthesize_measurements(&u, &u, 0.0, 0, &DEFAULT_PAIRS).unwrap();
        assert!(chi_square(&m, &p, &d, Pol::H).unwrap() < 1e-18);
        let mut q = p.clone();
        q[2] += 0.01;
        assert!(chi_square(&m, &q, &d, Pol::H).unwrap() > 0.0);
        let mut bad = d.clone();
        bad.h.splitting_sigma[0][0] = 0.0;
        assert!(matches!(chi_square(&m, &p, &bad, Pol::H), Err(Error::Validation(_))));
    }

    #[test]
    fn conjugation_is_invisible() {
        let m = CircuitModel::chip();
        let p = truth(&m, 5);
        let mut q = p.clone();
        for ph in &mut q[m.n_couplers()..] {
            *ph = -*ph;
        }
        let u = m.compile(&p).unwrap();
        assert!(m.compile(&q).unwrap().max_abs_diff(&u.conj()) < 1e-14);
        let d = synthesize_measurements(&u, &u, 0.0, 0, &DEFAULT_PAIRS).unwrap();
        assert!(chi_square(&m, &q, &d, Pol::H).unwrap() < 1e-18);
        assert_eq!(m.canonicalize(&q), m.canonicalize(&p));
    }

    #[test]
    fn deleted_layer_model_compiles() {
        let mesh = layout_dtqw(&chip_profile()).without_layer(2);
        let m = CircuitModel::from_template(&mesh, &DEFAULT_PAIRS).unwrap();
        assert_eq!(m.n_couplers(), 10);
        let u = compile_unitary(&mesh);
        assert!(is_unitary(&u, 1e-12));
    }
}
