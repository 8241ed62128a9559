//! Entanglement readout stage on five modes.
//!
//! Phases `phi2`, `phi5` act on modes 2 and 5, then balanced couplers mix
//! modes (1,5) and (2,4); mode 3 passes untouched. Mode 5 loses amplitude
//! `sqrt(eta5)` on its way from the first device.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, C64};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::spin::SpinState;
use crate::twophoton::{PairState, TwoPhotonInput};

pub const N_MODES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EccSettings {
    pub phi2: f64,
    pub phi5: f64,
    pub eta5: f64,
}

impl EccSettings {
    pub fn new(phi2: f64, phi5: f64, eta5: f64) -> Result<Self> {
        if !(eta5 > 0.0 && eta5 <= 1.0) {
            return Err(Error::range(format!("eta5 = {eta5} is outside (0, 1]")));
        }
        if !(phi2.is_finite() && phi5.is_finite()) {
            return Err(Error::validation("phases must be finite"));
        }
        Ok(Self { phi2, phi5, eta5 })
    }

    /// Zero phases, no loss.
    pub fn reference() -> Self {
        Self { phi2: 0.0, phi5: 0.0, eta5: 1.0 }
    }

    pub fn with_phase(self, which: FringePhase, value: f64) -> Self {
        match which {
            FringePhase::Phi2 => Self { phi2: value, ..self },
            FringePhase::Phi5 => Self { phi5: value, ..self },
        }
    }
}

/// Phase shifts followed by the two balanced couplers, lower mode first:
/// `out_1 = (a_1 + a_5)/sqrt2`, `out_5 = (a_1 - a_5)/sqrt2`, likewise for (2,4).
pub fn ecc_unitary(settings: &EccSettings) -> ComplexMatrix {
    let h = FRAC_1_SQRT_2;
    let mut bs = ComplexMatrix::zeros(N_MODES);
    for (a, b) in [(0, 4), (1, 3)] {
        bs.set(a, a, C64::new(h, 0.0));
        bs.set(a, b, C64::new(h, 0.0));
        bs.set(b, a, C64::new(h, 0.0));
        bs.set(b, b, C64::new(-h, 0.0));
    }
    bs.set(2, 2, C64::new(1.0, 0.0));
    let one = C64::new(1.0, 0.0);
    let phases = ComplexMatrix::diagonal(&[
        one,
        C64::from_polar(1.0, settings.phi2),
        one,
        one,
        C64::from_polar(1.0, settings.phi5),
    ]);
    &bs * &phases
}

/// `ECC * diag(1,1,1,1,sqrt(eta5))`.
fn readout_map(settings: &EccSettings) -> ComplexMatrix {
    let one = C64::new(1.0, 0.0);
    let loss = ComplexMatrix::diagonal(&[one, one, one, one, C64::new(settings.eta5.sqrt(), 0.0)]);
    &ecc_unitary(settings) * &loss
}

/// Mean photon numbers `N'_m` and pair correlations `P'_nm` after readout.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeObservables {
    n_prime: Vec<f64>,
    p_prime: Vec<Vec<f64>>,
}

impl CascadeObservables {
    fn zero(n: usize) -> Self {
        Self { n_prime: vec![0.0; n], p_prime: vec![vec![0.0; n]; n] }
    }

    fn accumulate(&mut self, weight: f64, state: &PairState) {
        let n = self.n_prime.len();
        let b = state.amplitudes();
        for m in 1..=n {
            self.n_prime[m - 1] += weight * state.mean_number(m);
        }
        for r in 0..n {
            for s in 0..n {
                let v = if r == s {
                    2.0 * b[(r, r)].norm_sqr()
                } else {
                    b[(r, s)].norm_sqr() + b[(s, r)].norm_sqr()
                };
                self.p_prime[r][s] += weight * v;
            }
        }
    }

    /// `N'_m`, 1-based.
    pub fn n(&self, m: usize) -> f64 {
        self.n_prime[m - 1]
    }

    /// `P'_nm`, 1-based and symmetric.
    pub fn p(&self, n: usize, m: usize) -> f64 {
        self.p_prime[n - 1][m - 1]
    }

    pub fn n_prime(&self) -> &[f64] {
        &self.n_prime
    }

    /// Probability that both photons are detected somewhere.
    pub fn detected_pairs(&self) -> f64 {
        let n = self.n_prime.len();
        let mut total = 0.0;
        for r in 0..n {
            total += self.p_prime[r][r] / 2.0;
            for s in r + 1..n {
                total += self.p_prime[r][s];
            }
        }
        total
    }
}

/// Incoherent mixture of pair states with their weights.
pub type Mixture = [(f64, PairState)];

/// Observables for a mixture of states already leaving the first device.
pub fn cascade_mixture(mixture: &Mixture, settings: &EccSettings) -> Result<CascadeObservables> {
    let g = readout_map(settings);
    let mut obs = CascadeObservables::zero(N_MODES);
    for (w, state) in mixture {
        if state.n_modes() != N_MODES {
            return Err(Error::Dimension { expected: N_MODES, got: state.n_modes() });
        }
        obs.accumulate(*w, &state.transform(&g, &g));
    }
    Ok(obs)
}

pub fn cascade_state(state: &PairState, settings: &EccSettings) -> Result<CascadeObservables> {
    cascade_mixture(&[(1.0, state.clone())], settings)
}

/// First device (the input's polarisation unitaries), loss on mode 5, readout.
pub fn cascade_observables(input: &TwoPhotonInput, settings: &EccSettings) -> Result<CascadeObservables> {
    cascade_state(&PairState::from_input(input), settings)
}

/// Trace-preserving alternative: mode 5 feeds a coupler of transmission
/// `eta5` towards an extra sixth mode. Returns the observables on the five
/// readout modes and the probability that at least one photon was lost.
pub fn cascade_lossmode(state: &PairState, settings: &EccSettings) -> Result<(CascadeObservables, f64)> {
    if state.n_modes() != N_MODES {
        return Err(Error::Dimension { expected: N_MODES, got: state.n_modes() });
    }
    let g = lossmode_map(settings);
    let b = state.amplitudes();
    let padded = ComplexMatrix::from_fn(N_MODES + 1, |r, s| if r < N_MODES && s < N_MODES { b[(r, s)] } else { C64::new(0.0, 0.0) });
    let out = PairState::from_matrix(padded).transform(&g, &g);
    let ob = out.amplitudes();
    let inner = PairState::from_matrix(ComplexMatrix::from_fn(N_MODES, |r, s| ob[(r, s)]));
    let mut obs = CascadeObservables::zero(N_MODES);
    obs.accumulate(1.0, &inner);
    let lost = 1.0 - inner.total_probability();
    Ok((obs, lost))
}

/// Six-mode unitary of the loss-mode model.
pub fn lossmode_map(settings: &EccSettings) -> ComplexMatrix {
    let e = ecc_unitary(settings);
    let ecc6 = ComplexMatrix::from_fn(N_MODES + 1, |r, c| {
        if r < N_MODES && c < N_MODES {
            e[(r, c)]
        } else if r == c {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let (t, l) = (settings.eta5.sqrt(), (1.0 - settings.eta5).sqrt());
    let mut split = ComplexMatrix::identity(N_MODES + 1);
    split.set(4, 4, C64::new(t, 0.0));
    split.set(4, 5, C64::new(-l, 0.0));
    split.set(5, 4, C64::new(l, 0.0));
    split.set(5, 5, C64::new(t, 0.0));
    &ecc6 * &split
}

/// `E_15 = N'_5 - P'_51`, `E_24 = N'_2 - P'_24 - P'_23 + P'_43`.
pub fn entanglement_fractions(obs: &CascadeObservables) -> (f64, f64) {
    let e15 = obs.n(5) - obs.p(5, 1);
    let e24 = obs.n(2) - obs.p(2, 4) - obs.p(2, 3) + obs.p(4, 3);
    (e15, e24)
}

/// Normally ordered two-excitation amplitudes of a five-spin state as a
/// photon pair state (up spin = occupied mode).
pub fn pair_state_from_spin(state: &SpinState) -> Result<PairState> {
    let n = state.n_spins();
    let mut pairs = BTreeMap::new();
    let mut weight = 0.0;
    for (bits, a) in state.amplitudes().iter().enumerate() {
        if a.norm_sqr() == 0.0 {
            continue;
        }
        if bits.count_ones() != 2 {
            return Err(Error::validation("state has weight outside the two-excitation sector"));
        }
        let r = bits.trailing_zeros() as usize + 1;
        let s = (usize::BITS - 1 - bits.leading_zeros()) as usize + 1;
        pairs.insert((r, s), *a);
        weight += a.norm_sqr();
    }
    if (weight - 1.0).abs() > 1e-10 {
        return Err(Error::validation(format!("two-excitation weight {weight} differs from 1")));
    }
    PairState::from_fermion_pairs(n, &pairs)
}

/// The ideal photonic rainbow: equal `+1/2` amplitudes on {1,2}, {1,4}, {2,5}, {4,5}.
pub fn rainbow_pair_state() -> PairState {
    let pairs: BTreeMap<_, _> = [(1, 2), (1, 4), (2, 5), (4, 5)].into_iter().map(|k| (k, C64::new(0.5, 0.0))).collect();
    PairState::from_fermion_pairs(N_MODES, &pairs).expect("valid pairs")
}

/// Equal-weight mixture of the rainbow's four components, with no coherence.
pub fn dephased_rainbow() -> Vec<(f64, PairState)> {
    [(1, 2), (1, 4), (2, 5), (4, 5)]
        .into_iter()
        .map(|k| {
            let pairs: BTreeMap<_, _> = [(k, C64::new(1.0, 0.0))].into_iter().collect();
            (0.25, PairState::from_fermion_pairs(N_MODES, &pairs).expect("valid pair"))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FringePhase {
    Phi2,
    Phi5,
}

impl FringePhase {
    /// The two `S_i` quantities that respond to this phase.
    pub fn curves(self) -> [SQuantity; 2] {
        match self {
            FringePhase::Phi2 => [SQuantity::S2, SQuantity::S4],
            FringePhase::Phi5 => [SQuantity::S1, SQuantity::S5],
        }
    }

    pub fn other(self) -> Self {
        match self {
            FringePhase::Phi2 => FringePhase::Phi5,
            FringePhase::Phi5 => FringePhase::Phi2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SQuantity {
    S1,
    S2,
    S4,
    S5,
}

impl SQuantity {
    pub fn label(self) -> &'static str {
        match self {
            SQuantity::S1 => "S1",
            SQuantity::S2 => "S2",
            SQuantity::S4 => "S4",
            SQuantity::S5 => "S5",
        }
    }

    pub fn value(self, obs: &CascadeObservables) -> f64 {
        match self {
            SQuantity::S1 => obs.p(1, 2) + obs.p(1, 4),
            SQuantity::S2 => obs.p(2, 1) + obs.p(2, 5),
            SQuantity::S4 => obs.p(4, 1) + obs.p(4, 5),
            SQuantity::S5 => obs.p(5, 2) + obs.p(5, 4),
        }
    }
}

/// Least-squares fit of `A + B cos(phi + phi0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeFit {
    pub a: f64,
    pub b: f64,
    pub phi0: f64,
    pub visibility: f64,
    /// Largest absolute residual.
    pub residual: f64,
}

pub fn fit_fringe(phases: &[f64], values: &[f64]) -> Result<FringeFit> {
    if phases.len() != values.len() {
        return Err(Error::Dimension { expected: phases.len(), got: values.len() });
    }
    if phases.len() < 3 {
        return Err(Error::validation("a fringe fit needs at least three points"));
    }
    let design = DMatrix::from_fn(phases.len(), 3, |r, c| match c {
        0 => 1.0,
        1 => phases[r].cos(),
        _ => phases[r].sin(),
    });
    let y = DVector::from_column_slice(values);
    let coef = design
        .clone()
        .svd(true, true)
        .solve(&y, 1e-14)
        .map_err(|e| Error::validation(format!("fringe fit failed: {e}")))?;
    let (a, c, s) = (coef[0], coef[1], coef[2]);
    // c cos + s sin = B cos(phi + phi0) with B cos(phi0) = c, B sin(phi0) = -s
    let b = c.hypot(s);
    let phi0 = (-s).atan2(c);
    let residual = (&design * &coef - &y).amax();
    let visibility = if a.abs() > 0.0 { b / a } else { 0.0 };
    Ok(FringeFit { a, b, phi0, visibility, residual })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FringeScan {
    pub which: FringePhase,
    pub phases: Vec<f64>,
    pub curves: Vec<(SQuantity, Vec<f64>)>,
}

impl FringeScan {
    pub fn fits(&self) -> Result<Vec<(SQuantity, FringeFit)>> {
        self.curves.iter().map(|(q, v)| Ok((*q, fit_fringe(&self.phases, v)?))).collect()
    }

    /// `phase,S_a,S_b` rows after a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("phase");
        for (q, _) in &self.curves {
            let _ = write!(out, ",{}", q.label());
        }
        out.push('\n');
        for (k, ph) in self.phases.iter().enumerate() {
            let _ = write!(out, "{ph}");
            for (_, v) in &self.curves {
                let _ = write!(out, ",{}", v[k]);
            }
            out.push('\n');
        }
        out
    }
}

/// Scans one phase over `grid` with the other settings fixed.
pub fn fringe_scan(mixture: &Mixture, base: &EccSettings, which: FringePhase, grid: &[f64]) -> Result<FringeScan> {
    let obs: Vec<CascadeObservables> = grid
        .par_iter()
        .map(|&ph| cascade_mixture(mixture, &base.with_phase(which, ph)))
        .collect::<Result<_>>()?;
    let curves = which
        .curves()
        .into_iter()
        .map(|q| (q, obs.iter().map(|o| q.value(o)).collect()))
        .collect();
    Ok(FringeScan { which, phases: grid.to_vec(), curves })
}

/// `n` equally spaced phases in `[0, 2pi)`.
pub fn phase_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect()
}

/// Phases maximising `P'_25`, by a 72x72 grid and a simplex polish. Returned
/// phases are wrapped to `[0, 2pi)`.
pub fn optimal_phases(mixture: &Mixture, eta5: f64) -> Result<(f64, f64)> {
    let base = EccSettings::new(0.0, 0.0, eta5)?;
    let p25 = |phi2: f64, phi5: f64| -> f64 {
        cascade_mixture(mixture, &EccSettings { phi2, phi5, ..base }).map(|o| o.p(2, 5)).unwrap_or(f64::NEG_INFINITY)
    };
    let grid = phase_grid(72);
    let best = grid
        .par_iter()
        .map(|&a| {
            grid.iter()
                .map(|&b| (p25(a, b), a, b))
                .fold((f64::NEG_INFINITY, 0.0, 0.0), |acc, v| if v.0 > acc.0 { v } else { acc })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((f64::NEG_INFINITY, 0.0, 0.0), |acc, v| if v.0 > acc.0 { v } else { acc });
    let m = nelder_mead(|x| -p25(x[0], x[1]), &[best.1, best.2], &NelderMeadOptions::new(2, 0.05));
    let (a, b) = if -m.f >= best.0 { (m.x[0], m.x[1]) } else { (best.1, best.2) };
    Ok((a.rem_euclid(2.0 * PI), b.rem_euclid(2.0 * PI)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionReport {
    pub phi2: f64,
    pub phi5: f64,
    pub e15: f64,
    pub e24: f64,
}

/// Entanglement fractions at the phases that maximise `P'_25`.
pub fn fractions_at_optimum(mixture: &Mixture, eta5: f64) -> Result<FractionReport> {
    let (phi2, phi5) = optimal_phases(mixture, eta5)?;
    let obs = cascade_mixture(mixture, &EccSettings::new(phi2, phi5, eta5)?)?;
    let (e15, e24) = entanglement_fractions(&obs);
    Ok(FractionReport { phi2, phi5, e15, e24 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::pst_couplings;
    use crate::matrix::is_unitary;
    use crate::mesh::chip_unitary;
    use crate::spin::{entanglement_fraction_direct, quench_evolve};
    use crate::twophoton::{fock_evolve, FockInput, FERMIONIC};

    #[test]
    fn ecc_unitary_properties() {
        let u = ecc_unitary(&EccSettings::reference());
        assert!(is_unitary(&u, 1e-12));
        let a = ecc_unitary(&EccSettings::new(0.3, 0.0, 1.0).unwrap());
        let b = ecc_unitary(&EccSettings::new(0.3, 2.0 * PI, 1.0).unwrap());
        assert!(a.max_abs_diff(&b) < 1e-14);
        // a photon in mode 1 splits evenly between 1 and 5
        assert!((u[(0, 0)].norm_sqr() - 0.5).abs() < 1e-15 && (u[(4, 0)].norm_sqr() - 0.5).abs() < 1e-15);
        assert_eq!(u[(2, 2)], C64::new(1.0, 0.0));
        assert!(EccSettings::new(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn rainbow_exits_on_two_and_five() {
        let obs = cascade_state(&rainbow_pair_state(), &EccSettings::reference()).unwrap();
        assert!((obs.p(2, 5) - 1.0).abs() < 1e-12);
        let (e15, e24) = entanglement_fractions(&obs);
        assert!((e15 - 1.0).abs() < 1e-12 && (e24 - 1.0).abs() < 1e-12);
        // both phases shifted by pi: complementary outputs
        let obs = cascade_state(&rainbow_pair_state(), &EccSettings::new(PI, PI, 1.0).unwrap()).unwrap();
        assert!((obs.p(4, 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_first_device_gives_product_values() {
        // photons stay on 2 and 4 (spins up at 2 and 4): pair (1,5) is down-down, pair (2,4) up-up
        let id = ComplexMatrix::identity(5);
        let input = TwoPhotonInput::symmetric(2, 4, FERMIONIC, id).unwrap();
        let (e15, e24) = entanglement_fractions(&cascade_observables(&input, &EccSettings::reference()).unwrap());
        assert!(e15.abs() < 1e-12 && e24.abs() < 1e-12);
        // a single anti-aligned pair reaches one half
        let pairs: BTreeMap<_, _> = [((1, 2), C64::new(1.0, 0.0))].into_iter().collect();
        let s = PairState::from_fermion_pairs(5, &pairs).unwrap();
        let (e15, _) = entanglement_fractions(&cascade_state(&s, &EccSettings::reference()).unwrap());
        assert!((e15 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fractions_match_spin_oracle() {
        let j = pst_couplings(5);
        for k in 0..10 {
            let t = 0.6 * k as f64;
            let s = quench_evolve(5, &j, t).unwrap();
            let obs = cascade_state(&pair_state_from_spin(&s).unwrap(), &EccSettings::reference()).unwrap();
            let (e15, e24) = entanglement_fractions(&obs);
            assert!((e15 - entanglement_fraction_direct(&s, 1, 5).unwrap()).abs() < 1e-9);
            assert!((e24 - entanglement_fraction_direct(&s, 2, 4).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn cascade_matches_fock_oracle_with_loss() {
        let u = chip_unitary();
        let settings = EccSettings::new(0.4, 1.3, 0.36).unwrap();
        let input = TwoPhotonInput::symmetric(2, 4, FERMIONIC, u.clone()).unwrap();
        let obs = cascade_observables(&input, &settings).unwrap();
        let g = &readout_map(&settings) * &u;
        let table = fock_evolve(&FockInput::bell(2, 4, FERMIONIC), &g, &g).unwrap().mode_probabilities();
        for r in 1..=5 {
            for s in r + 1..=5 {
                assert!((obs.p(r, s) - table.get(r, s)).abs() < 1e-10);
            }
            assert!((obs.p(r, r) - 2.0 * table.get(r, r)).abs() < 1e-10);
        }
    }

    #[test]
    fn loss_accounting() {
        let u = chip_unitary();
        let input = TwoPhotonInput::symmetric(2, 4, FERMIONIC, u).unwrap();
        let state = PairState::from_input(&input);
        let settings = EccSettings::new(0.2, 0.9, 0.36).unwrap();
        let direct = cascade_state(&state, &settings).unwrap();
        let (inner, lost) = cascade_lossmode(&state, &settings).unwrap();
        assert!((direct.detected_pairs() + lost - 1.0).abs() < 1e-12);
        assert!((direct.p(2, 5) - inner.p(2, 5)).abs() < 1e-14);
        let lossless = cascade_state(&state, &EccSettings::new(0.2, 0.9, 1.0).unwrap()).unwrap();
        assert!((lossless.detected_pairs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_recovers_cosine() {
        let grid = phase_grid(24);
        let vals: Vec<f64> = grid.iter().map(|p| 0.7 + 0.2 * (p + 0.4).cos()).collect();
        let f = fit_fringe(&grid, &vals).unwrap();
        assert!((f.a - 0.7).abs() < 1e-12 && (f.b - 0.2).abs() < 1e-12 && (f.phi0 - 0.4).abs() < 1e-12);
        assert!(f.residual < 1e-12);
    }

    #[test]
    fn rainbow_fringes_full_visibility() {
        let mix = [(1.0, rainbow_pair_state())];
        for which in [FringePhase::Phi2, FringePhase::Phi5] {
            let scan = fringe_scan(&mix, &EccSettings::reference(), which, &phase_grid(36)).unwrap();
            for (_, fit) in scan.fits().unwrap() {
                assert!((fit.visibility - 1.0).abs() < 1e-9, "{fit:?}");
                assert!(fit.residual < 1e-9);
            }
        }
    }

    #[test]
    fn dephased_fringes_are_flat() {
        let scan = fringe_scan(&dephased_rainbow(), &EccSettings::reference(), FringePhase::Phi5, &phase_grid(36)).unwrap();
        for (_, fit) in scan.fits().unwrap() {
            assert!(fit.visibility.abs() < 1e-9);
        }
    }

    #[test]
    fn scan_insensitive_to_other_phase() {
        let u = chip_unitary();
        let mix = [(1.0, PairState::from_input(&TwoPhotonInput::symmetric(2, 4, FERMIONIC, u).unwrap()))];
        for which in [FringePhase::Phi2, FringePhase::Phi5] {
            let a = fringe_scan(&mix, &EccSettings::new(0.0, 0.0, 0.36).unwrap(), which, &phase_grid(12)).unwrap();
            let b = fringe_scan(&mix, &EccSettings::new(0.0, 0.0, 0.36).unwrap().with_phase(which.other(), 1.9), which, &phase_grid(12)).unwrap();
            for ((_, x), (_, y)) in a.curves.iter().zip(&b.curves) {
                for (p, q) in x.iter().zip(y) {
                    assert!((p - q).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn chip_fractions_below_one() {
        let u = chip_unitary();
        let mix = [(1.0, PairState::from_input(&TwoPhotonInput::symmetric(2, 4, FERMIONIC, u).unwrap()))];
        let r = fractions_at_optimum(&mix, 1.0).unwrap();
        assert!(r.e15 < 1.0 && r.e24 < 1.0);
        assert!(r.e15 > 0.66 && r.e24 > 0.74, "{r:?}");
    }

    #[test]
    fn csv_layout() {
        let scan = fringe_scan(&[(1.0, rainbow_pair_state())], &EccSettings::reference(), FringePhase::Phi5, &phase_grid(4)).unwrap();
        let csv = scan.to_csv();
        assert!(csv.starts_with("phase,S1,S5\n0,"));
        assert_eq!(csv.lines().count(), 5);
    }
}
