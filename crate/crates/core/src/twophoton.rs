//! Two photons in a polarisation Bell state sent through a linear network.
//!
//! The input `(a+_{iH} a+_{jV} + e^{i chi} a+_{iV} a+_{jH}) / sqrt2` is carried
//! through `u_h` (H photons) and `u_v` (V photons). Matrices are indexed
//! `u[(out, in)]`; all mode labels in this module are 1-based.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::matrix::{determinant2, is_unitary, permanent, ComplexMatrix, C64};

pub const BOSONIC: f64 = 0.0;
pub const FERMIONIC: f64 = PI;

/// Largest mode count accepted by [`fock_oracle`].
pub const MAX_FOCK_MODES: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhotonInput {
    pub mode_i: usize,
    pub mode_j: usize,
    pub chi: f64,
    pub u_h: ComplexMatrix,
    pub u_v: ComplexMatrix,
}

impl TwoPhotonInput {
    pub fn new(mode_i: usize, mode_j: usize, chi: f64, u_h: ComplexMatrix, u_v: ComplexMatrix) -> Result<Self> {
        let input = Self::unchecked(mode_i, mode_j, chi, u_h, u_v)?;
        for u in [&input.u_h, &input.u_v] {
            if !is_unitary(u, 1e-8) {
                return Err(Error::validation("polarisation matrices must be unitary"));
            }
        }
        Ok(input)
    }

    /// Like [`TwoPhotonInput::new`] but accepts lossy (sub-unitary) maps.
    pub fn unchecked(mode_i: usize, mode_j: usize, chi: f64, u_h: ComplexMatrix, u_v: ComplexMatrix) -> Result<Self> {
        if u_h.dim() != u_v.dim() {
            return Err(Error::Dimension { expected: u_h.dim(), got: u_v.dim() });
        }
        let n = u_h.dim();
        for m in [mode_i, mode_j] {
            if m == 0 || m > n {
                return Err(Error::index(format!("mode {m} outside 1..={n}")));
            }
        }
        if mode_i == mode_j {
            return Err(Error::validation("the two photons must enter different modes"));
        }
        if !chi.is_finite() {
            return Err(Error::validation("chi must be finite"));
        }
        Ok(Self { mode_i, mode_j, chi, u_h, u_v })
    }

    /// Same unitary for both polarisations.
    pub fn symmetric(mode_i: usize, mode_j: usize, chi: f64, u: ComplexMatrix) -> Result<Self> {
        Self::new(mode_i, mode_j, chi, u.clone(), u)
    }

    pub fn n_modes(&self) -> usize {
        self.u_h.dim()
    }
}

/// `[[U^H_{i,r}, U^H_{j,r}], [U^V_{i,s}, U^V_{j,s}]]` with `U_{in,out}` indexing.
pub fn submatrix(u_h: &ComplexMatrix, u_v: &ComplexMatrix, i: usize, j: usize, r: usize, s: usize) -> Result<ComplexMatrix> {
    let n = u_h.dim();
    if u_v.dim() != n {
        return Err(Error::Dimension { expected: n, got: u_v.dim() });
    }
    for m in [i, j, r, s] {
        if m == 0 || m > n {
            return Err(Error::index(format!("mode {m} outside 1..={n}")));
        }
    }
    let (i, j, r, s) = (i - 1, j - 1, r - 1, s - 1);
    ComplexMatrix::from_rows(&[vec![u_h[(r, i)], u_h[(r, j)]], vec![u_v[(s, i)], u_v[(s, j)]]])
}

/// Symmetric/antisymmetric combination of the submatrix: permanent for
/// `chi = 0`, determinant for `chi = pi`, `m00 m11 + e^{i chi} m01 m10` otherwise.
fn bell_combination(sub: &ComplexMatrix, chi: f64) -> C64 {
    if chi == BOSONIC {
        permanent(sub).expect("2x2")
    } else if chi == FERMIONIC {
        determinant2(sub).expect("2x2")
    } else {
        sub[(0, 0)] * sub[(1, 1)] + C64::from_polar(1.0, chi) * sub[(0, 1)] * sub[(1, 0)]
    }
}

/// Output amplitudes `B[(r, s)]` for the H photon in mode r and the V photon
/// in mode s (0-based storage), normalised so that `sum |B|^2 = 1` for unitary maps.
#[derive(Debug, Clone, PartialEq)]
pub struct PairState {
    amps: ComplexMatrix,
}

impl PairState {
    pub fn from_matrix(amps: ComplexMatrix) -> Self {
        Self { amps }
    }

    pub fn from_input(input: &TwoPhotonInput) -> Self {
        let n = input.n_modes();
        let amps = ComplexMatrix::from_fn(n, |r, s| {
            let sub = submatrix(&input.u_h, &input.u_v, input.mode_i, input.mode_j, r + 1, s + 1).expect("indices in range");
            bell_combination(&sub, input.chi) * FRAC_1_SQRT_2
        });
        Self { amps }
    }

    /// Antisymmetric polarisation state with amplitude `a[(r,s)]` for the
    /// normally ordered pair `r < s`; `B_rs = a_rs / sqrt2 = -B_sr`.
    pub fn from_fermion_pairs(n: usize, pairs: &BTreeMap<(usize, usize), C64>) -> Result<Self> {
        let mut b = ComplexMatrix::zeros(n);
        for (&(r, s), &a) in pairs {
            if r == 0 || s > n || r >= s {
                return Err(Error::index(format!("pair ({r}, {s}) is not an ordered pair in 1..={n}")));
            }
            b.set(r - 1, s - 1, a * FRAC_1_SQRT_2);
            b.set(s - 1, r - 1, -a * FRAC_1_SQRT_2);
        }
        Ok(Self { amps: b })
    }

    pub fn n_modes(&self) -> usize {
        self.amps.dim()
    }

    pub fn amplitudes(&self) -> &ComplexMatrix {
        &self.amps
    }

    /// `B' = G_h B G_v^T`.
    pub fn transform(&self, g_h: &ComplexMatrix, g_v: &ComplexMatrix) -> Self {
        Self { amps: &(g_h * &self.amps) * &g_v.transpose() }
    }

    /// Probability of one photon in `r` and one in `s` (1-based), any polarisation.
    pub fn probability(&self, r: usize, s: usize) -> f64 {
        let (r, s) = (r - 1, s - 1);
        if r == s {
            self.amps[(r, r)].norm_sqr()
        } else {
            self.amps[(r, s)].norm_sqr() + self.amps[(s, r)].norm_sqr()
        }
    }

    /// `<a+_m a_m>` summed over polarisations.
    pub fn mean_number(&self, m: usize) -> f64 {
        let m = m - 1;
        let n = self.n_modes();
        (0..n).map(|s| self.amps[(m, s)].norm_sqr() + self.amps[(s, m)].norm_sqr()).sum()
    }

    pub fn total_probability(&self) -> f64 {
        (0..self.n_modes()).flat_map(|r| (0..self.n_modes()).map(move |s| (r, s))).map(|(r, s)| self.amps[(r, s)].norm_sqr()).sum()
    }

    pub fn probability_table(&self) -> ProbabilityTable {
        let n = self.n_modes();
        let mut entries = BTreeMap::new();
        for r in 1..=n {
            for s in r..=n {
                entries.insert((r, s), self.probability(r, s));
            }
        }
        ProbabilityTable { n_modes: n, entries }
    }
}

/// Probabilities keyed by unordered output pairs `(r, s)` with `r <= s`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTable {
    pub n_modes: usize,
    pub entries: BTreeMap<(usize, usize), f64>,
}

impl ProbabilityTable {
    pub fn get(&self, r: usize, s: usize) -> f64 {
        let key = if r <= s { (r, s) } else { (s, r) };
        self.entries.get(&key).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let keys: std::collections::BTreeSet<_> = self.entries.keys().chain(other.entries.keys()).collect();
        keys.into_iter().map(|&(r, s)| (self.get(r, s) - other.get(r, s)).abs()).fold(0.0, f64::max)
    }
}

/// Probability of detecting the photons in modes `r` and `s` (1-based).
pub fn output_probability(input: &TwoPhotonInput, r: usize, s: usize) -> Result<f64> {
    let n = input.n_modes();
    for m in [r, s] {
        if m == 0 || m > n {
            return Err(Error::index(format!("mode {m} outside 1..={n}")));
        }
    }
    let amp = |a: usize, b: usize| -> Result<C64> {
        Ok(bell_combination(&submatrix(&input.u_h, &input.u_v, input.mode_i, input.mode_j, a, b)?, input.chi))
    };
    Ok(if r == s {
        0.5 * amp(r, r)?.norm_sqr()
    } else {
        0.5 * (amp(r, s)?.norm_sqr() + amp(s, r)?.norm_sqr())
    })
}

/// Symmetrised correlations: `gamma_ii = P_ii`, `gamma_ij = P_ij / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    gamma: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn from_table(table: &ProbabilityTable) -> Self {
        let n = table.n_modes;
        let gamma = (1..=n)
            .map(|r| (1..=n).map(|s| if r == s { table.get(r, r) } else { table.get(r, s) / 2.0 }).collect())
            .collect();
        Self { gamma }
    }

    pub fn from_values(gamma: Vec<Vec<f64>>) -> Result<Self> {
        let n = gamma.len();
        for row in &gamma {
            if row.len() != n {
                return Err(Error::Dimension { expected: n, got: row.len() });
            }
            if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::validation("correlations must be finite and nonnegative"));
            }
        }
        Ok(Self { gamma })
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    /// 1-based access.
    pub fn get(&self, r: usize, s: usize) -> f64 {
        self.gamma[r - 1][s - 1]
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.gamma
    }

    pub fn total(&self) -> f64 {
        self.gamma.iter().flatten().sum()
    }

    pub fn diagonal_mass(&self) -> f64 {
        (0..self.dim()).map(|k| self.gamma[k][k]).sum()
    }

    /// `row,col,value` lines (1-based) after a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,col,value\n");
        for (r, row) in self.gamma.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                let _ = writeln!(out, "{},{},{}", r + 1, c + 1, v);
            }
        }
        out
    }
}

pub fn correlation_matrix(input: &TwoPhotonInput) -> CorrelationMatrix {
    CorrelationMatrix::from_table(&PairState::from_input(input).probability_table())
}

/// Distinguishable-photon coincidence rate `|U_ri U_sj|^2 + |U_rj U_si|^2` (0-based).
fn classical_rate(u: &ComplexMatrix, i: usize, j: usize, r: usize, s: usize) -> f64 {
    (u[(r, i)] * u[(s, j)]).norm_sqr() + (u[(r, j)] * u[(s, i)]).norm_sqr()
}

/// `(P_cl - P_q) / P_cl` for identical photons from `i, j` detected at `r != s`.
/// Positive for a dip.
pub fn hom_visibility(u: &ComplexMatrix, i: usize, j: usize, r: usize, s: usize) -> Result<f64> {
    let n = u.dim();
    for m in [i, j, r, s] {
        if m == 0 || m > n {
            return Err(Error::index(format!("mode {m} outside 1..={n}")));
        }
    }
    if i == j || r == s {
        return Err(Error::validation("visibility needs distinct inputs and distinct outputs"));
    }
    let (i, j, r, s) = (i - 1, j - 1, r - 1, s - 1);
    let p_cl = classical_rate(u, i, j, r, s);
    if p_cl == 0.0 {
        return Err(Error::UndefinedVisibility);
    }
    let p_q = (u[(r, i)] * u[(s, j)] + u[(r, j)] * u[(s, i)]).norm_sqr();
    Ok((p_cl - p_q) / p_cl)
}

/// `(sum sqrt(a b))^2 / (sum a * sum b)`.
pub fn similarity(a: &CorrelationMatrix, b: &CorrelationMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension { expected: a.dim(), got: b.dim() });
    }
    let (ta, tb) = (a.total(), b.total());
    if ta == 0.0 || tb == 0.0 {
        return Err(Error::UndefinedSimilarity("a correlation matrix is all zero".into()));
    }
    let cross: f64 = a.gamma.iter().flatten().zip(b.gamma.iter().flatten()).map(|(x, y)| (x * y).sqrt()).sum();
    Ok((cross * cross / (ta * tb)).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarization {
    H,
    V,
}

/// Two-photon input as a superposition of creation-operator pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct FockInput {
    pub terms: Vec<(C64, [(usize, Polarization); 2])>,
}

impl FockInput {
    pub fn bell(mode_i: usize, mode_j: usize, chi: f64) -> Self {
        let c = C64::new(FRAC_1_SQRT_2, 0.0);
        Self {
            terms: vec![
                (c, [(mode_i, Polarization::H), (mode_j, Polarization::V)]),
                (c * C64::from_polar(1.0, chi), [(mode_i, Polarization::V), (mode_j, Polarization::H)]),
            ],
        }
    }

    /// Identical photons (both H) in `i` and `j`.
    pub fn indistinguishable(mode_i: usize, mode_j: usize) -> Self {
        Self { terms: vec![(C64::new(1.0, 0.0), [(mode_i, Polarization::H), (mode_j, Polarization::H)])] }
    }

    /// Photons in orthogonal internal states, H in `i` and V in `j`.
    pub fn distinguishable(mode_i: usize, mode_j: usize) -> Self {
        Self { terms: vec![(C64::new(1.0, 0.0), [(mode_i, Polarization::H), (mode_j, Polarization::V)])] }
    }
}

/// Occupation-basis outcome probabilities keyed by the sorted pair of
/// `(mode, polarisation)` labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FockTable {
    pub n_modes: usize,
    pub outcomes: BTreeMap<[(usize, Polarization); 2], f64>,
}

impl FockTable {
    /// Marginal over polarisation, keyed by `(r, s)` with `r <= s`.
    pub fn mode_probabilities(&self) -> ProbabilityTable {
        let mut entries = BTreeMap::new();
        for r in 1..=self.n_modes {
            for s in r..=self.n_modes {
                entries.insert((r, s), 0.0);
            }
        }
        for (&[(r, _), (s, _)], &p) in &self.outcomes {
            *entries.entry((r.min(s), r.max(s))).or_insert(0.0) += p;
        }
        ProbabilityTable { n_modes: self.n_modes, entries }
    }
}

/// Expands each creation operator over the output modes and collects the
/// normally ordered two-photon terms. Accepts non-unitary maps.
pub fn fock_evolve(input: &FockInput, u_h: &ComplexMatrix, u_v: &ComplexMatrix) -> Result<FockTable> {
    let n = u_h.dim();
    if u_v.dim() != n {
        return Err(Error::Dimension { expected: n, got: u_v.dim() });
    }
    if n > MAX_FOCK_MODES {
        return Err(Error::Size { got: n, max: MAX_FOCK_MODES });
    }
    let map = |pol: Polarization| if pol == Polarization::H { u_h } else { u_v };
    let mut coeff: BTreeMap<[(usize, Polarization); 2], C64> = BTreeMap::new();
    for (c, [(m1, p1), (m2, p2)]) in &input.terms {
        for m in [*m1, *m2] {
            if m == 0 || m > n {
                return Err(Error::index(format!("mode {m} outside 1..={n}")));
            }
        }
        for o1 in 1..=n {
            for o2 in 1..=n {
                let a = map(*p1)[(o1 - 1, m1 - 1)] * map(*p2)[(o2 - 1, m2 - 1)];
                let mut key = [(o1, *p1), (o2, *p2)];
                key.sort();
                *coeff.entry(key).or_insert(C64::new(0.0, 0.0)) += c * a;
            }
        }
    }
    let outcomes = coeff
        .into_iter()
        .map(|(key, c)| {
            // (a+)^2 |0> = sqrt2 |2>
            let amp = if key[0] == key[1] { c * SQRT_2 } else { c };
            (key, amp.norm_sqr())
        })
        .collect();
    Ok(FockTable { n_modes: n, outcomes })
}

/// Brute-force evolution of a [`TwoPhotonInput`] in the occupation basis.
pub fn fock_oracle(input: &TwoPhotonInput) -> Result<FockTable> {
    fock_evolve(&FockInput::bell(input.mode_i, input.mode_j, input.chi), &input.u_h, &input.u_v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::random_unitary;
    use crate::mesh::chip_unitary;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn balanced() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2], vec![FRAC_1_SQRT_2, -FRAC_1_SQRT_2]]).unwrap()
    }

    #[test]
    fn submatrix_identity_cases() {
        let id = ComplexMatrix::identity(3);
        assert_eq!(submatrix(&id, &id, 1, 2, 1, 2).unwrap(), ComplexMatrix::identity(2));
        let anti = submatrix(&id, &id, 1, 2, 2, 1).unwrap();
        assert_eq!(anti[(0, 0)], C64::new(0.0, 0.0));
        assert_eq!(anti[(0, 1)], C64::new(1.0, 0.0));
        assert_eq!(anti[(1, 0)], C64::new(1.0, 0.0));
        assert!(matches!(submatrix(&id, &id, 1, 4, 1, 2), Err(Error::Index(_))));
    }

    #[test]
    fn submatrix_indexing_on_chip() {
        let u = chip_unitary();
        let v = u.transpose();
        let sub = submatrix(&u, &v, 2, 4, 1, 5).unwrap();
        assert_eq!(sub[(0, 0)], u[(0, 1)]);
        assert_eq!(sub[(0, 1)], u[(0, 3)]);
        assert_eq!(sub[(1, 0)], v[(4, 1)]);
        assert_eq!(sub[(1, 1)], v[(4, 3)]);
    }

    #[test]
    fn fermions_antibunch() {
        let u = chip_unitary();
        let input = TwoPhotonInput::symmetric(2, 4, FERMIONIC, u).unwrap();
        for r in 1..=5 {
            assert!(output_probability(&input, r, r).unwrap() < 1e-30);
        }
        let g = correlation_matrix(&input);
        assert!(g.diagonal_mass() < 1e-30);
        let off: f64 = [(1, 2), (1, 4), (2, 5), (4, 5)].iter().map(|&(r, s)| 2.0 * g.get(r, s)).sum();
        assert!(off > 0.9);
    }

    #[test]
    fn identity_no_interference() {
        let input = TwoPhotonInput::symmetric(1, 3, BOSONIC, ComplexMatrix::identity(4)).unwrap();
        assert!((output_probability(&input, 1, 3).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(output_probability(&input, 1, 1).unwrap(), 0.0);
    }

    #[test]
    fn hong_ou_mandel_coalescence() {
        let input = TwoPhotonInput::symmetric(1, 2, BOSONIC, balanced()).unwrap();
        assert!((output_probability(&input, 1, 1).unwrap() - 0.5).abs() < 1e-15);
        assert!((output_probability(&input, 2, 2).unwrap() - 0.5).abs() < 1e-15);
        assert!(output_probability(&input, 1, 2).unwrap() < 1e-30);
        assert!((hom_visibility(&balanced(), 1, 2, 1, 2).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn visibility_errors_and_trivial() {
        let id = ComplexMatrix::identity(3);
        assert_eq!(hom_visibility(&id, 1, 2, 1, 2).unwrap(), 0.0);
        assert!(matches!(hom_visibility(&id, 1, 2, 1, 3), Err(Error::UndefinedVisibility)));
    }

    #[test]
    fn visibility_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let u = random_unitary(5, &mut rng);
        let q = fock_evolve(&FockInput::indistinguishable(1, 3), &u, &u).unwrap().mode_probabilities();
        let c = fock_evolve(&FockInput::distinguishable(1, 3), &u, &u).unwrap().mode_probabilities();
        for (r, s) in [(1, 2), (2, 5), (3, 4)] {
            let v = (c.get(r, s) - q.get(r, s)) / c.get(r, s);
            assert!((hom_visibility(&u, 1, 3, r, s).unwrap() - v).abs() < 1e-10);
        }
    }

    #[test]
    fn similarity_cases() {
        let u = chip_unitary();
        let b = correlation_matrix(&TwoPhotonInput::symmetric(2, 4, BOSONIC, u.clone()).unwrap());
        let f = correlation_matrix(&TwoPhotonInput::symmetric(2, 4, FERMIONIC, u).unwrap());
        assert!((similarity(&b, &b).unwrap() - 1.0).abs() < 1e-12);
        assert!(similarity(&b, &f).unwrap() < 1.0 - 1e-3);
        let scaled = CorrelationMatrix::from_values(b.values().iter().map(|r| r.iter().map(|v| 3.0 * v).collect()).collect()).unwrap();
        assert!((similarity(&b, &scaled).unwrap() - 1.0).abs() < 1e-12);
        let x = CorrelationMatrix::from_values(vec![vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let y = CorrelationMatrix::from_values(vec![vec![0.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(similarity(&x, &y).unwrap(), 0.0);
        let z = CorrelationMatrix::from_values(vec![vec![0.0; 2]; 2]).unwrap();
        assert!(matches!(similarity(&x, &z), Err(Error::UndefinedSimilarity(_))));
    }

    #[test]
    fn csv_has_header() {
        let g = CorrelationMatrix::from_values(vec![vec![0.5, 0.25], vec![0.25, 0.0]]).unwrap();
        let csv = g.to_csv();
        assert!(csv.starts_with("row,col,value\n1,1,0.5\n"));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn boson_fermion_average_is_classical() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = random_unitary(5, &mut rng);
        let b = fock_oracle(&TwoPhotonInput::symmetric(1, 4, BOSONIC, u.clone()).unwrap()).unwrap().mode_probabilities();
        let f = fock_oracle(&TwoPhotonInput::symmetric(1, 4, FERMIONIC, u.clone()).unwrap()).unwrap().mode_probabilities();
        let d = fock_evolve(&FockInput::distinguishable(1, 4), &u, &u).unwrap().mode_probabilities();
        for r in 1..=5 {
            for s in r..=5 {
                assert!((0.5 * (b.get(r, s) + f.get(r, s)) - d.get(r, s)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fock_size_cap() {
        let u = ComplexMatrix::identity(9);
        assert!(matches!(fock_evolve(&FockInput::bell(1, 2, 0.0), &u, &u), Err(Error::Size { got: 9, max: 8 })));
    }

    proptest! {
        #[test]
        fn formulas_match_oracle(seed in any::<u64>(), chi in prop_oneof![Just(BOSONIC), Just(FERMIONIC), 0.0f64..6.0], i in 1usize..=5, dj in 1usize..5) {
            let j = (i - 1 + dj) % 5 + 1;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let uh = random_unitary(5, &mut rng);
            let uv = random_unitary(5, &mut rng);
            let input = TwoPhotonInput::new(i, j, chi, uh, uv).unwrap();
            let oracle = fock_oracle(&input).unwrap().mode_probabilities();
            let table = PairState::from_input(&input).probability_table();
            prop_assert!(table.max_abs_diff(&oracle) < 1e-10);
            for r in 1..=5 {
                for s in r..=5 {
                    prop_assert!((output_probability(&input, r, s).unwrap() - table.get(r, s)).abs() < 1e-12);
                }
            }
            prop_assert!((correlation_matrix(&input).total() - 1.0).abs() < 1e-10);
        }

        #[test]
        fn correlation_symmetric(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = correlation_matrix(&TwoPhotonInput::symmetric(2, 3, BOSONIC, random_unitary(4, &mut rng)).unwrap());
            for r in 1..=4 {
                for s in 1..=4 {
                    prop_assert_eq!(g.get(r, s), g.get(s, r));
                }
            }
            let total: f64 = (1..=4).map(|k| g.get(k, k)).sum::<f64>()
                + (1..=4).flat_map(|r| (r + 1..=4).map(move |s| (r, s))).map(|(r, s)| 2.0 * g.get(r, s)).sum::<f64>();
            prop_assert!((total - 1.0).abs() < 1e-10);
        }
    }
}
