//! Coined discrete-time walk on sites `0..=N` with a two-level coin.
//!
//! Channel `(x, c)` is stored at index `2x + c` with `c = 0` for a left mover
//! and `c = 1` for a right mover. One step is `U = S C`:
//!
//! ```text
//! C|x,R> = cos(theta)|x,L> + sin(theta)|x,R>
//! C|x,L> = sin(theta)|x,L> - cos(theta)|x,R>
//! S|x,L> = |x-1,L>,  S|x,R> = |x+1,R>,  S|0,L> = |0,R>,  S|N,R> = |N,L>
//! ```

use std::f64::consts::FRAC_1_SQRT_2;

use crate::coupling::CouplingProfile;
use crate::error::{Error, Result};
use crate::matrix::{herm_exp, ComplexMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Coin {
    Left,
    Right,
}

impl Coin {
    pub fn index(self) -> usize {
        match self {
            Coin::Left => 0,
            Coin::Right => 1,
        }
    }
}

/// `2x + c`.
pub fn channel_index(site: usize, coin: Coin) -> usize {
    2 * site + coin.index()
}

/// Coin matrix in the ordered basis (L, R): `[[sin, cos], [-cos, sin]]`.
pub fn coin_matrix(theta: f64) -> [[f64; 2]; 2] {
    let (s, c) = theta.sin_cos();
    [[s, c], [-c, s]]
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkerState {
    n_sites: usize,
    amps: Vec<C64>,
}

impl WalkerState {
    /// Walker localised on channel `(site, coin)`.
    pub fn basis(n_sites: usize, site: usize, coin: Coin) -> Result<Self> {
        if site > n_sites {
            return Err(Error::index(format!("site {site} outside 0..={n_sites}")));
        }
        let mut amps = vec![C64::new(0.0, 0.0); 2 * (n_sites + 1)];
        amps[channel_index(site, coin)] = C64::new(1.0, 0.0);
        Ok(Self { n_sites, amps })
    }

    pub fn from_amplitudes(n_sites: usize, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != 2 * (n_sites + 1) {
            return Err(Error::Dimension { expected: 2 * (n_sites + 1), got: amps.len() });
        }
        let state = Self { n_sites, amps };
        if (state.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::validation(format!("state norm is {}, expected 1", state.norm())));
        }
        Ok(state)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitude(&self, site: usize, coin: Coin) -> C64 {
        self.amps[channel_index(site, coin)]
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Probability on each site, summed over the coin.
    pub fn site_probabilities(&self) -> Vec<f64> {
        self.amps.chunks(2).map(|p| p[0].norm_sqr() + p[1].norm_sqr()).collect()
    }
}

/// One application of `S C`.
pub fn step(state: &WalkerState, profile: &CouplingProfile) -> Result<WalkerState> {
    if state.n_sites != profile.n_sites() {
        return Err(Error::Dimension { expected: profile.n_sites(), got: state.n_sites });
    }
    let n = state.n_sites;
    let mut out = vec![C64::new(0.0, 0.0); state.amps.len()];
    for x in 0..=n {
        let [[s, c], [mc, _]] = coin_matrix(profile.angle_at(x));
        let l = state.amps[2 * x];
        let r = state.amps[2 * x + 1];
        let new_l = l * s + r * c;
        let new_r = l * mc + r * s;
        let dst_l = if x == 0 { 1 } else { 2 * (x - 1) };
        let dst_r = if x == n { 2 * n } else { 2 * (x + 1) + 1 };
        out[dst_l] += new_l;
        out[dst_r] += new_r;
    }
    Ok(WalkerState { n_sites: n, amps: out })
}

pub fn evolve(state: &WalkerState, profile: &CouplingProfile, steps: usize) -> Result<WalkerState> {
    let mut s = state.clone();
    for _ in 0..steps {
        s = step(&s, profile)?;
    }
    Ok(s)
}

/// The one-step operator as a `2(N+1)` square matrix.
pub fn step_operator(profile: &CouplingProfile) -> ComplexMatrix {
    let n = profile.n_sites();
    let dim = 2 * (n + 1);
    let mut u = ComplexMatrix::zeros(dim);
    for col in 0..dim {
        let site = col / 2;
        let coin = if col % 2 == 0 { Coin::Left } else { Coin::Right };
        let s = step(&WalkerState::basis(n, site, coin).unwrap(), profile).unwrap();
        for (row, a) in s.amps.iter().enumerate() {
            u.set(row, col, *a);
        }
    }
    u
}

/// `|<N,R| U^M |1,R>|^2`.
pub fn transfer_quality(profile: &CouplingProfile) -> f64 {
    let n = profile.n_sites();
    let start = WalkerState::basis(n, 1, Coin::Right).expect("site 1 exists");
    let end = evolve(&start, profile, profile.n_steps()).expect("sizes agree");
    end.amplitude(n, Coin::Right).norm_sqr()
}

/// Evolves `alpha|1,R> + beta|1,L>` for M steps and returns the amplitudes on
/// `|N,R>` and `|N-2,L>`.
pub fn coin_transfer(profile: &CouplingProfile, alpha: C64, beta: C64) -> Result<(C64, C64)> {
    let norm = alpha.norm_sqr() + beta.norm_sqr();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::validation(format!("|alpha|^2 + |beta|^2 = {norm}, expected 1")));
    }
    let n = profile.n_sites();
    let mut amps = vec![C64::new(0.0, 0.0); 2 * (n + 1)];
    amps[channel_index(1, Coin::Right)] = alpha;
    amps[channel_index(1, Coin::Left)] = beta;
    let start = WalkerState { n_sites: n, amps };
    let end = evolve(&start, profile, profile.n_steps())?;
    Ok((end.amplitude(n, Coin::Right), end.amplitude(n - 2, Coin::Left)))
}

/// Tridiagonal `N x N` generator on sites `1..N` with `theta_x / 2` on bond `(x, x+1)`.
pub fn effective_hamiltonian(profile: &CouplingProfile) -> ComplexMatrix {
    let n = profile.n_sites();
    let half: Vec<f64> = profile.angles().iter().map(|t| t / 2.0).collect();
    ComplexMatrix::from_fn(n, |r, c| {
        if c == r + 1 {
            C64::new(half[r], 0.0)
        } else if r == c + 1 {
            C64::new(half[c], 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// One step on a ring of `L = angles.len()` sites (no mirrors).
pub fn periodic_step_operator(angles: &[f64]) -> ComplexMatrix {
    let l = angles.len();
    let mut u = ComplexMatrix::zeros(2 * l);
    for (x, &a) in angles.iter().enumerate() {
        let [[s, c], [mc, _]] = coin_matrix(a);
        let left = 2 * ((x + l - 1) % l);
        let right = 2 * ((x + 1) % l) + 1;
        // column (x, L)
        u.set(left, 2 * x, C64::new(s, 0.0));
        u.set(right, 2 * x, C64::new(mc, 0.0));
        // column (x, R)
        u.set(left, 2 * x + 1, C64::new(c, 0.0));
        u.set(right, 2 * x + 1, C64::new(s, 0.0));
    }
    u
}

fn matrix_power(u: &ComplexMatrix, mut k: usize) -> ComplexMatrix {
    let mut result = ComplexMatrix::identity(u.dim());
    let mut base = u.clone();
    while k > 0 {
        if k & 1 == 1 {
            result = &result * &base;
        }
        base = &base * &base;
        k >>= 1;
    }
    result
}

/// Spectral-norm distance between `U^t` on a ring and
/// `i^t W exp(i t H sigma_z) W^dagger`, where `H` carries `theta_x / 2` on bond `(x, x+1)`.
pub fn ring_approx_error(angles: &[f64], steps: usize) -> Result<f64> {
    if steps % 2 == 1 {
        return Err(Error::Parity(format!("step count must be even, got {steps}")));
    }
    let l = angles.len();
    if l < 2 {
        return Err(Error::validation("a ring needs at least two sites"));
    }
    let zero = C64::new(0.0, 0.0);
    let exact = matrix_power(&periodic_step_operator(angles), steps);

    // H sigma_z is block diagonal (H, -H) in coin-major order (c*L + x).
    let h = ComplexMatrix::from_fn(l, |r, c| {
        let mut v = 0.0;
        if r == (c + 1) % l {
            v += angles[c] / 2.0;
        }
        if c == (r + 1) % l {
            v += angles[r] / 2.0;
        }
        C64::new(v, 0.0)
    });
    let t = steps as f64;
    // exp(i t H) for the L block, exp(-i t H) for the R block
    let el = herm_exp(&h, -t)?;
    let er = herm_exp(&h, t)?;
    let mid = ComplexMatrix::from_fn(2 * l, |r, c| match (r < l, c < l) {
        (true, true) => el[(r, c)],
        (false, false) => er[(r - l, c - l)],
        _ => zero,
    });
    // W = [[i e^{-iP}, -i e^{-iP}], [1, 1]] / sqrt2, e^{-iP} the cyclic shift x -> x-1
    let w = ComplexMatrix::from_fn(2 * l, |r, c| {
        let (rb, rx) = (r / l, r % l);
        let (cb, cx) = (c / l, c % l);
        let v = match rb {
            0 if rx == (cx + l - 1) % l => {
                if cb == 0 {
                    C64::new(0.0, 1.0)
                } else {
                    C64::new(0.0, -1.0)
                }
            }
            1 if rx == cx => C64::new(1.0, 0.0),
            _ => zero,
        };
        v * FRAC_1_SQRT_2
    });
    let phase = C64::new(0.0, 1.0).powu((steps % 4) as u32);
    let approx_cm = (&(&w * &mid) * &w.dagger()).scale(phase);
    // coin-major (c*L + x) to site-major (2x + c)
    let approx = ComplexMatrix::from_fn(2 * l, |r, c| approx_cm[((r % 2) * l + r / 2, (c % 2) * l + c / 2)]);
    let diff = ComplexMatrix::from_fn(2 * l, |r, c| exact[(r, c)] - approx[(r, c)]);
    Ok(diff.spectral_norm())
}

/// [`ring_approx_error`] on the ring `0..=N` built from the profile, the
/// auxiliary sites keeping `theta = 0` so the wrap bond is cut.
pub fn ctqw_approx_error(profile: &CouplingProfile, steps: usize) -> Result<f64> {
    let angles: Vec<f64> = (0..=profile.n_sites()).map(|x| profile.angle_at(x)).collect();
    ring_approx_error(&angles, steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{pst_profile, table_profile};
    use crate::matrix::is_unitary;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn profile_with(n: usize, m: usize, ts: &[f64]) -> CouplingProfile {
        CouplingProfile::from_transmittances(n, m, ts).unwrap()
    }

    #[test]
    fn coin_matches_sigma_y_exponential() {
        // exp(i a sigma_y) = [[cos a, sin a], [-sin a, cos a]] with a = pi/2 - theta
        for &theta in &[0.0, 0.3, 1.0, FRAC_PI_2] {
            let a = FRAC_PI_2 - theta;
            let m = coin_matrix(theta);
            let e = [[a.cos(), a.sin()], [-a.sin(), a.cos()]];
            for r in 0..2 {
                for c in 0..2 {
                    assert!((m[r][c] - e[r][c]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn full_transmission_moves_right() {
        let p = profile_with(4, 5, &[1.0, 1.0, 1.0]);
        let s = step(&WalkerState::basis(4, 2, Coin::Right).unwrap(), &p).unwrap();
        assert!((s.amplitude(3, Coin::Right) - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn full_reflection_moves_left() {
        // the coin formula sends |x,R> to +|x,L> before the shift
        let p = profile_with(4, 5, &[1.0, 0.0, 1.0]);
        let s = step(&WalkerState::basis(4, 2, Coin::Right).unwrap(), &p).unwrap();
        assert!((s.amplitude(1, Coin::Left) - C64::new(1.0, 0.0)).norm() < 1e-15);
        let s = step(&WalkerState::basis(4, 2, Coin::Left).unwrap(), &p).unwrap();
        assert!((s.amplitude(3, Coin::Right) - C64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn balanced_splitter() {
        let p = profile_with(4, 5, &[0.5, 0.5, 0.5]);
        let s = step(&WalkerState::basis(4, 2, Coin::Right).unwrap(), &p).unwrap();
        assert!((s.amplitude(1, Coin::Left).norm() - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((s.amplitude(3, Coin::Right).norm() - FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn size_mismatch() {
        let p = pst_profile(5, 8).unwrap();
        let s = WalkerState::basis(4, 1, Coin::Right).unwrap();
        assert!(matches!(step(&s, &p), Err(Error::Dimension { .. })));
    }

    #[test]
    fn step_operator_is_unitary() {
        let p = table_profile(6, 9, 0.7, 0.5).unwrap();
        assert!(is_unitary(&step_operator(&p), 1e-13));
    }

    #[test]
    fn table_q_values() {
        let q = transfer_quality(&table_profile(5, 6, 0.919, 0.750).unwrap());
        assert!((q - 0.886).abs() < 1e-3, "{q}");
        let q = transfer_quality(&table_profile(6, 23, 0.144, 0.092).unwrap());
        assert!((q - 0.980).abs() < 1e-3, "{q}");
    }

    #[test]
    fn pst_transfer_improves_with_steps() {
        let mut last = 0.0;
        for m in (8..=22).step_by(2) {
            let q = transfer_quality(&pst_profile(5, m).unwrap());
            assert!(q >= last - 1e-3, "m={m} q={q} last={last}");
            last = q;
        }
        assert!(last > 0.98);
    }

    #[test]
    fn coin_transfer_large_m() {
        let p = pst_profile(5, 80).unwrap();
        let (r, _) = coin_transfer(&p, C64::new(1.0, 0.0), C64::new(0.0, 0.0)).unwrap();
        assert!(r.norm_sqr() >= 0.95, "{}", r.norm_sqr());
        let (_, l) = coin_transfer(&p, C64::new(0.0, 0.0), C64::new(1.0, 0.0)).unwrap();
        assert!(l.norm_sqr() >= 0.95, "{}", l.norm_sqr());
    }

    #[test]
    fn coin_transfer_light_cone() {
        let p = pst_profile(5, 4 + 5).unwrap().with_steps(4).unwrap();
        let (r, _) = coin_transfer(&p, C64::new(1.0, 0.0), C64::new(0.0, 0.0)).unwrap();
        assert!(r.norm_sqr() < 0.5);
    }

    #[test]
    fn effective_hamiltonian_uniform() {
        let p = CouplingProfile::from_couplings(3, 4, 1.0, vec![1.0, 1.0]).unwrap();
        let h = effective_hamiltonian(&p);
        assert_eq!(h[(0, 1)], C64::new(0.5, 0.0));
        assert_eq!(h[(1, 2)], C64::new(0.5, 0.0));
        assert_eq!(h[(0, 2)], C64::new(0.0, 0.0));
        assert!(h.is_hermitian(1e-15));
    }

    #[test]
    fn pst_spectrum_is_linear() {
        let p = pst_profile(7, 30).unwrap();
        let mut ev: Vec<f64> = effective_hamiltonian(&p).inner().clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let gap = ev[1] - ev[0];
        for w in ev.windows(2) {
            assert!((w[1] - w[0] - gap).abs() < 1e-12);
        }
        // eps * pi/(N+1) / 2 per level
        assert!((gap - p.epsilon() * PI / 8.0 / 2.0 * 2.0).abs() < 1e-12);
    }

    #[test]
    fn approx_error_vanishes_without_coupling() {
        assert!(ring_approx_error(&[0.0; 8], 16).unwrap() < 1e-12);
        assert!(matches!(ring_approx_error(&[0.0; 8], 5), Err(Error::Parity(_))));
    }

    #[test]
    fn approx_error_uniform_ring() {
        assert!(ring_approx_error(&[0.05; 8], 16).unwrap() < 0.05);
    }

    #[test]
    fn approx_error_refines() {
        let base = [0.2, 0.15, 0.25, 0.1, 0.3, 0.2, 0.12, 0.18];
        let mut last = f64::INFINITY;
        for k in 0..4 {
            let s = 0.5f64.powi(k);
            let angles: Vec<f64> = base.iter().map(|a| a * s).collect();
            let e = ring_approx_error(&angles, 8 << k).unwrap();
            assert!(e < last, "level {k}: {e} vs {last}");
            last = e;
        }
    }

    proptest! {
        #[test]
        fn step_preserves_norm(ts in proptest::collection::vec(0.0f64..=1.0, 5), site in 0usize..=6, right in any::<bool>(), steps in 1usize..20) {
            let p = profile_with(6, 7, &ts);
            let coin = if right { Coin::Right } else { Coin::Left };
            let s = evolve(&WalkerState::basis(6, site, coin).unwrap(), &p, steps).unwrap();
            prop_assert!((s.norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn parity_alternates(ts in proptest::collection::vec(0.05f64..0.95, 6), steps in 1usize..12) {
            // start on a right mover at site 3; after k steps only sites of parity 3+k are occupied
            let p = profile_with(7, 8, &ts);
            let s = evolve(&WalkerState::basis(7, 3, Coin::Right).unwrap(), &p, steps).unwrap();
            for (x, prob) in s.site_probabilities().iter().enumerate() {
                if (x + 3 + steps) % 2 == 1 {
                    prop_assert!(*prob < 1e-24, "site {} has {}", x, prob);
                }
            }
        }
    }
}
