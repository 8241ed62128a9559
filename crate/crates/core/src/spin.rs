//! Exact simulation of open XY/XXZ spin chains of up to 12 spins.
//!
//! Basis index bit `x-1` set means spin up at site `x` (sites are 1-based).

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, C64};

pub const MAX_SPINS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct SpinState {
    n_spins: usize,
    amps: Vec<C64>,
}

fn check_size(n: usize) -> Result<()> {
    if n > MAX_SPINS {
        return Err(Error::Size { got: n, max: MAX_SPINS });
    }
    if n < 2 {
        return Err(Error::validation(format!("a chain needs at least 2 spins, got {n}")));
    }
    Ok(())
}

fn up(bits: usize, site: usize) -> bool {
    bits >> (site - 1) & 1 == 1
}

impl SpinState {
    pub fn from_amplitudes(n_spins: usize, amps: Vec<C64>) -> Result<Self> {
        check_size(n_spins)?;
        if amps.len() != 1 << n_spins {
            return Err(Error::Dimension { expected: 1 << n_spins, got: amps.len() });
        }
        let state = Self { n_spins, amps };
        if (state.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::validation(format!("state norm {} differs from 1", state.norm())));
        }
        Ok(state)
    }

    /// Computational basis state with spins up on `up_sites`.
    pub fn product(n_spins: usize, up_sites: &[usize]) -> Result<Self> {
        check_size(n_spins)?;
        let mut bits = 0usize;
        for &s in up_sites {
            if s == 0 || s > n_spins {
                return Err(Error::index(format!("site {s} outside 1..={n_spins}")));
            }
            bits |= 1 << (s - 1);
        }
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n_spins];
        amps[bits] = C64::new(1.0, 0.0);
        Ok(Self { n_spins, amps })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitude(&self, bits: usize) -> C64 {
        self.amps[bits]
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn overlap(&self, other: &Self) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// Expected number of up spins.
    pub fn magnetization(&self) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .map(|(b, a)| a.norm_sqr() * b.count_ones() as f64)
            .sum()
    }
}

/// `|down up down up ...>`: up on the even sites.
pub fn neel_state(n: usize) -> Result<SpinState> {
    let ups: Vec<usize> = (2..=n).step_by(2).collect();
    SpinState::product(n, &ups)
}

/// Nested `psi+` pairs `(k, N+1-k)`; the middle spin of an odd chain is down.
pub fn rainbow_state(n: usize) -> Result<SpinState> {
    check_size(n)?;
    let pairs = n / 2;
    let amp = FRAC_1_SQRT_2.powi(pairs as i32);
    let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
    for choice in 0..(1usize << pairs) {
        let mut bits = 0usize;
        for k in 1..=pairs {
            // choice bit set: up on the left partner, else on the right one
            let site = if choice >> (k - 1) & 1 == 1 { k } else { n + 1 - k };
            bits |= 1 << (site - 1);
        }
        amps[bits] = C64::new(amp, 0.0);
    }
    Ok(SpinState { n_spins: n, amps })
}

/// `sum_n j_n (X_n X_{n+1} + Y_n Y_{n+1} + delta Z_n Z_{n+1})` on `couplings.len() + 1` spins.
pub fn xy_hamiltonian(couplings: &[f64], delta: f64) -> Result<ComplexMatrix> {
    let n = couplings.len() + 1;
    check_size(n)?;
    let dim = 1usize << n;
    let mut h = DMatrix::<C64>::zeros(dim, dim);
    for b in 0..dim {
        for (k, &j) in couplings.iter().enumerate() {
            let (a, c) = (up(b, k + 1), up(b, k + 2));
            let zz = if a == c { 1.0 } else { -1.0 };
            h[(b, b)] += C64::new(j * delta * zz, 0.0);
            if a != c {
                let flipped = b ^ (0b11 << k);
                h[(flipped, b)] += C64::new(2.0 * j, 0.0);
            }
        }
    }
    ComplexMatrix::new(h)
}

/// Real block of the Delta=0 Hamiltonian scaled by `scale`, on the states with
/// `k` up spins. Returns the block and its basis.
fn sector_block(couplings: &[f64], k: u32, scale: f64) -> (DMatrix<f64>, Vec<usize>) {
    let n = couplings.len() + 1;
    let basis: Vec<usize> = (0..1usize << n).filter(|b| b.count_ones() == k).collect();
    let pos = |b: usize| basis.binary_search(&b).expect("hop stays in sector");
    let mut h = DMatrix::<f64>::zeros(basis.len(), basis.len());
    for (col, &b) in basis.iter().enumerate() {
        for (bond, &j) in couplings.iter().enumerate() {
            if up(b, bond + 1) != up(b, bond + 2) {
                let row = pos(b ^ (0b11 << bond));
                h[(row, col)] += 2.0 * j * scale;
            }
        }
    }
    (h, basis)
}

/// Single-excitation block of `xy_hamiltonian(couplings, 0)`: hopping `2 j_x`.
pub fn single_excitation_block(couplings: &[f64]) -> Result<DMatrix<f64>> {
    check_size(couplings.len() + 1)?;
    Ok(sector_block(couplings, 1, 1.0).0)
}

/// Factor applied to [`xy_hamiltonian`] during a quench, giving single-particle
/// hopping `j_x / 2` so that PST couplings mirror at time `N+1`.
pub const QUENCH_SCALE: f64 = 0.25;

/// `exp(-i t H) |state>` with `H = QUENCH_SCALE * xy_hamiltonian(couplings, 0)`,
/// computed sector by sector.
pub fn evolve(state: &SpinState, couplings: &[f64], time: f64) -> Result<SpinState> {
    let n = state.n_spins;
    if couplings.len() + 1 != n {
        return Err(Error::Dimension { expected: n - 1, got: couplings.len() });
    }
    let mut out = vec![C64::new(0.0, 0.0); state.amps.len()];
    for k in 0..=n as u32 {
        let (h, basis) = sector_block(couplings, k, QUENCH_SCALE);
        let psi: Vec<C64> = basis.iter().map(|&b| state.amps[b]).collect();
        if psi.iter().all(|a| a.norm_sqr() == 0.0) {
            continue;
        }
        let eig = h.symmetric_eigen();
        let v = &eig.eigenvectors;
        let d = basis.len();
        // coefficients in the eigenbasis, phased
        let coeffs: Vec<C64> = (0..d)
            .map(|e| {
                let c: C64 = (0..d).map(|i| psi[i] * v[(i, e)]).sum();
                c * C64::from_polar(1.0, -time * eig.eigenvalues[e])
            })
            .collect();
        for (i, &b) in basis.iter().enumerate() {
            out[b] = (0..d).map(|e| coeffs[e] * v[(i, e)]).sum();
        }
    }
    Ok(SpinState { n_spins: n, amps: out })
}

/// Neel state evolved for `time` under the Delta=0 chain.
pub fn quench_evolve(n: usize, couplings: &[f64], time: f64) -> Result<SpinState> {
    if couplings.len() + 1 != n {
        return Err(Error::Dimension { expected: n.saturating_sub(1), got: couplings.len() });
    }
    evolve(&neel_state(n)?, couplings, time)
}

/// Two-site reduced density matrix in the basis `2 b_i + b_j` (b = 1 for up).
pub fn reduced_density(state: &SpinState, i: usize, j: usize) -> Result<[[C64; 4]; 4]> {
    let n = state.n_spins;
    if i == j {
        return Err(Error::index(format!("sites must differ, got {i} twice")));
    }
    for s in [i, j] {
        if s == 0 || s > n {
            return Err(Error::index(format!("site {s} outside 1..={n}")));
        }
    }
    let mask = (1usize << (i - 1)) | (1usize << (j - 1));
    let mut rho = [[C64::new(0.0, 0.0); 4]; 4];
    let local = |b: usize| 2 * (b >> (i - 1) & 1) + (b >> (j - 1) & 1);
    for rest in (0..state.amps.len()).filter(|b| b & mask == 0) {
        for a in 0..4usize {
            let ba = rest | ((a >> 1) << (i - 1)) | ((a & 1) << (j - 1));
            for c in 0..4usize {
                let bc = rest | ((c >> 1) << (i - 1)) | ((c & 1) << (j - 1));
                rho[local(ba)][local(bc)] += state.amps[ba] * state.amps[bc].conj();
            }
        }
    }
    Ok(rho)
}

/// `<psi+| rho_ij |psi+>` with `psi+ = (|up down> + |down up>)/sqrt2`.
pub fn entanglement_fraction_direct(state: &SpinState, i: usize, j: usize) -> Result<f64> {
    let rho = reduced_density(state, i, j)?;
    Ok(0.5 * (rho[1][1] + rho[2][2] + rho[1][2] + rho[2][1]).re)
}

/// `|<rainbow|state>|^2`.
pub fn rainbow_fidelity(state: &SpinState) -> f64 {
    let r = rainbow_state(state.n_spins).expect("size already checked");
    r.overlap(state).norm_sqr()
}

/// Von Neumann entropy (bits) of sites `1..=n_left` against the rest.
pub fn entanglement_entropy(state: &SpinState, n_left: usize) -> Result<f64> {
    let n = state.n_spins;
    if n_left == 0 || n_left >= n {
        return Err(Error::index(format!("cut after site {n_left} does not split 1..={n}")));
    }
    let dl = 1usize << n_left;
    let dr = 1usize << (n - n_left);
    // low bits are the left block
    let m = DMatrix::from_fn(dl, dr, |l, r| state.amps[l | (r << n_left)]);
    let sv = m.svd(false, false).singular_values;
    Ok(sv
        .iter()
        .map(|s| s * s)
        .filter(|&p| p > 1e-300)
        .map(|p| -p * p.log2())
        .sum())
}
