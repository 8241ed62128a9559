//! Coupling profiles for an N-site chain simulated in M discrete steps.
//!
//! A profile stores the hopping rates `j_x` on the bonds `x = 1..N-1` together
//! with the scaling `eps`, so that the walk coin at site `x` rotates by
//! `theta_x = eps * j_x` and the corresponding coupler transmits `T_x = sin^2(theta_x)`.
//! Sites 0 and N are auxiliary mirrors with `theta = 0`.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{herm_exp, ComplexMatrix, C64};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::walk;

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingProfile {
    n_sites: usize,
    n_steps: usize,
    epsilon: f64,
    couplings: Vec<f64>,
}

impl CouplingProfile {
    /// Profile from explicit couplings `j_1..j_{N-1}` and scaling `epsilon`.
    pub fn from_couplings(n: usize, m: usize, epsilon: f64, couplings: Vec<f64>) -> Result<Self> {
        if n < 3 {
            return Err(Error::validation(format!("a chain needs at least 3 sites, got {n}")));
        }
        if m < 1 {
            return Err(Error::validation("at least one step is required"));
        }
        if couplings.len() != n - 1 {
            return Err(Error::Dimension { expected: n - 1, got: couplings.len() });
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::range(format!("epsilon must be positive, got {epsilon}")));
        }
        for (k, &j) in couplings.iter().enumerate() {
            let theta = epsilon * j;
            if !(theta.is_finite() && (0.0..=FRAC_PI_2 + 1e-12).contains(&theta)) {
                return Err(Error::range(format!(
                    "angle at site {} is {theta:.6} rad, outside [0, pi/2]",
                    k + 1
                )));
            }
        }
        Ok(Self { n_sites: n, n_steps: m, epsilon, couplings })
    }

    /// Profile from transmittances `T_1..T_{N-1}`, with `epsilon = (N+1)/M`.
    pub fn from_transmittances(n: usize, m: usize, transmittances: &[f64]) -> Result<Self> {
        if n < 3 || m < 1 {
            return Err(Error::validation(format!("invalid chain size n={n}, m={m}")));
        }
        if transmittances.len() != n - 1 {
            return Err(Error::Dimension { expected: n - 1, got: transmittances.len() });
        }
        let eps = standard_epsilon(n, m);
        let mut couplings = Vec::with_capacity(n - 1);
        for (k, &t) in transmittances.iter().enumerate() {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::range(format!("transmittance at site {} is {t}, outside [0, 1]", k + 1)));
            }
            couplings.push(t.sqrt().asin() / eps);
        }
        Self::from_couplings(n, m, eps, couplings)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `j_x` for `x = 1..N-1`.
    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    /// `theta_x = eps * j_x` for `x = 1..N-1`.
    pub fn angles(&self) -> Vec<f64> {
        self.couplings.iter().map(|j| self.epsilon * j).collect()
    }

    pub fn transmittances(&self) -> Vec<f64> {
        self.angles().iter().map(|t| t.sin().powi(2)).collect()
    }

    /// Coin angle at site `x` in `0..=N`; zero on the auxiliary sites.
    pub fn angle_at(&self, x: usize) -> f64 {
        if x == 0 || x >= self.n_sites {
            0.0
        } else {
            self.epsilon * self.couplings[x - 1]
        }
    }

    /// Same chain with a different number of steps, keeping the transmittances.
    pub fn with_steps(&self, m: usize) -> Result<Self> {
        Self::from_couplings(self.n_sites, m, self.epsilon, self.couplings.clone())
    }

    /// True when `N + M` is odd, the parity for which site 1 can reach site N.
    pub fn parity_allows_transfer(&self) -> bool {
        (self.n_sites + self.n_steps) % 2 == 1
    }

    pub fn to_document(&self) -> ProfileDocument {
        ProfileDocument {
            n_sites: self.n_sites,
            n_steps: self.n_steps,
            transmittances: self.transmittances(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_document()).expect("profile document always serialises")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let doc: ProfileDocument =
            toml::from_str(text).map_err(|e| Error::parse(0, e.to_string()))?;
        doc.into_profile()
    }
}

/// Serialised form of a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileDocument {
    pub n_sites: usize,
    pub n_steps: usize,
    pub transmittances: Vec<f64>,
}

impl ProfileDocument {
    pub fn into_profile(self) -> Result<CouplingProfile> {
        CouplingProfile::from_transmittances(self.n_sites, self.n_steps, &self.transmittances)
    }
}

/// `eps = (N+1)/M`, mapping the continuous transfer time `N+1` onto M steps.
pub fn standard_epsilon(n: usize, m: usize) -> f64 {
    (n as f64 + 1.0) / m as f64
}

/// `j_x = pi/(N+1) * sqrt(x(N-x))`.
pub fn pst_couplings(n: usize) -> Vec<f64> {
    let scale = PI / (n as f64 + 1.0);
    (1..n).map(|x| scale * ((x * (n - x)) as f64).sqrt()).collect()
}

/// Fully engineered chain with perfect state transfer at time `N+1`.
pub fn pst_profile(n: usize, m: usize) -> Result<CouplingProfile> {
    if n < 3 {
        return Err(Error::validation(format!("pst_profile needs n >= 3, got {n}")));
    }
    if m + 1 < n {
        return Err(Error::validation(format!("pst_profile needs m >= n-1, got n={n}, m={m}")));
    }
    CouplingProfile::from_couplings(n, m, standard_epsilon(n, m), pst_couplings(n))
}

/// Minimally engineered chain together with its asymptotic transfer time.
#[derive(Debug, Clone, PartialEq)]
pub struct MinimalProfile {
    pub profile: CouplingProfile,
    pub j_opt: f64,
    /// `2t* = N + 1 + 2.29 N^(1/3)`.
    pub transfer_time: f64,
}

pub fn minimal_j_opt(n: usize) -> f64 {
    1.030 * (n as f64).powf(-1.0 / 6.0)
}

pub fn minimal_transfer_time(n: usize) -> f64 {
    let nf = n as f64;
    nf + 1.0 + 2.29 * nf.cbrt()
}

/// Uniform bulk `j = 1` with end couplings `j_opt`; `eps = 2t*/M`.
pub fn minimal_profile(n: usize, m: usize) -> Result<MinimalProfile> {
    if n < 5 {
        return Err(Error::validation(format!("minimal_profile needs n >= 5, got {n}")));
    }
    if m < 1 {
        return Err(Error::validation("at least one step is required"));
    }
    let j_opt = minimal_j_opt(n);
    let transfer_time = minimal_transfer_time(n);
    let mut couplings = vec![1.0; n - 1];
    couplings[0] = j_opt;
    couplings[n - 2] = j_opt;
    let profile = CouplingProfile::from_couplings(n, m, transfer_time / m as f64, couplings)?;
    Ok(MinimalProfile { profile, j_opt, transfer_time })
}

/// Two-valued profile: `t_ends` on sites 1 and N-1, `t_bulk` on 2..N-2.
pub fn table_profile(n: usize, m: usize, t_bulk: f64, t_ends: f64) -> Result<CouplingProfile> {
    for (name, t) in [("t_bulk", t_bulk), ("t_ends", t_ends)] {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::range(format!("{name} = {t} is outside (0, 1]")));
        }
    }
    if n < 3 {
        return Err(Error::validation(format!("table_profile needs n >= 3, got {n}")));
    }
    let ts: Vec<f64> = (1..n).map(|x| if x == 1 || x == n - 1 { t_ends } else { t_bulk }).collect();
    CouplingProfile::from_transmittances(n, m, &ts)
}

/// Closed-form N=5 design: `(T_bulk, T_ends) = (sin^2(pi sqrt6/M), sin^2(2pi/M))`.
pub fn analytic_n5(m: usize) -> (f64, f64) {
    let mf = m as f64;
    ((PI * 6f64.sqrt() / mf).sin().powi(2), (2.0 * PI / mf).sin().powi(2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizedTransmittances {
    pub t_bulk: f64,
    pub t_ends: f64,
    pub q: f64,
    pub j_bulk: f64,
    pub j_ends: f64,
}

const GRID_STEP: f64 = 0.01;
const J_BULK_RANGE: (f64, f64) = (0.5, 2.0);
const J_ENDS_RANGE: (f64, f64) = (0.3, 2.0);

fn two_valued(n: usize, j_bulk: f64, j_ends: f64) -> Vec<f64> {
    (1..n).map(|x| if x == 1 || x == n - 1 { j_ends } else { j_bulk }).collect()
}

/// End-to-end probability of the continuous walk with hopping `j_x/2` after time `N+1`.
pub fn ctqw_end_to_end(n: usize, couplings: &[f64]) -> f64 {
    let h = ComplexMatrix::from_fn(n, |r, c| {
        if c == r + 1 {
            C64::new(couplings[r] / 2.0, 0.0)
        } else if r == c + 1 {
            C64::new(couplings[c] / 2.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let u = herm_exp(&h, n as f64 + 1.0).expect("tridiagonal real matrix is Hermitian");
    u[(n - 1, 0)].norm_sqr()
}

/// Best two-valued couplings `(j_bulk, j_ends)` for end-to-end transfer at time `N+1`.
///
/// Grid search on `j` with step 0.01 (ties go to the smaller `j_ends`), then a
/// simplex polish. The result does not depend on the number of steps.
pub fn optimal_two_valued_couplings(n: usize) -> (f64, f64) {
    let nb = ((J_BULK_RANGE.1 - J_BULK_RANGE.0) / GRID_STEP).round() as usize;
    let ne = ((J_ENDS_RANGE.1 - J_ENDS_RANGE.0) / GRID_STEP).round() as usize;
    let best = (0..=ne)
        .into_par_iter()
        .map(|ie| {
            let je = J_ENDS_RANGE.0 + ie as f64 * GRID_STEP;
            let mut row_best = (f64::NEG_INFINITY, 0.0, je);
            for ib in 0..=nb {
                let jb = J_BULK_RANGE.0 + ib as f64 * GRID_STEP;
                let f = ctqw_end_to_end(n, &two_valued(n, jb, je));
                if f > row_best.0 {
                    row_best = (f, jb, je);
                }
            }
            row_best
        })
        .collect::<Vec<_>>()
        .into_iter()
        // rows arrive in increasing j_ends; strict improvement keeps the smallest
        .fold((f64::NEG_INFINITY, 0.0, 0.0), |acc, r| if r.0 > acc.0 { r } else { acc });

    let mut opts = NelderMeadOptions::new(2, GRID_STEP / 2.0);
    opts.x_tol = 1e-9;
    opts.f_tol = 1e-15;
    let refined = nelder_mead(|p| -ctqw_end_to_end(n, &two_valued(n, p[0], p[1])), &[best.1, best.2], &opts);
    if -refined.f >= best.0 {
        (refined.x[0], refined.x[1])
    } else {
        (best.1, best.2)
    }
}

/// Transmittances for the two-valued design at `M` steps and the resulting
/// discrete-walk transfer quality.
pub fn optimize_transmittances(n: usize, m: usize) -> Result<OptimizedTransmittances> {
    if n < 5 {
        return Err(Error::validation(format!("optimize_transmittances needs n >= 5, got {n}")));
    }
    if m + 1 < n {
        return Err(Error::validation(format!("optimize_transmittances needs m >= n-1, got n={n}, m={m}")));
    }
    let (j_bulk, j_ends) = optimal_two_valued_couplings(n);
    let eps = standard_epsilon(n, m);
    let t_bulk = (eps * j_bulk).sin().powi(2);
    let t_ends = (eps * j_ends).sin().powi(2);
    // few steps can push eps*j past pi/2; the coupler only fixes T, and Q is
    // unchanged when an angle is folded back to asin(sqrt T)
    let profile = table_profile(n, m, t_bulk, t_ends)?;
    let q = walk::transfer_quality(&profile);
    Ok(OptimizedTransmittances { t_bulk, t_ends, q, j_bulk, j_ends })
}
