//! Waveguide meshes: layers of directional couplers on neighbouring modes.
//!
//! Modes are labelled `1..=n_modes`. Waveguide `w` of a walk layout runs between
//! walk sites `w-1` and `w`, and the coupler for site `x` acts on modes `(x, x+1)`
//! with the 2x2 block `[[sqrt(1-T), sqrt(T)], [sqrt(T), -sqrt(1-T)]]`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::coupling::CouplingProfile;
use crate::error::{Error, Result};
use crate::matrix::{herm_exp, ComplexMatrix, C64};
use crate::walk::{effective_hamiltonian, Coin};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupler {
    /// Upper mode; the coupler acts on `(mode_a, mode_a + 1)`.
    pub mode_a: usize,
    pub transmittance: f64,
}

impl Coupler {
    pub fn block(&self) -> [[f64; 2]; 2] {
        let s = self.transmittance.sqrt();
        let c = (1.0 - self.transmittance).sqrt();
        [[c, s], [s, -c]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseShift {
    pub mode: usize,
    pub phase: f64,
}

/// One layer: phase shifts first, then couplers. Both act on disjoint modes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CouplerLayer {
    pub couplers: Vec<Coupler>,
    pub phases: Vec<PhaseShift>,
}

impl CouplerLayer {
    pub fn new(couplers: Vec<Coupler>, phases: Vec<PhaseShift>) -> Self {
        Self { couplers, phases }
    }

    fn validate(&self, n_modes: usize) -> Result<()> {
        let mut used = vec![false; n_modes + 2];
        for c in &self.couplers {
            if c.mode_a == 0 || c.mode_a + 1 > n_modes {
                return Err(Error::index(format!("coupler on modes ({}, {}) outside 1..={n_modes}", c.mode_a, c.mode_a + 1)));
            }
            if !(0.0..=1.0).contains(&c.transmittance) {
                return Err(Error::range(format!("coupler transmittance {} outside [0, 1]", c.transmittance)));
            }
            if used[c.mode_a] || used[c.mode_a + 1] {
                return Err(Error::validation(format!("couplers overlap on mode {}", c.mode_a)));
            }
            used[c.mode_a] = true;
            used[c.mode_a + 1] = true;
        }
        let mut phased = vec![false; n_modes + 1];
        for p in &self.phases {
            if p.mode == 0 || p.mode > n_modes {
                return Err(Error::index(format!("phase on mode {} outside 1..={n_modes}", p.mode)));
            }
            if !p.phase.is_finite() {
                return Err(Error::validation("non-finite phase"));
            }
            if phased[p.mode] {
                return Err(Error::validation(format!("two phases on mode {} in one layer", p.mode)));
            }
            phased[p.mode] = true;
        }
        Ok(())
    }
}

/// Walk channel carried by a waveguide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Channel {
    pub site: usize,
    pub coin: Coin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    /// `inputs[w-1]` is the channel entering on waveguide `w`.
    pub inputs: Vec<Channel>,
    pub outputs: Vec<Channel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveguideMesh {
    n_modes: usize,
    layers: Vec<CouplerLayer>,
    embedding: Option<Embedding>,
}

impl WaveguideMesh {
    pub fn new(n_modes: usize, layers: Vec<CouplerLayer>) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::validation("a mesh needs at least one mode"));
        }
        for layer in &layers {
            layer.validate(n_modes)?;
        }
        Ok(Self { n_modes, layers, embedding: None })
    }

    pub fn with_embedding(mut self, embedding: Embedding) -> Result<Self> {
        for list in [&embedding.inputs, &embedding.outputs] {
            if list.len() != self.n_modes {
                return Err(Error::Dimension { expected: self.n_modes, got: list.len() });
            }
        }
        self.embedding = Some(embedding);
        Ok(self)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn layers(&self) -> &[CouplerLayer] {
        &self.layers
    }

    pub fn embedding(&self) -> Option<&Embedding> {
        self.embedding.as_ref()
    }

    /// Copy without layer `k`.
    pub fn without_layer(&self, k: usize) -> Self {
        let mut m = self.clone();
        m.layers.remove(k);
        m
    }

    pub fn to_netlist(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "n_modes {}", self.n_modes);
        for layer in &self.layers {
            out.push_str("layer");
            for c in &layer.couplers {
                let _ = write!(out, " c {} {}", c.mode_a, c.transmittance);
            }
            for p in &layer.phases {
                let _ = write!(out, " p {} {}", p.mode, p.phase);
            }
            out.push('\n');
        }
        if let Some(e) = &self.embedding {
            for (tag, list) in [("in", &e.inputs), ("out", &e.outputs)] {
                out.push_str(tag);
                for ch in list {
                    let coin = match ch.coin {
                        Coin::Left => 'L',
                        Coin::Right => 'R',
                    };
                    let _ = write!(out, " {}{}", ch.site, coin);
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn from_netlist(text: &str) -> Result<Self> {
        let mut n_modes = None;
        let mut layers = Vec::new();
        let mut inputs = None;
        let mut outputs = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line_no = lineno + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let head = tokens.next().unwrap_or("");
            let rest: Vec<&str> = tokens.collect();
            match head {
                "n_modes" => {
                    let [v] = rest[..] else {
                        return Err(Error::parse(line_no, "n_modes takes one value"));
                    };
                    n_modes = Some(parse_num::<usize>(v, line_no)?);
                }
                "layer" => {
                    let mut layer = CouplerLayer::default();
                    if !rest.len().is_multiple_of(3) {
                        return Err(Error::parse(line_no, "layer entries come in triples"));
                    }
                    for chunk in rest.chunks(3) {
                        let mode = parse_num::<usize>(chunk[1], line_no)?;
                        let value = parse_num::<f64>(chunk[2], line_no)?;
                        match chunk[0] {
                            "c" => layer.couplers.push(Coupler { mode_a: mode, transmittance: value }),
                            "p" => layer.phases.push(PhaseShift { mode, phase: value }),
                            other => return Err(Error::parse(line_no, format!("unknown layer element '{other}'"))),
                        }
                    }
                    layers.push(layer);
                }
                "in" | "out" => {
                    let chans = rest
                        .iter()
                        .map(|tok| parse_channel(tok, line_no))
                        .collect::<Result<Vec<_>>>()?;
                    if head == "in" {
                        inputs = Some(chans);
                    } else {
                        outputs = Some(chans);
                    }
                }
                other => return Err(Error::parse(line_no, format!("unknown record '{other}'"))),
            }
        }
        let n_modes = n_modes.ok_or_else(|| Error::parse(0, "missing n_modes"))?;
        let mesh = Self::new(n_modes, layers)?;
        match (inputs, outputs) {
            (Some(inputs), Some(outputs)) => mesh.with_embedding(Embedding { inputs, outputs }),
            (None, None) => Ok(mesh),
            _ => Err(Error::parse(0, "embedding needs both 'in' and 'out' lines")),
        }
    }
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T> {
    tok.parse().map_err(|_| Error::parse(line, format!("cannot parse '{tok}'")))
}

fn parse_channel(tok: &str, line: usize) -> Result<Channel> {
    let (site, coin) = tok.split_at(tok.len().saturating_sub(1));
    let coin = match coin {
        "L" => Coin::Left,
        "R" => Coin::Right,
        _ => return Err(Error::parse(line, format!("bad channel '{tok}'"))),
    };
    Ok(Channel { site: parse_num(site, line)?, coin })
}

/// Channel carried by waveguide `w` after `k` layers.
pub fn waveguide_channel(w: usize, k: usize) -> Channel {
    if (w + k) % 2 == 1 {
        Channel { site: w, coin: Coin::Right }
    } else {
        Channel { site: w - 1, coin: Coin::Left }
    }
}

/// Ladder layout of a profile: layer `k` holds the couplers of sites `x` with
/// `x + k` odd. The mirror at site 0 is a `pi` phase on mode 1; the mirror at
/// site N is a bare waveguide.
pub fn layout_dtqw(profile: &CouplingProfile) -> WaveguideMesh {
    let n = profile.n_sites();
    let m = profile.n_steps();
    let ts = profile.transmittances();
    let layers = (0..m)
        .map(|k| {
            let mut layer = CouplerLayer::default();
            for x in (0..=n).filter(|x| (x + k) % 2 == 1) {
                if x == 0 {
                    layer.phases.push(PhaseShift { mode: 1, phase: PI });
                } else if x < n {
                    layer.couplers.push(Coupler { mode_a: x, transmittance: ts[x - 1] });
                }
            }
            layer
        })
        .collect();
    let embedding = Embedding {
        inputs: (1..=n).map(|w| waveguide_channel(w, 0)).collect(),
        outputs: (1..=n).map(|w| waveguide_channel(w, m)).collect(),
    };
    WaveguideMesh::new(n, layers)
        .and_then(|mesh| mesh.with_embedding(embedding))
        .expect("ladder layout is valid by construction")
}

fn apply_layer(u: &mut ComplexMatrix, layer: &CouplerLayer) {
    let n = u.dim();
    for p in &layer.phases {
        let ph = C64::from_polar(1.0, p.phase);
        for c in 0..n {
            let v = u[(p.mode - 1, c)] * ph;
            u.set(p.mode - 1, c, v);
        }
    }
    for cp in &layer.couplers {
        let [[a, b], [c, d]] = cp.block();
        let (r0, r1) = (cp.mode_a - 1, cp.mode_a);
        for col in 0..n {
            let x = u[(r0, col)];
            let y = u[(r1, col)];
            u.set(r0, col, x * a + y * b);
            u.set(r1, col, x * c + y * d);
        }
    }
}

/// Product of the layers in propagation order; entry `(r, c)` is the amplitude
/// from input mode `c+1` to output mode `r+1`.
pub fn compile_unitary(mesh: &WaveguideMesh) -> ComplexMatrix {
    let mut u = ComplexMatrix::identity(mesh.n_modes);
    for layer in &mesh.layers {
        apply_layer(&mut u, layer);
    }
    u
}

/// `exp(-i time H_eff / eps)`: the continuous evolution the walk approximates,
/// on the time scale where the transfer time is `N+1`.
pub fn ctqw_target(profile: &CouplingProfile, time: f64) -> Result<ComplexMatrix> {
    let h = effective_hamiltonian(profile).scale(C64::new(1.0 / profile.epsilon(), 0.0));
    herm_exp(&h, time)
}

/// The N=5, six-layer device: end couplers 0.25, bulk couplers 0.36.
pub fn chip_profile() -> CouplingProfile {
    crate::coupling::table_profile(5, 6, 0.36, 0.25).expect("chip values are valid")
}

pub fn chip_unitary() -> ComplexMatrix {
    compile_unitary(&layout_dtqw(&chip_profile()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{pst_profile, table_profile};
    use crate::matrix::is_unitary;
    use crate::walk::{channel_index, step_operator, transfer_quality};

    #[test]
    fn empty_mesh_is_identity() {
        let m = WaveguideMesh::new(4, vec![]).unwrap();
        assert_eq!(compile_unitary(&m), ComplexMatrix::identity(4));
    }

    #[test]
    fn balanced_coupler() {
        let layer = CouplerLayer::new(vec![Coupler { mode_a: 1, transmittance: 0.5 }], vec![]);
        let u = compile_unitary(&WaveguideMesh::new(2, vec![layer]).unwrap());
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((u[(0, 0)].re - h).abs() < 1e-15 && (u[(1, 0)].re - h).abs() < 1e-15);
        assert!((u[(0, 1)].re - h).abs() < 1e-15 && (u[(1, 1)].re + h).abs() < 1e-15);
    }

    #[test]
    fn invalid_layers_rejected() {
        let overlap = CouplerLayer::new(
            vec![Coupler { mode_a: 1, transmittance: 0.5 }, Coupler { mode_a: 2, transmittance: 0.5 }],
            vec![],
        );
        assert!(WaveguideMesh::new(4, vec![overlap]).is_err());
        let outside = CouplerLayer::new(vec![Coupler { mode_a: 4, transmittance: 0.5 }], vec![]);
        assert!(matches!(WaveguideMesh::new(4, vec![outside]), Err(Error::Index(_))));
    }

    #[test]
    fn chip_layout_shape() {
        let mesh = layout_dtqw(&chip_profile());
        assert_eq!(mesh.layers().len(), 6);
        for layer in mesh.layers() {
            assert_eq!(layer.couplers.len(), 2);
            for c in &layer.couplers {
                let expect = if c.mode_a == 1 || c.mode_a == 4 { 0.25 } else { 0.36 };
                assert!((c.transmittance - expect).abs() < 1e-14);
            }
        }
        assert!(is_unitary(&compile_unitary(&mesh), 1e-12));
    }

    #[test]
    fn mesh_matches_walk_quality() {
        let p = pst_profile(5, 6).unwrap();
        let u = compile_unitary(&layout_dtqw(&p));
        assert!((u[(4, 0)].norm_sqr() - transfer_quality(&p)).abs() < 1e-12);
    }

    #[test]
    fn mesh_matches_walk_everywhere() {
        let p = table_profile(6, 9, 0.702, 0.503).unwrap();
        let mesh = layout_dtqw(&p);
        let u = compile_unitary(&mesh);
        let step = step_operator(&p);
        let mut walk = ComplexMatrix::identity(step.dim());
        for _ in 0..p.n_steps() {
            walk = &step * &walk;
        }
        let e = mesh.embedding().unwrap();
        for (r, out) in e.outputs.iter().enumerate() {
            for (c, inp) in e.inputs.iter().enumerate() {
                let w = walk[(channel_index(out.site, out.coin), channel_index(inp.site, inp.coin))];
                assert!((u[(r, c)] - w).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn chip_fermion_pattern() {
        // antisymmetrised amplitudes from inputs 2 and 4 land on {1,2}, {1,4}, {2,5}, {4,5}
        let u = chip_unitary();
        let mut weight = 0.0;
        for (r, s) in [(0, 1), (0, 3), (1, 4), (3, 4)] {
            let d = u[(r, 1)] * u[(s, 3)] - u[(r, 3)] * u[(s, 1)];
            weight += d.norm_sqr();
        }
        assert!(weight > 0.9, "{weight}");
    }

    #[test]
    fn ctqw_target_cases() {
        let p = pst_profile(5, 40).unwrap();
        assert!(ctqw_target(&p, 0.0).unwrap().max_abs_diff(&ComplexMatrix::identity(5)) < 1e-14);
        let full = ctqw_target(&p, 6.0).unwrap();
        for x in 0..5 {
            assert!((full[(4 - x, x)].norm() - 1.0).abs() < 1e-10);
        }
        let half = ctqw_target(&p, 3.0).unwrap();
        assert!((half[(1, 1)].norm() - half[(3, 1)].norm()).abs() < 1e-10);
        // the single photon also reaches the ends; only the middle site stays dark
        assert!(half[(2, 1)].norm() < 1e-10);
        assert!((half[(0, 1)].norm_sqr() - 0.25).abs() < 1e-10);
    }

    #[test]
    fn netlist_round_trip() {
        let mesh = layout_dtqw(&table_profile(5, 7, 0.8123456789, 0.1)
            .unwrap());
        let text = mesh.to_netlist();
        let back = WaveguideMesh::from_netlist(&text).unwrap();
        assert_eq!(back, mesh);
        assert_eq!(back.to_netlist(), text);
    }

    #[test]
    fn netlist_errors() {
        assert!(matches!(WaveguideMesh::from_netlist("layer c 1 0.5\n"), Err(Error::Parse { .. })));
        assert!(matches!(
            WaveguideMesh::from_netlist("n_modes 3\nlayer q 1 0.5\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
