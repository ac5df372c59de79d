//! Link-level quantities for a full system state: interference, SINR, the
//! strongest eavesdropper per resource, secrecy rates and the association
//! metric `φ`.
//!
//! Powers are transmit SNRs (`p / N0`), so the receiver noise is the `+ 1` in
//! every SINR denominator.

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::channel::{channel_gain, ChannelError, EnvParams};

/// `φ` assigned to a link when no eavesdropper exists, in bits.
pub const PHI_CAP: f64 = 60.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RadioError {
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("resource (uav {uav}, channel {channel}) is out of range")]
    OutOfRange { uav: usize, channel: usize },
    #[error("resource (uav {uav}, channel {channel}) already serves node {occupant}")]
    Occupied { uav: usize, channel: usize, occupant: usize },
    #[error("node {0} is already associated")]
    AlreadyAssociated(usize),
    #[error("association constraint violated: {0}")]
    Constraint(String),
    #[error("zero channel gain in secrecy metric")]
    ZeroGain,
    #[error("no legitimate nodes; positive-secrecy fraction undefined")]
    NoLegitimateNodes,
    #[error("csv: {0}")]
    Csv(String),
}

/// Ground node sets seen by the radio layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Nodes {
    pub legit: Vec<[f64; 2]>,
    pub eaves: Vec<[f64; 2]>,
}

impl Nodes {
    pub fn new(legit: Vec<[f64; 2]>, eaves: Vec<[f64; 2]>) -> Self {
        Self { legit, eaves }
    }
}

/// Linear gains `g[m][n]` from every UAV to every legitimate node and every
/// eavesdropper.
#[derive(Debug, Clone, PartialEq)]
pub struct GainTable {
    pub legit: Vec<Vec<f64>>,
    pub eaves: Vec<Vec<f64>>,
}

impl GainTable {
    pub fn compute(uavs: &[[f64; 3]], nodes: &Nodes, env: &EnvParams) -> Result<Self, RadioError> {
        let mut legit = Vec::with_capacity(uavs.len());
        let mut eaves = Vec::with_capacity(uavs.len());
        for uav in uavs {
            let (l, e) = Self::row(*uav, nodes, env)?;
            legit.push(l);
            eaves.push(e);
        }
        Ok(Self { legit, eaves })
    }

    /// Gains from one UAV position to all legitimate nodes and eavesdroppers.
    pub fn row(uav: [f64; 3], nodes: &Nodes, env: &EnvParams) -> Result<(Vec<f64>, Vec<f64>), RadioError> {
        let l = nodes
            .legit
            .iter()
            .map(|n| channel_gain(uav, *n, env))
            .collect::<Result<Vec<_>, _>>()?;
        let e = nodes
            .eaves
            .iter()
            .map(|n| channel_gain(uav, *n, env))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((l, e))
    }

    pub fn set_row(&mut self, m: usize, row: (Vec<f64>, Vec<f64>)) {
        self.legit[m] = row.0;
        self.eaves[m] = row.1;
    }

    pub fn n_uavs(&self) -> usize {
        self.legit.len()
    }

    pub fn n_legit(&self) -> usize {
        self.legit.first().map_or(0, Vec::len)
    }

    pub fn n_eaves(&self) -> usize {
        self.eaves.first().map_or(0, Vec::len)
    }
}

/// A subchannel `c` of UAV `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Resource {
    pub uav: usize,
    pub channel: usize,
}

impl Resource {
    pub const fn new(uav: usize, channel: usize) -> Self {
        Self { uav, channel }
    }
}

/// Binary node-to-resource association. Stored as a partial injection so that
/// at most one node per resource and at most one resource per node hold by
/// construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssociationArray {
    n_uavs: usize,
    n_channels: usize,
    serving: Vec<Option<Resource>>,
    occupant: Vec<Option<usize>>,
}

impl AssociationArray {
    pub fn empty(n_legit: usize, n_uavs: usize, n_channels: usize) -> Self {
        Self {
            n_uavs,
            n_channels,
            serving: vec![None; n_legit],
            occupant: vec![None; n_uavs * n_channels],
        }
    }

    pub fn n_legit(&self) -> usize {
        self.serving.len()
    }

    pub fn n_uavs(&self) -> usize {
        self.n_uavs
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    fn slot(&self, r: Resource) -> Result<usize, RadioError> {
        if r.uav >= self.n_uavs || r.channel >= self.n_channels {
            return Err(RadioError::OutOfRange { uav: r.uav, channel: r.channel });
        }
        Ok(r.uav * self.n_channels + r.channel)
    }

    pub fn serving(&self, l: usize) -> Option<Resource> {
        self.serving[l]
    }

    pub fn occupant(&self, r: Resource) -> Option<usize> {
        self.slot(r).ok().and_then(|s| self.occupant[s])
    }

    pub fn is_free(&self, r: Resource) -> bool {
        self.occupant(r).is_none()
    }

    pub fn resources(&self) -> impl Iterator<Item = Resource> + '_ {
        (0..self.n_uavs).flat_map(move |m| (0..self.n_channels).map(move |c| Resource::new(m, c)))
    }

    pub fn free_resources(&self) -> Vec<Resource> {
        self.resources().filter(|r| self.is_free(*r)).collect()
    }

    /// Nodes served by UAV `m`, as `(channel, node)` pairs in channel order.
    pub fn served_by(&self, m: usize) -> Vec<(usize, usize)> {
        (0..self.n_channels)
            .filter_map(|c| self.occupant[m * self.n_channels + c].map(|l| (c, l)))
            .collect()
    }

    pub fn n_associated(&self) -> usize {
        self.serving.iter().filter(|s| s.is_some()).count()
    }

    /// Binds node `l` to a free resource. The node must currently be unassociated.
    pub fn assign(&mut self, l: usize, r: Resource) -> Result<(), RadioError> {
        let slot = self.slot(r)?;
        if let Some(occupant) = self.occupant[slot] {
            return Err(RadioError::Occupied { uav: r.uav, channel: r.channel, occupant });
        }
        if self.serving[l].is_some() {
            return Err(RadioError::AlreadyAssociated(l));
        }
        self.serving[l] = Some(r);
        self.occupant[slot] = Some(l);
        Ok(())
    }

    /// Frees node `l`'s resource, if any, and returns it.
    pub fn release(&mut self, l: usize) -> Option<Resource> {
        let r = self.serving[l].take()?;
        let slot = r.uav * self.n_channels + r.channel;
        self.occupant[slot] = None;
        Some(r)
    }

    /// Moves `l` to `r`, releasing its previous resource first.
    pub fn relocate(&mut self, l: usize, r: Resource) -> Result<Option<Resource>, RadioError> {
        let prev = self.release(l);
        match self.assign(l, r) {
            Ok(()) => Ok(prev),
            Err(e) => {
                if let Some(p) = prev {
                    self.assign(l, p).expect("restoring a just-released resource");
                }
                Err(e)
            }
        }
    }

    /// Dense `a[l][m][c]` view.
    pub fn to_dense(&self) -> Vec<Vec<Vec<u8>>> {
        let mut a = vec![vec![vec![0u8; self.n_channels]; self.n_uavs]; self.n_legit()];
        for (l, s) in self.serving.iter().enumerate() {
            if let Some(r) = s {
                a[l][r.uav][r.channel] = 1;
            }
        }
        a
    }

    /// Builds from a dense binary array, rejecting arrays that break the
    /// one-node-per-subchannel or one-subchannel-per-node constraints.
    pub fn from_dense(a: &[Vec<Vec<u8>>], n_uavs: usize, n_channels: usize) -> Result<Self, RadioError> {
        let mut out = Self::empty(a.len(), n_uavs, n_channels);
        for (l, per_uav) in a.iter().enumerate() {
            if per_uav.len() != n_uavs || per_uav.iter().any(|row| row.len() != n_channels) {
                return Err(RadioError::Constraint(format!("node {l}: wrong shape")));
            }
            for (m, row) in per_uav.iter().enumerate() {
                for (c, &bit) in row.iter().enumerate() {
                    match bit {
                        0 => {}
                        1 => out.assign(l, Resource::new(m, c)).map_err(|e| {
                            RadioError::Constraint(format!("node {l} at ({m},{c}): {e}"))
                        })?,
                        v => return Err(RadioError::Constraint(format!("non-binary entry {v}"))),
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Per-UAV, per-subchannel transmit SNR with a common per-UAV budget.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerMatrix {
    pub gamma: Vec<Vec<f64>>,
    pub budget: f64,
}

impl PowerMatrix {
    pub fn zeros(n_uavs: usize, n_channels: usize, budget: f64) -> Self {
        Self { gamma: vec![vec![0.0; n_channels]; n_uavs], budget }
    }

    /// Budget spread evenly over all subchannels of every UAV.
    pub fn uniform(n_uavs: usize, n_channels: usize, budget: f64) -> Self {
        let per = budget / n_channels as f64;
        Self { gamma: vec![vec![per; n_channels]; n_uavs], budget }
    }

    pub fn n_uavs(&self) -> usize {
        self.gamma.len()
    }

    pub fn total(&self, m: usize) -> f64 {
        self.gamma[m].iter().sum()
    }

    /// Non-negativity and `Σ_c γ ≤ budget (1 + 1e-9)` for every UAV.
    pub fn within_budget(&self) -> bool {
        self.gamma.iter().all(|row| {
            row.iter().all(|p| *p >= 0.0) && row.iter().sum::<f64>() <= self.budget * (1.0 + 1e-9)
        })
    }
}

/// Co-channel interference at node `n` on channel `c` from every UAV but `m`.
/// `gains[k][n]` is the gain from UAV `k` to the node.
pub fn interference(gains: &[Vec<f64>], n: usize, m: usize, c: usize, powers: &PowerMatrix) -> f64 {
    gains
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != m)
        .map(|(k, g)| powers.gamma[k][c] * g[n])
        .sum()
}

/// Interference-normalized gain `g / (I + 1)`.
pub fn effective_channel(gains: &[Vec<f64>], n: usize, m: usize, c: usize, powers: &PowerMatrix) -> f64 {
    gains[m][n] / (interference(gains, n, m, c, powers) + 1.0)
}

/// SINR of legitimate node `l` on `(m, c)`; zero unless `l` is associated there.
pub fn sinr(
    l: usize,
    r: Resource,
    assoc: &AssociationArray,
    powers: &PowerMatrix,
    gains: &GainTable,
) -> f64 {
    if assoc.serving(l) != Some(r) {
        return 0.0;
    }
    powers.gamma[r.uav][r.channel] * effective_channel(&gains.legit, l, r.uav, r.channel, powers)
}

/// The eavesdropper with the highest received SINR on a resource.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eavesdropper {
    pub index: usize,
    pub interference: f64,
    pub effective: f64,
    pub sinr: f64,
}

/// Argmax over eavesdroppers of `γ g / (I + 1)`, lowest index on ties.
///
/// The transmit SNR is a common positive factor, so the ranking is taken on
/// the effective channel; this keeps `e*` well defined on an unpowered
/// subchannel. `None` when there are no eavesdroppers.
pub fn strongest_eavesdropper(r: Resource, powers: &PowerMatrix, gains: &GainTable) -> Option<Eavesdropper> {
    let mut best: Option<Eavesdropper> = None;
    for e in 0..gains.n_eaves() {
        let i = interference(&gains.eaves, e, r.uav, r.channel, powers);
        let eff = gains.eaves[r.uav][e] / (i + 1.0);
        if best.map_or(true, |b| eff > b.effective) {
            best = Some(Eavesdropper {
                index: e,
                interference: i,
                effective: eff,
                sinr: powers.gamma[r.uav][r.channel] * eff,
            });
        }
    }
    best
}

/// `[log2((1 + γ_l) / (1 + γ_e))]⁺` in bits/s/Hz.
pub fn secrecy_rate(gamma_l: f64, gamma_e: f64) -> f64 {
    ((1.0 + gamma_l) / (1.0 + gamma_e)).log2().max(0.0)
}

/// High-SINR secrecy metric of node `l` on resource `r`. Independent of the
/// power on `r` itself; only cross-UAV interference enters.
pub fn phi_metric(l: usize, r: Resource, powers: &PowerMatrix, gains: &GainTable) -> Result<f64, RadioError> {
    let own = effective_channel(&gains.legit, l, r.uav, r.channel, powers);
    let Some(eve) = strongest_eavesdropper(r, powers, gains) else {
        return Ok(PHI_CAP);
    };
    if own <= 0.0 || eve.effective <= 0.0 {
        return Err(RadioError::ZeroGain);
    }
    Ok((own / eve.effective).log2())
}

/// `φ_l(m, c)` for every node and resource under fixed powers.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiTable {
    n_uavs: usize,
    n_channels: usize,
    values: Vec<f64>,
}

impl PhiTable {
    pub fn build(gains: &GainTable, powers: &PowerMatrix, n_channels: usize) -> Result<Self, RadioError> {
        let n_uavs = gains.n_uavs();
        let n_legit = gains.n_legit();
        let mut values = Vec::with_capacity(n_legit * n_uavs * n_channels);
        // e* depends only on the resource, so resolve it once per (m, c).
        let mut eve = Vec::with_capacity(n_uavs * n_channels);
        for m in 0..n_uavs {
            for c in 0..n_channels {
                eve.push(strongest_eavesdropper(Resource::new(m, c), powers, gains));
            }
        }
        for l in 0..n_legit {
            for m in 0..n_uavs {
                for c in 0..n_channels {
                    let own = effective_channel(&gains.legit, l, m, c, powers);
                    let phi = match eve[m * n_channels + c] {
                        None => PHI_CAP,
                        Some(e) => {
                            if own <= 0.0 || e.effective <= 0.0 {
                                return Err(RadioError::ZeroGain);
                            }
                            (own / e.effective).log2()
                        }
                    };
                    values.push(phi);
                }
            }
        }
        Ok(Self { n_uavs, n_channels, values })
    }

    pub fn get(&self, l: usize, r: Resource) -> f64 {
        self.values[(l * self.n_uavs + r.uav) * self.n_channels + r.channel]
    }

    pub fn n_legit(&self) -> usize {
        self.values.len() / (self.n_uavs * self.n_channels).max(1)
    }
}

/// Per-legitimate-node link state.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkRecord {
    pub node: usize,
    pub resource: Option<Resource>,
    pub interference: f64,
    pub sinr: f64,
    pub eavesdropper: Option<usize>,
    pub eavesdropper_sinr: f64,
    pub phi: f64,
    pub secrecy_rate: f64,
}

/// Everything derived from `(A, positions, P)` for one evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SecrecySnapshot {
    pub gains: GainTable,
    pub links: Vec<LinkRecord>,
}

impl SecrecySnapshot {
    pub fn evaluate(gains: &GainTable, assoc: &AssociationArray, powers: &PowerMatrix) -> Result<Self, RadioError> {
        let mut links = Vec::with_capacity(assoc.n_legit());
        for l in 0..assoc.n_legit() {
            let rec = match assoc.serving(l) {
                None => LinkRecord {
                    node: l,
                    resource: None,
                    interference: 0.0,
                    sinr: 0.0,
                    eavesdropper: None,
                    eavesdropper_sinr: 0.0,
                    phi: -PHI_CAP,
                    secrecy_rate: 0.0,
                },
                Some(r) => {
                    let i = interference(&gains.legit, l, r.uav, r.channel, powers);
                    let g = sinr(l, r, assoc, powers, gains);
                    let eve = strongest_eavesdropper(r, powers, gains);
                    let ge = eve.map_or(0.0, |e| e.sinr);
                    LinkRecord {
                        node: l,
                        resource: Some(r),
                        interference: i,
                        sinr: g,
                        eavesdropper: eve.map(|e| e.index),
                        eavesdropper_sinr: ge,
                        phi: phi_metric(l, r, powers, gains)?,
                        secrecy_rate: secrecy_rate(g, ge),
                    }
                }
            };
            links.push(rec);
        }
        Ok(Self { gains: gains.clone(), links })
    }

    pub fn sum_secrecy_rate(&self) -> f64 {
        self.links.iter().map(|r| r.secrecy_rate).sum()
    }

    /// Percentage of legitimate nodes with strictly positive secrecy rate.
    pub fn positive_secrecy_fraction(&self) -> Result<f64, RadioError> {
        if self.links.is_empty() {
            return Err(RadioError::NoLegitimateNodes);
        }
        let pos = self.links.iter().filter(|r| r.secrecy_rate > 0.0).count();
        Ok(100.0 * pos as f64 / self.links.len() as f64)
    }

    /// One row per legitimate node: `l, m, c, sinr, e*, eve_sinr, phi, secrecy_rate`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), RadioError> {
        #[derive(Serialize)]
        struct Row {
            l: usize,
            m: Option<usize>,
            c: Option<usize>,
            sinr: f64,
            eavesdropper: Option<usize>,
            eavesdropper_sinr: f64,
            phi: f64,
            secrecy_rate: f64,
        }
        let mut w = csv::Writer::from_writer(out);
        for r in &self.links {
            w.serialize(Row {
                l: r.node,
                m: r.resource.map(|x| x.uav),
                c: r.resource.map(|x| x.channel),
                sinr: r.sinr,
                eavesdropper: r.eavesdropper,
                eavesdropper_sinr: r.eavesdropper_sinr,
                phi: r.phi,
                secrecy_rate: r.secrecy_rate,
            })
            .map_err(|e| RadioError::Csv(e.to_string()))?;
        }
        w.flush().map_err(|e| RadioError::Csv(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(legit: Vec<Vec<f64>>, eaves: Vec<Vec<f64>>) -> GainTable {
        GainTable { legit, eaves }
    }

    #[test]
    fn single_uav_has_no_interference() {
        let g = vec![vec![0.3, 0.2]];
        let p = PowerMatrix::uniform(1, 2, 10.0);
        assert_eq!(interference(&g, 0, 0, 1, &p), 0.0);
    }

    #[test]
    fn interference_single_term_and_linearity() {
        let g = vec![vec![0.5], vec![0.25]];
        let mut p = PowerMatrix::zeros(2, 1, 10.0);
        p.gamma[1][0] = 1.0;
        assert_eq!(interference(&g, 0, 0, 0, &p), 0.25);
        p.gamma[1][0] = 2.0;
        assert_eq!(interference(&g, 0, 0, 0, &p), 0.5);
    }

    #[test]
    fn sinr_substitution() {
        let gains = table(vec![vec![0.5], vec![2.0]], vec![vec![0.1], vec![0.1]]);
        let mut a = AssociationArray::empty(1, 2, 1);
        let r = Resource::new(0, 0);
        let mut p = PowerMatrix::zeros(2, 1, 20.0);
        p.gamma[0][0] = 10.0;
        assert_eq!(sinr(0, r, &a, &p, &gains), 0.0);
        a.assign(0, r).unwrap();
        assert_eq!(sinr(0, r, &a, &p, &gains), 5.0);
        p.gamma[1][0] = 2.0; // I = 2 * 2.0 = 4
        assert_eq!(sinr(0, r, &a, &p, &gains), 1.0);
    }

    #[test]
    fn strongest_eavesdropper_selection() {
        let p = PowerMatrix::uniform(1, 1, 1.0);
        let one = table(vec![vec![0.5]], vec![vec![0.2]]);
        assert_eq!(strongest_eavesdropper(Resource::new(0, 0), &p, &one).unwrap().index, 0);
        let two = table(vec![vec![0.5]], vec![vec![0.3, 0.7]]);
        let e = strongest_eavesdropper(Resource::new(0, 0), &p, &two).unwrap();
        assert_eq!(e.index, 1);
        assert_eq!(e.sinr, 0.7);
        let tie = table(vec![vec![0.5]], vec![vec![0.4, 0.4]]);
        assert_eq!(strongest_eavesdropper(Resource::new(0, 0), &p, &tie).unwrap().index, 0);
        let none = table(vec![vec![0.5]], vec![vec![]]);
        assert!(strongest_eavesdropper(Resource::new(0, 0), &p, &none).is_none());
    }

    #[test]
    fn secrecy_rate_cases() {
        assert_eq!(secrecy_rate(2.0, 2.0), 0.0);
        assert_eq!(secrecy_rate(3.0, 1.0), 1.0);
        assert_eq!(secrecy_rate(1.0, 3.0), 0.0);
    }

    #[test]
    fn phi_exact_values() {
        let p = PowerMatrix::uniform(1, 1, 1.0);
        let equal = table(vec![vec![0.25]], vec![vec![0.25]]);
        assert_eq!(phi_metric(0, Resource::new(0, 0), &p, &equal).unwrap(), 0.0);
        let g = table(vec![vec![0.5]], vec![vec![0.125]]);
        assert_eq!(phi_metric(0, Resource::new(0, 0), &p, &g).unwrap(), 2.0);
        let none = table(vec![vec![0.5]], vec![vec![]]);
        assert_eq!(phi_metric(0, Resource::new(0, 0), &p, &none).unwrap(), PHI_CAP);
        let zero = table(vec![vec![0.0]], vec![vec![0.1]]);
        assert_eq!(phi_metric(0, Resource::new(0, 0), &p, &zero), Err(RadioError::ZeroGain));
    }

    #[test]
    fn phi_ignores_own_channel_power() {
        let g = table(vec![vec![0.5], vec![0.2]], vec![vec![0.1, 0.3], vec![0.4, 0.05]]);
        let mut p = PowerMatrix::uniform(2, 2, 4.0);
        let r = Resource::new(0, 1);
        let before = phi_metric(0, r, &p, &g).unwrap();
        p.gamma[0][1] = 123.0;
        assert_eq!(phi_metric(0, r, &p, &g).unwrap(), before);
        p.gamma[1][1] = 7.0;
        assert_ne!(phi_metric(0, r, &p, &g).unwrap(), before);
    }

    #[test]
    fn association_constraints_enforced() {
        let mut a = AssociationArray::empty(3, 1, 2);
        a.assign(0, Resource::new(0, 0)).unwrap();
        assert!(matches!(a.assign(1, Resource::new(0, 0)), Err(RadioError::Occupied { .. })));
        assert_eq!(a.assign(0, Resource::new(0, 1)), Err(RadioError::AlreadyAssociated(0)));
        assert!(a.assign(2, Resource::new(1, 0)).is_err());
        assert_eq!(a.relocate(0, Resource::new(0, 1)).unwrap(), Some(Resource::new(0, 0)));
        assert!(a.is_free(Resource::new(0, 0)));
        let dense = a.to_dense();
        assert_eq!(AssociationArray::from_dense(&dense, 1, 2).unwrap(), a);
        let bad = vec![vec![vec![1, 1]], vec![vec![0, 0]], vec![vec![0, 0]]];
        assert!(AssociationArray::from_dense(&bad, 1, 2).is_err());
        let clash = vec![vec![vec![1, 0]], vec![vec![1, 0]], vec![vec![0, 0]]];
        assert!(AssociationArray::from_dense(&clash, 1, 2).is_err());
    }

    #[test]
    fn snapshot_metrics() {
        let gains = table(
            vec![vec![0.5, 0.5, 0.5, 0.05]],
            vec![vec![0.1]],
        );
        let mut a = AssociationArray::empty(4, 1, 4);
        for l in 0..4 {
            a.assign(l, Resource::new(0, l)).unwrap();
        }
        let mut p = PowerMatrix::zeros(1, 4, 10.0);
        let s = SecrecySnapshot::evaluate(&gains, &a, &p).unwrap();
        assert_eq!(s.sum_secrecy_rate(), 0.0);
        assert_eq!(s.positive_secrecy_fraction().unwrap(), 0.0);
        p.gamma[0][0] = 2.0;
        let s = SecrecySnapshot::evaluate(&gains, &a, &p).unwrap();
        assert_eq!(s.positive_secrecy_fraction().unwrap(), 25.0);
        let brute: f64 = (0..4)
            .map(|l| {
                let gl = p.gamma[0][l] * gains.legit[0][l];
                let ge = p.gamma[0][l] * 0.1;
                ((1.0 + gl) / (1.0 + ge)).log2().max(0.0)
            })
            .sum();
        assert!((s.sum_secrecy_rate() - brute).abs() < 1e-15);

        let empty = SecrecySnapshot::evaluate(&gains, &AssociationArray::empty(0, 1, 4), &p).unwrap();
        assert_eq!(empty.positive_secrecy_fraction(), Err(RadioError::NoLegitimateNodes));
    }

    #[test]
    fn unassociated_nodes_contribute_nothing() {
        let gains = table(vec![vec![0.5, 0.4]], vec![vec![0.1]]);
        let mut a = AssociationArray::empty(2, 1, 1);
        a.assign(0, Resource::new(0, 0)).unwrap();
        let s = SecrecySnapshot::evaluate(&gains, &a, &PowerMatrix::uniform(1, 1, 10.0)).unwrap();
        assert_eq!(s.links[1].sinr, 0.0);
        assert_eq!(s.links[1].secrecy_rate, 0.0);
        assert!(s.links[0].secrecy_rate > 0.0);
    }

    #[test]
    fn no_eavesdroppers_is_plain_capacity() {
        let gains = table(vec![vec![0.5]], vec![vec![]]);
        let mut a = AssociationArray::empty(1, 1, 1);
        a.assign(0, Resource::new(0, 0)).unwrap();
        let s = SecrecySnapshot::evaluate(&gains, &a, &PowerMatrix::uniform(1, 1, 6.0)).unwrap();
        assert_eq!(s.links[0].secrecy_rate, 2.0);
        assert_eq!(s.links[0].phi, PHI_CAP);
    }

    #[test]
    fn csv_dump_has_row_per_node() {
        let gains = table(vec![vec![0.5, 0.4]], vec![vec![0.1]]);
        let mut a = AssociationArray::empty(2, 1, 1);
        a.assign(1, Resource::new(0, 0)).unwrap();
        let s = SecrecySnapshot::evaluate(&gains, &a, &PowerMatrix::uniform(1, 1, 10.0)).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "l,m,c,sinr,eavesdropper,eavesdropper_sinr,phi,secrecy_rate");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,,,0.0,"));
    }

    proptest! {
        #[test]
        fn secrecy_rate_nonnegative_and_zero_iff_weaker(gl in 0f64..1e3, ge in 0f64..1e3) {
            let c = secrecy_rate(gl, ge);
            prop_assert!(c >= 0.0);
            prop_assert_eq!(c == 0.0, gl <= ge);
        }

        #[test]
        fn eavesdropper_argmax_scale_invariant(
            ge in proptest::collection::vec(1e-4f64..1.0, 1..8),
            k in 1e-3f64..1e3,
        ) {
            let gains = table(vec![vec![0.5]], vec![ge]);
            let mut p = PowerMatrix::uniform(1, 1, 1.0);
            let a = strongest_eavesdropper(Resource::new(0, 0), &p, &gains).unwrap().index;
            p.gamma[0][0] *= k;
            prop_assert_eq!(strongest_eavesdropper(Resource::new(0, 0), &p, &gains).unwrap().index, a);
        }

        #[test]
        fn phi_sign_matches_secrecy_condition(
            gl in proptest::collection::vec(1e-3f64..1.0, 2),
            ge in proptest::collection::vec(1e-3f64..1.0, 2),
            p1 in 0f64..10.0,
        ) {
            let gains = table(vec![vec![gl[0]], vec![gl[1]]], vec![vec![ge[0]], vec![ge[1]]]);
            let mut p = PowerMatrix::uniform(2, 1, 1.0);
            p.gamma[1][0] = p1;
            let r = Resource::new(0, 0);
            let phi = phi_metric(0, r, &p, &gains).unwrap();
            let own = effective_channel(&gains.legit, 0, 0, 0, &p);
            let eve = strongest_eavesdropper(r, &p, &gains).unwrap().effective;
            prop_assert_eq!(phi > 0.0, own > eve);
        }
    }
}
