//! Per-UAV power allocation under frozen interference, iterated with
//! interference refresh.
//!
//! The secure allocator first spends the least power that lifts every served
//! node to the SINR floor `γ0` (closed form), then spends the remainder on a
//! max-min secrecy problem over the nodes that can reach positive secrecy,
//! solved by bisection on the common secrecy ratio `γ_S`. Two benchmark
//! allocators (equal SINR and waterfilling) share the same outer loop.

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::radio::{
    interference, secrecy_rate, strongest_eavesdropper, AssociationArray, GainTable, PowerMatrix,
    RadioError, Resource,
};

/// Relative margin pulling the bisection upper bound below the smallest
/// legitimate-to-eavesdropper ratio, where the closed form diverges.
pub const RATIO_MARGIN: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum PowerError {
    #[error(transparent)]
    Radio(#[from] RadioError),
    #[error("csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerConfig {
    /// Minimum SINR floor, linear.
    pub gamma_0: f64,
    pub n_iter_pow: usize,
    pub n_iter_bis: usize,
    pub bisection_tol: f64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self { gamma_0: 0.1, n_iter_pow: 3, n_iter_bis: 50, bisection_tol: 1e-6 }
    }
}

/// Channel state of one served node with the interference frozen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrozenLink {
    pub channel: usize,
    pub node: usize,
    pub gain: f64,
    pub interference: f64,
    pub eavesdropper: Option<usize>,
    pub eve_gain: f64,
    pub eve_interference: f64,
}

impl FrozenLink {
    /// `g_l / (I_l + 1)`.
    pub fn own_effective(&self) -> f64 {
        self.gain / (self.interference + 1.0)
    }

    /// `g_e* / (I_e* + 1)`, zero without eavesdroppers.
    pub fn eve_effective(&self) -> f64 {
        if self.eavesdropper.is_some() {
            self.eve_gain / (self.eve_interference + 1.0)
        } else {
            0.0
        }
    }

    /// Effective noise floor `(I_l + 1) / g_l`.
    pub fn floor(&self) -> f64 {
        (self.interference + 1.0) / self.gain
    }

    pub fn secrecy_eligible(&self) -> bool {
        self.own_effective() > self.eve_effective()
    }

    pub fn secrecy_ratio(&self) -> f64 {
        let eve = self.eve_effective();
        if eve > 0.0 {
            self.own_effective() / eve
        } else {
            f64::INFINITY
        }
    }
}

/// Snapshot of every link served by UAV `m` under `powers`, in channel order.
pub fn freeze(m: usize, gains: &GainTable, assoc: &AssociationArray, powers: &PowerMatrix) -> Vec<FrozenLink> {
    assoc
        .served_by(m)
        .into_iter()
        .map(|(c, l)| {
            let eve = strongest_eavesdropper(Resource::new(m, c), powers, gains);
            FrozenLink {
                channel: c,
                node: l,
                gain: gains.legit[m][l],
                interference: interference(&gains.legit, l, m, c, powers),
                eavesdropper: eve.map(|e| e.index),
                eve_gain: eve.map_or(0.0, |e| gains.eaves[m][e.index]),
                eve_interference: eve.map_or(0.0, |e| e.interference),
            }
        })
        .collect()
}

/// Positions (into `links`) of nodes whose legitimate effective channel
/// strictly beats their strongest eavesdropper's.
pub fn secrecy_eligible_set(links: &[FrozenLink]) -> Vec<usize> {
    (0..links.len()).filter(|i| links[*i].secrecy_eligible()).collect()
}

/// Least per-link powers achieving SINR `γ0` everywhere, and their total.
pub fn qos_power(links: &[FrozenLink], gamma_0: f64) -> (Vec<f64>, f64) {
    let p: Vec<f64> = links.iter().map(|k| gamma_0 * k.floor()).collect();
    let total = p.iter().sum();
    (p, total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BisectionStatus {
    Solved,
    NoEligibleNodes,
    NoBudget,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bisection {
    /// Largest ratio found whose power profile fits the budget.
    pub gamma_s: f64,
    /// Per-link secrecy powers, zero for ineligible links.
    pub powers: Vec<f64>,
    pub gap: f64,
    pub iterations: usize,
    pub status: BisectionStatus,
}

/// Closed-form minimum power meeting `(1 + γ_l) / (1 + γ_e) ≥ γ_S` on one link.
pub fn secrecy_power(link: &FrozenLink, gamma_s: f64) -> f64 {
    let denom = link.own_effective() - gamma_s * link.eve_effective();
    ((gamma_s - 1.0) / denom).max(0.0)
}

fn profile(links: &[FrozenLink], eligible: &[usize], gamma_s: f64) -> Vec<f64> {
    let mut p = vec![0.0; links.len()];
    for &i in eligible {
        p[i] = secrecy_power(&links[i], gamma_s);
    }
    p
}

/// Max-min secrecy split of `budget` over the eligible links, by bisection on
/// `γ_S ∈ (1, min ratio)`. Returns the last profile that fits the budget.
pub fn secrecy_bisection(links: &[FrozenLink], eligible: &[usize], budget: f64, cfg: &PowerConfig) -> Bisection {
    let zero = |status| Bisection {
        gamma_s: 1.0,
        powers: vec![0.0; links.len()],
        gap: 0.0,
        iterations: 0,
        status,
    };
    if eligible.is_empty() {
        return zero(BisectionStatus::NoEligibleNodes);
    }
    if !(budget > 0.0) {
        return zero(BisectionStatus::NoBudget);
    }
    let ratio = eligible.iter().map(|i| links[*i].secrecy_ratio()).fold(f64::INFINITY, f64::min);
    let mut hi = if ratio.is_finite() {
        ratio * (1.0 - RATIO_MARGIN)
    } else {
        // no eavesdropper: one link alone needs (γ_S - 1) / g_eff
        let best = eligible.iter().map(|i| links[*i].own_effective()).fold(0.0, f64::max);
        1.0 + budget * best * (1.0 + RATIO_MARGIN)
    };
    let mut lo = 1.0;
    let mut feasible = vec![0.0; links.len()];
    let mut iterations = 0;
    while iterations < cfg.n_iter_bis && hi - lo >= cfg.bisection_tol {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let p = profile(links, eligible, mid);
        if p.iter().sum::<f64>() > budget {
            hi = mid;
        } else {
            lo = mid;
            feasible = p;
        }
    }
    Bisection { gamma_s: lo, powers: feasible, gap: hi - lo, iterations, status: BisectionStatus::Solved }
}

/// Waterfilling over effective noise floors: `p = [μ − w]⁺` with `Σ p = budget`.
/// The level `μ` is bracketed by bisection, then made exact on the active set.
pub fn waterfill(floors: &[f64], budget: f64) -> (Vec<f64>, f64) {
    if floors.is_empty() || !(budget > 0.0) {
        let level = floors.iter().copied().fold(f64::INFINITY, f64::min);
        return (vec![0.0; floors.len()], level);
    }
    let used = |mu: f64| floors.iter().map(|w| (mu - w).max(0.0)).sum::<f64>();
    let mut lo = floors.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = floors.iter().copied().fold(f64::NEG_INFINITY, f64::max) + budget;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if used(mid) > budget {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut mu = 0.5 * (lo + hi);
    let active: Vec<f64> = floors.iter().copied().filter(|w| *w < mu).collect();
    if !active.is_empty() {
        let exact = (budget + active.iter().sum::<f64>()) / active.len() as f64;
        let consistent = floors.iter().all(|w| (*w < mu) == (*w < exact));
        if consistent {
            mu = exact;
        }
    }
    (floors.iter().map(|w| (mu - w).max(0.0)).collect(), mu)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    /// UAV serves nobody.
    Idle,
    /// QoS profile rescaled to the budget, because the floor is unaffordable
    /// or nobody can reach positive secrecy.
    QosScaled,
    /// QoS floor plus max-min secrecy top-up.
    Secure,
    MaxMinSinr,
    WaterFilling,
}

/// One UAV's allocation within one outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct UavAllocation {
    pub uav: usize,
    pub links: Vec<FrozenLink>,
    pub p_a: Vec<f64>,
    pub p_b: Vec<f64>,
    pub p: Vec<f64>,
    pub p_ns: f64,
    pub branch: Branch,
    pub bisection: Option<Bisection>,
}

impl UavAllocation {
    fn idle(uav: usize) -> Self {
        Self {
            uav,
            links: Vec::new(),
            p_a: Vec::new(),
            p_b: Vec::new(),
            p: Vec::new(),
            p_ns: 0.0,
            branch: Branch::Idle,
            bisection: None,
        }
    }

    pub fn total(&self) -> f64 {
        self.p.iter().sum()
    }
}

/// Secure allocation for one UAV under frozen interference.
pub fn secure_uav(uav: usize, links: Vec<FrozenLink>, budget: f64, cfg: &PowerConfig) -> UavAllocation {
    if links.is_empty() {
        return UavAllocation::idle(uav);
    }
    let eligible = secrecy_eligible_set(&links);
    let (p_a, p_ns) = qos_power(&links, cfg.gamma_0);
    if p_ns >= budget || eligible.is_empty() {
        let scale = budget / p_ns;
        let p = p_a.iter().map(|x| x * scale).collect();
        return UavAllocation {
            uav,
            p_b: vec![0.0; links.len()],
            links,
            p_a,
            p,
            p_ns,
            branch: Branch::QosScaled,
            bisection: None,
        };
    }
    let bis = secrecy_bisection(&links, &eligible, budget - p_ns, cfg);
    let p = p_a.iter().zip(&bis.powers).map(|(a, b)| a + b).collect();
    UavAllocation {
        uav,
        links,
        p_b: bis.powers.clone(),
        p_a,
        p,
        p_ns,
        branch: Branch::Secure,
        bisection: Some(bis),
    }
}

/// Equal-SINR allocation for one UAV: `γ* = P / Σ w`, `p = γ* w`.
pub fn maxmin_uav(uav: usize, links: Vec<FrozenLink>, budget: f64) -> UavAllocation {
    if links.is_empty() {
        return UavAllocation::idle(uav);
    }
    let floors: Vec<f64> = links.iter().map(FrozenLink::floor).collect();
    let common = budget / floors.iter().sum::<f64>();
    let p: Vec<f64> = floors.iter().map(|w| common * w).collect();
    UavAllocation {
        uav,
        p_b: vec![0.0; links.len()],
        p_a: p.clone(),
        links,
        p,
        p_ns: 0.0,
        branch: Branch::MaxMinSinr,
        bisection: None,
    }
}

/// Sum-rate waterfilling for one UAV.
pub fn sumrate_uav(uav: usize, links: Vec<FrozenLink>, budget: f64) -> UavAllocation {
    if links.is_empty() {
        return UavAllocation::idle(uav);
    }
    let floors: Vec<f64> = links.iter().map(FrozenLink::floor).collect();
    let (p, _) = waterfill(&floors, budget);
    UavAllocation {
        uav,
        p_b: vec![0.0; links.len()],
        p_a: p.clone(),
        links,
        p,
        p_ns: 0.0,
        branch: Branch::WaterFilling,
        bisection: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PowerScheme {
    Secure,
    MaxMinSinr,
    MaxSumRate,
}

/// Result of the iterative allocation: the final matrix plus every UAV's
/// allocation in every outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationRun {
    pub powers: PowerMatrix,
    pub iterations: Vec<Vec<UavAllocation>>,
    /// Matrix produced by each outer iteration.
    pub matrices: Vec<PowerMatrix>,
}

impl AllocationRun {
    pub fn last(&self) -> &[UavAllocation] {
        self.iterations.last().map_or(&[], Vec::as_slice)
    }

    /// Rows `iteration, m, c, l, p_a, p_b, p_total, sinr, secrecy_rate`; SINR and
    /// secrecy rate are evaluated on the matrix the iteration produced.
    pub fn write_csv<W: Write>(&self, gains: &GainTable, out: W) -> Result<(), PowerError> {
        #[derive(Serialize)]
        struct Row {
            iteration: usize,
            m: usize,
            c: usize,
            l: usize,
            p_a: f64,
            p_b: f64,
            p_total: f64,
            sinr: f64,
            secrecy_rate: f64,
        }
        let mut w = csv::Writer::from_writer(out);
        for (it, (allocs, matrix)) in self.iterations.iter().zip(&self.matrices).enumerate() {
            for a in allocs {
                for (i, link) in a.links.iter().enumerate() {
                    let r = Resource::new(a.uav, link.channel);
                    let eff = gains.legit[a.uav][link.node]
                        / (interference(&gains.legit, link.node, a.uav, link.channel, matrix) + 1.0);
                    let g = matrix.gamma[a.uav][link.channel] * eff;
                    let ge = strongest_eavesdropper(r, matrix, gains).map_or(0.0, |e| e.sinr);
                    w.serialize(Row {
                        iteration: it + 1,
                        m: a.uav,
                        c: link.channel,
                        l: link.node,
                        p_a: a.p_a[i],
                        p_b: a.p_b[i],
                        p_total: a.p[i],
                        sinr: g,
                        secrecy_rate: secrecy_rate(g, ge),
                    })
                    .map_err(|e| PowerError::Csv(e.to_string()))?;
                }
            }
        }
        w.flush().map_err(|e| PowerError::Csv(e.to_string()))
    }
}

/// Outer loop: freeze interference at the current matrix, solve every UAV
/// independently, refresh. Starts from the uniform matrix.
pub fn allocate(
    scheme: PowerScheme,
    gains: &GainTable,
    assoc: &AssociationArray,
    budget: f64,
    cfg: &PowerConfig,
) -> AllocationRun {
    let n_uavs = assoc.n_uavs();
    let n_channels = assoc.n_channels();
    let mut powers = PowerMatrix::uniform(n_uavs, n_channels, budget);
    let mut iterations = Vec::with_capacity(cfg.n_iter_pow);
    let mut matrices = Vec::with_capacity(cfg.n_iter_pow);
    for _ in 0..cfg.n_iter_pow.max(1) {
        let allocs: Vec<UavAllocation> = (0..n_uavs)
            .map(|m| {
                let links = freeze(m, gains, assoc, &powers);
                match scheme {
                    PowerScheme::Secure => secure_uav(m, links, budget, cfg),
                    PowerScheme::MaxMinSinr => maxmin_uav(m, links, budget),
                    PowerScheme::MaxSumRate => sumrate_uav(m, links, budget),
                }
            })
            .collect();
        let mut next = PowerMatrix::zeros(n_uavs, n_channels, budget);
        for a in &allocs {
            for (link, p) in a.links.iter().zip(&a.p) {
                next.gamma[a.uav][link.channel] = *p;
            }
        }
        powers = next;
        matrices.push(powers.clone());
        iterations.push(allocs);
    }
    AllocationRun { powers, iterations, matrices }
}

pub fn secure_allocate(gains: &GainTable, assoc: &AssociationArray, budget: f64, cfg: &PowerConfig) -> AllocationRun {
    allocate(PowerScheme::Secure, gains, assoc, budget, cfg)
}

pub fn maxmin_sinr_allocate(gains: &GainTable, assoc: &AssociationArray, budget: f64, cfg: &PowerConfig) -> AllocationRun {
    allocate(PowerScheme::MaxMinSinr, gains, assoc, budget, cfg)
}

pub fn max_sumrate_allocate(gains: &GainTable, assoc: &AssociationArray, budget: f64, cfg: &PowerConfig) -> AllocationRun {
    allocate(PowerScheme::MaxSumRate, gains, assoc, budget, cfg)
}
