//! Node association as a potential game over `(uav, subchannel)` resources.
//!
//! Players are legitimate nodes, actions are free resources and the payoff of
//! a move is the marginal change in the node's own `φ`. Powers are held fixed
//! during the game, so a node's move leaves every other node's `φ` untouched
//! and the sum of `φ` is an exact potential.
//!
//! Three solvers share the round structure below: synchronous log-linear
//! learning (softmax action sampling), best response (argmax sampling) and a
//! centralized greedy benchmark.

use serde::Serialize;

use crate::radio::{AssociationArray, PhiTable, Resource, PHI_CAP};
use crate::scenario::RandomStream;

pub type ResourceAction = Resource;

/// `φ` credited to a node that holds no resource.
pub const UNASSOCIATED_PHI: f64 = -PHI_CAP;

pub const DEFAULT_MAX_ROUNDS: usize = 10;

/// A node's request for a free resource, submitted only when the gain is positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proposal {
    pub node: usize,
    pub action: ResourceAction,
    pub payoff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceEntry {
    pub round: usize,
    pub node: usize,
    pub uav: usize,
    pub channel: usize,
    pub payoff: f64,
    pub winner: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssociationOutcome {
    pub assoc: AssociationArray,
    /// Rounds executed, including the final round that found no proposals.
    /// For the greedy solver this is the number of bindings.
    pub rounds: usize,
    pub converged: bool,
    /// Potential before the first round and after every round.
    pub potential: Vec<f64>,
    pub trace: Vec<TraceEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionRule {
    /// Smooth best response, `π(r) ∝ exp(f(r))`.
    LogLinear,
    /// Deterministic argmax, lowest resource index on ties.
    BestResponse,
}

pub fn current_phi(phi: &PhiTable, assoc: &AssociationArray, l: usize) -> f64 {
    assoc.serving(l).map_or(UNASSOCIATED_PHI, |r| phi.get(l, r))
}

/// `φ_l(r′) − φ_l(r)`, with the unassociated sentinel standing in for a missing `r`.
pub fn marginal_payoff(phi: &PhiTable, l: usize, candidate: Resource, current: Option<Resource>) -> f64 {
    if Some(candidate) == current {
        return 0.0;
    }
    let now = current.map_or(UNASSOCIATED_PHI, |r| phi.get(l, r));
    phi.get(l, candidate) - now
}

/// Game potential: total `φ` over all legitimate nodes.
pub fn potential(phi: &PhiTable, assoc: &AssociationArray) -> f64 {
    (0..assoc.n_legit()).map(|l| current_phi(phi, assoc, l)).sum()
}

/// Free resources that strictly improve node `l`, with their marginal payoffs.
pub fn available_actions(phi: &PhiTable, assoc: &AssociationArray, l: usize) -> Vec<(Resource, f64)> {
    let current = assoc.serving(l);
    assoc
        .resources()
        .filter(|r| assoc.is_free(*r))
        .map(|r| (r, marginal_payoff(phi, l, r, current)))
        .filter(|(_, f)| *f > 0.0)
        .collect()
}

/// Softmax over payoffs with max-subtraction. `None` for an empty action set.
pub fn sbr_distribution(payoffs: &[f64]) -> Option<Vec<f64>> {
    let max = payoffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if payoffs.is_empty() {
        return None;
    }
    let w: Vec<f64> = payoffs.iter().map(|f| (f - max).exp()).collect();
    let z: f64 = w.iter().sum();
    Some(w.into_iter().map(|x| x / z).collect())
}

fn sample_index(probs: &[f64], rng: &mut RandomStream) -> usize {
    let u = rng.uniform();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn choose(actions: &[(Resource, f64)], rule: ActionRule, rng: &mut RandomStream) -> (Resource, f64) {
    match rule {
        ActionRule::LogLinear => {
            let payoffs: Vec<f64> = actions.iter().map(|a| a.1).collect();
            let probs = sbr_distribution(&payoffs).expect("non-empty action set");
            actions[sample_index(&probs, rng)]
        }
        ActionRule::BestResponse => {
            let mut best = actions[0];
            for a in &actions[1..] {
                if a.1 > best.1 {
                    best = *a;
                }
            }
            best
        }
    }
}

/// Runs the synchronous round protocol from `init`.
///
/// Each round every node proposes at most one free resource against the
/// round-start state. Each UAV then grants each contested subchannel to the
/// proposer with the highest payoff (uniformly random among exact ties); the
/// winner releases its old resource, which becomes available next round.
/// Losers wait for the next round.
pub fn play(
    phi: &PhiTable,
    init: AssociationArray,
    rule: ActionRule,
    rng: &mut RandomStream,
    max_rounds: usize,
) -> AssociationOutcome {
    let mut assoc = init;
    let mut potential_trace = vec![potential(phi, &assoc)];
    let mut trace = Vec::new();
    let mut rounds = 0;
    let mut converged = false;

    while rounds < max_rounds {
        rounds += 1;
        let mut proposals = Vec::new();
        for l in 0..assoc.n_legit() {
            let actions = available_actions(phi, &assoc, l);
            if actions.is_empty() {
                continue;
            }
            let (action, payoff) = choose(&actions, rule, rng);
            proposals.push(Proposal { node: l, action, payoff });
        }
        if proposals.is_empty() {
            converged = true;
            break;
        }

        let mut winners = Vec::new();
        for r in assoc.free_resources() {
            let contenders: Vec<&Proposal> = proposals.iter().filter(|p| p.action == r).collect();
            if contenders.is_empty() {
                continue;
            }
            let top = contenders.iter().map(|p| p.payoff).fold(f64::NEG_INFINITY, f64::max);
            let tied: Vec<&&Proposal> = contenders.iter().filter(|p| p.payoff == top).collect();
            let pick = if tied.len() == 1 { 0 } else { rng.index(tied.len()) };
            winners.push(tied[pick].node);
            assoc
                .relocate(tied[pick].node, r)
                .expect("resource was free at round start and each node proposes once");
        }
        for p in &proposals {
            trace.push(TraceEntry {
                round: rounds,
                node: p.node,
                uav: p.action.uav,
                channel: p.action.channel,
                payoff: p.payoff,
                winner: winners.contains(&p.node),
            });
        }
        potential_trace.push(potential(phi, &assoc));
    }

    AssociationOutcome { assoc, rounds, converged, potential: potential_trace, trace }
}

/// Synchronous log-linear learning.
pub fn slll_associate(
    phi: &PhiTable,
    init: AssociationArray,
    rng: &mut RandomStream,
    max_rounds: usize,
) -> AssociationOutcome {
    play(phi, init, ActionRule::LogLinear, rng, max_rounds)
}

/// Best-response benchmark: same protocol, argmax action choice.
pub fn best_response_associate(
    phi: &PhiTable,
    init: AssociationArray,
    rng: &mut RandomStream,
    max_rounds: usize,
) -> AssociationOutcome {
    play(phi, init, ActionRule::BestResponse, rng, max_rounds)
}

/// Greedy benchmark: repeatedly binds the (unassociated node, free resource)
/// pair with the largest `φ` until every node is served or resources run out.
pub fn greedy_associate(phi: &PhiTable, n_legit: usize, n_uavs: usize, n_channels: usize) -> AssociationOutcome {
    let mut assoc = AssociationArray::empty(n_legit, n_uavs, n_channels);
    let mut potential_trace = vec![potential(phi, &assoc)];
    let mut trace = Vec::new();
    loop {
        let mut best: Option<(usize, Resource, f64)> = None;
        for l in (0..n_legit).filter(|l| assoc.serving(*l).is_none()) {
            for r in assoc.free_resources() {
                let v = phi.get(l, r);
                if best.map_or(true, |b| v > b.2) {
                    best = Some((l, r, v));
                }
            }
        }
        let Some((l, r, v)) = best else { break };
        assoc.assign(l, r).expect("free resource");
        trace.push(TraceEntry {
            round: trace.len() + 1,
            node: l,
            uav: r.uav,
            channel: r.channel,
            payoff: v - UNASSOCIATED_PHI,
            winner: true,
        });
        potential_trace.push(potential(phi, &assoc));
    }
    AssociationOutcome { rounds: trace.len(), assoc, converged: true, potential: potential_trace, trace }
}

/// Nodes holding a profitable unilateral deviation to a free resource, with
/// the best such resource and its gain. Empty exactly at a pure equilibrium.
pub fn profitable_deviations(phi: &PhiTable, assoc: &AssociationArray) -> Vec<(usize, Resource, f64)> {
    (0..assoc.n_legit())
        .filter_map(|l| {
            available_actions(phi, assoc, l)
                .into_iter()
                .fold(None, |best: Option<(Resource, f64)>, a| match best {
                    Some(b) if b.1 >= a.1 => Some(b),
                    _ => Some(a),
                })
                .map(|(r, f)| (l, r, f))
        })
        .collect()
}
