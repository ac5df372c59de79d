//! Block-coordinate ascent over association, positioning and power.
//!
//! k-means fixes the UAV ground positions once. Each BCA iteration then runs
//! the association game and the altitude game with uniform transmit powers.
//! The selected power allocator runs once on the final state; intermediate
//! iterations report metrics under the uniform powers unless
//! `power_every_iteration` is set. The allocators feed nothing back into the
//! other two blocks, so the final state does not depend on that flag.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::association::{
    self, best_response_associate, greedy_associate, profitable_deviations, slll_associate,
    AssociationOutcome, TraceEntry,
};
use crate::channel::EnvParams;
use crate::positioning::{
    adapted_greedy_place, altitude_deviations, br_altitude, AltitudeUpdate, kmeans_2d, AltitudeGame, AltitudeMove,
    Deployment, PositioningError,
};
use crate::power::{allocate, AllocationRun, PowerConfig, PowerScheme};
use crate::radio::{AssociationArray, GainTable, Nodes, PhiTable, PowerMatrix, RadioError, Resource, SecrecySnapshot};
use crate::scenario::{choose_uav_count, RandomStream, Region, Scenario, ScenarioError};

#[derive(Debug, Error)]
pub enum FrameworkError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Radio(#[from] RadioError),
    #[error(transparent)]
    Positioning(#[from] PositioningError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AssociationScheme {
    Slll,
    BestResponse,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PositioningScheme {
    /// k-means ground positions plus the best-response altitude game.
    KMeansBestResponse,
    /// One-by-one placement that also fixes the association.
    AdaptedGreedy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BcaConfig {
    pub n_it: usize,
    pub association: AssociationScheme,
    pub positioning: PositioningScheme,
    pub power: PowerScheme,
    pub n_subchannels: usize,
    /// Per-UAV transmit SNR budget, linear.
    pub gamma_p: f64,
    pub env: EnvParams,
    pub power_cfg: PowerConfig,
    pub max_association_rounds: usize,
    pub max_altitude_rounds: usize,
    pub altitude_update: AltitudeUpdate,
    pub kmeans_iters: usize,
    /// Run the power allocator after every iteration instead of only after
    /// the last one. The final state is the same either way; only the
    /// metrics of intermediate iterations differ.
    pub power_every_iteration: bool,
}

impl Default for BcaConfig {
    fn default() -> Self {
        Self {
            n_it: 5,
            association: AssociationScheme::Slll,
            positioning: PositioningScheme::KMeansBestResponse,
            power: PowerScheme::Secure,
            n_subchannels: 8,
            gamma_p: 100.0,
            env: EnvParams::urban(),
            power_cfg: PowerConfig::default(),
            max_association_rounds: association::DEFAULT_MAX_ROUNDS,
            max_altitude_rounds: crate::positioning::DEFAULT_ALTITUDE_ROUNDS,
            altitude_update: AltitudeUpdate::Sequential,
            kmeans_iters: crate::positioning::DEFAULT_KMEANS_ITERS,
            power_every_iteration: false,
        }
    }
}

impl BcaConfig {
    pub fn validate(&self) -> Result<(), FrameworkError> {
        if self.n_it == 0 {
            return Err(FrameworkError::Config("n_it must be at least 1".into()));
        }
        if self.n_subchannels == 0 {
            return Err(FrameworkError::Config("n_subchannels must be at least 1".into()));
        }
        if !(self.gamma_p > 0.0) {
            return Err(FrameworkError::Config("gamma_p must be positive".into()));
        }
        if !(self.power_cfg.gamma_0 > 0.0) || self.power_cfg.n_iter_bis == 0 {
            return Err(FrameworkError::Config("gamma_0 > 0 and n_iter_bis >= 1 required".into()));
        }
        self.env.validate().map_err(FrameworkError::Config)
    }
}

/// Named scheme combinations compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "proposed")]
    Proposed,
    #[serde(rename = "br")]
    BestResponse,
    #[serde(rename = "greedy")]
    Greedy,
    #[serde(rename = "adapted")]
    AdaptedGreedy,
    #[serde(rename = "maxmin")]
    MaxMinSinr,
    #[serde(rename = "maxsum")]
    MaxSumRate,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::Proposed,
        Scheme::BestResponse,
        Scheme::Greedy,
        Scheme::AdaptedGreedy,
        Scheme::MaxMinSinr,
        Scheme::MaxSumRate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::BestResponse => "br",
            Scheme::Greedy => "greedy",
            Scheme::AdaptedGreedy => "adapted",
            Scheme::MaxMinSinr => "maxmin",
            Scheme::MaxSumRate => "maxsum",
        }
    }

    /// `base` with this scheme's block selectors.
    pub fn configure(self, base: &BcaConfig) -> BcaConfig {
        let (association, positioning, power) = match self {
            Scheme::Proposed => (AssociationScheme::Slll, PositioningScheme::KMeansBestResponse, PowerScheme::Secure),
            Scheme::BestResponse => {
                (AssociationScheme::BestResponse, PositioningScheme::KMeansBestResponse, PowerScheme::Secure)
            }
            Scheme::Greedy => (AssociationScheme::Greedy, PositioningScheme::KMeansBestResponse, PowerScheme::Secure),
            Scheme::AdaptedGreedy => (AssociationScheme::Greedy, PositioningScheme::AdaptedGreedy, PowerScheme::Secure),
            Scheme::MaxMinSinr => {
                (AssociationScheme::Slll, PositioningScheme::KMeansBestResponse, PowerScheme::MaxMinSinr)
            }
            Scheme::MaxSumRate => {
                (AssociationScheme::Slll, PositioningScheme::KMeansBestResponse, PowerScheme::MaxSumRate)
            }
        };
        BcaConfig { association, positioning, power, ..base.clone() }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = FrameworkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| FrameworkError::Config(format!("unknown scheme {s:?}")))
    }
}

/// The fixed inputs of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub nodes: Nodes,
    pub region: Region,
    pub env: EnvParams,
    pub n_uavs: usize,
    pub n_channels: usize,
    pub budget: f64,
}

impl Network {
    pub fn from_scenario(scenario: &Scenario, config: &BcaConfig) -> Result<Self, FrameworkError> {
        let nodes = Nodes::new(scenario.legitimate(), scenario.eavesdroppers());
        let n_uavs = choose_uav_count(nodes.legit.len(), config.n_subchannels)?;
        Ok(Self {
            nodes,
            region: scenario.region,
            env: config.env,
            n_uavs,
            n_channels: config.n_subchannels,
            budget: config.gamma_p,
        })
    }

    /// Powers assumed by the association and altitude games.
    pub fn uniform_powers(&self) -> PowerMatrix {
        PowerMatrix::uniform(self.n_uavs, self.n_channels, self.budget)
    }

    pub fn gains(&self, deployment: &Deployment) -> Result<GainTable, RadioError> {
        GainTable::compute(&deployment.positions, &self.nodes, &self.env)
    }

    pub fn phi_table(&self, gains: &GainTable) -> Result<PhiTable, RadioError> {
        PhiTable::build(gains, &self.uniform_powers(), self.n_channels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// False for iterations skipped after convergence; metrics are carried over.
    pub executed: bool,
    pub sum_secrecy_rate: f64,
    pub positive_secrecy_pct: f64,
    pub association_rounds: usize,
    pub association_converged: bool,
    pub altitude_rounds: usize,
    pub altitude_converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionRecord {
    pub n_uavs: usize,
    pub assoc: AssociationArray,
    pub deployment: Deployment,
    pub gains: GainTable,
    pub powers: PowerMatrix,
    pub allocation: AllocationRun,
    pub snapshot: SecrecySnapshot,
    pub iterations: Vec<IterationRecord>,
    /// Both games reached a fixed point within `n_it` iterations.
    pub converged: bool,
    /// Game potential after each association round, per executed iteration.
    pub association_potential: Vec<Vec<f64>>,
    pub association_trace: Vec<(usize, TraceEntry)>,
    pub altitude_moves: Vec<(usize, AltitudeMove)>,
    pub deployments: Vec<Deployment>,
}

impl SolutionRecord {
    pub fn final_metrics(&self) -> &IterationRecord {
        self.iterations.last().expect("n_it >= 1")
    }

    pub fn max_association_rounds(&self) -> usize {
        self.iterations.iter().filter(|r| r.executed).map(|r| r.association_rounds).max().unwrap_or(0)
    }

    pub fn max_altitude_rounds(&self) -> usize {
        self.iterations.iter().filter(|r| r.executed).map(|r| r.altitude_rounds).max().unwrap_or(0)
    }

    /// One row per BCA iteration, prefixed by `realization`.
    pub fn write_iterations_csv<W: Write>(&self, realization: usize, header: bool, out: W) -> Result<(), FrameworkError> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| FrameworkError::Csv(e.to_string());
        if header {
            w.write_record([
                "realization",
                "iteration",
                "executed",
                "sum_secrecy_rate",
                "positive_secrecy_pct",
                "association_rounds",
                "association_converged",
                "altitude_rounds",
                "altitude_converged",
            ])
            .map_err(err)?;
        }
        for r in &self.iterations {
            w.serialize((
                realization,
                r.iteration,
                r.executed,
                r.sum_secrecy_rate,
                r.positive_secrecy_pct,
                r.association_rounds,
                r.association_converged,
                r.altitude_rounds,
                r.altitude_converged,
            ))
            .map_err(err)?;
        }
        w.flush().map_err(|e| FrameworkError::Csv(e.to_string()))
    }

    /// Round-by-round association trace: `iteration, round, node, uav, channel, payoff, winner`.
    pub fn write_association_trace<W: Write>(&self, out: W) -> Result<(), FrameworkError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "round", "node", "uav", "channel", "payoff", "winner"])
            .map_err(|e| FrameworkError::Csv(e.to_string()))?;
        for (it, t) in &self.association_trace {
            w.serialize((it, t.round, t.node, t.uav, t.channel, t.payoff, t.winner))
                .map_err(|e| FrameworkError::Csv(e.to_string()))?;
        }
        w.flush().map_err(|e| FrameworkError::Csv(e.to_string()))
    }
}

fn evaluate(
    network: &Network,
    config: &BcaConfig,
    gains: &GainTable,
    assoc: &AssociationArray,
) -> Result<(AllocationRun, SecrecySnapshot), FrameworkError> {
    let run = allocate(config.power, gains, assoc, network.budget, &config.power_cfg);
    let snapshot = SecrecySnapshot::evaluate(gains, assoc, &run.powers)?;
    Ok((run, snapshot))
}

/// Runs the full pipeline on one realization.
pub fn run_bca(scenario: &Scenario, config: &BcaConfig, rng: &mut RandomStream) -> Result<SolutionRecord, FrameworkError> {
    config.validate()?;
    let network = Network::from_scenario(scenario, config)?;
    run_bca_on(&network, config, rng)
}

/// As [`run_bca`], on an already-built network.
pub fn run_bca_on(network: &Network, config: &BcaConfig, rng: &mut RandomStream) -> Result<SolutionRecord, FrameworkError> {
    config.validate()?;
    match config.positioning {
        PositioningScheme::AdaptedGreedy => run_adapted_greedy(network, config, rng),
        PositioningScheme::KMeansBestResponse => run_iterative(network, config, rng),
    }
}

fn run_iterative(network: &Network, config: &BcaConfig, rng: &mut RandomStream) -> Result<SolutionRecord, FrameworkError> {
    let clusters = kmeans_2d(&network.nodes.legit, network.n_uavs, rng, config.kmeans_iters)?;
    let mut deployment = Deployment::at_midpoint(&clusters.centroids, &network.region);
    let mut gains = network.gains(&deployment)?;
    let mut assoc = AssociationArray::empty(network.nodes.legit.len(), network.n_uavs, network.n_channels);
    let uniform = network.uniform_powers();

    let mut iterations = Vec::with_capacity(config.n_it);
    let mut association_potential = Vec::new();
    let mut association_trace = Vec::new();
    let mut altitude_moves = Vec::new();
    let mut deployments = Vec::new();
    let mut converged = false;
    let mut last: Option<(AllocationRun, SecrecySnapshot)> = None;

    for it in 1..=config.n_it {
        if converged {
            let prev = *iterations.last().expect("converged after an executed iteration");
            iterations.push(IterationRecord {
                iteration: it,
                executed: false,
                association_rounds: 0,
                altitude_rounds: 0,
                ..prev
            });
            continue;
        }

        let phi = network.phi_table(&gains)?;
        let outcome: AssociationOutcome = match config.association {
            AssociationScheme::Slll => slll_associate(&phi, assoc.clone(), rng, config.max_association_rounds),
            AssociationScheme::BestResponse => {
                best_response_associate(&phi, assoc.clone(), rng, config.max_association_rounds)
            }
            AssociationScheme::Greedy => greedy_associate(&phi, network.nodes.legit.len(), network.n_uavs, network.n_channels),
        };
        let association_moved = outcome.assoc != assoc;
        assoc = outcome.assoc;
        association_potential.push(outcome.potential);
        association_trace.extend(outcome.trace.into_iter().map(|t| (it, t)));

        let game = AltitudeGame { nodes: &network.nodes, env: &network.env, assoc: &assoc, powers: &uniform };
        let alt = br_altitude(&game, deployment, rng, config.max_altitude_rounds, config.altitude_update)?;
        deployment = alt.deployment;
        gains = alt.gains;
        altitude_moves.extend(alt.moves.iter().map(|m| (it, *m)));
        deployments.push(deployment.clone());

        converged = outcome.converged && !association_moved && alt.converged && alt.moves.is_empty();
        let snapshot = if config.power_every_iteration || converged || it == config.n_it {
            let (run, snapshot) = evaluate(network, config, &gains, &assoc)?;
            last = Some((run, snapshot.clone()));
            snapshot
        } else {
            SecrecySnapshot::evaluate(&gains, &assoc, &uniform)?
        };
        iterations.push(IterationRecord {
            iteration: it,
            executed: true,
            sum_secrecy_rate: snapshot.sum_secrecy_rate(),
            positive_secrecy_pct: snapshot.positive_secrecy_fraction()?,
            association_rounds: outcome.rounds,
            association_converged: outcome.converged,
            altitude_rounds: alt.rounds,
            altitude_converged: alt.converged,
        });
    }

    let (allocation, snapshot) = last.expect("at least one executed iteration");
    Ok(SolutionRecord {
        n_uavs: network.n_uavs,
        powers: allocation.powers.clone(),
        assoc,
        deployment,
        gains,
        allocation,
        snapshot,
        iterations,
        converged,
        association_potential,
        association_trace,
        altitude_moves,
        deployments,
    })
}

fn run_adapted_greedy(network: &Network, config: &BcaConfig, rng: &mut RandomStream) -> Result<SolutionRecord, FrameworkError> {
    let placed = adapted_greedy_place(
        &network.nodes,
        &network.env,
        &network.region,
        network.n_uavs,
        network.n_channels,
        network.budget,
        rng,
        config.kmeans_iters,
    )?;
    let gains = network.gains(&placed.deployment)?;
    let (allocation, snapshot) = evaluate(network, config, &gains, &placed.assoc)?;
    let first = IterationRecord {
        iteration: 1,
        executed: true,
        sum_secrecy_rate: snapshot.sum_secrecy_rate(),
        positive_secrecy_pct: snapshot.positive_secrecy_fraction()?,
        association_rounds: placed.bindings,
        association_converged: true,
        altitude_rounds: placed.evaluations,
        altitude_converged: true,
    };
    let iterations = (1..=config.n_it)
        .map(|it| {
            if it == 1 {
                first
            } else {
                IterationRecord { iteration: it, executed: false, association_rounds: 0, altitude_rounds: 0, ..first }
            }
        })
        .collect();
    Ok(SolutionRecord {
        n_uavs: network.n_uavs,
        powers: allocation.powers.clone(),
        assoc: placed.assoc,
        deployments: vec![placed.deployment.clone()],
        deployment: placed.deployment,
        gains,
        allocation,
        snapshot,
        iterations,
        converged: true,
        association_potential: Vec::new(),
        association_trace: Vec::new(),
        altitude_moves: Vec::new(),
    })
}

/// Unilateral improvements available at a terminal state.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EquilibriumReport {
    /// `(node, better free resource, gain)`.
    pub association: Vec<(usize, Resource, f64)>,
    /// `(uav, better level, gain)`.
    pub altitude: Vec<(usize, usize, f64)>,
}

impl EquilibriumReport {
    pub fn is_clean(&self) -> bool {
        self.association.is_empty() && self.altitude.is_empty()
    }
}

/// Exhaustively checks every node's free-resource deviations and every UAV's
/// altitude deviations at the given state, under uniform powers.
pub fn certify_equilibrium(
    network: &Network,
    deployment: &Deployment,
    assoc: &AssociationArray,
) -> Result<EquilibriumReport, FrameworkError> {
    let gains = network.gains(deployment)?;
    let phi = network.phi_table(&gains)?;
    let uniform = network.uniform_powers();
    let game = AltitudeGame { nodes: &network.nodes, env: &network.env, assoc, powers: &uniform };
    Ok(EquilibriumReport {
        association: profitable_deviations(&phi, assoc),
        altitude: altitude_deviations(&game, deployment, &gains)?,
    })
}

/// [`certify_equilibrium`] at a record's terminal state.
pub fn certify_record(network: &Network, record: &SolutionRecord) -> Result<EquilibriumReport, FrameworkError> {
    certify_equilibrium(network, &record.deployment, &record.assoc)
}
