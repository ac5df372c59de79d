//! UAV placement: 2D k-means over legitimate nodes, then a best-response
//! altitude game on a discrete level grid. Also hosts the adapted-greedy
//! benchmark, which places UAVs one at a time and fills each with the best
//! remaining nodes.

use std::io::Write;

use rand::seq::index::sample;
use serde::Serialize;
use thiserror::Error;

use crate::channel::EnvParams;
use crate::radio::{
    phi_metric, AssociationArray, GainTable, Nodes, PhiTable, PowerMatrix, RadioError, Resource,
};
use crate::scenario::{RandomStream, Region};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PositioningError {
    #[error("k-means needs at least one point")]
    NoPoints,
    #[error("k-means needs k >= 1")]
    ZeroClusters,
    #[error(transparent)]
    Radio(#[from] RadioError),
    #[error("csv: {0}")]
    Csv(String),
}

pub const KMEANS_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_KMEANS_ITERS: usize = 100;
pub const DEFAULT_ALTITUDE_ROUNDS: usize = 10;

/// UAV positions with each UAV's altitude expressed as a level on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub positions: Vec<[f64; 3]>,
    pub grid: Vec<f64>,
    pub levels: Vec<usize>,
}

impl Deployment {
    /// Places UAVs over `ground` points (clamped into the region) at the
    /// middle level of the grid, index `⌊N_z / 2⌋`.
    pub fn at_midpoint(ground: &[[f64; 2]], region: &Region) -> Self {
        let grid = region.altitude_grid();
        let mid = grid.len() / 2;
        let positions = ground
            .iter()
            .map(|p| {
                [
                    p[0].clamp(region.x_min, region.x_max),
                    p[1].clamp(region.y_min, region.y_max),
                    grid[mid],
                ]
            })
            .collect::<Vec<_>>();
        let levels = vec![mid; positions.len()];
        Self { positions, grid, levels }
    }

    pub fn n_uavs(&self) -> usize {
        self.positions.len()
    }

    pub fn set_level(&mut self, m: usize, level: usize) {
        self.levels[m] = level;
        self.positions[m][2] = self.grid[level];
    }

    /// Position of UAV `m` if it were moved to `level`.
    pub fn at_level(&self, m: usize, level: usize) -> [f64; 3] {
        let p = self.positions[m];
        [p[0], p[1], self.grid[level]]
    }

    pub fn within(&self, region: &Region) -> bool {
        self.positions.iter().all(|p| region.contains(*p))
            && self.levels.iter().zip(&self.positions).all(|(l, p)| self.grid[*l] == p[2])
    }

    /// Rows `iteration, m, x, y, z`. Writes a header when `header` is set.
    pub fn write_csv<W: Write>(&self, iteration: usize, header: bool, out: W) -> Result<(), PositioningError> {
        #[derive(Serialize)]
        struct Row {
            iteration: usize,
            m: usize,
            x: f64,
            y: f64,
            z: f64,
        }
        let mut w = csv::WriterBuilder::new().has_headers(header).from_writer(out);
        for (m, p) in self.positions.iter().enumerate() {
            w.serialize(Row { iteration, m, x: p[0], y: p[1], z: p[2] })
                .map_err(|e| PositioningError::Csv(e.to_string()))?;
        }
        w.flush().map_err(|e| PositioningError::Csv(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub centroids: Vec<[f64; 2]>,
    pub membership: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    /// Within-cluster sum of squares after each assignment step.
    pub sse: Vec<f64>,
}

impl Clustering {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.centroids.len()];
        for &c in &self.membership {
            sizes[c] += 1;
        }
        sizes
    }
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn nearest(p: [f64; 2], centroids: &[[f64; 2]]) -> usize {
    let mut best = 0;
    let mut best_d = dist2(p, centroids[0]);
    for (i, c) in centroids.iter().enumerate().skip(1) {
        let d = dist2(p, *c);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Lloyd's algorithm seeded from distinct random data points.
///
/// Empty clusters are reseeded at the point farthest from its own centroid.
/// When `k` exceeds the number of points, the surplus centroids start at
/// jittered copies of random points.
pub fn kmeans_2d(
    points: &[[f64; 2]],
    k: usize,
    rng: &mut RandomStream,
    max_iters: usize,
) -> Result<Clustering, PositioningError> {
    if points.is_empty() {
        return Err(PositioningError::NoPoints);
    }
    if k == 0 {
        return Err(PositioningError::ZeroClusters);
    }
    let n = points.len();
    let mut centroids: Vec<[f64; 2]> = sample(rng, n, k.min(n)).into_iter().map(|i| points[i]).collect();
    while centroids.len() < k {
        let p = points[rng.index(n)];
        centroids.push([p[0] + rng.uniform() - 0.5, p[1] + rng.uniform() - 0.5]);
    }

    let mut membership = vec![0; n];
    let mut sse = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        iterations += 1;
        for (i, p) in points.iter().enumerate() {
            membership[i] = nearest(*p, &centroids);
        }
        sse.push(points.iter().zip(&membership).map(|(p, c)| dist2(*p, centroids[*c])).sum());

        let mut sums = vec![[0.0f64; 2]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&membership) {
            sums[c][0] += p[0];
            sums[c][1] += p[1];
            counts[c] += 1;
        }
        let mut next = centroids.clone();
        let mut taken = vec![false; n];
        for c in 0..k {
            if counts[c] > 0 {
                next[c] = [sums[c][0] / counts[c] as f64, sums[c][1] / counts[c] as f64];
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|i| !taken[*i])
                .max_by(|a, b| {
                    let da = dist2(points[*a], next[membership[*a]]);
                    let db = dist2(points[*b], next[membership[*b]]);
                    da.total_cmp(&db).then(b.cmp(a))
                });
            if let Some(i) = far {
                taken[i] = true;
                next[c] = points[i];
            }
        }
        let shift = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| dist2(*a, *b).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        if shift <= KMEANS_TOLERANCE {
            converged = true;
            break;
        }
    }
    for (i, p) in points.iter().enumerate() {
        membership[i] = nearest(*p, &centroids);
    }
    Ok(Clustering { centroids, membership, iterations, converged, sse })
}

/// `Φ_m`: total `φ` over the nodes served by UAV `m` under `gains`.
pub fn uav_phi_sum(
    m: usize,
    gains: &GainTable,
    assoc: &AssociationArray,
    powers: &PowerMatrix,
) -> Result<f64, RadioError> {
    let mut total = 0.0;
    for (c, l) in assoc.served_by(m) {
        total += phi_metric(l, Resource::new(m, c), powers, gains)?;
    }
    Ok(total)
}

/// Fixed inputs of the altitude game.
#[derive(Debug, Clone, Copy)]
pub struct AltitudeGame<'a> {
    pub nodes: &'a Nodes,
    pub env: &'a EnvParams,
    pub assoc: &'a AssociationArray,
    pub powers: &'a PowerMatrix,
}

impl AltitudeGame<'_> {
    /// `Φ_m` with UAV `m` moved to `level` and every other UAV where it is.
    pub fn phi_sum_at(
        &self,
        m: usize,
        level: usize,
        deployment: &Deployment,
        gains: &GainTable,
    ) -> Result<f64, RadioError> {
        if self.assoc.served_by(m).is_empty() {
            return Ok(0.0);
        }
        let mut moved = gains.clone();
        moved.set_row(m, GainTable::row(deployment.at_level(m, level), self.nodes, self.env)?);
        uav_phi_sum(m, &moved, self.assoc, self.powers)
    }

    /// Marginal payoff `Φ_m(z′) − Φ_m(z_m)` for every level `z′` on the grid.
    pub fn payoffs(&self, m: usize, deployment: &Deployment, gains: &GainTable) -> Result<Vec<f64>, RadioError> {
        let current = deployment.levels[m];
        let here = self.phi_sum_at(m, current, deployment, gains)?;
        (0..deployment.grid.len())
            .map(|lvl| {
                if lvl == current {
                    Ok(0.0)
                } else {
                    Ok(self.phi_sum_at(m, lvl, deployment, gains)? - here)
                }
            })
            .collect()
    }
}

/// `f_m(z′)` for a single candidate level.
pub fn altitude_payoff(
    game: &AltitudeGame<'_>,
    m: usize,
    level: usize,
    deployment: &Deployment,
    gains: &GainTable,
) -> Result<f64, RadioError> {
    if level == deployment.levels[m] {
        return Ok(0.0);
    }
    Ok(game.phi_sum_at(m, level, deployment, gains)? - game.phi_sum_at(m, deployment.levels[m], deployment, gains)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AltitudeMove {
    pub round: usize,
    pub uav: usize,
    pub from_level: usize,
    pub to_level: usize,
    pub payoff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AltitudeOutcome {
    pub deployment: Deployment,
    pub gains: GainTable,
    pub rounds: usize,
    pub converged: bool,
    pub moves: Vec<AltitudeMove>,
}

/// When a UAV's altitude change becomes visible to the other UAVs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub enum AltitudeUpdate {
    /// UAVs decide in index order and each move applies immediately, so
    /// later UAVs in the same round see it.
    #[default]
    Sequential,
    /// Every UAV decides against the round-start state; all moves commit
    /// together at the end of the round.
    Simultaneous,
}

/// Best-response altitude dynamics.
///
/// Each UAV computes its marginal payoff over the grid, keeps only strictly
/// positive gains and jumps to a uniformly random maximizer. A round without
/// any move ends the game.
pub fn br_altitude(
    game: &AltitudeGame<'_>,
    deployment: Deployment,
    rng: &mut RandomStream,
    max_rounds: usize,
    update: AltitudeUpdate,
) -> Result<AltitudeOutcome, RadioError> {
    let mut deployment = deployment;
    let mut gains = GainTable::compute(&deployment.positions, game.nodes, game.env)?;
    let mut moves = Vec::new();
    let mut rounds = 0;
    let mut converged = false;
    while rounds < max_rounds {
        rounds += 1;
        let mut planned = Vec::new();
        for m in 0..deployment.n_uavs() {
            let f = game.payoffs(m, &deployment, &gains)?;
            let top = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !(top > 0.0) {
                continue;
            }
            let argmax: Vec<usize> = (0..f.len()).filter(|i| f[*i] == top).collect();
            let pick = if argmax.len() == 1 { argmax[0] } else { argmax[rng.index(argmax.len())] };
            let mv = AltitudeMove { round: rounds, uav: m, from_level: deployment.levels[m], to_level: pick, payoff: top };
            if update == AltitudeUpdate::Sequential {
                deployment.set_level(m, pick);
                gains.set_row(m, GainTable::row(deployment.positions[m], game.nodes, game.env)?);
            }
            planned.push(mv);
        }
        if planned.is_empty() {
            converged = true;
            break;
        }
        if update == AltitudeUpdate::Simultaneous {
            for mv in &planned {
                deployment.set_level(mv.uav, mv.to_level);
                gains.set_row(mv.uav, GainTable::row(deployment.positions[mv.uav], game.nodes, game.env)?);
            }
        }
        moves.extend(planned);
    }
    Ok(AltitudeOutcome { deployment, gains, rounds, converged, moves })
}

/// UAVs with a strictly profitable altitude change at the given state.
pub fn altitude_deviations(
    game: &AltitudeGame<'_>,
    deployment: &Deployment,
    gains: &GainTable,
) -> Result<Vec<(usize, usize, f64)>, RadioError> {
    let mut out = Vec::new();
    for m in 0..deployment.n_uavs() {
        let f = game.payoffs(m, deployment, gains)?;
        if let Some((lvl, v)) = f
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, v)| *v > 0.0)
            .max_by(|a, b| a.1.total_cmp(&b.1))
        {
            out.push((m, lvl, v));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyPlacement {
    pub deployment: Deployment,
    pub assoc: AssociationArray,
    pub bindings: usize,
    /// Altitude candidates evaluated across all UAVs.
    pub evaluations: usize,
}

/// Adapted-greedy benchmark.
///
/// UAVs are placed in index order. UAV `m` goes over the centroid of the
/// largest k-means cluster of the still-unassociated nodes (`k` = UAVs left
/// to place); each grid altitude is tried, and at each one up to `C` of the
/// remaining nodes are bound greedily by `φ`. The altitude with the largest
/// total `φ` of its bound nodes wins and those bindings are kept. UAVs not yet
/// placed transmit nothing while earlier ones use `budget / C` per channel.
pub fn adapted_greedy_place(
    nodes: &Nodes,
    env: &EnvParams,
    region: &Region,
    n_uavs: usize,
    n_channels: usize,
    budget: f64,
    rng: &mut RandomStream,
    kmeans_iters: usize,
) -> Result<GreedyPlacement, PositioningError> {
    if nodes.legit.is_empty() {
        return Err(PositioningError::NoPoints);
    }
    let n_legit = nodes.legit.len();
    let everyone = kmeans_2d(&nodes.legit, 1, rng, kmeans_iters)?.centroids[0];
    let mut deployment = Deployment::at_midpoint(&vec![everyone; n_uavs], region);
    let mut assoc = AssociationArray::empty(n_legit, n_uavs, n_channels);
    let mut powers = PowerMatrix::zeros(n_uavs, n_channels, budget);
    let per_channel = budget / n_channels as f64;
    let mut evaluations = 0;

    for m in 0..n_uavs {
        let remaining: Vec<usize> = (0..n_legit).filter(|l| assoc.serving(*l).is_none()).collect();
        let xy = if remaining.is_empty() {
            everyone
        } else {
            let pts: Vec<[f64; 2]> = remaining.iter().map(|l| nodes.legit[*l]).collect();
            let k = (n_uavs - m).min(pts.len());
            let clusters = kmeans_2d(&pts, k, rng, kmeans_iters)?;
            let sizes = clusters.cluster_sizes();
            let largest = (0..k).fold(0, |b, c| if sizes[c] > sizes[b] { c } else { b });
            clusters.centroids[largest]
        };
        deployment.positions[m][0] = xy[0].clamp(region.x_min, region.x_max);
        deployment.positions[m][1] = xy[1].clamp(region.y_min, region.y_max);
        powers.gamma[m] = vec![per_channel; n_channels];

        let mut best: Option<(f64, usize, Vec<(usize, Resource)>)> = None;
        for level in 0..deployment.grid.len() {
            evaluations += 1;
            let mut trial = deployment.clone();
            trial.set_level(m, level);
            let gains = GainTable::compute(&trial.positions, nodes, env)?;
            let phi = PhiTable::build(&gains, &powers, n_channels)?;
            let mut bound: Vec<(usize, Resource)> = Vec::new();
            let mut score = 0.0;
            for _ in 0..n_channels {
                let mut pick: Option<(usize, Resource, f64)> = None;
                for &l in &remaining {
                    if bound.iter().any(|b| b.0 == l) {
                        continue;
                    }
                    for c in 0..n_channels {
                        let r = Resource::new(m, c);
                        if bound.iter().any(|b| b.1 == r) {
                            continue;
                        }
                        let v = phi.get(l, r);
                        if pick.map_or(true, |p| v > p.2) {
                            pick = Some((l, r, v));
                        }
                    }
                }
                let Some((l, r, v)) = pick else { break };
                bound.push((l, r));
                score += v;
            }
            if best.as_ref().map_or(true, |b| score > b.0) {
                best = Some((score, level, bound));
            }
        }
        let (_, level, bound) = best.expect("grid has at least one level");
        deployment.set_level(m, level);
        for (l, r) in bound {
            assoc.assign(l, r)?;
        }
    }
    let bindings = assoc.n_associated();
    Ok(GreedyPlacement { deployment, assoc, bindings, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radio::SecrecySnapshot;
    use crate::scenario::Scenario;

    #[test]
    fn identical_points_collapse() {
        let pts = vec![[3.0, 4.0]; 6];
        for k in 1..=4 {
            let c = kmeans_2d(&pts, k, &mut RandomStream::new(1, k as u64), 50).unwrap();
            assert!(c.centroids.iter().all(|p| *p == [3.0, 4.0]), "{:?}", c.centroids);
        }
    }

    #[test]
    fn single_cluster_is_mean() {
        let pts = vec![[0.0, 0.0], [2.0, 0.0], [4.0, 6.0], [10.0, 2.0]];
        let c = kmeans_2d(&pts, 1, &mut RandomStream::new(2, 0), 50).unwrap();
        assert!((c.centroids[0][0] - 4.0).abs() < 1e-12);
        assert!((c.centroids[0][1] - 2.0).abs() < 1e-12);
        assert!(c.converged);
    }

    #[test]
    fn two_separated_groups() {
        // irregular groups, so no symmetric split is a Lloyd fixed point
        let a = [[0.0, 0.0], [1.0, 0.25], [0.25, 1.5], [1.25, 1.0]];
        let b = [[100.0, 90.0], [103.0, 91.0], [101.0, 94.0], [104.0, 97.0]];
        let mean = |g: &[[f64; 2]]| {
            let n = g.len() as f64;
            [g.iter().map(|p| p[0]).sum::<f64>() / n, g.iter().map(|p| p[1]).sum::<f64>() / n]
        };
        let pts: Vec<[f64; 2]> = a.iter().chain(&b).copied().collect();
        for seed in 0..20 {
            let c = kmeans_2d(&pts, 2, &mut RandomStream::new(seed, 0), 100).unwrap();
            let mut cs = c.centroids.clone();
            cs.sort_by(|x, y| x[0].total_cmp(&y[0]));
            assert_eq!(cs, vec![mean(&a), mean(&b)]);
            // brute-force assignment check
            for (i, p) in pts.iter().enumerate() {
                let d: Vec<f64> = c.centroids.iter().map(|q| dist2(*p, *q)).collect();
                assert!(d[c.membership[i]] <= d[1 - c.membership[i]]);
            }
        }
    }

    #[test]
    fn surplus_clusters_are_handled() {
        let pts = vec![[0.0, 0.0], [5.0, 5.0]];
        let c = kmeans_2d(&pts, 4, &mut RandomStream::new(3, 0), 20).unwrap();
        assert_eq!(c.centroids.len(), 4);
        assert_eq!(c.membership.len(), 2);
        assert!(kmeans_2d(&[], 2, &mut RandomStream::new(0, 0), 5).is_err());
        assert!(kmeans_2d(&pts, 0, &mut RandomStream::new(0, 0), 5).is_err());
    }

    #[test]
    fn lloyd_sse_non_increasing() {
        let region = Region::table_defaults();
        for seed in 0..20 {
            let s = Scenario::sample(region, 80, 0.5, &mut RandomStream::new(seed, 0)).unwrap();
            let c = kmeans_2d(&s.legitimate(), 5, &mut RandomStream::new(seed, 1), 100).unwrap();
            assert!(c.sse.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{:?}", c.sse);
        }
    }

    fn small_state(seed: u64) -> (Nodes, Region, Deployment, AssociationArray, PowerMatrix) {
        let region = Region { n_altitude_levels: 4, ..Region::table_defaults() };
        let s = Scenario::sample(region, 16, 0.5, &mut RandomStream::new(seed, 0)).unwrap();
        let nodes = Nodes::new(s.legitimate(), s.eavesdroppers());
        let dep = Deployment::at_midpoint(&[[250.0, 500.0], [750.0, 500.0]], &region);
        let powers = PowerMatrix::uniform(2, 4, 100.0);
        let mut assoc = AssociationArray::empty(nodes.legit.len(), 2, 4);
        for l in 0..nodes.legit.len().min(8) {
            assoc.assign(l, Resource::new(l % 2, l / 2)).unwrap();
        }
        (nodes, region, dep, assoc, powers)
    }

    #[test]
    fn payoff_matches_full_recomputation() {
        let env = EnvParams::urban();
        for seed in 0..5 {
            let (nodes, _, dep, assoc, powers) = small_state(seed);
            if nodes.eaves.is_empty() {
                continue;
            }
            let game = AltitudeGame { nodes: &nodes, env: &env, assoc: &assoc, powers: &powers };
            let gains = GainTable::compute(&dep.positions, &nodes, &env).unwrap();
            for m in 0..2 {
                let f = game.payoffs(m, &dep, &gains).unwrap();
                assert_eq!(f[dep.levels[m]], 0.0);
                let base: f64 = SecrecySnapshot::evaluate(&gains, &assoc, &powers)
                    .unwrap()
                    .links
                    .iter()
                    .filter(|r| r.resource.map(|x| x.uav) == Some(m))
                    .map(|r| r.phi)
                    .sum();
                for lvl in 0..dep.grid.len() {
                    let mut moved = dep.clone();
                    moved.set_level(m, lvl);
                    let g2 = GainTable::compute(&moved.positions, &nodes, &env).unwrap();
                    let full: f64 = SecrecySnapshot::evaluate(&g2, &assoc, &powers)
                        .unwrap()
                        .links
                        .iter()
                        .filter(|r| r.resource.map(|x| x.uav) == Some(m))
                        .map(|r| r.phi)
                        .sum();
                    assert!((f[lvl] - (full - base)).abs() < 1e-9);
                    assert!((altitude_payoff(&game, m, lvl, &dep, &gains).unwrap() - f[lvl]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn unserved_uav_has_zero_payoff() {
        let env = EnvParams::urban();
        let (nodes, _, dep, _, powers) = small_state(1);
        let assoc = AssociationArray::empty(nodes.legit.len(), 2, 4);
        let game = AltitudeGame { nodes: &nodes, env: &env, assoc: &assoc, powers: &powers };
        let gains = GainTable::compute(&dep.positions, &nodes, &env).unwrap();
        assert!(game.payoffs(0, &dep, &gains).unwrap().iter().all(|f| *f == 0.0));
        let out = br_altitude(&game, dep.clone(), &mut RandomStream::new(0, 0), 5, AltitudeUpdate::Sequential).unwrap();
        assert_eq!(out.rounds, 1);
        assert!(out.converged);
        assert_eq!(out.deployment, dep);
    }

    #[test]
    fn single_uav_reaches_argmax_then_stops() {
        let env = EnvParams::urban();
        let region = Region { n_altitude_levels: 8, ..Region::table_defaults() };
        let s = Scenario::sample(region, 20, 0.5, &mut RandomStream::new(4, 0)).unwrap();
        let nodes = Nodes::new(s.legitimate(), s.eavesdroppers());
        let mut assoc = AssociationArray::empty(nodes.legit.len(), 1, 8);
        for l in 0..nodes.legit.len().min(8) {
            assoc.assign(l, Resource::new(0, l)).unwrap();
        }
        let powers = PowerMatrix::uniform(1, 8, 100.0);
        let dep = Deployment::at_midpoint(&[[500.0, 500.0]], &region);
        let game = AltitudeGame { nodes: &nodes, env: &env, assoc: &assoc, powers: &powers };
        let gains = GainTable::compute(&dep.positions, &nodes, &env).unwrap();
        let sums: Vec<f64> = (0..8).map(|l| game.phi_sum_at(0, l, &dep, &gains).unwrap()).collect();
        let best = sums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for update in [AltitudeUpdate::Sequential, AltitudeUpdate::Simultaneous] {
            let out = br_altitude(&game, dep.clone(), &mut RandomStream::new(0, 0), 10, update).unwrap();
            assert_eq!(sums[out.deployment.levels[0]], best);
            assert!(out.converged);
            assert!(out.rounds <= 2);
            assert!(out.deployment.within(&region));
        }
    }

    #[test]
    fn moves_have_positive_payoff_and_terminal_is_stable() {
        let env = EnvParams::urban();
        for seed in 0..10 {
            let (nodes, region, dep, assoc, powers) = small_state(seed);
            if nodes.eaves.is_empty() {
                continue;
            }
            let game = AltitudeGame { nodes: &nodes, env: &env, assoc: &assoc, powers: &powers };
            for update in [AltitudeUpdate::Sequential, AltitudeUpdate::Simultaneous] {
            let out = br_altitude(&game, dep.clone(), &mut RandomStream::new(seed, 1), 20, update).unwrap();
            assert!(out.moves.iter().all(|m| m.payoff > 0.0 && m.from_level != m.to_level));
            assert!(out.deployment.within(&region));
            if out.converged {
                // exhaustive per-UAV deviation check
                for m in 0..2 {
                    let cur = game.phi_sum_at(m, out.deployment.levels[m], &out.deployment, &out.gains).unwrap();
                    for lvl in 0..4 {
                        let alt = game.phi_sum_at(m, lvl, &out.deployment, &out.gains).unwrap();
                        assert!(alt - cur <= 0.0);
                    }
                }
                assert!(altitude_deviations(&game, &out.deployment, &out.gains).unwrap().is_empty());
            }
            }
        }
    }

    #[test]
    fn sequential_moves_are_profitable_against_the_state_they_see() {
        let env = EnvParams::urban();
        for seed in 0..10 {
            let (nodes, _, dep, assoc, powers) = small_state(seed);
            let game = AltitudeGame { nodes: &nodes, env: &env, assoc: &assoc, powers: &powers };
            let out = br_altitude(&game, dep.clone(), &mut RandomStream::new(seed, 2), 20, AltitudeUpdate::Sequential)
                .unwrap();
            // replay the moves one by one
            let mut state = dep;
            for mv in &out.moves {
                let gains = GainTable::compute(&state.positions, &nodes, &env).unwrap();
                assert_eq!(state.levels[mv.uav], mv.from_level);
                let f = game.payoffs(mv.uav, &state, &gains).unwrap();
                assert_eq!(f[mv.to_level], mv.payoff);
                assert_eq!(f.iter().copied().fold(f64::NEG_INFINITY, f64::max), mv.payoff);
                state.set_level(mv.uav, mv.to_level);
            }
            assert_eq!(state, out.deployment);
        }
    }

    #[test]
    fn adapted_greedy_counts() {
        let env = EnvParams::urban();
        let region = Region::table_defaults();
        for seed in 0..5 {
            let s = Scenario::sample(region, 40, 0.5, &mut RandomStream::new(seed, 0)).unwrap();
            let nodes = Nodes::new(s.legitimate(), s.eavesdroppers());
            let l = nodes.legit.len();
            let m = l.div_ceil(4);
            let out = adapted_greedy_place(&nodes, &env, &region, m, 4, 100.0, &mut RandomStream::new(seed, 1), 100).unwrap();
            assert_eq!(out.deployment.n_uavs(), m);
            assert_eq!(out.bindings, l.min(m * 4));
            assert_eq!(out.evaluations, m * 8);
            assert!(out.deployment.within(&region));
        }
    }

    #[test]
    fn adapted_greedy_single_uav_serves_everyone_with_capacity() {
        let env = EnvParams::urban();
        let region = Region::table_defaults();
        let s = Scenario::sample(region, 12, 0.5, &mut RandomStream::new(8, 0)).unwrap();
        let nodes = Nodes::new(s.legitimate(), s.eavesdroppers());
        let c = nodes.legit.len().max(1);
        let out = adapted_greedy_place(&nodes, &env, &region, 1, c, 100.0, &mut RandomStream::new(0, 0), 100).unwrap();
        assert_eq!(out.assoc.n_associated(), nodes.legit.len());
        let mean = kmeans_2d(&nodes.legit, 1, &mut RandomStream::new(0, 0), 100).unwrap().centroids[0];
        assert!((out.deployment.positions[0][0] - mean[0]).abs() < 1e-9);
    }

    #[test]
    fn deployment_csv() {
        let dep = Deployment::at_midpoint(&[[1.0, 2.0]], &Region::table_defaults());
        let mut buf = Vec::new();
        dep.write_csv(3, true, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "iteration,m,x,y,z\n3,0,1.0,2.0,180.0\n");
    }
}
