//! Random problem instances: node placement, legitimate/eavesdropper split and
//! UAV count.
//!
//! All randomness flows through [`RandomStream`], a ChaCha8 generator keyed by
//! a 64-bit seed and a 64-bit stream id. ChaCha8 is fully specified and
//! platform-independent, so a `(seed, stream)` pair reproduces the same draws
//! everywhere.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("cannot build an instance with zero nodes")]
    EmptyInstance,
    #[error("no legitimate nodes in the realization")]
    EmptyLegitimateSet,
    #[error("subchannel count must be at least 1")]
    ZeroSubchannels,
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("Bernoulli parameter {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("malformed scenario record at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Rectangular service area plus the UAV altitude range and its discretization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub n_altitude_levels: usize,
}

impl Region {
    /// 1000 m x 1000 m square, altitudes 20..300 m over 8 levels.
    pub fn table_defaults() -> Self {
        Self {
            x_min: 0.0,
            x_max: 1000.0,
            y_min: 0.0,
            y_max: 1000.0,
            z_min: 20.0,
            z_max: 300.0,
            n_altitude_levels: 8,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |msg: &str| Err(ScenarioError::InvalidRegion(msg.to_string()));
        if !(self.x_min < self.x_max) {
            return bad("x_min must be below x_max");
        }
        if !(self.y_min < self.y_max) {
            return bad("y_min must be below y_max");
        }
        if !(0.0 < self.z_min && self.z_min < self.z_max) {
            return bad("altitudes must satisfy 0 < z_min < z_max");
        }
        if self.n_altitude_levels < 2 {
            return bad("at least two altitude levels are required");
        }
        Ok(())
    }

    pub fn contains_ground(&self, p: [f64; 2]) -> bool {
        (self.x_min..=self.x_max).contains(&p[0]) && (self.y_min..=self.y_max).contains(&p[1])
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        self.contains_ground([p[0], p[1]]) && (self.z_min..=self.z_max).contains(&p[2])
    }

    /// Evenly spaced altitude levels spanning `[z_min, z_max]` inclusive.
    pub fn altitude_grid(&self) -> Vec<f64> {
        let n = self.n_altitude_levels;
        if n == 1 {
            return vec![self.z_min];
        }
        let step = (self.z_max - self.z_min) / (n - 1) as f64;
        (0..n)
            .map(|i| if i + 1 == n { self.z_max } else { self.z_min + step * i as f64 })
            .collect()
    }
}

/// Seeded, reproducible random source. One stream per Monte Carlo realization.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    /// Independent child stream, deterministic in `(seed, stream, label)`.
    pub fn fork(&self, label: u64) -> Self {
        Self::new(mix64(self.seed ^ mix64(label)), self.stream)
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Uniform index in `0..n`; `n` must be positive.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

/// SplitMix64 finalizer, used to derive stream ids and fork seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Legitimate,
    Eavesdropper,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::Legitimate => f.write_str("legitimate"),
            Role::Eavesdropper => f.write_str("eavesdropper"),
        }
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "legitimate" | "L" => Ok(Role::Legitimate),
            "eavesdropper" | "E" => Ok(Role::Eavesdropper),
            other => Err(format!("unknown role `{other}`")),
        }
    }
}

/// A realized IoT field. Positions never move after sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub region: Region,
    pub positions: Vec<[f64; 2]>,
    pub roles: Vec<Role>,
    pub q: f64,
}

impl Scenario {
    pub fn n_nodes(&self) -> usize {
        self.positions.len()
    }

    pub fn legitimate(&self) -> Vec<[f64; 2]> {
        self.with_role(Role::Legitimate)
    }

    pub fn eavesdroppers(&self) -> Vec<[f64; 2]> {
        self.with_role(Role::Eavesdropper)
    }

    pub fn n_legitimate(&self) -> usize {
        self.roles.iter().filter(|r| **r == Role::Legitimate).count()
    }

    fn with_role(&self, role: Role) -> Vec<[f64; 2]> {
        self.positions
            .iter()
            .zip(&self.roles)
            .filter(|(_, r)| **r == role)
            .map(|(p, _)| *p)
            .collect()
    }

    /// Draws positions then roles from `rng`.
    pub fn sample(
        region: Region,
        n: usize,
        q: f64,
        rng: &mut RandomStream,
    ) -> Result<Self, ScenarioError> {
        let positions = sample_nodes(&region, n, rng)?;
        let roles = partition_roles(n, q, rng)?;
        Ok(Self { region, positions, roles, q })
    }

    /// Samples realizations on consecutive stream ids starting at `stream`
    /// until one has at least one legitimate node. Returns the scenario and
    /// the stream it was drawn from.
    pub fn sample_nonempty(
        region: Region,
        n: usize,
        q: f64,
        seed: u64,
        stream: u64,
    ) -> Result<(Self, RandomStream), ScenarioError> {
        if q <= 0.0 {
            return Err(ScenarioError::EmptyLegitimateSet);
        }
        let mut id = stream;
        loop {
            let mut rng = RandomStream::new(seed, id);
            let s = Self::sample(region, n, q, &mut rng)?;
            if s.n_legitimate() > 0 {
                return Ok((s, rng));
            }
            id = id.wrapping_add(1);
        }
    }

    /// One node per line: `x y role`.
    pub fn to_record(&self) -> String {
        let mut out = String::new();
        for (p, r) in self.positions.iter().zip(&self.roles) {
            out.push_str(&format!("{:?} {:?} {}\n", p[0], p[1], r));
        }
        out
    }

    pub fn from_record(region: Region, q: f64, text: &str) -> Result<Self, ScenarioError> {
        let mut positions = Vec::new();
        let mut roles = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: String| ScenarioError::Parse { line: i + 1, reason };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(err(format!("expected 3 fields, found {}", fields.len())));
            }
            let x: f64 = fields[0].parse().map_err(|e| err(format!("x: {e}")))?;
            let y: f64 = fields[1].parse().map_err(|e| err(format!("y: {e}")))?;
            let role: Role = fields[2].parse().map_err(err)?;
            positions.push([x, y]);
            roles.push(role);
        }
        Ok(Self { region, positions, roles, q })
    }
}

/// Binomial point process: `n` i.i.d. uniform points over the region rectangle.
pub fn sample_nodes(
    region: &Region,
    n: usize,
    rng: &mut RandomStream,
) -> Result<Vec<[f64; 2]>, ScenarioError> {
    if n == 0 {
        return Err(ScenarioError::EmptyInstance);
    }
    let dx = region.x_max - region.x_min;
    let dy = region.y_max - region.y_min;
    Ok((0..n)
        .map(|_| {
            let x = region.x_min + dx * rng.uniform();
            let y = region.y_min + dy * rng.uniform();
            [x, y]
        })
        .collect())
}

/// Each node is independently legitimate with probability `q`.
pub fn partition_roles(n: usize, q: f64, rng: &mut RandomStream) -> Result<Vec<Role>, ScenarioError> {
    if !(0.0..=1.0).contains(&q) {
        return Err(ScenarioError::InvalidProbability(q));
    }
    Ok((0..n)
        .map(|_| {
            if rng.uniform() < q {
                Role::Legitimate
            } else {
                Role::Eavesdropper
            }
        })
        .collect())
}

/// Smallest `M` with `(M - 1) C < L <= M C`.
pub fn choose_uav_count(legitimate: usize, subchannels: usize) -> Result<usize, ScenarioError> {
    if subchannels == 0 {
        return Err(ScenarioError::ZeroSubchannels);
    }
    if legitimate == 0 {
        return Err(ScenarioError::EmptyLegitimateSet);
    }
    Ok(legitimate.div_ceil(subchannels))
}
