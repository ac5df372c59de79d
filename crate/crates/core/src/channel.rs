//! Average air-to-ground channel: sigmoid LoS probability, mean pathloss and
//! the resulting linear channel gain. Everything here is a pure function of
//! geometry and [`EnvParams`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum ChannelError {
    #[error("UAV altitude must be positive, got {0}")]
    NonPositiveAltitude(f64),
    #[error("ground distance must be non-negative, got {0}")]
    NegativeDistance(f64),
}

/// Propagation environment constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvParams {
    pub psi: f64,
    /// Slope of the sigmoid, per degree of elevation.
    pub omega: f64,
    pub eta_los: f64,
    pub eta_nlos: f64,
    /// Pathloss exponent of air-to-ground links.
    pub alpha_j: f64,
    /// Ground-to-ground pathloss exponent. Kept for configuration fidelity;
    /// no ground links are modeled so nothing reads it.
    pub alpha_g: f64,
}

impl EnvParams {
    pub const fn urban() -> Self {
        Self {
            psi: 9.61,
            omega: 0.16,
            eta_los: 1.0,
            eta_nlos: 20.0,
            alpha_j: 0.3,
            alpha_g: 0.3,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.psi > 0.0 && self.omega > 0.0) {
            return Err("psi and omega must be positive".into());
        }
        if !(self.eta_los > 0.0 && self.eta_nlos >= self.eta_los) {
            return Err("attenuation factors must satisfy 0 < eta_los <= eta_nlos".into());
        }
        if !(self.alpha_j > 0.0) {
            return Err("alpha_j must be positive".into());
        }
        Ok(())
    }
}

impl Default for EnvParams {
    fn default() -> Self {
        Self::urban()
    }
}

fn check(z: f64, r: f64) -> Result<(), ChannelError> {
    if !(z > 0.0) {
        return Err(ChannelError::NonPositiveAltitude(z));
    }
    if !(r >= 0.0) {
        return Err(ChannelError::NegativeDistance(r));
    }
    Ok(())
}

/// Elevation angle in degrees; a node directly below the UAV sits at 90°.
pub fn elevation_deg(z: f64, r: f64) -> f64 {
    z.atan2(r).to_degrees()
}

pub fn los_probability(z: f64, r: f64, env: &EnvParams) -> Result<f64, ChannelError> {
    check(z, r)?;
    let theta = elevation_deg(z, r);
    Ok(1.0 / (1.0 + env.psi * (-env.omega * (theta - env.psi)).exp()))
}

/// `1 − P_LoS`, evaluated directly from the sigmoid.
pub fn nlos_probability(z: f64, r: f64, env: &EnvParams) -> Result<f64, ChannelError> {
    check(z, r)?;
    let e = env.psi * (-env.omega * (elevation_deg(z, r) - env.psi)).exp();
    Ok(e / (1.0 + e))
}

/// Mean pathloss, `(z² + r²)^(α/2) · (P_LoS η_LoS + P_NLoS η_NLoS)`.
pub fn avg_pathloss(z: f64, r: f64, env: &EnvParams) -> Result<f64, ChannelError> {
    let p_los = los_probability(z, r, env)?;
    let spread = (z * z + r * r).powf(env.alpha_j / 2.0);
    Ok(spread * (p_los * env.eta_los + (1.0 - p_los) * env.eta_nlos))
}

pub fn ground_distance(uav: [f64; 3], node: [f64; 2]) -> f64 {
    (uav[0] - node[0]).hypot(uav[1] - node[1])
}

/// Linear power gain `|h|² = 1 / L` between a UAV and a ground node.
pub fn channel_gain(uav: [f64; 3], node: [f64; 2], env: &EnvParams) -> Result<f64, ChannelError> {
    Ok(1.0 / avg_pathloss(uav[2], ground_distance(uav, node), env)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const URBAN: EnvParams = EnvParams::urban();

    #[test]
    fn overhead_los_probability() {
        // 1 / (1 + 9.61 exp(-0.16 (90 - 9.61))) evaluated independently
        let oracle = 1.0 / (1.0 + 9.61 * (-0.16f64 * (90.0 - 9.61)).exp());
        let p = los_probability(100.0, 0.0, &URBAN).unwrap();
        assert_eq!(p, oracle);
        assert!((p - 0.999975).abs() < 5e-7);
    }

    #[test]
    fn horizon_limit() {
        let limit = 1.0 / (1.0 + 9.61 * (0.16f64 * 9.61).exp());
        assert!((limit - 0.02187).abs() < 5e-6);
        let p = los_probability(1e-3, 1e9, &URBAN).unwrap();
        assert!((p - limit).abs() < 1e-9);
    }

    #[test]
    fn nlos_complements_los() {
        for (z, r) in [(20.0, 0.0), (100.0, 50.0), (300.0, 1400.0), (1e-3, 1e9)] {
            let sum = los_probability(z, r, &URBAN).unwrap() + nlos_probability(z, r, &URBAN).unwrap();
            assert!((sum - 1.0).abs() < 1e-12);
        }
        assert!(nlos_probability(0.0, 1.0, &URBAN).is_err());
    }

    #[test]
    fn overhead_pathloss_and_gain() {
        let pl = avg_pathloss(100.0, 0.0, &URBAN).unwrap();
        let p = los_probability(100.0, 0.0, &URBAN).unwrap();
        let oracle = 1.0e4f64.powf(0.15) * (p + (1.0 - p) * 20.0);
        assert!((pl - oracle).abs() < 1e-12);
        assert!((pl - 3.983).abs() < 5e-4);
        let g = channel_gain([3.0, 4.0, 100.0], [3.0, 4.0], &URBAN).unwrap();
        assert!((g - 0.2511).abs() < 5e-5);
    }

    #[test]
    fn equal_attenuation_ignores_los() {
        let env = EnvParams { eta_los: 3.0, eta_nlos: 3.0, ..URBAN };
        for &(z, r) in &[(20.0, 0.0), (50.0, 400.0), (300.0, 1200.0)] {
            let pl = avg_pathloss(z, r, &env).unwrap();
            let expect = 3.0 * (z * z + r * r as f64).powf(0.15);
            assert!((pl - expect).abs() < 1e-12 * expect);
        }
    }

    #[test]
    fn pathloss_increases_with_distance() {
        for z in [20.0, 100.0, 300.0] {
            let mut prev = avg_pathloss(z, 0.0, &URBAN).unwrap();
            for i in 1..=200 {
                let pl = avg_pathloss(z, i as f64 * 10.0, &URBAN).unwrap();
                assert!(pl > prev);
                prev = pl;
            }
        }
    }

    #[test]
    fn domain_errors() {
        assert_eq!(los_probability(0.0, 1.0, &URBAN), Err(ChannelError::NonPositiveAltitude(0.0)));
        assert!(avg_pathloss(-5.0, 1.0, &URBAN).is_err());
        assert!(channel_gain([0.0, 0.0, 0.0], [1.0, 1.0], &URBAN).is_err());
    }

    #[test]
    fn reciprocal_gain() {
        let env = EnvParams { eta_los: 4.0, eta_nlos: 4.0, alpha_j: 1e-300, ..URBAN };
        let g = channel_gain([0.0, 0.0, 1.0], [0.0, 0.0], &env).unwrap();
        assert!((g - 0.25).abs() < 1e-12);
    }

    #[test]
    fn equidistant_nodes_share_gain() {
        let uav = [500.0, 500.0, 120.0];
        let a = channel_gain(uav, [530.0, 540.0], &URBAN).unwrap();
        let b = channel_gain(uav, [460.0, 530.0], &URBAN).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn los_in_unit_interval_and_complements(z in 1e-3f64..1e3, r in 0f64..5e3) {
            let p = los_probability(z, r, &URBAN).unwrap();
            prop_assert!(p > 0.0 && p < 1.0);
            prop_assert!(((p + (1.0 - p)) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn los_increases_with_altitude(z in 1.0f64..500.0, dz in 0.5f64..100.0, r in 1.0f64..3000.0) {
            let lo = los_probability(z, r, &URBAN).unwrap();
            let hi = los_probability(z + dz, r, &URBAN).unwrap();
            prop_assert!(hi >= lo);
        }

        #[test]
        fn gain_translation_invariant(
            ux in -1e3f64..1e3, uy in -1e3f64..1e3, z in 10f64..300.0,
            nx in -1e3f64..1e3, ny in -1e3f64..1e3, tx in -1e3f64..1e3, ty in -1e3f64..1e3,
        ) {
            let a = channel_gain([ux, uy, z], [nx, ny], &URBAN).unwrap();
            let b = channel_gain([ux + tx, uy + ty, z], [nx + tx, ny + ty], &URBAN).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a);
        }
    }
}
