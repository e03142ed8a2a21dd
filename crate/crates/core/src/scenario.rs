//! Randomised vehicles, torus sizing and non-overlapping start/goal sets.
//!
//! Randomness comes from ChaCha8 keyed by the scenario seed. Each draw family
//! reads its own stream: vehicle `i` uses stream `HAV_STREAM_BASE + i` and
//! pose set `k` (0 = starts, 1 = first goals, 2 = second goals) uses stream
//! `k + 1`. Changing the swarm size therefore leaves the draws of the first
//! vehicles untouched.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Pose, TorusWorld, Vec2};
use crate::model::HavConfig;

pub const HAV_STREAM_BASE: u64 = 1 << 32;
pub const MAX_ATTEMPTS: usize = 10_000;

pub const TRAILER_COUNT_SIGMA: f64 = 3.0;
pub const MAX_TRAILERS: usize = 10;
pub const LENGTH_RANGE: (f64, f64) = (2.0, 12.0);
/// Equal-weight truck wheelbase mixture: (mean, std) per component.
pub const TRUCK_MIXTURE: [(f64, f64); 2] = [(4.0, 0.6), (10.7, 1.2)];

/// Deterministic generator for one named stream of a seed.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Rayleigh-distributed trailer count, rounded and truncated to `[1, 10]`.
pub fn sample_trailer_count<R: Rng + ?Sized>(rng: &mut R) -> Result<usize> {
    for _ in 0..MAX_ATTEMPTS {
        let u: f64 = rng.random();
        let draw = TRAILER_COUNT_SIGMA * (-2.0 * (1.0 - u).ln()).sqrt();
        let n = draw.round() as usize;
        if (1..=MAX_TRAILERS).contains(&n) {
            return Ok(n);
        }
    }
    Err(Error::Generation("trailer count rejection loop exhausted".into()))
}

pub fn sample_truck_wheelbase<R: Rng + ?Sized>(rng: &mut R) -> Result<f64> {
    let comps = TRUCK_MIXTURE.map(|(m, s)| Normal::new(m, s).expect("valid normal"));
    for _ in 0..MAX_ATTEMPTS {
        let pick = usize::from(rng.random::<bool>());
        let l = comps[pick].sample(rng);
        if (LENGTH_RANGE.0..LENGTH_RANGE.1).contains(&l) {
            return Ok(l);
        }
    }
    Err(Error::Generation("truck length rejection loop exhausted".into()))
}

pub fn sample_hav<R: Rng + ?Sized>(rng: &mut R) -> Result<HavConfig> {
    let n = sample_trailer_count(rng)?;
    let truck = sample_truck_wheelbase(rng)?;
    let trailers = (0..n).map(|_| rng.random_range(LENGTH_RANGE.0..LENGTH_RANGE.1)).collect();
    Ok(HavConfig::new(truck, trailers))
}

/// Edge length at which the footprints cover fraction `density` of the torus.
pub fn torus_edge(havs: &[HavConfig], density: f64) -> Result<f64> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidParameter(format!("density {density} outside (0, 1]")));
    }
    let area: f64 = havs.iter().map(|h| PI * h.footprint_radius().powi(2)).sum();
    Ok((area / density).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioVehicle {
    #[serde(flatten)]
    pub config: HavConfig,
    pub start: Pose,
    /// Two consecutive goal poses.
    pub goals: [Pose; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub seed: u64,
    pub density: f64,
    pub torus_edge: f64,
    pub havs: Vec<ScenarioVehicle>,
}

fn sample_pose_set<R: Rng + ?Sized>(rng: &mut R, world: &TorusWorld, radii: &[f64]) -> Result<Vec<Pose>> {
    let edge = world.edge();
    let mut placed: Vec<Pose> = Vec::with_capacity(radii.len());
    let mut attempts = 0;
    for &r in radii {
        loop {
            attempts += 1;
            if attempts > MAX_ATTEMPTS {
                return Err(Error::Generation(format!(
                    "could not place {} footprints without overlap in {MAX_ATTEMPTS} attempts",
                    radii.len()
                )));
            }
            let p = Vec2::new(rng.random_range(0.0..edge), rng.random_range(0.0..edge));
            let h = PI - rng.random_range(0.0..2.0 * PI);
            let p = world.wrap(p);
            let free = placed
                .iter()
                .zip(radii)
                .all(|(q, &rq)| !world.potential_collision(p, r, q.position(), rq));
            if free {
                placed.push(Pose::with_position(p, h));
                break;
            }
        }
    }
    Ok(placed)
}

impl Scenario {
    pub fn generate(seed: u64, hav_count: usize, density: f64) -> Result<Scenario> {
        if hav_count == 0 {
            return Err(Error::InvalidParameter("swarm size must be at least 1".into()));
        }
        if !(density > 0.0 && density <= 0.5) {
            return Err(Error::InvalidParameter(format!("density {density} outside (0, 0.5]")));
        }
        let configs = (0..hav_count)
            .map(|i| sample_hav(&mut substream(seed, HAV_STREAM_BASE + i as u64)))
            .collect::<Result<Vec<_>>>()?;
        let edge = torus_edge(&configs, density)?;
        let world = TorusWorld::new(edge);
        let radii: Vec<f64> = configs.iter().map(HavConfig::footprint_radius).collect();
        let starts = sample_pose_set(&mut substream(seed, 1), &world, &radii)?;
        let first = sample_pose_set(&mut substream(seed, 2), &world, &radii)?;
        let second = sample_pose_set(&mut substream(seed, 3), &world, &radii)?;
        let havs = configs
            .into_iter()
            .enumerate()
            .map(|(i, config)| ScenarioVehicle { config, start: starts[i], goals: [first[i], second[i]] })
            .collect();
        Ok(Scenario { seed, density, torus_edge: edge, havs })
    }

    pub fn world(&self) -> TorusWorld {
        TorusWorld::new(self.torus_edge)
    }

    pub fn len(&self) -> usize {
        self.havs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.havs.is_empty()
    }

    /// Checks configs and the pairwise non-overlap of every pose set.
    pub fn validate(&self) -> Result<()> {
        if self.havs.is_empty() {
            return Err(Error::InvalidParameter("scenario has no vehicles".into()));
        }
        if !(self.torus_edge > 0.0) {
            return Err(Error::InvalidParameter("torus edge must be positive".into()));
        }
        for h in &self.havs {
            h.config.validate()?;
        }
        let world = self.world();
        let sets: [Box<dyn Fn(&ScenarioVehicle) -> Pose>; 3] =
            [Box::new(|h| h.start), Box::new(|h| h.goals[0]), Box::new(|h| h.goals[1])];
        for (k, pick) in sets.iter().enumerate() {
            for i in 0..self.havs.len() {
                for j in i + 1..self.havs.len() {
                    let (a, b) = (&self.havs[i], &self.havs[j]);
                    if world.potential_collision(
                        pick(a).position(),
                        a.config.footprint_radius(),
                        pick(b).position(),
                        b.config.footprint_radius(),
                    ) {
                        return Err(Error::InvalidParameter(format!("vehicles {i} and {j} overlap in pose set {k}")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serialises")
    }

    pub fn from_toml(text: &str) -> Result<Scenario> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        Scenario::from_toml(&std::fs::read_to_string(path)?)
    }
}
