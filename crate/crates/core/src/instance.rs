//! Spatial scenarios and the synthetic instance generator.
//!
//! Locations are drawn from a three-zone mixture: a central zone of radius
//! `L` (weight 0.4) and two sub-zones of radius `0.5 L` (weight 0.3 each)
//! whose centers lie between `0.3 L` and `0.8 L` from the region center.
//! Inside a zone a point is placed at a uniform radius and a uniform angle
//! around the zone center, so density peaks at the zone centers.
//!
//! Geometry is generated at unit radius and multiplied by `L`, so every
//! region size shares the same layout for a given seed.

use std::f64::consts::TAU;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::Deserializer;
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::error::{Error, Result};
use crate::geometry::Location;

pub const INSTANCE_SCHEMA_VERSION: u32 = 1;

/// Mixture weights of (central zone, first sub-zone, second sub-zone).
pub const ZONE_WEIGHTS: [f64; 3] = [0.4, 0.3, 0.3];
const SUB_ZONE_RADIUS: f64 = 0.5;
const SUB_ZONE_CENTER_RANGE: (f64, f64) = (0.3, 0.8);
const DEPOT_RANGE: (f64, f64) = (1.0, 1.3);

/// Which zone of the mixture a location was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Zone {
    Central,
    Sub(usize),
}

impl Zone {
    pub fn index(self) -> usize {
        match self {
            Zone::Central => 0,
            Zone::Sub(i) => 1 + i,
        }
    }
}

/// The zone mixture expressed in km for a region of radius `radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneMixture {
    pub radius: f64,
    pub sub_centers: [Location; 2],
}

impl ZoneMixture {
    fn zone_for(u: f64) -> Zone {
        if u < ZONE_WEIGHTS[0] {
            Zone::Central
        } else if u < ZONE_WEIGHTS[0] + ZONE_WEIGHTS[1] {
            Zone::Sub(0)
        } else {
            Zone::Sub(1)
        }
    }

    /// Draws a labelled location. Consumes exactly three uniforms.
    pub fn sample_labeled<R: Rng + ?Sized>(&self, rng: &mut R) -> (Zone, Location) {
        let zone = Self::zone_for(rng.random::<f64>());
        let (center, zone_radius) = match zone {
            Zone::Central => (Location::origin(), self.radius),
            Zone::Sub(i) => (self.sub_centers[i], SUB_ZONE_RADIUS * self.radius),
        };
        let r = rng.random::<f64>() * zone_radius;
        let phi = rng.random::<f64>() * TAU;
        (zone, Location::polar(center, r, phi))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Location {
        self.sample_labeled(rng).1
    }
}

/// Immutable spatial scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub region_radius: f64,
    pub depot: Location,
    pub pickup_points: Vec<Location>,
    pub zone_centers: [Location; 2],
    pub seed: u64,
}

/// Unit-radius geometry plus the zone label of every pickup point.
#[derive(Debug, Clone)]
pub struct LabeledInstance {
    pub instance: Instance,
    pub pickup_zones: Vec<Zone>,
}

fn check_radius(radius: f64) -> Result<()> {
    if radius.is_finite() && radius > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidRadius(radius))
    }
}

/// Generates an instance; identical `(num_pups, seed)` give the same layout
/// for every `radius`, up to exact scaling.
pub fn generate_instance(radius: f64, num_pups: usize, seed: u64) -> Result<Instance> {
    generate_labeled(radius, num_pups, seed).map(|l| l.instance)
}

pub fn generate_labeled(radius: f64, num_pups: usize, seed: u64) -> Result<LabeledInstance> {
    check_radius(radius)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let uniform_in = |lo: f64, hi: f64, rng: &mut ChaCha8Rng| lo + (hi - lo) * rng.random::<f64>();

    let mut sub_centers = [Location::origin(); 2];
    for c in sub_centers.iter_mut() {
        let d = uniform_in(SUB_ZONE_CENTER_RANGE.0, SUB_ZONE_CENTER_RANGE.1, &mut rng);
        let phi = uniform_in(0.0, TAU, &mut rng);
        *c = Location::polar(Location::origin(), d, phi);
    }
    let depot_d = uniform_in(DEPOT_RANGE.0, DEPOT_RANGE.1, &mut rng);
    let depot_phi = uniform_in(0.0, TAU, &mut rng);
    let depot = Location::polar(Location::origin(), depot_d, depot_phi);

    let unit = ZoneMixture { radius: 1.0, sub_centers };
    let (pickup_zones, pickups): (Vec<_>, Vec<_>) = (0..num_pups).map(|_| unit.sample_labeled(&mut rng)).unzip();

    Ok(LabeledInstance {
        instance: Instance {
            region_radius: radius,
            depot: depot.scaled(radius),
            pickup_points: pickups.into_iter().map(|p| p.scaled(radius)).collect(),
            zone_centers: [sub_centers[0].scaled(radius), sub_centers[1].scaled(radius)],
            seed,
        },
        pickup_zones,
    })
}

impl Instance {
    pub fn num_pickups(&self) -> usize {
        self.pickup_points.len()
    }

    pub fn zones(&self) -> ZoneMixture {
        ZoneMixture { radius: self.region_radius, sub_centers: self.zone_centers }
    }

    /// Draws a customer location from the same mixture as the pickup points.
    pub fn sample_customer_location<R: Rng + ?Sized>(&self, rng: &mut R) -> Location {
        self.zones().sample(rng)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = InstanceFile {
            schema_version: INSTANCE_SCHEMA_VERSION,
            l_km: Decimal(self.region_radius),
            seed: self.seed,
            depot: pair(self.depot),
            zone_centers: [pair(self.zone_centers[0]), pair(self.zone_centers[1])],
            pickup_points: self.pickup_points.iter().copied().map(pair).collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text)?;
        if file.schema_version != INSTANCE_SCHEMA_VERSION {
            return Err(Error::SchemaVersion(file.schema_version));
        }
        check_radius(file.l_km.0)?;
        let loc = |p: [Decimal; 2]| Location::new(p[0].0, p[1].0);
        Ok(Self {
            region_radius: file.l_km.0,
            depot: loc(file.depot),
            pickup_points: file.pickup_points.into_iter().map(loc).collect(),
            zone_centers: [loc(file.zone_centers[0]), loc(file.zone_centers[1])],
            seed: file.seed,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// f64 written with 17 significant digits so the text round-trips bit-exactly.
#[derive(Debug, Clone, Copy)]
struct Decimal(f64);

impl Serialize for Decimal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(serde::ser::Error::custom("non-finite coordinate"));
        }
        let raw = RawValue::from_string(format!("{:.16e}", self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Decimal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        f64::deserialize(d).map(Decimal)
    }
}

fn pair(p: Location) -> [Decimal; 2] {
    [Decimal(p.x), Decimal(p.y)]
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    schema_version: u32,
    #[serde(rename = "L_km")]
    l_km: Decimal,
    seed: u64,
    depot: [Decimal; 2],
    zone_centers: [[Decimal; 2]; 2],
    pickup_points: Vec<[Decimal; 2]>,
}

/// Node features mapped to the unit interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedFeatures {
    pub values: [f64; 3],
    /// True when a component fell outside `[-0.2, 1.2]` and was clamped.
    pub clamped: bool,
}

const NORMALIZED_RANGE: (f64, f64) = (-0.2, 1.2);

/// Maps coordinates by `(d + L) / 2L` and time by `t / T`.
pub fn normalize_features(loc: Location, t: f64, radius: f64, horizon: f64) -> NormalizedFeatures {
    let raw = [(loc.x + radius) / (2.0 * radius), (loc.y + radius) / (2.0 * radius), t / horizon];
    let mut clamped = false;
    let values = raw.map(|v| {
        let c = v.clamp(NORMALIZED_RANGE.0, NORMALIZED_RANGE.1);
        clamped |= c != v;
        c
    });
    NormalizedFeatures { values, clamped }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::distance;

    #[test]
    fn depot_lies_outside_the_center() {
        let inst = generate_instance(4.0, 15, 7).unwrap();
        let d = inst.depot.norm();
        assert!((4.0..=5.2 + 1e-12).contains(&d), "depot distance {d}");
        assert_eq!(inst.num_pickups(), 15);
    }

    #[test]
    fn empty_network() {
        let inst = generate_instance(4.0, 0, 1).unwrap();
        assert!(inst.pickup_points.is_empty());
    }

    #[test]
    fn rejects_bad_radius() {
        assert!(matches!(generate_instance(0.0, 3, 1), Err(Error::InvalidRadius(_))));
        assert!(matches!(generate_instance(-1.0, 3, 1), Err(Error::InvalidRadius(_))));
        assert!(generate_instance(f64::NAN, 3, 1).is_err());
    }

    #[test]
    fn central_share_of_pickups() {
        let l = generate_labeled(1.0, 1000, 3).unwrap();
        let central = l.pickup_zones.iter().filter(|z| **z == Zone::Central).count();
        let share = central as f64 / 1000.0;
        assert!((0.35..=0.45).contains(&share), "central share {share}");
    }

    #[test]
    fn generated_locations_respect_zone_geometry() {
        let inst = generate_instance(3.0, 500, 11).unwrap();
        for c in inst.zone_centers {
            let d = c.norm();
            assert!((0.9 - 1e-12..=2.4 + 1e-12).contains(&d));
        }
        for p in &inst.pickup_points {
            assert!(p.is_finite());
            assert!(p.norm() <= 1.3 * 3.0 + 1e-12);
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let a = generate_instance(4.0, 30, 99).unwrap();
        let b = generate_instance(4.0, 30, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_ne!(a, generate_instance(4.0, 30, 100).unwrap());
    }

    #[test]
    fn radius_scaling_is_exact() {
        let a = generate_instance(2.0, 20, 5).unwrap();
        let b = generate_instance(4.0, 20, 5).unwrap();
        assert_eq!(b.depot, a.depot.scaled(2.0));
        assert_eq!(b.zone_centers, a.zone_centers.map(|c| c.scaled(2.0)));
        for (p, q) in a.pickup_points.iter().zip(&b.pickup_points) {
            assert_eq!(*q, p.scaled(2.0));
        }
    }

    #[test]
    fn customer_draws_stay_in_region_and_are_deterministic() {
        let inst = generate_instance(4.0, 5, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = inst.sample_customer_location(&mut rng);
        let b = inst.sample_customer_location(&mut rng);
        assert_ne!(a, b);
        let mut rng2 = ChaCha8Rng::seed_from_u64(17);
        assert_eq!(a, inst.sample_customer_location(&mut rng2));
        for _ in 0..5000 {
            assert!(inst.sample_customer_location(&mut rng).norm() <= 1.3 * 4.0 + 1e-12);
        }
    }

    /// Compares the zone draw against an independent categorical sampler and
    /// runs a chi-square goodness-of-fit test at the 0.01 level (2 dof).
    #[test]
    fn zone_shares_match_mixture_weights() {
        let inst = generate_instance(4.0, 5, 8).unwrap();
        let zones = inst.zones();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 10_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[zones.sample_labeled(&mut rng).0.index()] += 1;
        }
        let mut chi2 = 0.0;
        for (c, w) in counts.iter().zip(ZONE_WEIGHTS) {
            let share = *c as f64 / n as f64;
            assert!((share - w).abs() <= 0.02, "share {share} vs {w}");
            let expected = w * n as f64;
            chi2 += (*c as f64 - expected).powi(2) / expected;
        }
        // 0.99 quantile of chi-square with 2 degrees of freedom.
        assert!(chi2 < 9.2103, "chi2 = {chi2}");
    }

    #[test]
    fn zone_draws_fall_inside_their_zone() {
        let inst = generate_instance(2.0, 0, 4).unwrap();
        let zones = inst.zones();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let (z, p) = zones.sample_labeled(&mut rng);
            let (center, r) = match z {
                Zone::Central => (Location::origin(), 2.0),
                Zone::Sub(i) => (inst.zone_centers[i], 1.0),
            };
            assert!(distance(center, p) <= r + 1e-12);
        }
    }

    #[test]
    fn file_round_trip_is_bit_exact() {
        let inst = generate_instance(4.0, 15, 42).unwrap();
        let text = inst.to_json().unwrap();
        assert!(text.contains("\"L_km\""));
        assert!(text.contains("schema_version"));
        let back = Instance::from_json(&text).unwrap();
        assert_eq!(back, inst);
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn file_values_carry_at_least_twelve_significant_digits() {
        let inst = generate_instance(0.5, 1, 3).unwrap();
        let text = inst.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let raw = text.split("\"L_km\":").nth(1).unwrap().trim_start();
        let mantissa: String = raw.chars().take_while(|c| *c != 'e').filter(|c| c.is_ascii_digit()).collect();
        assert!(mantissa.len() >= 12, "{raw}");
        assert_eq!(v["L_km"].as_f64(), Some(0.5));
    }

    #[test]
    fn rejects_unknown_schema() {
        let text = generate_instance(1.0, 1, 1).unwrap().to_json().unwrap().replace(
            "\"schema_version\": 1",
            "\"schema_version\": 9",
        );
        assert!(matches!(Instance::from_json(&text), Err(Error::SchemaVersion(9))));
    }

    #[test]
    fn normalization_corners() {
        let l = 4.0;
        let t = 8.0;
        assert_eq!(normalize_features(Location::new(-l, -l), 0.0, l, t).values, [0.0, 0.0, 0.0]);
        assert_eq!(normalize_features(Location::new(l, l), t, l, t).values, [1.0, 1.0, 1.0]);
        assert_eq!(normalize_features(Location::origin(), t / 2.0, l, t).values, [0.5, 0.5, 0.5]);
        let far = normalize_features(Location::new(3.0 * l, 0.0), 0.0, l, t);
        assert!(far.clamped);
        assert_eq!(far.values[0], 1.2);
        assert!(!normalize_features(Location::new(1.3 * l, 0.0), 0.0, l, t).clamped);
    }
}
