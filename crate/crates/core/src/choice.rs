//! Customer choice between home delivery and an offered pickup point, the
//! travel-mode choice for collecting a parcel, and the resulting customer
//! emissions.
//!
//! Both choices are logit models. The random utility terms are never drawn
//! explicitly; only the closed-form probabilities are used.
//!
//! Mode utilities are `u0_l + beta_l * c`, read literally: with the default
//! parameters the non-walking modes gain utility with distance, so the car
//! share rises as pickup points move further away.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Scalar;

/// Decision taken for one arriving order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Offer {
    /// Offer pickup point with this index into the instance's pickup list,
    /// alongside home delivery.
    PickupPoint(usize),
    HomeOnly,
}

impl fmt::Display for Offer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Offer::PickupPoint(i) => write!(f, "pickup:{i}"),
            Offer::HomeOnly => f.write_str("home"),
        }
    }
}

/// Realized delivery choice of a customer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ChoiceOutcome<T = f64> {
    Home,
    Pickup { index: usize, distance: T },
}

impl<T: Scalar> ChoiceOutcome<T> {
    pub fn chose_pickup(&self) -> bool {
        matches!(self, ChoiceOutcome::Pickup { .. })
    }

    pub fn pickup_index(&self) -> Option<usize> {
        match *self {
            ChoiceOutcome::Pickup { index, .. } => Some(index),
            ChoiceOutcome::Home => None,
        }
    }

    pub fn distance_to_pickup(&self) -> Option<T> {
        match *self {
            ChoiceOutcome::Pickup { distance, .. } => Some(distance),
            ChoiceOutcome::Home => None,
        }
    }
}

impl<T: Scalar> fmt::Display for ChoiceOutcome<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChoiceOutcome::Home => f.write_str("home"),
            ChoiceOutcome::Pickup { index, .. } => write!(f, "pickup:{index}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TravelMode {
    Car,
    Chained,
    Cycle,
    Walk,
}

impl TravelMode {
    pub const ALL: [TravelMode; 4] = [TravelMode::Car, TravelMode::Chained, TravelMode::Cycle, TravelMode::Walk];
}

/// Utility of a travel mode: `base + per_km * distance`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeUtility<T = f64> {
    pub base: T,
    pub per_km: T,
}

/// Pickup-versus-home acceptance regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Low,
    Base,
    High,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::Low, Regime::Base, Regime::High];

    pub fn name(self) -> &'static str {
        match self {
            Regime::Low => "low",
            Regime::Base => "base",
            Regime::High => "high",
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(Regime::Low),
            "base" => Ok(Regime::Base),
            "high" => Ok(Regime::High),
            other => Err(format!("unknown regime `{other}` (expected low, base or high)")),
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Utilities of the binary pickup/home choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceUtility<T = f64> {
    /// Disutility per km of distance to the offered pickup point.
    pub beta_pup: T,
    pub u0_pup: T,
    pub u0_home: T,
}

impl AcceptanceUtility<f64> {
    pub const LOW: Self = Self { beta_pup: 0.57, u0_pup: -1.88, u0_home: -2.00 };
    pub const BASE: Self = Self { beta_pup: 0.45, u0_pup: -1.06, u0_home: -2.00 };
    pub const HIGH: Self = Self { beta_pup: 0.58, u0_pup: 0.31, u0_home: -2.00 };

    pub fn for_regime(regime: Regime) -> Self {
        match regime {
            Regime::Low => Self::LOW,
            Regime::Base => Self::BASE,
            Regime::High => Self::HIGH,
        }
    }
}

/// All parameters of the customer behaviour and emission model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChoiceParams<T = f64> {
    pub beta_pup: T,
    pub u0_pup: T,
    pub u0_home: T,
    /// Indexed in [`TravelMode::ALL`] order.
    pub modes: [ModeUtility<T>; 4],
    /// g CO2 per km driven by the delivery truck.
    pub e_truck: T,
    /// g CO2 per km driven by a customer car.
    pub e_car: T,
}

pub const DEFAULT_MODES: [ModeUtility<f64>; 4] = [
    ModeUtility { base: -3.532, per_km: 2.481 },
    ModeUtility { base: -2.944, per_km: 2.398 },
    ModeUtility { base: -1.593, per_km: 1.845 },
    ModeUtility { base: 0.0, per_km: 0.0 },
];
pub const DEFAULT_E_TRUCK: f64 = 196.0;
pub const DEFAULT_E_CAR: f64 = 116.0;

impl ChoiceParams<f64> {
    pub fn regime(regime: Regime) -> Self {
        let a = AcceptanceUtility::for_regime(regime);
        Self {
            beta_pup: a.beta_pup,
            u0_pup: a.u0_pup,
            u0_home: a.u0_home,
            modes: DEFAULT_MODES,
            e_truck: DEFAULT_E_TRUCK,
            e_car: DEFAULT_E_CAR,
        }
    }
}

impl Default for ChoiceParams<f64> {
    fn default() -> Self {
        Self::regime(Regime::Base)
    }
}

impl<T: Scalar> ChoiceParams<T> {
    pub fn cast<U: Scalar>(&self) -> ChoiceParams<U> {
        let c = |v: T| U::lit(v.to_f64_lossy());
        ChoiceParams {
            beta_pup: c(self.beta_pup),
            u0_pup: c(self.u0_pup),
            u0_home: c(self.u0_home),
            modes: self.modes.map(|m| ModeUtility { base: c(m.base), per_km: c(m.per_km) }),
            e_truck: c(self.e_truck),
            e_car: c(self.e_car),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.e_truck > T::zero() && self.e_car > T::zero();
        if ok {
            Ok(())
        } else {
            Err(Error::Format("emission factors must be positive".into()))
        }
    }

    pub fn pickup_utility(&self, dist_km: T) -> T {
        self.u0_pup - self.beta_pup * dist_km
    }
}

/// Parameter file contents: the three acceptance regimes plus shared mode
/// utilities and emission factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceParamFile {
    pub low: AcceptanceUtility,
    pub base: AcceptanceUtility,
    pub high: AcceptanceUtility,
    pub car: ModeUtility,
    pub chained: ModeUtility,
    pub cycle: ModeUtility,
    pub walk: ModeUtility,
    pub e_truck: f64,
    pub e_car: f64,
}

impl Default for ChoiceParamFile {
    fn default() -> Self {
        Self {
            low: AcceptanceUtility::LOW,
            base: AcceptanceUtility::BASE,
            high: AcceptanceUtility::HIGH,
            car: DEFAULT_MODES[0],
            chained: DEFAULT_MODES[1],
            cycle: DEFAULT_MODES[2],
            walk: DEFAULT_MODES[3],
            e_truck: DEFAULT_E_TRUCK,
            e_car: DEFAULT_E_CAR,
        }
    }
}

impl ChoiceParamFile {
    pub fn params(&self, regime: Regime) -> Result<ChoiceParams> {
        let a = match regime {
            Regime::Low => self.low,
            Regime::Base => self.base,
            Regime::High => self.high,
        };
        let p = ChoiceParams {
            beta_pup: a.beta_pup,
            u0_pup: a.u0_pup,
            u0_home: a.u0_home,
            modes: [self.car, self.chained, self.cycle, self.walk],
            e_truck: self.e_truck,
            e_car: self.e_car,
        };
        p.validate()?;
        Ok(p)
    }
}

fn check_distance<T: Scalar>(dist_km: T) -> Result<()> {
    if dist_km >= T::zero() {
        Ok(())
    } else {
        Err(Error::NegativeDistance(dist_km.to_f64_lossy()))
    }
}

/// Probability that a customer at `dist_km` from the offered pickup point
/// chooses it over home delivery. Zero for a home-only offer.
pub fn pickup_probability<T: Scalar>(params: &ChoiceParams<T>, dist_km: T, offer: Offer) -> Result<T> {
    check_distance(dist_km)?;
    Ok(match offer {
        Offer::HomeOnly => T::zero(),
        Offer::PickupPoint(_) => logistic(params.pickup_utility(dist_km) - params.u0_home),
    })
}

fn logistic<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Numerically stable softmax of a small utility vector.
pub fn softmax<T: Scalar>(utilities: &[T]) -> Vec<T> {
    let max = utilities.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = utilities.iter().map(|u| (*u - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Travel-mode shares in [`TravelMode::ALL`] order for a pickup trip of `dist_km`.
pub fn mode_probabilities<T: Scalar>(params: &ChoiceParams<T>, dist_km: T) -> [T; 4] {
    let u = params.modes.map(|m| m.base + m.per_km * dist_km);
    let p = softmax(&u);
    [p[0], p[1], p[2], p[3]]
}

pub fn car_probability<T: Scalar>(params: &ChoiceParams<T>, dist_km: T) -> T {
    mode_probabilities(params, dist_km)[0]
}

/// Expected emission of the collection trip: a car round trip weighted by
/// the probability of using the car.
pub fn customer_emission<T: Scalar>(params: &ChoiceParams<T>, outcome: &ChoiceOutcome<T>) -> T {
    match *outcome {
        ChoiceOutcome::Home => T::zero(),
        ChoiceOutcome::Pickup { distance, .. } => round_trip(params, distance) * car_probability(params, distance),
    }
}

fn round_trip<T: Scalar>(params: &ChoiceParams<T>, dist_km: T) -> T {
    T::lit(2.0) * params.e_car * dist_km
}

/// How customer travel emissions are accounted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmissionAccounting {
    /// Probability-weighted car emission.
    #[default]
    Expected,
    /// Draw a travel mode and charge the full round trip if it is the car.
    SampledMode,
}

/// Customer behaviour as seen by the environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChoiceModel<T = f64> {
    pub params: ChoiceParams<T>,
    pub emission: EmissionAccounting,
    /// Test hook: every offered pickup point is accepted.
    pub forced_accept: bool,
}

impl<T: Scalar> ChoiceModel<T> {
    pub fn new(params: ChoiceParams<T>) -> Self {
        Self { params, emission: EmissionAccounting::Expected, forced_accept: false }
    }

    pub fn with_forced_accept(mut self, forced: bool) -> Self {
        self.forced_accept = forced;
        self
    }

    pub fn with_emission(mut self, emission: EmissionAccounting) -> Self {
        self.emission = emission;
        self
    }

    pub fn acceptance_probability(&self, offer: Offer, dist_km: T) -> Result<T> {
        match offer {
            Offer::PickupPoint(_) if self.forced_accept => {
                check_distance(dist_km)?;
                Ok(T::one())
            }
            _ => pickup_probability(&self.params, dist_km, offer),
        }
    }

    /// Bernoulli draw of the customer's choice. Always consumes one uniform,
    /// so policies replayed on the same stream see coupled randomness.
    pub fn sample_choice<R: Rng + ?Sized>(&self, offer: Offer, dist_km: T, rng: &mut R) -> Result<ChoiceOutcome<T>> {
        let p = self.acceptance_probability(offer, dist_km)?;
        let u = T::lit(rng.random::<f64>());
        Ok(match offer {
            Offer::PickupPoint(index) if u < p => ChoiceOutcome::Pickup { index, distance: dist_km },
            _ => ChoiceOutcome::Home,
        })
    }

    /// Emission of a realized choice under the configured accounting. The
    /// sampled-mode variant consumes one uniform whenever a pickup was chosen.
    pub fn emission_of<R: Rng + ?Sized>(&self, outcome: &ChoiceOutcome<T>, rng: &mut R) -> T {
        match (self.emission, *outcome) {
            (_, ChoiceOutcome::Home) => T::zero(),
            (EmissionAccounting::Expected, _) => customer_emission(&self.params, outcome),
            (EmissionAccounting::SampledMode, ChoiceOutcome::Pickup { distance, .. }) => {
                let u = T::lit(rng.random::<f64>());
                if u < car_probability(&self.params, distance) {
                    round_trip(&self.params, distance)
                } else {
                    T::zero()
                }
            }
        }
    }
}
