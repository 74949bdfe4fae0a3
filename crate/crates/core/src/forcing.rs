//! The forcing term F = h + η and the measurement noise model.
//!
//! Bursts are shapes in the Hilbert space activated at increasing times and
//! decaying according to a profile φ with φ(0) = 1 and 0 < φ(t) ≤ e^{−ρt}.
//! The background source η is a bounded, Lipschitz nuisance term. Noise is
//! bounded by σ and drawn deterministically from a counter-based hash so a
//! measurement stream can be regenerated in any order.

use crate::error::{Error, Result};
use crate::space::{Representation, SpaceElement};
use std::fmt;
use std::sync::Arc;

/// Decay profile of a burst.
#[derive(Debug, Clone, PartialEq)]
pub enum DecayProfile {
    /// φ(t) = e^{−ρt}.
    Exponential { rho: f64 },
    /// General bounded profile realized as a convex mix of exponentials,
    /// φ(t) = Σ wᵢ e^{−rᵢ t} with Σ wᵢ = 1 and every rᵢ ≥ ρ, which gives
    /// φ(0) = 1 and 0 < φ(t) ≤ e^{−ρt} by construction.
    ExpMix { rho: f64, terms: Vec<(f64, f64)> },
}

impl DecayProfile {
    pub fn exponential(rho: f64) -> Result<Self> {
        if rho <= 0.0 {
            return Err(Error::InvalidParameter(format!("decay rate rho must be > 0, got {rho}")));
        }
        Ok(DecayProfile::Exponential { rho })
    }

    /// terms = [(weight, rate), …]; weights must be positive and sum to 1,
    /// rates must be ≥ rho so the e^{−ρt} envelope holds.
    pub fn exp_mix(rho: f64, terms: Vec<(f64, f64)>) -> Result<Self> {
        if rho <= 0.0 {
            return Err(Error::InvalidParameter(format!("decay rate rho must be > 0, got {rho}")));
        }
        if terms.is_empty() {
            return Err(Error::InvalidParameter("exp-mix profile needs at least one term".into()));
        }
        let wsum: f64 = terms.iter().map(|(w, _)| w).sum();
        if (wsum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("exp-mix weights must sum to 1 (phi(0)=1), got {wsum}")));
        }
        for &(w, r) in &terms {
            if w <= 0.0 {
                return Err(Error::InvalidParameter(format!("exp-mix weight must be > 0, got {w}")));
            }
            if r < rho {
                return Err(Error::InvalidParameter(format!(
                    "exp-mix rate {r} below envelope rate rho = {rho}; phi would exceed e^(-rho t)"
                )));
            }
        }
        Ok(DecayProfile::ExpMix { rho, terms })
    }

    /// The envelope rate ρ in 0 < φ(t) ≤ e^{−ρt}.
    pub fn rho(&self) -> f64 {
        match self {
            DecayProfile::Exponential { rho } | DecayProfile::ExpMix { rho, .. } => *rho,
        }
    }

    pub fn is_exponential(&self) -> bool {
        matches!(self, DecayProfile::Exponential { .. })
    }

    /// φ(t) for t ≥ 0.
    pub fn phi(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        Ok(match self {
            DecayProfile::Exponential { rho } => (-rho * t).exp(),
            DecayProfile::ExpMix { terms, .. } => {
                terms.iter().map(|(w, r)| w * (-r * t).exp()).sum()
            }
        })
    }
}

/// One activated burst: shape h_j at time t_j.
#[derive(Debug, Clone)]
pub struct BurstEvent {
    pub time: f64,
    pub shape: SpaceElement,
}

/// Ordered burst train h(t) = Σ_j h_j φ(t−t_j) χ_{[t_j,∞)}(t).
#[derive(Debug, Clone)]
pub struct BurstTrain {
    events: Vec<BurstEvent>,
    decay: DecayProfile,
    h_bound: f64,
    dim: usize,
    repr: Representation,
}

impl BurstTrain {
    /// `h_bound` is the uniform shape bound H; pass `None` to use the largest
    /// realized shape norm.
    pub fn new(events: Vec<BurstEvent>, decay: DecayProfile, h_bound: Option<f64>) -> Result<Self> {
        let first = events
            .first()
            .ok_or_else(|| Error::InvalidParameter("use BurstTrain::empty for a train with no events".into()))?;
        let dim = first.shape.dim();
        let repr = first.shape.representation();
        let mut prev = 0.0;
        for (i, ev) in events.iter().enumerate() {
            if ev.time <= prev {
                return Err(Error::InvalidParameter(format!(
                    "burst times must be strictly increasing and positive; event {i} at t = {}",
                    ev.time
                )));
            }
            if ev.shape.dim() != dim || ev.shape.representation() != repr {
                return Err(Error::DimensionMismatch { expected: dim, got: ev.shape.dim() });
            }
            prev = ev.time;
        }
        let max_norm = events.iter().map(|e| e.shape.norm()).fold(0.0, f64::max);
        let h_bound = h_bound.unwrap_or(max_norm);
        if max_norm > h_bound * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "burst shape norm {max_norm} exceeds uniform bound H = {h_bound}"
            )));
        }
        Ok(BurstTrain { events, decay, h_bound, dim, repr })
    }

    pub fn empty(dim: usize, repr: Representation, decay: DecayProfile) -> Self {
        BurstTrain { events: Vec::new(), decay, h_bound: 0.0, dim, repr }
    }

    pub fn events(&self) -> &[BurstEvent] {
        &self.events
    }

    pub fn decay(&self) -> &DecayProfile {
        &self.decay
    }

    pub fn h_bound(&self) -> f64 {
        self.h_bound
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn representation(&self) -> Representation {
        self.repr
    }

    /// h(t) = Σ_{t_j ≤ t} φ(t−t_j)·h_j (closed indicator: the burst counts at
    /// its activation instant).
    pub fn value(&self, t: f64) -> Result<SpaceElement> {
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        let mut acc = SpaceElement::zero(self.dim, self.repr);
        for ev in &self.events {
            if ev.time <= t {
                acc.axpy(self.decay.phi(t - ev.time)?, &ev.shape)?;
            }
        }
        Ok(acc)
    }
}

type CustomSampler = Arc<dyn Fn(f64) -> SpaceElement + Send + Sync>;

#[derive(Clone)]
pub enum BackgroundKind {
    Zero,
    /// η(t) = x·e^{−Lt}
    ExpProfile,
    /// η(t) = x·sin(Lt)
    SinProfile,
    Custom(CustomSampler),
}

impl fmt::Debug for BackgroundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackgroundKind::Zero => write!(f, "Zero"),
            BackgroundKind::ExpProfile => write!(f, "ExpProfile"),
            BackgroundKind::SinProfile => write!(f, "SinProfile"),
            BackgroundKind::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Background source η with its certified bound K = sup ‖η(t)‖ and Lipschitz
/// constant L (for the profile kinds these are the honest constants of the
/// realized η, namely ‖x‖ and L_rate·‖x‖).
#[derive(Debug, Clone)]
pub struct BackgroundSource {
    kind: BackgroundKind,
    x: SpaceElement,
    l_rate: f64,
    k: f64,
    l: f64,
}

impl BackgroundSource {
    pub fn zero(dim: usize, repr: Representation) -> Self {
        BackgroundSource {
            kind: BackgroundKind::Zero,
            x: SpaceElement::zero(dim, repr),
            l_rate: 0.0,
            k: 0.0,
            l: 0.0,
        }
    }

    pub fn exp_profile(x: SpaceElement, l_rate: f64) -> Result<Self> {
        if l_rate < 0.0 {
            return Err(Error::InvalidParameter(format!("profile rate must be ≥ 0, got {l_rate}")));
        }
        let n = x.norm();
        Ok(BackgroundSource { kind: BackgroundKind::ExpProfile, k: n, l: l_rate * n, x, l_rate })
    }

    pub fn sin_profile(x: SpaceElement, l_rate: f64) -> Result<Self> {
        if l_rate < 0.0 {
            return Err(Error::InvalidParameter(format!("profile rate must be ≥ 0, got {l_rate}")));
        }
        let n = x.norm();
        Ok(BackgroundSource { kind: BackgroundKind::SinProfile, k: n, l: l_rate * n, x, l_rate })
    }

    /// Arbitrary sampler with caller-certified bounds.
    pub fn custom(
        sampler: CustomSampler,
        dim: usize,
        repr: Representation,
        k: f64,
        l: f64,
    ) -> Self {
        BackgroundSource {
            kind: BackgroundKind::Custom(sampler),
            x: SpaceElement::zero(dim, repr),
            l_rate: 0.0,
            k,
            l,
        }
    }

    pub fn kind(&self) -> &BackgroundKind {
        &self.kind
    }

    /// Rate of the built-in profiles (the L in e^{−Lt} / sin(Lt)).
    pub fn l_rate(&self) -> f64 {
        self.l_rate
    }

    /// Uniform bound K with sup_t ‖η(t)‖ ≤ K.
    pub fn k_bound(&self) -> f64 {
        self.k
    }

    /// Lipschitz constant L with ‖η(t+s) − η(t)‖ ≤ L·s.
    pub fn l_bound(&self) -> f64 {
        self.l
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }

    pub fn representation(&self) -> Representation {
        self.x.representation()
    }

    /// η(t).
    pub fn value(&self, t: f64) -> Result<SpaceElement> {
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        Ok(match &self.kind {
            BackgroundKind::Zero => SpaceElement::zero(self.x.dim(), self.x.representation()),
            BackgroundKind::ExpProfile => self.x.scale((-self.l_rate * t).exp()),
            BackgroundKind::SinProfile => self.x.scale((self.l_rate * t).sin()),
            BackgroundKind::Custom(f) => f(t),
        })
    }

    /// For separable sources η(t) = p(t)·x, the scalar profile p(t) and the
    /// fixed element x. Lets the solver integrate the background with a scalar
    /// quadrature instead of a vector one.
    pub fn separable(&self) -> Option<(&SpaceElement, impl Fn(f64) -> f64 + '_)> {
        match self.kind {
            BackgroundKind::Custom(_) => None,
            _ => Some((&self.x, move |t: f64| match self.kind {
                BackgroundKind::Zero => 0.0,
                BackgroundKind::ExpProfile => (-self.l_rate * t).exp(),
                BackgroundKind::SinProfile => (self.l_rate * t).sin(),
                BackgroundKind::Custom(_) => unreachable!(),
            })),
        }
    }
}

/// Bounded measurement noise: uniform on [−σ, σ], drawn as a pure function of
/// (seed, t, channel) so regeneration is order-independent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub sigma: f64,
    pub seed: u64,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

impl NoiseModel {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if sigma < 0.0 {
            return Err(Error::InvalidParameter(format!("noise level must be ≥ 0, got {sigma}")));
        }
        Ok(NoiseModel { sigma, seed })
    }

    pub fn draw(&self, t: f64, channel_id: u64) -> f64 {
        if self.sigma == 0.0 {
            return 0.0;
        }
        let h = splitmix(splitmix(self.seed ^ t.to_bits()) ^ channel_id.wrapping_mul(0x2545f4914f6cdd1d));
        // 53 high bits -> uniform in [0, 1)
        let u = (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        self.sigma * (2.0 * u - 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_exponential_values() {
        let d = DecayProfile::exponential(1.0).unwrap();
        assert_eq!(d.phi(0.0).unwrap(), 1.0);
        assert!((d.phi(1.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert!(d.phi(-0.1).is_err());
    }

    #[test]
    fn phi_exp_mix_matches_formula() {
        // phi(t) = (e^{-2t} + e^{-t})/2 with envelope rate 1
        let d = DecayProfile::exp_mix(1.0, vec![(0.5, 2.0), (0.5, 1.0)]).unwrap();
        assert!((d.phi(0.0).unwrap() - 1.0).abs() < 1e-15);
        let expected = 0.5 * ((-2.0f64).exp() + (-1.0f64).exp());
        assert!((d.phi(1.0).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.251607).abs() < 1e-6);
    }

    #[test]
    fn exp_mix_validation() {
        assert!(DecayProfile::exp_mix(1.0, vec![(0.5, 2.0), (0.4, 1.0)]).is_err()); // weights
        assert!(DecayProfile::exp_mix(1.0, vec![(1.0, 0.5)]).is_err()); // rate below envelope
        assert!(DecayProfile::exp_mix(-1.0, vec![(1.0, 1.0)]).is_err());
    }

    #[test]
    fn phi_dominated_by_envelope_on_grid() {
        let d = DecayProfile::exp_mix(1.0, vec![(0.5, 2.0), (0.5, 1.0)]).unwrap();
        let rho = d.rho();
        for i in 0..10_000 {
            let t = i as f64 * 2e-3;
            let p = d.phi(t).unwrap();
            assert!(p > 0.0 && p <= (-rho * t).exp() * (1.0 + 1e-14), "t={t}");
        }
    }

    #[test]
    fn burst_value_examples() {
        let decay = DecayProfile::exponential(1.0).unwrap();
        let events = vec![
            BurstEvent { time: 0.5, shape: SpaceElement::scalar(1.0) },
            BurstEvent { time: 1.5, shape: SpaceElement::scalar(2.0) },
        ];
        let train = BurstTrain::new(events, decay, None).unwrap();
        assert!(train.value(0.25).unwrap().is_zero());
        // At the activation instant phi(0) = 1.
        assert!((train.value(0.5).unwrap().coeffs()[0] - 1.0).abs() < 1e-15);
        // Two active bursts at t = 2.5: e^{-2} + 2 e^{-1}.
        let expected = (-2.0f64).exp() + 2.0 * (-1.0f64).exp();
        assert!((expected - 0.871094).abs() < 1e-6);
        assert!((train.value(2.5).unwrap().coeffs()[0] - expected).abs() < 1e-14);
    }

    #[test]
    fn burst_jump_is_shape() {
        let decay = DecayProfile::exponential(2.0).unwrap();
        let train = BurstTrain::new(
            vec![BurstEvent { time: 1.0, shape: SpaceElement::scalar(3.0) }],
            decay,
            None,
        )
        .unwrap();
        let eps = 1e-9;
        let before = train.value(1.0 - eps).unwrap().coeffs()[0];
        let at = train.value(1.0).unwrap().coeffs()[0];
        assert!((at - before - 3.0).abs() < 1e-8);
    }

    #[test]
    fn burst_times_must_increase() {
        let decay = DecayProfile::exponential(1.0).unwrap();
        let bad = vec![
            BurstEvent { time: 1.0, shape: SpaceElement::scalar(1.0) },
            BurstEvent { time: 0.5, shape: SpaceElement::scalar(1.0) },
        ];
        assert!(BurstTrain::new(bad, decay.clone(), None).is_err());
        let nonpos = vec![BurstEvent { time: 0.0, shape: SpaceElement::scalar(1.0) }];
        assert!(BurstTrain::new(nonpos, decay, None).is_err());
    }

    #[test]
    fn background_values_and_bounds() {
        let x = SpaceElement::new(vec![1.0, 2.0], Representation::Abstract);
        let bg = BackgroundSource::exp_profile(x.clone(), 0.01).unwrap();
        // At t = 0 the value is x itself.
        assert_eq!(bg.value(0.0).unwrap(), x);
        assert!((bg.k_bound() - x.norm()).abs() < 1e-15);
        assert!((bg.l_bound() - 0.01 * x.norm()).abs() < 1e-15);

        let bg = BackgroundSource::sin_profile(x.clone(), 0.01).unwrap();
        assert!(bg.value(0.0).unwrap().is_zero());

        let z = BackgroundSource::zero(2, Representation::Abstract);
        assert!(z.value(5.0).unwrap().is_zero());
        assert_eq!(z.k_bound(), 0.0);
    }

    #[test]
    fn background_lipschitz_probe() {
        let x = SpaceElement::new(vec![0.3, -1.2, 0.8], Representation::Abstract);
        for bg in [
            BackgroundSource::exp_profile(x.clone(), 0.25).unwrap(),
            BackgroundSource::sin_profile(x.clone(), 0.25).unwrap(),
        ] {
            let l = bg.l_bound();
            for i in 0..200 {
                let t = i as f64 * 0.05;
                for s in [1e-3, 1e-2, 0.1] {
                    let d = bg.value(t + s).unwrap().sub(&bg.value(t).unwrap()).unwrap().norm();
                    assert!(d <= l * s * (1.0 + 1e-6), "t={t}, s={s}");
                }
                assert!(bg.value(t).unwrap().norm() <= bg.k_bound() * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn noise_bounded_and_deterministic() {
        let n = NoiseModel::new(1e-3, 42).unwrap();
        for i in 0..1000 {
            let t = i as f64 * 0.01;
            for ch in 0..4u64 {
                let v = n.draw(t, ch);
                assert!(v.abs() <= 1e-3);
                assert_eq!(v, n.draw(t, ch));
            }
        }
        let z = NoiseModel::new(0.0, 42).unwrap();
        assert_eq!(z.draw(0.3, 1), 0.0);
        // Different channels at the same instant decorrelate.
        assert_ne!(n.draw(0.5, 0), n.draw(0.5, 1));
    }
}
