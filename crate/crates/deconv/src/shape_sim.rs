//! Parametric reactivity distributions, reactivity simulation for a known
//! mask, and mixture-profile construction.
//!
//! Unpaired positions emit exponential reactivities; paired positions emit
//! reactivities from a heavy-tailed generalized extreme value law whose
//! support extends slightly below zero. Mixing two profiles at ratio `p`
//! is elementwise linear interpolation.

use rand::distr::Open01;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::nj_model::ShapeProfile;
use crate::structures::PairingMask;

/// Default exponential rate for unpaired positions.
pub const UNPAIRED_RATE: f64 = 1.46797;
/// Default GEV shape for paired positions (heavy tail).
pub const PAIRED_GEV_SHAPE: f64 = 0.762581;
/// Default GEV scale for paired positions.
pub const PAIRED_GEV_SCALE: f64 = 0.0492536;
/// Default GEV location for paired positions.
pub const PAIRED_GEV_LOCATION: f64 = 0.0395857;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("exponential rate must be positive and finite, got {rate}")]
    InvalidRate { rate: f64 },
    #[error("GEV parameters must have shape > 0, scale > 0, finite location; got shape {shape}, scale {scale}, location {location}")]
    InvalidGevParams { shape: f64, scale: f64, location: f64 },
    #[error("quantile argument must lie strictly inside (0,1), got {u}")]
    QuantileOutOfRange { u: f64 },
    #[error("mixture weight must lie in [0,1], got {p}")]
    MixtureWeightOutOfRange { p: f64 },
    #[error("profile lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
}

/// One-dimensional reactivity law for a position class.
///
/// Density, CDF, quantile, and the density derivative are all closed
/// form; sampling is by inverse CDF, so one uniform draw is consumed per
/// sample regardless of the outcome.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ReactivityDistribution {
    UnpairedExponential { rate: f64 },
    CenterPairedGev { shape: f64, scale: f64, location: f64 },
}

impl ReactivityDistribution {
    /// Exponential law with the default unpaired-position rate.
    pub fn unpaired_default() -> Self {
        Self::UnpairedExponential { rate: UNPAIRED_RATE }
    }

    /// GEV law with the default paired-position parameters.
    pub fn paired_default() -> Self {
        Self::CenterPairedGev {
            shape: PAIRED_GEV_SHAPE,
            scale: PAIRED_GEV_SCALE,
            location: PAIRED_GEV_LOCATION,
        }
    }

    pub fn exponential(rate: f64) -> Result<Self, SimError> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(SimError::InvalidRate { rate });
        }
        Ok(Self::UnpairedExponential { rate })
    }

    pub fn gev(shape: f64, scale: f64, location: f64) -> Result<Self, SimError> {
        if !(shape.is_finite() && shape > 0.0 && scale.is_finite() && scale > 0.0
            && location.is_finite())
        {
            return Err(SimError::InvalidGevParams { shape, scale, location });
        }
        Ok(Self::CenterPairedGev { shape, scale, location })
    }

    /// Lower edge of the support: 0 for the exponential,
    /// `location - scale/shape` for the GEV.
    pub fn support_min(&self) -> f64 {
        match *self {
            Self::UnpairedExponential { .. } => 0.0,
            Self::CenterPairedGev { shape, scale, location } => location - scale / shape,
        }
    }

    /// Probability density at `x`; zero outside the support.
    pub fn density(&self, x: f64) -> f64 {
        assert!(x.is_finite(), "density evaluated at non-finite x = {x}");
        match *self {
            Self::UnpairedExponential { rate } => {
                if x < 0.0 {
                    0.0
                } else {
                    rate * (-rate * x).exp()
                }
            }
            Self::CenterPairedGev { shape, scale, location } => {
                let w = 1.0 + shape * (x - location) / scale;
                if w <= 0.0 {
                    return 0.0;
                }
                // with t = w^{-1/shape}: density = t^{shape+1} e^{-t} / scale
                let lw = w.ln();
                (-(1.0 + 1.0 / shape) * lw - (-lw / shape).exp()).exp() / scale
            }
        }
    }

    /// Derivative of the density with respect to `x`; zero outside the
    /// support (one-sided at the exponential origin).
    pub fn density_derivative(&self, x: f64) -> f64 {
        assert!(x.is_finite(), "density derivative evaluated at non-finite x = {x}");
        match *self {
            Self::UnpairedExponential { rate } => {
                if x < 0.0 {
                    0.0
                } else {
                    -rate * rate * (-rate * x).exp()
                }
            }
            Self::CenterPairedGev { shape, scale, location } => {
                let w = 1.0 + shape * (x - location) / scale;
                if w <= 0.0 {
                    return 0.0;
                }
                // d/dx [t^{shape+1} e^{-t} / scale] with dt/dx = -t^{shape+1}/scale;
                // e^{-t} has flushed to zero long before t reaches the guard
                let lw = w.ln();
                let t = (-lw / shape).exp();
                if t > 1e6 {
                    return 0.0;
                }
                -((-(2.0 + 1.0 / shape) * lw - t).exp()) * (shape + 1.0 - t) / (scale * scale)
            }
        }
    }

    /// Cumulative distribution function at `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        assert!(x.is_finite(), "cdf evaluated at non-finite x = {x}");
        match *self {
            Self::UnpairedExponential { rate } => {
                if x < 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Self::CenterPairedGev { shape, scale, location } => {
                let w = 1.0 + shape * (x - location) / scale;
                if w <= 0.0 {
                    return 0.0;
                }
                (-w.powf(-1.0 / shape)).exp()
            }
        }
    }

    /// Inverse CDF at `u` for `0 < u < 1`.
    pub fn quantile(&self, u: f64) -> Result<f64, SimError> {
        if !(u > 0.0 && u < 1.0) {
            return Err(SimError::QuantileOutOfRange { u });
        }
        Ok(match *self {
            Self::UnpairedExponential { rate } => -(-u).ln_1p() / rate,
            Self::CenterPairedGev { shape, scale, location } => {
                location + scale / shape * ((-u.ln()).powf(-shape) - 1.0)
            }
        })
    }

    /// Draw one reactivity by inverse CDF.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.sample(Open01);
        self.quantile(u).expect("Open01 yields u strictly inside (0,1)")
    }
}

/// Simulate a reactivity profile for `mask` with the default laws:
/// unpaired positions draw from the exponential, paired positions from
/// the GEV. Positions are drawn in order, one uniform per position, so
/// the result is a pure function of the generator state.
pub fn simulate_profile<R: Rng + ?Sized>(mask: &PairingMask, rng: &mut R) -> ShapeProfile {
    let unpaired = ReactivityDistribution::unpaired_default();
    let paired = ReactivityDistribution::paired_default();
    let values = mask
        .iter()
        .map(|is_paired| if is_paired { paired.sample(rng) } else { unpaired.sample(rng) })
        .collect();
    ShapeProfile::new(values).expect("sampled reactivities are finite and mask is nonempty")
}

/// [`simulate_profile`] with a self-contained seed.
pub fn simulate_profile_seeded(mask: &PairingMask, seed: u64) -> ShapeProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate_profile(mask, &mut rng)
}

/// A profile formed as the pointwise interpolation `p*S + (1-p)*T`,
/// remembering the ratio it was built with.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureProfile {
    p: f64,
    values: ShapeProfile,
}

impl MixtureProfile {
    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn values(&self) -> &ShapeProfile {
        &self.values
    }

    pub fn into_values(self) -> ShapeProfile {
        self.values
    }
}

/// Interpolate two equal-length profiles: position `i` becomes
/// `p*s_i + (1-p)*t_i`.
pub fn mix_profiles(
    s: &ShapeProfile,
    t: &ShapeProfile,
    p: f64,
) -> Result<MixtureProfile, SimError> {
    if s.len() != t.len() {
        return Err(SimError::LengthMismatch { left: s.len(), right: t.len() });
    }
    if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
        return Err(SimError::MixtureWeightOutOfRange { p });
    }
    let q = 1.0 - p;
    let values: Vec<f64> = s
        .values()
        .iter()
        .zip(t.values())
        .map(|(&si, &ti)| p * si + q * ti)
        .collect();
    let values = ShapeProfile::new(values).expect("interpolation of finite values is finite");
    Ok(MixtureProfile { p, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::quad::{integrate_segmented, QuadOptions};
    use approx::assert_abs_diff_eq;

    #[test]
    fn exponential_density_at_origin_is_the_rate() {
        let d = ReactivityDistribution::unpaired_default();
        assert_eq!(d.density(0.0), UNPAIRED_RATE);
        assert_eq!(d.density(-0.5), 0.0);
    }

    #[test]
    fn gev_support_edge_location_and_behavior() {
        let d = ReactivityDistribution::paired_default();
        let edge = d.support_min();
        assert_abs_diff_eq!(edge, -0.025002324, epsilon = 1e-8);
        assert_eq!(d.density(edge - 1e-9), 0.0);
        assert_eq!(d.cdf(edge - 1e-9), 0.0);
        // density rises from 0 at the edge (double-exponential win over the
        // polynomial blow-up)
        assert!(d.density(edge + 1e-12) < 1e-10);
        assert!(d.density(0.02) > 0.0);
    }

    #[test]
    fn quantile_closed_forms() {
        let gev = ReactivityDistribution::paired_default();
        // -ln u = 1 collapses the GEV quantile to its location parameter
        let u = (-1.0f64).exp();
        assert_abs_diff_eq!(gev.quantile(u).unwrap(), PAIRED_GEV_LOCATION, epsilon = 1e-12);

        let exp = ReactivityDistribution::unpaired_default();
        assert_abs_diff_eq!(exp.quantile(0.5).unwrap(), 0.4721808, epsilon = 1e-7);

        assert!(exp.quantile(0.0).is_err());
        assert!(exp.quantile(1.0).is_err());
        assert!(gev.quantile(f64::NAN).is_err());
    }

    #[test]
    fn cdf_inverts_quantile_on_a_grid() {
        for dist in [
            ReactivityDistribution::unpaired_default(),
            ReactivityDistribution::paired_default(),
        ] {
            for i in 1..100 {
                let u = i as f64 / 100.0;
                let x = dist.quantile(u).unwrap();
                assert_abs_diff_eq!(dist.cdf(x), u, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn densities_are_normalized() {
        let opt = QuadOptions::new(1e-10, 0.0, 4096);
        let exp = ReactivityDistribution::unpaired_default();
        let r = integrate_segmented(|x| exp.density(x), &[0.0, 1.0, 10.0, 60.0], &opt);
        assert!(r.converged);
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-8);

        let gev = ReactivityDistribution::paired_default();
        let hi = gev.quantile(1.0 - 1e-9).unwrap();
        let r = integrate_segmented(
            |x| gev.density(x),
            &[gev.support_min(), 0.0, 1.0, 100.0, hi],
            &opt,
        );
        assert!(r.converged);
        // 1e-9 of mass deliberately left in the far tail
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn density_derivative_matches_finite_differences() {
        let h = 1e-6;
        for dist in [
            ReactivityDistribution::unpaired_default(),
            ReactivityDistribution::paired_default(),
        ] {
            for i in 1..60 {
                let x = 0.05 * i as f64;
                let fd = (dist.density(x + h) - dist.density(x - h)) / (2.0 * h);
                let an = dist.density_derivative(x);
                assert!(
                    (fd - an).abs() <= 1e-5 * (1.0 + an.abs()),
                    "x = {x}: analytic {an} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn parameter_validation() {
        assert!(ReactivityDistribution::exponential(0.0).is_err());
        assert!(ReactivityDistribution::exponential(f64::INFINITY).is_err());
        assert!(ReactivityDistribution::gev(-0.1, 1.0, 0.0).is_err());
        assert!(ReactivityDistribution::gev(0.5, 0.0, 0.0).is_err());
        assert!(ReactivityDistribution::gev(0.5, 1.0, f64::NAN).is_err());
        assert!(ReactivityDistribution::exponential(2.0).is_ok());
    }

    #[test]
    fn unpaired_simulation_mean_matches_the_exponential() {
        let mask: PairingMask = ".".repeat(100_000).parse().unwrap();
        let profile = simulate_profile_seeded(&mask, 31415);
        let mean: f64 = profile.values().iter().sum::<f64>() / 1e5;
        let expect = 1.0 / UNPAIRED_RATE;
        let sigma = expect / (1e5f64).sqrt();
        assert!((mean - expect).abs() < 3.0 * sigma, "mean {mean} vs {expect}");
    }

    #[test]
    fn paired_simulation_passes_kolmogorov_smirnov() {
        let mask: PairingMask = "x".repeat(100_000).parse().unwrap();
        let profile = simulate_profile_seeded(&mask, 27182);
        let mut xs: Vec<f64> = profile.values().to_vec();
        xs.sort_by(f64::total_cmp);
        let gev = ReactivityDistribution::paired_default();
        let n = xs.len() as f64;
        let mut ks: f64 = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            let f = gev.cdf(x);
            ks = ks.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
        }
        // 1% critical value 1.6276/sqrt(n)
        assert!(ks < 0.005147, "KS statistic {ks}");
    }

    #[test]
    fn simulation_is_deterministic_in_the_seed() {
        let mask: PairingMask = "x..x.x".parse().unwrap();
        let a = simulate_profile_seeded(&mask, 42);
        let b = simulate_profile_seeded(&mask, 42);
        assert_eq!(a.values(), b.values());
        let c = simulate_profile_seeded(&mask, 43);
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn mixing_endpoints_and_midpoint() {
        let s = ShapeProfile::new(vec![1.0, 2.0, 3.0]).unwrap();
        let t = ShapeProfile::new(vec![5.0, 6.0, 7.0]).unwrap();
        assert_eq!(mix_profiles(&s, &t, 1.0).unwrap().values().values(), s.values());
        assert_eq!(mix_profiles(&s, &t, 0.0).unwrap().values().values(), t.values());
        assert_eq!(
            mix_profiles(&s, &t, 0.5).unwrap().values().values(),
            &[3.0, 4.0, 5.0]
        );
        assert_eq!(mix_profiles(&s, &t, 0.25).unwrap().p(), 0.25);
    }

    #[test]
    fn mixing_rejects_bad_arguments() {
        let s = ShapeProfile::new(vec![1.0, 2.0]).unwrap();
        let t = ShapeProfile::new(vec![1.0]).unwrap();
        assert_eq!(
            mix_profiles(&s, &t, 0.5),
            Err(SimError::LengthMismatch { left: 2, right: 1 })
        );
        let t2 = ShapeProfile::new(vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            mix_profiles(&s, &t2, 1.5),
            Err(SimError::MixtureWeightOutOfRange { .. })
        ));
        assert!(matches!(
            mix_profiles(&s, &t2, -0.1),
            Err(SimError::MixtureWeightOutOfRange { .. })
        ));
        assert!(matches!(
            mix_profiles(&s, &t2, f64::NAN),
            Err(SimError::MixtureWeightOutOfRange { .. })
        ));
    }
}
