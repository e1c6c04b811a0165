//! Switching delays and download accounting.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::game::NetworkKind;

/// Resampling attempts before a truncated draw falls back to clamping.
const MAX_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DelaySpec {
    /// `xi + lambda * sinh((Z - gamma) / delta)` with `Z` standard normal.
    JohnsonSu {
        gamma: f64,
        delta: f64,
        lambda: f64,
        xi: f64,
    },
    StudentT {
        nu: f64,
        loc: f64,
        scale: f64,
    },
    Constant {
        seconds: f64,
    },
}

impl DelaySpec {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            DelaySpec::JohnsonSu {
                gamma,
                delta,
                lambda,
                xi,
            } => {
                let z: f64 = StandardNormal.sample(rng);
                xi + lambda * ((z - gamma) / delta).sinh()
            }
            DelaySpec::StudentT { nu, loc, scale } => {
                let t = StudentT::new(nu).expect("validated degrees of freedom");
                loc + scale * t.sample(rng)
            }
            DelaySpec::Constant { seconds } => seconds,
        }
    }

    /// A draw conditioned on `[0, max_s]`, by rejection.
    pub fn sample_truncated<R: Rng + ?Sized>(&self, max_s: f64, rng: &mut R) -> f64 {
        let mut last = 0.0;
        for _ in 0..MAX_RESAMPLES {
            last = self.draw(rng);
            if (0.0..=max_s).contains(&last) {
                return last;
            }
        }
        last.clamp(0.0, max_s)
    }

    /// Unnormalized density, for numeric checks.
    pub fn density_shape(&self, x: f64) -> f64 {
        match *self {
            DelaySpec::JohnsonSu {
                gamma,
                delta,
                lambda,
                xi,
            } => {
                let z = (x - xi) / lambda;
                let u = gamma + delta * z.asinh();
                (-0.5 * u * u).exp() / (1.0 + z * z).sqrt()
            }
            DelaySpec::StudentT { nu, loc, scale } => {
                let z = (x - loc) / scale;
                (1.0 + z * z / nu).powf(-(nu + 1.0) / 2.0)
            }
            DelaySpec::Constant { .. } => f64::NAN,
        }
    }

    fn problems(&self, name: &str, slot_duration_s: f64) -> Vec<String> {
        let mut errs = Vec::new();
        let positive = |v: f64| v > 0.0 && v.is_finite();
        match *self {
            DelaySpec::JohnsonSu {
                gamma,
                delta,
                lambda,
                xi,
            } => {
                if !positive(delta) || !positive(lambda) || !gamma.is_finite() || !xi.is_finite() {
                    errs.push(format!(
                        "{name} delay: Johnson SU needs finite gamma, xi and positive delta, lambda"
                    ));
                }
            }
            DelaySpec::StudentT { nu, loc, scale } => {
                if !positive(nu) || !positive(scale) || !loc.is_finite() {
                    errs.push(format!(
                        "{name} delay: Student t needs positive nu, scale and finite loc"
                    ));
                }
            }
            DelaySpec::Constant { seconds } => {
                if !(0.0..=slot_duration_s).contains(&seconds) {
                    errs.push(format!(
                        "{name} delay: constant {seconds} s outside [0, {slot_duration_s}]"
                    ));
                }
            }
        }
        errs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayModel {
    pub wifi: DelaySpec,
    pub cellular: DelaySpec,
}

impl Default for DelayModel {
    fn default() -> Self {
        Self {
            wifi: DelaySpec::JohnsonSu {
                gamma: -0.8,
                delta: 1.6,
                lambda: 2.0,
                xi: 4.0,
            },
            cellular: DelaySpec::StudentT {
                nu: 4.0,
                loc: 7.0,
                scale: 1.5,
            },
        }
    }
}

impl DelayModel {
    pub fn spec(&self, kind: NetworkKind) -> &DelaySpec {
        match kind {
            NetworkKind::Wifi => &self.wifi,
            NetworkKind::Cellular => &self.cellular,
        }
    }

    pub fn problems(&self, slot_duration_s: f64) -> Vec<String> {
        let mut errs = self.wifi.problems("wifi", slot_duration_s);
        errs.extend(self.cellular.problems("cellular", slot_duration_s));
        errs
    }
}

/// Seconds lost to reassociation: zero when staying, otherwise a truncated
/// draw for the target network's kind.
pub fn sample_switch_delay<R: Rng + ?Sized>(
    prev: Option<usize>,
    next: usize,
    next_kind: NetworkKind,
    model: &DelayModel,
    slot_duration_s: f64,
    rng: &mut R,
) -> f64 {
    match prev {
        Some(p) if p != next => model.spec(next_kind).sample_truncated(slot_duration_s, rng),
        _ => 0.0,
    }
}

/// Bytes downloaded in one slot at `rate_mbps` after `delay_s` of dead time.
pub fn slot_download_bytes(rate_mbps: f64, delay_s: f64, slot_duration_s: f64) -> f64 {
    rate_mbps * (slot_duration_s - delay_s).max(0.0) * 1e6 / 8.0
}

/// Adds one slot's download to a running total.
pub fn accumulate_download(total_bytes: &mut f64, gain_scaled: f64, c_max: f64, delay_s: f64, slot_duration_s: f64) {
    *total_bytes += slot_download_bytes(gain_scaled * c_max, delay_s, slot_duration_s);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Truncated mean by composite Simpson integration of the density shape.
    fn truncated_mean(spec: &DelaySpec, hi: f64) -> f64 {
        let n = 20_000;
        let h = hi / n as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..=n {
            let x = i as f64 * h;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let f = spec.density_shape(x);
            num += w * x * f;
            den += w * f;
        }
        num / den
    }

    #[test]
    fn staying_costs_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = DelayModel::default();
        assert_eq!(
            sample_switch_delay(Some(2), 2, NetworkKind::Wifi, &m, 15.0, &mut rng),
            0.0
        );
        assert_eq!(sample_switch_delay(None, 2, NetworkKind::Wifi, &m, 15.0, &mut rng), 0.0);
    }

    #[test]
    fn point_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let spec = DelaySpec::Constant { seconds: 1.0 };
        let m = DelayModel {
            wifi: spec,
            cellular: spec,
        };
        assert_eq!(
            sample_switch_delay(Some(0), 1, NetworkKind::Cellular, &m, 15.0, &mut rng),
            1.0
        );
    }

    #[test]
    fn default_models_match_truncated_means() {
        let m = DelayModel::default();
        for spec in [m.wifi, m.cellular] {
            let mut rng = ChaCha8Rng::seed_from_u64(17);
            let draws = 100_000;
            let mut sum = 0.0;
            for _ in 0..draws {
                let x = spec.sample_truncated(15.0, &mut rng);
                assert!((0.0..=15.0).contains(&x));
                sum += x;
            }
            let empirical = sum / draws as f64;
            let analytic = truncated_mean(&spec, 15.0);
            assert!(
                (empirical / analytic - 1.0).abs() < 0.05,
                "{spec:?}: {empirical} vs {analytic}"
            );
        }
    }

    #[test]
    fn download_arithmetic() {
        assert_eq!(slot_download_bytes(3.0, 0.0, 15.0), 5_625_000.0);
        assert_eq!(slot_download_bytes(0.0, 2.0, 15.0), 0.0);
        assert_eq!(slot_download_bytes(3.0, 15.0, 15.0), 0.0);
        let mut total = 0.0;
        accumulate_download(&mut total, 3.0 / 18.0, 18.0, 0.0, 15.0);
        assert!((total - 5_625_000.0).abs() < 1e-6);
    }

    #[test]
    fn problems_flag_bad_parameters() {
        let bad = DelayModel {
            wifi: DelaySpec::JohnsonSu {
                gamma: 0.0,
                delta: -1.0,
                lambda: 1.0,
                xi: 0.0,
            },
            cellular: DelaySpec::Constant { seconds: 20.0 },
        };
        assert_eq!(bad.problems(15.0).len(), 2);
        assert!(DelayModel::default().problems(15.0).is_empty());
    }
}
