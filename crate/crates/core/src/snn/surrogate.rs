//! Surrogate derivative of the spike nonlinearity.

use serde::{Deserialize, Serialize};

use super::{Result, SnnError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateKind {
    /// Rectangular window of half-width `param` around the threshold,
    /// normalized to unit area. Zero width makes the derivative vanish.
    Boxcar,
    /// Fast sigmoid with steepness `param`.
    FastSigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSpec {
    pub kind: SurrogateKind,
    pub param: f64,
}

impl Default for SurrogateSpec {
    fn default() -> Self {
        Self { kind: SurrogateKind::Boxcar, param: 0.5 }
    }
}

impl SurrogateSpec {
    pub fn validate(&self) -> Result<()> {
        if self.param < 0.0 || !self.param.is_finite() {
            return Err(SnnError::InvalidArgument(format!(
                "surrogate parameter {} must be finite and nonnegative",
                self.param
            )));
        }
        if self.kind == SurrogateKind::FastSigmoid && self.param == 0.0 {
            return Err(SnnError::InvalidArgument(
                "fast sigmoid needs a positive steepness".into(),
            ));
        }
        Ok(())
    }

    /// Surrogate derivative at membrane offset `x` from the threshold.
    /// Nonnegative and bounded for valid specs.
    pub fn grad(&self, x: f64) -> f64 {
        match self.kind {
            SurrogateKind::Boxcar => {
                let w = self.param;
                if w > 0.0 && x.abs() <= w {
                    1.0 / (2.0 * w)
                } else {
                    0.0
                }
            }
            SurrogateKind::FastSigmoid => {
                let k = self.param;
                let d = 1.0 + k * x.abs();
                0.5 / (d * d)
            }
        }
    }

    /// Smooth spike relaxation whose derivative is exactly [`grad`]; used
    /// by the relaxed forward mode for gradient verification.
    pub fn primitive(&self, x: f64) -> f64 {
        match self.kind {
            SurrogateKind::Boxcar => {
                let w = self.param;
                if w == 0.0 {
                    if x >= 0.0 { 1.0 } else { 0.0 }
                } else {
                    ((x + w) / (2.0 * w)).clamp(0.0, 1.0)
                }
            }
            SurrogateKind::FastSigmoid => {
                let k = self.param;
                0.5 * (1.0 + x / (1.0 + k * x.abs()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boxcar_window_and_area() {
        let s = SurrogateSpec { kind: SurrogateKind::Boxcar, param: 0.5 };
        assert_eq!(s.grad(0.0), 1.0);
        assert_eq!(s.grad(0.5), 1.0);
        assert_eq!(s.grad(0.51), 0.0);
        assert_eq!(s.grad(-0.6), 0.0);
    }

    #[test]
    fn zero_width_boxcar_is_dead() {
        let s = SurrogateSpec { kind: SurrogateKind::Boxcar, param: 0.0 };
        for x in [-1.0, -0.1, 0.0, 0.1, 1.0] {
            assert_eq!(s.grad(x), 0.0);
        }
    }

    #[test]
    fn primitives_match_grads_by_finite_difference() {
        for spec in [
            SurrogateSpec { kind: SurrogateKind::Boxcar, param: 0.7 },
            SurrogateSpec { kind: SurrogateKind::FastSigmoid, param: 2.0 },
        ] {
            for x in [-1.3, -0.31, 0.11, 0.42, 1.7] {
                let h = 1e-6;
                let fd = (spec.primitive(x + h) - spec.primitive(x - h)) / (2.0 * h);
                assert!(
                    (fd - spec.grad(x)).abs() < 1e-5,
                    "{spec:?} at {x}: fd {fd} vs grad {}",
                    spec.grad(x)
                );
            }
        }
    }

    #[test]
    fn grads_bounded_nonnegative() {
        let s = SurrogateSpec { kind: SurrogateKind::FastSigmoid, param: 4.0 };
        for i in -100..100 {
            let g = s.grad(f64::from(i) * 0.05);
            assert!(g >= 0.0 && g <= 0.5);
        }
    }
}
