//! Time profiles for the magnetic induction `B(t)` and Hermitian operator
//! families such as the Hamiltonian `H(t)`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::HermitianMatrix;

/// Times within this fraction of the span outside a tabulated domain are
/// clamped onto it instead of rejected, so grids built as `k * dt` land inside.
const DOMAIN_SLACK: f64 = 1e-12;

fn clamp_to_domain(t: f64, lo: f64, hi: f64) -> Result<f64> {
    let slack = DOMAIN_SLACK * (hi - lo).abs().max(1.0);
    if !t.is_finite() || t < lo - slack || t > hi + slack {
        return Err(Error::OutOfDomain { t, lo, hi });
    }
    Ok(t.clamp(lo, hi))
}

/// Index `i` of the bracketing interval `[xs[i], xs[i+1]]` for `t` in range.
fn bracket(xs: &[f64], t: f64) -> usize {
    let i = xs.partition_point(|&x| x <= t);
    i.saturating_sub(1).min(xs.len() - 2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FieldProfile {
    Constant {
        value: f64,
    },
    /// `offset + amplitude * sin(2π frequency t + phase)`.
    Sinusoid {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `intercept + slope * t`.
    LinearRamp {
        slope: f64,
        intercept: f64,
    },
    /// Piecewise-linear interpolation of `(times[i], values[i])`.
    SampledTable {
        times: Vec<f64>,
        values: Vec<f64>,
    },
}

impl FieldProfile {
    pub fn constant(value: f64) -> Self {
        FieldProfile::Constant { value }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, FieldProfile::Constant { .. })
    }

    /// Closed domain for tabulated profiles; analytic kinds are defined everywhere.
    pub fn domain(&self) -> Option<(f64, f64)> {
        match self {
            FieldProfile::SampledTable { times, .. } if !times.is_empty() => {
                Some((times[0], times[times.len() - 1]))
            }
            _ => None,
        }
    }

    /// Structural problems with the profile parameters, if any.
    pub fn defects(&self) -> Vec<String> {
        let mut out = Vec::new();
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match self {
            FieldProfile::Constant { value } => {
                if !value.is_finite() {
                    out.push("constant field value is not finite".into());
                }
            }
            FieldProfile::Sinusoid {
                amplitude,
                frequency,
                phase,
                offset,
            } => {
                if !finite(&[*amplitude, *frequency, *phase, *offset]) {
                    out.push("sinusoid parameters must be finite".into());
                }
            }
            FieldProfile::LinearRamp { slope, intercept } => {
                if !finite(&[*slope, *intercept]) {
                    out.push("ramp parameters must be finite".into());
                }
            }
            FieldProfile::SampledTable { times, values } => {
                if times.len() < 2 {
                    out.push("sampled table needs at least 2 samples".into());
                }
                if times.len() != values.len() {
                    out.push(format!(
                        "sampled table has {} times but {} values",
                        times.len(),
                        values.len()
                    ));
                }
                if !times.windows(2).all(|w| w[0] < w[1]) {
                    out.push("sampled table times must be strictly increasing".into());
                }
                if !finite(times) || !finite(values) {
                    out.push("sampled table entries must be finite".into());
                }
            }
        }
        out
    }

    /// `B(t)`.
    pub fn sample(&self, t: f64) -> Result<f64> {
        match self {
            FieldProfile::Constant { value } => Ok(*value),
            FieldProfile::Sinusoid {
                amplitude,
                frequency,
                phase,
                offset,
            } => Ok(offset + amplitude * (TAU * frequency * t + phase).sin()),
            FieldProfile::LinearRamp { slope, intercept } => Ok(intercept + slope * t),
            FieldProfile::SampledTable { times, values } => {
                if times.len() < 2 || times.len() != values.len() {
                    return Err(Error::InvalidInput("malformed sampled table".into()));
                }
                let t = clamp_to_domain(t, times[0], times[times.len() - 1])?;
                let i = bracket(times, t);
                let w = (t - times[i]) / (times[i + 1] - times[i]);
                Ok(values[i] + w * (values[i + 1] - values[i]))
            }
        }
    }

    /// Upper bound on `|B|` over `[t0, t1]`.
    pub(crate) fn max_abs_bound(&self, t0: f64, t1: f64) -> Result<f64> {
        Ok(match self {
            FieldProfile::Constant { value } => value.abs(),
            FieldProfile::Sinusoid {
                amplitude, offset, ..
            } => amplitude.abs() + offset.abs(),
            FieldProfile::LinearRamp { .. } => self.sample(t0)?.abs().max(self.sample(t1)?.abs()),
            FieldProfile::SampledTable { values, .. } => {
                values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
            }
        })
    }
}

/// One time-stamped sample of a Hermitian operator family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermitianSample {
    pub t: f64,
    pub matrix: HermitianMatrix,
}

/// Time-dependent Hermitian operator: constant, or linearly interpolated
/// between samples (entrywise, then re-symmetrized).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum HermitianProfile {
    Constant { matrix: HermitianMatrix },
    InterpolatedSequence { samples: Vec<HermitianSample> },
}

/// The single-particle Hamiltonian `H(t)`; positive definiteness is checked by
/// scenario validation.
pub type HamiltonianProfile = HermitianProfile;

impl HermitianProfile {
    pub fn constant(matrix: HermitianMatrix) -> Self {
        HermitianProfile::Constant { matrix }
    }

    /// Linear ramp `start -> end` over `[t0, t1]`.
    pub fn ramp(start: HermitianMatrix, end: HermitianMatrix, t0: f64, t1: f64) -> Self {
        HermitianProfile::InterpolatedSequence {
            samples: vec![
                HermitianSample {
                    t: t0,
                    matrix: start,
                },
                HermitianSample { t: t1, matrix: end },
            ],
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, HermitianProfile::Constant { .. })
    }

    pub fn dim(&self) -> usize {
        match self {
            HermitianProfile::Constant { matrix } => matrix.dim(),
            HermitianProfile::InterpolatedSequence { samples } => {
                samples.first().map_or(0, |s| s.matrix.dim())
            }
        }
    }

    pub fn domain(&self) -> Option<(f64, f64)> {
        match self {
            HermitianProfile::InterpolatedSequence { samples } if !samples.is_empty() => {
                Some((samples[0].t, samples[samples.len() - 1].t))
            }
            _ => None,
        }
    }

    /// Stored matrices (one for the constant kind).
    pub fn matrices(&self) -> Vec<&HermitianMatrix> {
        match self {
            HermitianProfile::Constant { matrix } => vec![matrix],
            HermitianProfile::InterpolatedSequence { samples } => {
                samples.iter().map(|s| &s.matrix).collect()
            }
        }
    }

    pub fn defects(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let HermitianProfile::InterpolatedSequence { samples } = self {
            if samples.is_empty() {
                out.push("interpolated sequence has no samples".into());
            }
            if !samples.windows(2).all(|w| w[0].t < w[1].t) {
                out.push("sequence times must be strictly increasing".into());
            }
            if !samples.iter().all(|s| s.t.is_finite()) {
                out.push("sequence times must be finite".into());
            }
            let dim = self.dim();
            if samples.iter().any(|s| s.matrix.dim() != dim) {
                out.push("sequence samples differ in dimension".into());
            }
        }
        out
    }

    /// `H(t)`; exactly Hermitian.
    pub fn sample(&self, t: f64) -> Result<HermitianMatrix> {
        match self {
            HermitianProfile::Constant { matrix } => Ok(matrix.clone()),
            HermitianProfile::InterpolatedSequence { samples } => match samples.as_slice() {
                [] => Err(Error::InvalidInput("empty Hamiltonian sequence".into())),
                [only] => {
                    clamp_to_domain(t, only.t, only.t)?;
                    Ok(only.matrix.clone())
                }
                _ => {
                    let times: Vec<f64> = samples.iter().map(|s| s.t).collect();
                    let t = clamp_to_domain(t, times[0], times[times.len() - 1])?;
                    let i = bracket(&times, t);
                    let w = (t - times[i]) / (times[i + 1] - times[i]);
                    Ok(samples[i].matrix.lerp(&samples[i + 1].matrix, w))
                }
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{ComplexMatrix, C64};

    #[test]
    fn field_samples() {
        assert_eq!(FieldProfile::constant(2.0).sample(5.0).unwrap(), 2.0);
        let s = FieldProfile::Sinusoid {
            amplitude: 1.0,
            frequency: 1.0 / TAU,
            phase: 0.0,
            offset: 0.0,
        };
        assert_eq!(s.sample(0.0).unwrap(), 0.0);
        assert!((s.sample(1.0).unwrap() - 1f64.sin()).abs() < 1e-15);
        let table = FieldProfile::SampledTable {
            times: vec![0.0, 1.0],
            values: vec![0.0, 2.0],
        };
        assert_eq!(table.sample(0.5).unwrap(), 1.0);
        let ramp = FieldProfile::LinearRamp {
            slope: 2.0,
            intercept: 1.0,
        };
        assert_eq!(ramp.sample(3.0).unwrap(), 7.0);
    }

    #[test]
    fn table_rejects_extrapolation() {
        let table = FieldProfile::SampledTable {
            times: vec![0.0, 1.0],
            values: vec![0.0, 2.0],
        };
        assert!(matches!(table.sample(1.5), Err(Error::OutOfDomain { .. })));
        assert!(matches!(table.sample(-0.1), Err(Error::OutOfDomain { .. })));
        // Grid round-off just past the end is clamped.
        assert_eq!(table.sample(1.0 + 1e-15).unwrap(), 2.0);
    }

    #[test]
    fn table_defects() {
        let bad = FieldProfile::SampledTable {
            times: vec![1.0, 0.0],
            values: vec![0.0],
        };
        assert_eq!(bad.defects().len(), 2);
        let single = FieldProfile::SampledTable {
            times: vec![0.0],
            values: vec![0.0],
        };
        assert!(!single.defects().is_empty());
    }

    #[test]
    fn field_json_kinds() {
        let p: FieldProfile =
            serde_json::from_str(r#"{"kind":"sinusoid","amplitude":1,"frequency":0.5}"#).unwrap();
        assert_eq!(
            p,
            FieldProfile::Sinusoid {
                amplitude: 1.0,
                frequency: 0.5,
                phase: 0.0,
                offset: 0.0
            }
        );
        let p: FieldProfile =
            serde_json::from_str(r#"{"kind":"linear-ramp","slope":1,"intercept":0}"#).unwrap();
        assert!(matches!(p, FieldProfile::LinearRamp { .. }));
        let p: FieldProfile =
            serde_json::from_str(r#"{"kind":"sampled-table","times":[0,1],"values":[1,2]}"#)
                .unwrap();
        assert_eq!(p.domain(), Some((0.0, 1.0)));
    }

    #[test]
    fn hamiltonian_samples() {
        let c = HermitianProfile::constant(HermitianMatrix::from_real_diag(&[1.0, 2.0]));
        assert_eq!(
            c.sample(17.0).unwrap(),
            HermitianMatrix::from_real_diag(&[1.0, 2.0])
        );
        let seq = HermitianProfile::ramp(
            HermitianMatrix::from_real_diag(&[1.0, 1.0]),
            HermitianMatrix::from_real_diag(&[3.0, 3.0]),
            0.0,
            1.0,
        );
        assert_eq!(
            seq.sample(0.5).unwrap(),
            HermitianMatrix::from_real_diag(&[2.0, 2.0])
        );
        assert!(matches!(seq.sample(2.0), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn interpolated_sample_is_exactly_hermitian() {
        let a = ComplexMatrix::new(
            2,
            2,
            vec![
                C64::new(1.0, 0.0),
                C64::new(0.1, 0.3),
                C64::new(0.1, -0.3),
                C64::new(2.0, 0.0),
            ],
        )
        .unwrap();
        let b = ComplexMatrix::new(
            2,
            2,
            vec![
                C64::new(3.0, 0.0),
                C64::new(-0.7, 0.11),
                C64::new(-0.7, -0.11),
                C64::new(1.0, 0.0),
            ],
        )
        .unwrap();
        let seq = HermitianProfile::ramp(
            HermitianMatrix::new(a).unwrap(),
            HermitianMatrix::new(b).unwrap(),
            0.0,
            0.3,
        );
        for t in [0.0, 0.01, 0.1, 0.17, 0.29, 0.3] {
            let h = seq.sample(t).unwrap();
            assert_eq!(h.as_matrix(), &h.as_matrix().adjoint());
        }
    }
}
