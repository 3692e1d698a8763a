//! Shared domain types: waveforms, traces, the ΔVth quantizer and run configuration.
//!
//! Units are fixed crate-wide: volts for gate voltages, millivolts for ΔVth,
//! seconds for time.

use crate::error::{Error, Result};

/// Default supply voltage in volts.
pub const DEFAULT_VDD: f64 = 0.7;
/// Default segment length in seconds.
pub const DEFAULT_SEGMENT_DURATION: f64 = 1e-3;
/// Ten years in seconds.
pub const TEN_YEARS_S: f64 = 3.1536e8;
/// Upper bound on waveform length.
pub const MAX_SEGMENTS: usize = 1024;
/// Default number of ΔVth classes.
pub const DEFAULT_BINS: usize = 64;

/// Gate voltage of one segment, in volts.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct VoltageLevel(pub f64);

impl VoltageLevel {
    pub fn volts(self) -> f64 {
        self.0
    }

    /// Digital level for a logic value.
    pub fn from_logic(bit: bool, vdd: f64) -> Self {
        VoltageLevel(if bit { vdd } else { 0.0 })
    }
}

/// Per-transistor gate-voltage sequence of equal-duration segments.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub transistor_id: String,
    pub segment_duration: f64,
    pub segments: Vec<f64>,
}

impl Waveform {
    pub fn new(
        transistor_id: impl Into<String>,
        segment_duration: f64,
        segments: Vec<f64>,
    ) -> Result<Self> {
        let transistor_id = transistor_id.into();
        if segments.is_empty() {
            return Err(Error::EmptyWaveform);
        }
        if segments.len() > MAX_SEGMENTS {
            return Err(Error::invalid(format!(
                "waveform '{transistor_id}' has {} segments, limit is {MAX_SEGMENTS}",
                segments.len()
            )));
        }
        if !(segment_duration.is_finite() && segment_duration > 0.0) {
            return Err(Error::invalid(format!(
                "segment duration must be positive, got {segment_duration}"
            )));
        }
        if let Some(v) = segments.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("voltage {v} in '{transistor_id}'")));
        }
        Ok(Waveform {
            transistor_id,
            segment_duration,
            segments,
        })
    }

    /// Builds a digital waveform from logic values.
    pub fn from_bits(
        transistor_id: impl Into<String>,
        segment_duration: f64,
        bits: &[bool],
        vdd: f64,
    ) -> Result<Self> {
        let segments = bits
            .iter()
            .map(|&b| VoltageLevel::from_logic(b, vdd).volts())
            .collect();
        Self::new(transistor_id, segment_duration, segments)
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Observed time span, `l · segment_duration`.
    pub fn span(&self) -> f64 {
        self.segments.len() as f64 * self.segment_duration
    }

    /// Fraction of segments under BTI stress (gate below `vdd / 2`).
    pub fn duty_cycle(&self, vdd: f64) -> Result<f64> {
        duty_cycle(&self.segments, vdd)
    }

    pub fn transition_count(&self) -> usize {
        transition_count(&self.segments)
    }
}

pub fn duty_cycle(segments: &[f64], vdd: f64) -> Result<f64> {
    if segments.is_empty() {
        return Err(Error::EmptyWaveform);
    }
    let stressed = segments.iter().filter(|&&v| v < 0.5 * vdd).count();
    Ok(stressed as f64 / segments.len() as f64)
}

pub fn transition_count(segments: &[f64]) -> usize {
    segments.windows(2).filter(|p| p[0] != p[1]).count()
}

/// Cumulative ΔVth per segment, in millivolts.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub transistor_id: String,
    pub dvt: Vec<f64>,
}

impl Trace {
    pub fn new(transistor_id: impl Into<String>, dvt: Vec<f64>) -> Self {
        Trace {
            transistor_id: transistor_id.into(),
            dvt,
        }
    }

    pub fn len(&self) -> usize {
        self.dvt.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dvt.is_empty()
    }

    /// Final ΔVth, or 0 for an empty trace.
    pub fn last(&self) -> f64 {
        self.dvt.last().copied().unwrap_or(0.0)
    }
}

/// Uniform binning of ΔVth into class labels.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QuantizerSpec {
    pub min_mv: f64,
    pub max_mv: f64,
    pub n_bins: usize,
}

impl QuantizerSpec {
    pub fn new(min_mv: f64, max_mv: f64, n_bins: usize) -> Result<Self> {
        if !(min_mv.is_finite() && max_mv.is_finite()) || min_mv >= max_mv {
            return Err(Error::invalid(format!(
                "quantizer range must satisfy min < max, got [{min_mv}, {max_mv}]"
            )));
        }
        if n_bins < 2 {
            return Err(Error::invalid("quantizer needs at least 2 bins"));
        }
        Ok(QuantizerSpec {
            min_mv,
            max_mv,
            n_bins,
        })
    }

    /// Range `[0, 1.25 · max]` over the given traces.
    pub fn from_traces<'a>(traces: impl IntoIterator<Item = &'a Trace>, n_bins: usize) -> Result<Self> {
        let max = traces
            .into_iter()
            .flat_map(|t| t.dvt.iter().copied())
            .fold(0.0_f64, f64::max);
        let top = if max > 0.0 { 1.25 * max } else { 1.0 };
        Self::new(0.0, top, n_bins)
    }

    pub fn bin_width(&self) -> f64 {
        (self.max_mv - self.min_mv) / self.n_bins as f64
    }

    /// Class index of `x`; values outside the range clamp to the edge bins.
    pub fn quantize(&self, x: f64) -> Result<usize> {
        if !x.is_finite() {
            return Err(Error::NonFinite(format!("cannot quantize {x}")));
        }
        let pos = ((x - self.min_mv) / self.bin_width()).floor();
        Ok(pos.clamp(0.0, (self.n_bins - 1) as f64) as usize)
    }

    /// Midpoint of bin `class`.
    pub fn dequantize(&self, class: usize) -> f64 {
        let c = class.min(self.n_bins - 1) as f64;
        self.min_mv + (c + 0.5) * self.bin_width()
    }
}

/// Global run settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub vdd: f64,
    /// Informational; the oracle is isothermal.
    pub temperature_c: f64,
    pub segment_duration: f64,
    pub eol_seconds: f64,
    pub rng_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            vdd: DEFAULT_VDD,
            temperature_c: 90.0,
            segment_duration: DEFAULT_SEGMENT_DURATION,
            eol_seconds: TEN_YEARS_S,
            rng_seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.vdd.is_finite() && self.vdd > 0.0) {
            return Err(Error::invalid(format!("vdd must be positive, got {}", self.vdd)));
        }
        if !(self.segment_duration.is_finite() && self.segment_duration > 0.0) {
            return Err(Error::invalid("segment_duration must be positive"));
        }
        if !(self.eol_seconds.is_finite() && self.eol_seconds > self.segment_duration) {
            return Err(Error::invalid("eol_seconds must exceed one segment"));
        }
        Ok(())
    }

    /// Checks that the EOL horizon lies beyond an `l`-segment observation.
    pub fn validate_for_len(&self, l: usize) -> Result<()> {
        self.validate()?;
        if self.eol_seconds <= l as f64 * self.segment_duration {
            return Err(Error::invalid(format!(
                "eol_seconds {} must exceed observed span of {l} segments",
                self.eol_seconds
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const VDD: f64 = 0.7;

    fn wf(v: &[f64]) -> Waveform {
        Waveform::new("t", 1e-3, v.to_vec()).unwrap()
    }

    #[test]
    fn duty_cycle_examples() {
        assert_eq!(wf(&[VDD; 4]).duty_cycle(VDD).unwrap(), 0.0);
        assert_eq!(wf(&[0.0; 4]).duty_cycle(VDD).unwrap(), 1.0);
        assert_eq!(wf(&[0.0, VDD, 0.0, VDD]).duty_cycle(VDD).unwrap(), 0.5);
    }

    #[test]
    fn empty_waveform_rejected() {
        assert!(matches!(Waveform::new("t", 1e-3, vec![]), Err(Error::EmptyWaveform)));
        assert!(matches!(duty_cycle(&[], VDD), Err(Error::EmptyWaveform)));
        let err = duty_cycle(&[], VDD).unwrap_err();
        assert_eq!(err.to_string(), "empty waveform");
    }

    #[test]
    fn transition_count_examples() {
        assert_eq!(wf(&[VDD; 5]).transition_count(), 0);
        assert_eq!(wf(&[0.0, VDD, 0.0, VDD]).transition_count(), 3);
        assert_eq!(wf(&[0.0, 0.0, VDD, VDD]).transition_count(), 1);
    }

    #[test]
    fn equal_duty_different_transitions() {
        let a = wf(&[0.0, VDD, 0.0, VDD]);
        let b = wf(&[0.0, 0.0, VDD, VDD]);
        assert_eq!(a.duty_cycle(VDD).unwrap(), b.duty_cycle(VDD).unwrap());
        assert_ne!(a.transition_count(), b.transition_count());
    }

    #[test]
    fn waveform_limits() {
        assert!(Waveform::new("t", 1e-3, vec![0.0; MAX_SEGMENTS]).is_ok());
        assert!(Waveform::new("t", 1e-3, vec![0.0; MAX_SEGMENTS + 1]).is_err());
        assert!(Waveform::new("t", 0.0, vec![0.0]).is_err());
        assert!(Waveform::new("t", 1e-3, vec![f64::NAN]).is_err());
    }

    #[test]
    fn quantizer_examples() {
        let q = QuantizerSpec::new(0.0, 64.0, 64).unwrap();
        assert_eq!(q.quantize(0.5).unwrap(), 0);
        assert_eq!(q.dequantize(0), 0.5);
        assert_eq!(q.quantize(200.0).unwrap(), 63);
        assert_eq!(q.quantize(-3.0).unwrap(), 0);

        let q = QuantizerSpec::new(0.0, 10.0, 10).unwrap();
        assert_eq!(q.quantize(4.9).unwrap(), 4);
        assert_eq!(q.dequantize(4), 4.5);
    }

    #[test]
    fn quantizer_rejects_bad_input() {
        let q = QuantizerSpec::new(0.0, 10.0, 10).unwrap();
        assert!(q.quantize(f64::NAN).is_err());
        assert!(q.quantize(f64::INFINITY).is_err());
        assert!(QuantizerSpec::new(1.0, 1.0, 4).is_err());
        assert!(QuantizerSpec::new(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn quantizer_from_traces_pads_range() {
        let traces = [Trace::new("a", vec![1.0, 8.0]), Trace::new("b", vec![2.0])];
        let q = QuantizerSpec::from_traces(&traces, 64).unwrap();
        assert_eq!(q.min_mv, 0.0);
        assert_eq!(q.max_mv, 10.0);
    }

    #[test]
    fn run_config_checks() {
        let cfg = RunConfig::default();
        cfg.validate_for_len(32).unwrap();
        let bad = RunConfig { vdd: 0.0, ..RunConfig::default() };
        assert!(bad.validate().is_err());
        let short = RunConfig { eol_seconds: 0.01, ..RunConfig::default() };
        assert!(short.validate_for_len(32).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn quantize_round_trip_within_half_bin(
                lo in -50.0f64..50.0,
                span in 0.1f64..200.0,
                bins in 2usize..256,
                frac in 0.0f64..1.0,
            ) {
                let q = QuantizerSpec::new(lo, lo + span, bins).unwrap();
                let x = lo + frac * span;
                let c = q.quantize(x).unwrap();
                prop_assert!(c < bins);
                let err = (q.dequantize(c) - x).abs();
                prop_assert!(err <= span / (2.0 * bins as f64) + 1e-9);
            }
        }
    }
}
