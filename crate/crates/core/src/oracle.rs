//! Analytical BTI aging oracle.
//!
//! A small ensemble of trap species captures holes under stress and emits
//! them when the gate voltage is raised, plus a slowly growing permanent
//! component. Each species relaxes toward its stress-dependent equilibrium
//! occupancy in closed form, so the integration is unconditionally stable.
//! The oracle is the ground-truth label generator; surrogate models only ever
//! see its output traces, never [`OracleParams`].

use crate::error::{Error, Result};
use crate::io::KvConfig;
use crate::model::{RunConfig, Trace, Waveform};

/// Capture/emission time constants and saturated ΔVth contribution of one trap species.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapSpecies {
    tau_capture: f64,
    tau_emission: f64,
    k_mv: f64,
}

impl TrapSpecies {
    pub fn new(tau_capture: f64, tau_emission: f64, k_mv: f64) -> Result<Self> {
        if !(tau_capture > 0.0 && tau_emission > 0.0 && k_mv > 0.0)
            || !(tau_capture.is_finite() && tau_emission.is_finite() && k_mv.is_finite())
        {
            return Err(Error::invalid(format!(
                "trap species needs positive finite constants, got ({tau_capture}, {tau_emission}, {k_mv})"
            )));
        }
        Ok(TrapSpecies { tau_capture, tau_emission, k_mv })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleParams {
    species: Vec<TrapSpecies>,
    gamma: f64,
    perm_rate: f64,
    perm_anneal: f64,
    perm_max: f64,
    substeps: usize,
}

impl Default for OracleParams {
    fn default() -> Self {
        let species = [(1e-3, 5e-3, 8.0), (1e-1, 5e-1, 16.0), (10.0, 50.0, 24.0)]
            .iter()
            .map(|&(c, e, k)| TrapSpecies { tau_capture: c, tau_emission: e, k_mv: k })
            .collect();
        OracleParams {
            species,
            gamma: 2.0,
            perm_rate: 1e-3,
            perm_anneal: 1e-4,
            perm_max: 20.0,
            substeps: 100,
        }
    }
}

pub const ORACLE_KEYS: [&str; 8] = [
    "tau_capture",
    "tau_emission",
    "k_mv",
    "gamma",
    "perm_rate",
    "perm_anneal",
    "perm_max",
    "substeps",
];

impl OracleParams {
    pub fn new(
        species: Vec<TrapSpecies>,
        gamma: f64,
        perm_rate: f64,
        perm_anneal: f64,
        perm_max: f64,
        substeps: usize,
    ) -> Result<Self> {
        let p = OracleParams { species, gamma, perm_rate, perm_anneal, perm_max, substeps };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if self.species.is_empty() {
            return Err(Error::invalid("oracle needs at least one trap species"));
        }
        let rates = [self.gamma, self.perm_rate, self.perm_anneal];
        if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::invalid("oracle rates must be finite and non-negative"));
        }
        if !(self.perm_max.is_finite() && self.perm_max > 0.0) {
            return Err(Error::invalid("perm_max must be positive"));
        }
        if self.substeps == 0 {
            return Err(Error::invalid("substeps must be at least 1"));
        }
        Ok(())
    }

    pub fn with_substeps(mut self, substeps: usize) -> Result<Self> {
        self.substeps = substeps;
        self.validate()?;
        Ok(self)
    }

    pub fn with_perm_anneal(mut self, r: f64) -> Result<Self> {
        self.perm_anneal = r;
        self.validate()?;
        Ok(self)
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    /// ΔVth with every trap filled and the permanent part saturated.
    pub fn saturation_mv(&self) -> f64 {
        self.species.iter().map(|s| s.k_mv).sum::<f64>() + self.perm_max
    }

    /// Overrides defaults with keys present in `kv`. Species lists must agree in length.
    pub fn from_kv(kv: &KvConfig) -> Result<Self> {
        kv.ensure_keys(&ORACLE_KEYS)?;
        let mut p = OracleParams::default();
        let lists = [kv.get_list("tau_capture")?, kv.get_list("tau_emission")?, kv.get_list("k_mv")?];
        if lists.iter().any(Option::is_some) {
            let [tc, te, k] = lists;
            let n = p.species.len();
            let tc = tc.unwrap_or_else(|| p.species.iter().map(|s| s.tau_capture).collect());
            let te = te.unwrap_or_else(|| p.species.iter().map(|s| s.tau_emission).collect());
            let k = k.unwrap_or_else(|| p.species.iter().map(|s| s.k_mv).collect());
            if tc.len() != te.len() || tc.len() != k.len() {
                return Err(Error::schema(format!(
                    "species lists differ in length ({}, {}, {}); defaults have {n}",
                    tc.len(),
                    te.len(),
                    k.len()
                )));
            }
            p.species = tc
                .iter()
                .zip(&te)
                .zip(&k)
                .map(|((&c, &e), &k)| TrapSpecies::new(c, e, k))
                .collect::<Result<_>>()?;
        }
        if let Some(g) = kv.get_f64("gamma")? {
            p.gamma = g;
        }
        if let Some(g) = kv.get_f64("perm_rate")? {
            p.perm_rate = g;
        }
        if let Some(r) = kv.get_f64("perm_anneal")? {
            p.perm_anneal = r;
        }
        if let Some(m) = kv.get_f64("perm_max")? {
            p.perm_max = m;
        }
        if let Some(n) = kv.get_u64("substeps")? {
            p.substeps = n as usize;
        }
        p.validate()?;
        Ok(p)
    }
}

/// Internal transistor state carried between segments.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleState {
    pub occupancies: Vec<f64>,
    pub permanent_mv: f64,
}

impl OracleState {
    pub fn fresh(params: &OracleParams) -> Self {
        OracleState { occupancies: vec![0.0; params.species.len()], permanent_mv: 0.0 }
    }

    fn dvt(&self, params: &OracleParams) -> f64 {
        self.occupancies
            .iter()
            .zip(&params.species)
            .map(|(th, s)| s.k_mv * th)
            .sum::<f64>()
            + self.permanent_mv
    }
}

/// Stress factor of a pMOS gate voltage: 1 at 0 V, 0 at `vdd`, linear between.
/// Voltages outside `[0, vdd]` are clamped.
pub fn stress_level(v: f64, vdd: f64) -> f64 {
    let clamped = v.clamp(0.0, vdd);
    if clamped != v {
        log::warn!("gate voltage {v} V outside [0, {vdd}] V, clamped");
    }
    (vdd - clamped) / vdd
}

/// Power-law extrapolation of the last observed ΔVth to the EOL horizon.
///
/// The time exponent is `n_exp · (0.5 + 0.5 · duty)`: more stress time ages faster.
pub fn extrapolate_eol(last_dvt_mv: f64, w: &Waveform, cfg: &RunConfig, n_exp: f64) -> Result<f64> {
    if !(last_dvt_mv.is_finite() && last_dvt_mv >= 0.0) {
        return Err(Error::invalid(format!("last ΔVth must be finite and >= 0, got {last_dvt_mv}")));
    }
    let t_obs = w.span();
    if cfg.eol_seconds <= t_obs {
        return Err(Error::invalid(format!(
            "EOL horizon {} s does not exceed observed span {t_obs} s",
            cfg.eol_seconds
        )));
    }
    let n_eff = n_exp * (0.5 + 0.5 * w.duty_cycle(cfg.vdd)?);
    Ok(last_dvt_mv * (cfg.eol_seconds / t_obs).powf(n_eff))
}

/// Conventional BTI power-law exponent.
pub const DEFAULT_EOL_EXPONENT: f64 = 1.0 / 6.0;

/// The oracle bound to a supply voltage.
#[derive(Debug, Clone)]
pub struct AgingOracle {
    params: OracleParams,
    vdd: f64,
}

impl AgingOracle {
    pub fn new(params: OracleParams, vdd: f64) -> Result<Self> {
        params.validate()?;
        if !(vdd.is_finite() && vdd > 0.0) {
            return Err(Error::invalid("vdd must be positive"));
        }
        Ok(AgingOracle { params, vdd })
    }

    pub fn with_defaults(vdd: f64) -> Self {
        AgingOracle { params: OracleParams::default(), vdd }
    }

    pub fn vdd(&self) -> f64 {
        self.vdd
    }

    pub fn fresh_state(&self) -> OracleState {
        OracleState::fresh(&self.params)
    }

    /// Advances the state over one segment at gate voltage `v` for `dt` seconds.
    pub fn step_segment(&self, state: &OracleState, v: f64, dt: f64) -> Result<(OracleState, f64)> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid(format!("segment duration must be positive, got {dt}")));
        }
        let p = &self.params;
        if state.occupancies.len() != p.species.len() {
            return Err(Error::invalid("state does not match species count"));
        }
        let s = stress_level(v, self.vdd);
        let sub = dt / p.substeps as f64;
        let stress_g = s.powf(p.gamma);
        let relax_g = (1.0 - s).powf(p.gamma);

        // per-species equilibrium occupancy and per-substep decay factor
        let relax: Vec<(f64, f64)> = p
            .species
            .iter()
            .map(|sp| {
                let kc = stress_g / sp.tau_capture;
                let ke = relax_g / sp.tau_emission;
                let total = kc + ke;
                if total > 0.0 {
                    (kc / total, (-sub * total).exp())
                } else {
                    (0.0, 1.0)
                }
            })
            .collect();

        let mut next = state.clone();
        let gain = p.perm_rate * stress_g;
        let anneal = p.perm_anneal * (1.0 - s);
        for _ in 0..p.substeps {
            for (theta, &(eq, decay)) in next.occupancies.iter_mut().zip(&relax) {
                *theta = eq + (*theta - eq) * decay;
            }
            let perm = next.permanent_mv;
            next.permanent_mv = perm + sub * (gain * (1.0 - perm / p.perm_max) - anneal * perm);
        }
        for theta in &mut next.occupancies {
            *theta = theta.clamp(0.0, 1.0);
        }
        next.permanent_mv = next.permanent_mv.max(0.0);

        if next.occupancies.iter().any(|t| !t.is_finite()) || !next.permanent_mv.is_finite() {
            return Err(Error::OracleDiverged);
        }
        let dvt = next.dvt(p);
        Ok((next, dvt))
    }

    /// Runs a fresh transistor through the waveform and reports ΔVth after each segment.
    pub fn run_trace(&self, w: &Waveform) -> Result<Trace> {
        Ok(self.run_with_state(w)?.0)
    }

    /// As [`run_trace`](Self::run_trace), also returning the final internal state.
    pub fn run_with_state(&self, w: &Waveform) -> Result<(Trace, OracleState)> {
        if w.is_empty() {
            return Err(Error::EmptyWaveform);
        }
        let mut state = self.fresh_state();
        let mut dvt = Vec::with_capacity(w.len());
        for &v in &w.segments {
            let (next, d) = self.step_segment(&state, v, w.segment_duration)?;
            state = next;
            dvt.push(d);
        }
        Ok((Trace::new(w.transistor_id.clone(), dvt), state))
    }

    /// Constant full stress over the waveform's whole span.
    pub fn worst_case_waveform(&self, w: &Waveform) -> Result<Waveform> {
        Waveform::new(w.transistor_id.clone(), w.segment_duration, vec![0.0; w.len()])
    }

    /// Trace under the worst-case assumption of constant full stress; bounds
    /// [`run_trace`](Self::run_trace) from above for every waveform of the same length.
    pub fn worst_case_trace(&self, w: &Waveform) -> Result<Trace> {
        self.run_trace(&self.worst_case_waveform(w)?)
    }

    pub fn run_all(&self, waveforms: &[Waveform]) -> Result<Vec<Trace>> {
        waveforms.iter().map(|w| self.run_trace(w)).collect()
    }
}
