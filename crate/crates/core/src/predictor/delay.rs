//! Alpha-power-law gate delay and aging-induced delay deltas.

use std::collections::BTreeMap;

use crate::circuit::Netlist;
use crate::error::{Error, Result};

/// Smallest gate overdrive (V) the delay law is evaluated at.
pub const MIN_OVERDRIVE: f64 = 0.05;

/// `delay = d0 · vdd / (vdd − vth0 − ΔVth)^α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayModel {
    pub vth0: f64,
    pub alpha: f64,
    /// Per-gate scale in ps.
    pub d0_ps: f64,
}

impl Default for DelayModel {
    fn default() -> Self {
        DelayModel { vth0: 0.3, alpha: 1.3, d0_ps: 10.0 }
    }
}

impl DelayModel {
    pub fn validate(&self, vdd: f64) -> Result<()> {
        if !(self.alpha > 1.0 && self.alpha < 2.0) {
            return Err(Error::invalid(format!("alpha must lie in (1, 2), got {}", self.alpha)));
        }
        if !(self.d0_ps > 0.0 && self.vth0.is_finite()) {
            return Err(Error::invalid("d0 must be positive"));
        }
        if vdd - self.vth0 <= MIN_OVERDRIVE {
            return Err(Error::invalid(format!("vdd {vdd} V leaves no overdrive above vth0 {} V", self.vth0)));
        }
        Ok(())
    }

    /// Delay in ps and whether the overdrive stayed above [`MIN_OVERDRIVE`].
    /// Infeasible gates are evaluated at the floor, so the delay saturates.
    pub fn delay_ps(&self, vdd: f64, dvt_mv: f64) -> (f64, bool) {
        let od = vdd - self.vth0 - dvt_mv / 1000.0;
        let feasible = od > MIN_OVERDRIVE;
        (self.d0_ps * vdd / od.max(MIN_OVERDRIVE).powf(self.alpha), feasible)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateDelay {
    pub instance: String,
    pub worst_dvt_mv: f64,
    pub fresh_ps: f64,
    pub aged_ps: f64,
    pub delta_ps: f64,
    pub infeasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayReport {
    pub gates: Vec<GateDelay>,
    /// Instance indices along the critical path, input side first.
    pub path: Vec<usize>,
    pub path_fresh_ps: f64,
    pub path_delta_ps: f64,
    pub min_delta_ps: f64,
    pub mean_delta_ps: f64,
    pub max_delta_ps: f64,
}

impl DelayReport {
    pub fn infeasible(&self) -> Vec<&str> {
        self.gates.iter().filter(|g| g.infeasible).map(|g| g.instance.as_str()).collect()
    }
}

/// Longest gate-count chain through the netlist; ties pick the lowest instance index.
pub fn critical_path(nl: &Netlist) -> Vec<usize> {
    let n = nl.instances().len();
    let mut depth = vec![0usize; n];
    let mut prev: Vec<Option<usize>> = vec![None; n];
    for &i in nl.topological_order() {
        for f in nl.fanin_instances(i) {
            if depth[f] + 1 > depth[i] || (depth[f] + 1 == depth[i] && prev[i].map_or(true, |p| f < p)) {
                depth[i] = depth[f] + 1;
                prev[i] = Some(f);
            }
        }
    }
    let Some(mut end) = (0..n).max_by(|&a, &b| depth[a].cmp(&depth[b]).then(b.cmp(&a))) else {
        return Vec::new();
    };
    let mut path = vec![end];
    while let Some(p) = prev[end] {
        path.push(p);
        end = p;
    }
    path.reverse();
    path
}

/// Per-gate delay deltas from per-device ΔVth (mV), keyed by device id.
/// Each gate ages with the worst ΔVth among its pMOS devices.
pub fn delay_report(nl: &Netlist, dvt_mv: &BTreeMap<String, f64>, vdd: f64, dm: &DelayModel) -> Result<DelayReport> {
    dm.validate(vdd)?;
    let mut worst = vec![0.0f64; nl.instances().len()];
    for d in nl.devices() {
        let v = *dvt_mv
            .get(&d.id)
            .ok_or_else(|| Error::invalid(format!("no ΔVth given for device '{}'", d.id)))?;
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("ΔVth of '{}'", d.id)));
        }
        worst[d.instance] = worst[d.instance].max(v);
    }
    let (fresh, _) = dm.delay_ps(vdd, 0.0);
    let gates: Vec<GateDelay> = nl
        .instances()
        .iter()
        .zip(&worst)
        .map(|(inst, &w)| {
            let (aged, feasible) = dm.delay_ps(vdd, w);
            GateDelay {
                instance: inst.name.clone(),
                worst_dvt_mv: w,
                fresh_ps: fresh,
                aged_ps: aged,
                delta_ps: aged - fresh,
                infeasible: !feasible,
            }
        })
        .collect();
    let infeasible = gates.iter().filter(|g| g.infeasible).count();
    if infeasible > 0 {
        log::warn!("{infeasible} gates exceed the overdrive budget (guardband infeasible)");
    }
    let path = critical_path(nl);
    let deltas: Vec<f64> = gates.iter().map(|g| g.delta_ps).collect();
    let n = deltas.len().max(1) as f64;
    let min_delta_ps = if deltas.is_empty() { 0.0 } else { deltas.iter().copied().fold(f64::INFINITY, f64::min) };
    Ok(DelayReport {
        path_fresh_ps: path.iter().map(|&i| gates[i].fresh_ps).sum(),
        path_delta_ps: path.iter().map(|&i| gates[i].delta_ps).sum(),
        min_delta_ps,
        mean_delta_ps: deltas.iter().sum::<f64>() / n,
        max_delta_ps: deltas.iter().copied().fold(0.0, f64::max),
        gates,
        path,
    })
}
