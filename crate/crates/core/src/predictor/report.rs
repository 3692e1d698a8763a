use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use super::delay::{delay_report, DelayModel, DelayReport};
use super::metrics::{final_relative_error, r2_score};
use crate::circuit::Netlist;
use crate::error::{Error, Result};
use crate::model::{RunConfig, Trace, Waveform};
use crate::oracle::{extrapolate_eol, AgingOracle, DEFAULT_EOL_EXPONENT};

/// Duty-cycle threshold of the low-duty error-analysis cohort.
pub const LOW_DUTY: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct EolRow {
    pub transistor_id: String,
    pub pred_last_mv: f64,
    pub eol_mv: f64,
    pub baseline_last_mv: f64,
    pub baseline_eol_mv: f64,
    /// `None` when the baseline final is too small.
    pub re_percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelEol {
    pub name: String,
    pub rows: Vec<EolRow>,
    /// r² of the predicted last ΔVth against the oracle's.
    pub r2: Option<f64>,
    pub mean_abs_re: f64,
    pub excluded: usize,
    pub delay: DelayReport,
}

/// End-of-life comparison of several surrogates against the oracle and the
/// worst-case constant-stress model on one circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct EolReport {
    pub circuit: String,
    pub baseline: DelayReport,
    pub worst_case: DelayReport,
    pub models: Vec<ModelEol>,
}

fn eol_map(wfs: &[Waveform], last: &[f64], cfg: &RunConfig) -> Result<(Vec<f64>, BTreeMap<String, f64>)> {
    let mut eols = Vec::with_capacity(wfs.len());
    let mut map = BTreeMap::new();
    for (w, &l) in wfs.iter().zip(last) {
        // negative regression outputs mean "no aging"
        let e = extrapolate_eol(l.max(0.0), w, cfg, DEFAULT_EOL_EXPONENT)?;
        eols.push(e);
        map.insert(w.transistor_id.clone(), e);
    }
    Ok((eols, map))
}

impl EolReport {
    /// `predictions` holds, per model, the predicted last ΔVth of every
    /// waveform (same order as `wfs`). Waveform ids must be the netlist's device ids.
    pub fn build(
        nl: &Netlist,
        wfs: &[Waveform],
        oracle: &AgingOracle,
        predictions: &[(String, Vec<f64>)],
        cfg: &RunConfig,
        dm: &DelayModel,
    ) -> Result<Self> {
        let traces = oracle.run_all(wfs)?;
        let base_last: Vec<f64> = traces.iter().map(Trace::last).collect();
        let (base_eol, base_map) = eol_map(wfs, &base_last, cfg)?;
        let baseline = delay_report(nl, &base_map, cfg.vdd, dm)?;

        let mut wc_map = BTreeMap::new();
        for w in wfs {
            let wc = oracle.worst_case_waveform(w)?;
            let last = oracle.run_trace(&wc)?.last();
            wc_map.insert(w.transistor_id.clone(), extrapolate_eol(last, &wc, cfg, DEFAULT_EOL_EXPONENT)?);
        }
        let worst_case = delay_report(nl, &wc_map, cfg.vdd, dm)?;

        let mut models = Vec::new();
        for (name, pred) in predictions {
            if pred.len() != wfs.len() {
                return Err(Error::invalid(format!("{name}: {} predictions for {} waveforms", pred.len(), wfs.len())));
            }
            let (eols, map) = eol_map(wfs, pred, cfg)?;
            let rows: Vec<EolRow> = wfs
                .iter()
                .enumerate()
                .map(|(k, w)| EolRow {
                    transistor_id: w.transistor_id.clone(),
                    pred_last_mv: pred[k],
                    eol_mv: eols[k],
                    baseline_last_mv: base_last[k],
                    baseline_eol_mv: base_eol[k],
                    re_percent: final_relative_error(pred[k], base_last[k]),
                })
                .collect();
            let res: Vec<f64> = rows.iter().filter_map(|r| r.re_percent).collect();
            models.push(ModelEol {
                name: name.clone(),
                r2: r2_score(pred, &base_last).ok(),
                mean_abs_re: res.iter().map(|r| r.abs()).sum::<f64>() / res.len().max(1) as f64,
                excluded: rows.len() - res.len(),
                delay: delay_report(nl, &map, cfg.vdd, dm)?,
                rows,
            });
        }
        Ok(EolReport { circuit: nl.name().to_string(), baseline, worst_case, models })
    }

    /// Human-readable table: Baseline | models... | Worst Case.
    pub fn text_table(&self) -> String {
        let mut cols: Vec<(&str, &DelayReport)> = vec![("Baseline", &self.baseline)];
        cols.extend(self.models.iter().map(|m| (m.name.as_str(), &m.delay)));
        cols.push(("Worst Case", &self.worst_case));
        let mut out = String::new();
        let _ = writeln!(out, "Aging-induced delay for {} (ps)", self.circuit);
        let _ = write!(out, "{:<22}", "");
        for (name, _) in &cols {
            let _ = write!(out, " | {name:>10}");
        }
        out.push('\n');
        let rows: [(&str, fn(&DelayReport) -> String); 5] = [
            ("min Δdelay", |d| format!("{:.2}", d.min_delta_ps)),
            ("mean Δdelay", |d| format!("{:.2}", d.mean_delta_ps)),
            ("max Δdelay", |d| format!("{:.2}", d.max_delta_ps)),
            ("critical path Δdelay", |d| format!("{:.2}", d.path_delta_ps)),
            ("infeasible gates", |d| d.infeasible().len().to_string()),
        ];
        for (label, f) in rows {
            let _ = write!(out, "{label:<22}");
            for (_, d) in &cols {
                let _ = write!(out, " | {:>10}", f(d));
            }
            out.push('\n');
        }
        let _ = write!(out, "{:<22}", "r² (last ΔVth)");
        for (name, _) in &cols {
            let cell = self
                .models
                .iter()
                .find(|m| m.name == *name)
                .and_then(|m| m.r2)
                .map_or("-".to_string(), |r| format!("{r:.3}"));
            let _ = write!(out, " | {cell:>10}");
        }
        out.push('\n');
        let _ = write!(out, "{:<22}", "mean |RE_l| (%)");
        for (name, _) in &cols {
            let cell = self
                .models
                .iter()
                .find(|m| m.name == *name)
                .map_or("-".to_string(), |m| format!("{:.2}", m.mean_abs_re));
            let _ = write!(out, " | {cell:>10}");
        }
        out.push('\n');
        out
    }

    /// One row per (model, transistor).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["model", "transistor_id", "pred_last_mv", "eol_mv", "baseline_last_mv", "baseline_eol_mv", "re_percent"])?;
        for m in &self.models {
            for r in &m.rows {
                w.write_record([
                    m.name.clone(),
                    r.transistor_id.clone(),
                    r.pred_last_mv.to_string(),
                    r.eol_mv.to_string(),
                    r.baseline_last_mv.to_string(),
                    r.baseline_eol_mv.to_string(),
                    r.re_percent.map_or(String::new(), |v| v.to_string()),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Per-gate Δdelay of every column.
    pub fn write_delay_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["column", "instance", "worst_dvt_mv", "fresh_ps", "aged_ps", "delta_ps", "infeasible"])?;
        let mut cols: Vec<(&str, &DelayReport)> = vec![("baseline", &self.baseline)];
        cols.extend(self.models.iter().map(|m| (m.name.as_str(), &m.delay)));
        cols.push(("worst_case", &self.worst_case));
        for (name, d) in cols {
            for g in &d.gates {
                w.write_record([
                    name.to_string(),
                    g.instance.clone(),
                    g.worst_dvt_mv.to_string(),
                    g.fresh_ps.to_string(),
                    g.aged_ps.to_string(),
                    g.delta_ps.to_string(),
                    g.infeasible.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub transistor_id: String,
    pub duty_cycle: f64,
    pub transitions: usize,
    pub signed_error_mv: f64,
    /// `over`, `under` or `exact`.
    pub class: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorAnalysis {
    pub rows: Vec<ErrorRow>,
    /// Mean signed error of waveforms with duty below [`LOW_DUTY`]; `None` when empty.
    pub low_duty_mean_mv: Option<f64>,
    pub rest_mean_mv: Option<f64>,
}

/// Relates prediction error to waveform duty cycle and transition count.
pub fn error_analysis(preds: &[f64], bases: &[f64], wfs: &[Waveform], vdd: f64) -> Result<ErrorAnalysis> {
    if preds.len() != bases.len() || preds.len() != wfs.len() {
        return Err(Error::invalid("error analysis inputs are not aligned"));
    }
    let mut rows = Vec::with_capacity(wfs.len());
    for ((p, b), w) in preds.iter().zip(bases).zip(wfs) {
        let e = p - b;
        rows.push(ErrorRow {
            transistor_id: w.transistor_id.clone(),
            duty_cycle: w.duty_cycle(vdd)?,
            transitions: w.transition_count(),
            signed_error_mv: e,
            class: if e > 0.0 {
                "over"
            } else if e < 0.0 {
                "under"
            } else {
                "exact"
            },
        });
    }
    let mean = |low: bool| {
        let v: Vec<f64> =
            rows.iter().filter(|r| (r.duty_cycle < LOW_DUTY) == low).map(|r| r.signed_error_mv).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    Ok(ErrorAnalysis { low_duty_mean_mv: mean(true), rest_mean_mv: mean(false), rows })
}

impl ErrorAnalysis {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["transistor_id", "duty_cycle", "transitions", "signed_error_mv", "class"])?;
        for r in &self.rows {
            w.write_record([
                r.transistor_id.clone(),
                r.duty_cycle.to_string(),
                r.transitions.to_string(),
                r.signed_error_mv.to_string(),
                r.class.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
