//! CSV formats for waveforms and traces, and the flat `key = value` config format.
//!
//! Waveform file: header `transistor_id,duration_s,v0,v1,...`, one row per
//! transistor, voltages in decimal volts. Trace file: header
//! `transistor_id,dvt0_mv,dvt1_mv,...`. All rows in one file share the same
//! segment count. Numbers are written in shortest round-trip decimal form, so
//! reading and re-writing a file produced here is byte-identical.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{RunConfig, Trace, Waveform};

fn check_header(header: &csv::StringRecord, fixed: &[&str], prefix: &str, suffix: &str) -> Result<usize> {
    if header.len() < fixed.len() + 1 {
        return Err(Error::schema(format!("header too short: {header:?}")));
    }
    for (i, name) in fixed.iter().enumerate() {
        if &header[i] != *name {
            return Err(Error::schema(format!(
                "column {i} must be '{name}', found '{}'",
                &header[i]
            )));
        }
    }
    for (k, col) in header.iter().skip(fixed.len()).enumerate() {
        let want = format!("{prefix}{k}{suffix}");
        if col != want {
            return Err(Error::schema(format!("expected column '{want}', found '{col}'")));
        }
    }
    Ok(header.len() - fixed.len())
}

fn parse_num(s: &str, line: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::Parse {
        line,
        msg: format!("'{s}': {e}"),
    })
}

fn uniform_len<'a>(lens: impl Iterator<Item = (&'a str, usize)>) -> Result<Option<usize>> {
    let mut expected = None;
    for (id, len) in lens {
        match expected {
            None => expected = Some(len),
            Some(l) if l != len => {
                return Err(Error::LengthMismatch {
                    id: id.to_string(),
                    detail: format!("{len} segments, file uses {l}"),
                })
            }
            _ => {}
        }
    }
    Ok(expected)
}

pub fn write_waveforms<W: Write>(out: W, waveforms: &[Waveform]) -> Result<()> {
    let l = uniform_len(waveforms.iter().map(|w| (w.transistor_id.as_str(), w.len())))?
        .ok_or_else(|| Error::invalid("no waveforms to write"))?;
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["transistor_id".to_string(), "duration_s".to_string()];
    header.extend((0..l).map(|i| format!("v{i}")));
    wtr.write_record(&header)?;
    for w in waveforms {
        let mut rec = Vec::with_capacity(l + 2);
        rec.push(w.transistor_id.clone());
        rec.push(w.segment_duration.to_string());
        rec.extend(w.segments.iter().map(f64::to_string));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_waveforms<R: Read>(input: R) -> Result<Vec<Waveform>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let l = check_header(rdr.headers()?, &["transistor_id", "duration_s"], "v", "")?;
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        if rec.len() != l + 2 {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} fields, found {}", l + 2, rec.len()),
            });
        }
        let duration = parse_num(&rec[1], line)?;
        let segments = rec
            .iter()
            .skip(2)
            .map(|s| parse_num(s, line))
            .collect::<Result<Vec<_>>>()?;
        out.push(Waveform::new(&rec[0], duration, segments)?);
    }
    Ok(out)
}

pub fn write_traces<W: Write>(out: W, traces: &[Trace]) -> Result<()> {
    let l = uniform_len(traces.iter().map(|t| (t.transistor_id.as_str(), t.len())))?
        .ok_or_else(|| Error::invalid("no traces to write"))?;
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["transistor_id".to_string()];
    header.extend((0..l).map(|i| format!("dvt{i}_mv")));
    wtr.write_record(&header)?;
    for t in traces {
        let mut rec = Vec::with_capacity(l + 1);
        rec.push(t.transistor_id.clone());
        rec.extend(t.dvt.iter().map(f64::to_string));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_traces<R: Read>(input: R) -> Result<Vec<Trace>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let l = check_header(rdr.headers()?, &["transistor_id"], "dvt", "_mv")?;
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        if rec.len() != l + 1 {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} fields, found {}", l + 1, rec.len()),
            });
        }
        let dvt = rec
            .iter()
            .skip(1)
            .map(|s| parse_num(s, line))
            .collect::<Result<Vec<_>>>()?;
        out.push(Trace::new(&rec[0], dvt));
    }
    Ok(out)
}

pub fn load_waveforms(path: impl AsRef<Path>) -> Result<Vec<Waveform>> {
    read_waveforms(std::fs::File::open(path)?)
}

pub fn save_waveforms(path: impl AsRef<Path>, waveforms: &[Waveform]) -> Result<()> {
    write_waveforms(std::io::BufWriter::new(std::fs::File::create(path)?), waveforms)
}

pub fn load_traces(path: impl AsRef<Path>) -> Result<Vec<Trace>> {
    read_traces(std::fs::File::open(path)?)
}

pub fn save_traces(path: impl AsRef<Path>, traces: &[Trace]) -> Result<()> {
    write_traces(std::io::BufWriter::new(std::fs::File::create(path)?), traces)
}

/// Parsed `key = value` file. Blank lines and `#` comments are skipped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvConfig {
    entries: BTreeMap<String, (String, usize)>,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected 'key = value', found '{line}'"),
            })?;
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(Error::Parse { line: i + 1, msg: "empty key".into() });
            }
            if entries.insert(key.clone(), (v.trim().to_string(), i + 1)).is_some() {
                return Err(Error::Parse { line: i + 1, msg: format!("duplicate key '{key}'") });
            }
        }
        Ok(KvConfig { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Errors on any key outside `allowed`.
    pub fn ensure_keys(&self, allowed: &[&str]) -> Result<()> {
        for (k, (_, line)) in &self.entries {
            if !allowed.contains(&k.as_str()) {
                return Err(Error::Parse { line: *line, msg: format!("unknown key '{k}'") });
            }
        }
        Ok(())
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        self.entries
            .get(key)
            .map(|(v, line)| parse_num(v, *line))
            .transpose()
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>> {
        self.entries
            .get(key)
            .map(|(v, line)| {
                v.parse::<u64>().map_err(|e| Error::Parse {
                    line: *line,
                    msg: format!("'{v}': {e}"),
                })
            })
            .transpose()
    }

    /// Comma-separated list of reals.
    pub fn get_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.entries
            .get(key)
            .map(|(v, line)| v.split(',').map(|s| parse_num(s, *line)).collect())
            .transpose()
    }
}

pub const RUN_CONFIG_KEYS: [&str; 5] = ["vdd", "temperature_c", "segment_duration", "eol_seconds", "rng_seed"];

impl RunConfig {
    pub fn from_kv(kv: &KvConfig) -> Result<Self> {
        kv.ensure_keys(&RUN_CONFIG_KEYS)?;
        let d = RunConfig::default();
        let cfg = RunConfig {
            vdd: kv.get_f64("vdd")?.unwrap_or(d.vdd),
            temperature_c: kv.get_f64("temperature_c")?.unwrap_or(d.temperature_c),
            segment_duration: kv.get_f64("segment_duration")?.unwrap_or(d.segment_duration),
            eol_seconds: kv.get_f64("eol_seconds")?.unwrap_or(d.eol_seconds),
            rng_seed: kv.get_u64("rng_seed")?.unwrap_or(d.rng_seed),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_kv_string(&self) -> String {
        format!(
            "vdd = {}\ntemperature_c = {}\nsegment_duration = {}\neol_seconds = {}\nrng_seed = {}\n",
            self.vdd, self.temperature_c, self.segment_duration, self.eol_seconds, self.rng_seed
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn waveform_csv_layout() {
        let w = vec![
            Waveform::new("x/MP0", 1e-3, vec![0.0, 0.7, 0.35]).unwrap(),
            Waveform::new("y,quoted", 1e-3, vec![0.7, 0.7, 0.0]).unwrap(),
        ];
        let mut buf = Vec::new();
        write_waveforms(&mut buf, &w).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "transistor_id,duration_s,v0,v1,v2\nx/MP0,0.001,0,0.7,0.35\n\"y,quoted\",0.001,0.7,0.7,0\n"
        );
        assert_eq!(read_waveforms(buf.as_slice()).unwrap(), w);
    }

    #[test]
    fn trace_header_checked() {
        let bad = "transistor_id,dvt0_mv,dvt2_mv\na,1,2\n";
        assert!(matches!(read_traces(bad.as_bytes()), Err(Error::Schema(_))));
        let wrong_kind = "transistor_id,duration_s,v0\na,0.001,0\n";
        assert!(read_traces(wrong_kind.as_bytes()).is_err());
    }

    #[test]
    fn ragged_rows_rejected() {
        let w = vec![
            Waveform::new("a", 1e-3, vec![0.0, 0.7]).unwrap(),
            Waveform::new("b", 1e-3, vec![0.0]).unwrap(),
        ];
        assert!(matches!(write_waveforms(Vec::new(), &w), Err(Error::LengthMismatch { .. })));
        let text = "transistor_id,dvt0_mv,dvt1_mv\na,1,2\nb,1\n";
        assert!(read_traces(text.as_bytes()).is_err());
    }

    #[test]
    fn run_config_kv() {
        let kv = KvConfig::parse("# comment\nvdd = 0.8\nrng_seed = 42 # trailing\n").unwrap();
        let cfg = RunConfig::from_kv(&kv).unwrap();
        assert_eq!(cfg.vdd, 0.8);
        assert_eq!(cfg.rng_seed, 42);
        assert_eq!(cfg.segment_duration, 1e-3);

        let again = RunConfig::from_kv(&KvConfig::parse(&cfg.to_kv_string()).unwrap()).unwrap();
        assert_eq!(again, cfg);

        assert!(RunConfig::from_kv(&KvConfig::parse("vdd_typo = 1").unwrap()).is_err());
        assert!(KvConfig::parse("vdd 0.7").is_err());
        assert!(KvConfig::parse("vdd = 1\nvdd = 2").is_err());
        assert!(RunConfig::from_kv(&KvConfig::parse("vdd = -1").unwrap()).is_err());
    }

    proptest! {
        #[test]
        fn waveform_and_trace_files_rewrite_identically(
            rows in prop::collection::vec(prop::collection::vec(-1.0e3f64..1.0e3, 5), 1..6),
            dur in 1e-9f64..10.0,
        ) {
            let wfs: Vec<Waveform> = rows.iter().enumerate()
                .map(|(i, r)| Waveform::new(format!("d{i}"), dur, r.clone()).unwrap())
                .collect();
            let mut a = Vec::new();
            write_waveforms(&mut a, &wfs).unwrap();
            let mut b = Vec::new();
            write_waveforms(&mut b, &read_waveforms(a.as_slice()).unwrap()).unwrap();
            prop_assert_eq!(&a, &b);

            let trs: Vec<Trace> = rows.iter().enumerate()
                .map(|(i, r)| Trace::new(format!("d{i}"), r.clone()))
                .collect();
            let mut a = Vec::new();
            write_traces(&mut a, &trs).unwrap();
            let mut b = Vec::new();
            write_traces(&mut b, &read_traces(a.as_slice()).unwrap()).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
