//! Reference circuits: the standard-cell characterization bench, an 8-bit
//! ripple-carry adder and an 8×8 multiply / 32-bit accumulate unit.

use super::cells::{CellKind, ALL_CELLS};
use super::netlist::{Instance, Netlist, CONST0};
use crate::error::{Error, Result};

fn bus(name: &str, width: usize) -> Vec<String> {
    (0..width).map(|i| format!("{name}{i}")).collect()
}

/// One instance of every library cell, each with its own primary inputs.
pub fn build_std_cells() -> Netlist {
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    let mut instances = Vec::new();
    for kind in ALL_CELLS {
        let inst_name = kind.name().to_string();
        let mut pins = Vec::new();
        for pin in kind.inputs() {
            let net = format!("{inst_name}.{pin}");
            inputs.push(net.clone());
            pins.push((pin.to_string(), net));
        }
        for pin in kind.outputs() {
            let net = format!("{inst_name}.{pin}");
            outputs.push(net.clone());
            pins.push((pin.to_string(), net));
        }
        instances.push(Instance { name: inst_name, cell: kind, pins: pins.into_iter().collect() });
    }
    Netlist::new("stdcells", inputs, outputs, instances).expect("std-cell bench is well-formed")
}

/// 8-bit ripple-carry adder of full adders, carry-in tied low.
///
/// Inputs `a0..a7, b0..b7`; outputs `s0..s7, cout`.
pub fn build_adder8() -> Netlist {
    let a = bus("a", 8);
    let b = bus("b", 8);
    let mut instances = Vec::new();
    let mut carry = CONST0.to_string();
    let mut outputs = bus("s", 8);
    for i in 0..8 {
        let co = if i == 7 { "cout".to_string() } else { format!("c{}", i + 1) };
        let s = format!("s{i}");
        instances.push(Instance::new(
            format!("fa{i}"),
            CellKind::FullAdder,
            &[("A", &a[i]), ("B", &b[i]), ("CI", &carry), ("S", &s), ("CO", &co)],
        ));
        carry = co;
    }
    outputs.push("cout".into());
    let inputs = a.into_iter().chain(b).collect();
    Netlist::new("adder8", inputs, outputs, instances).expect("adder8 is well-formed")
}

/// `y = w · x + acc (mod 2^32)`: AND-array partial products, carry-save
/// reduction with full adders, then a 32-bit ripple-carry adder.
///
/// Inputs `w0..w7, x0..x7, acc0..acc31`; outputs `y0..y31`.
pub fn build_mac32() -> Netlist {
    const WIDTH: usize = 32;
    let w = bus("w", 8);
    let x = bus("x", 8);
    let acc = bus("acc", WIDTH);
    let mut instances = Vec::new();
    let mut columns: Vec<Vec<String>> = vec![Vec::new(); WIDTH];

    for (i, xi) in x.iter().enumerate() {
        for (j, wj) in w.iter().enumerate() {
            let net = format!("pp{i}_{j}");
            instances.push(Instance::new(
                format!("and{i}_{j}"),
                CellKind::And2,
                &[("A", wj), ("B", xi), ("Y", &net)],
            ));
            columns[i + j].push(net);
        }
    }
    for (c, a) in acc.iter().enumerate() {
        columns[c].push(a.clone());
    }

    // Wallace-style stages: every full group of three bits in a column becomes a full adder
    let mut stage = 0;
    while columns.iter().any(|c| c.len() > 2) {
        let mut next: Vec<Vec<String>> = vec![Vec::new(); WIDTH];
        for (c, bits) in columns.iter().enumerate() {
            let mut chunks = bits.chunks_exact(3);
            for (k, trio) in chunks.by_ref().enumerate() {
                let name = format!("csa{stage}_{c}_{k}");
                let s = format!("{name}.s");
                let co = format!("{name}.co");
                instances.push(Instance::new(
                    name,
                    CellKind::FullAdder,
                    &[("A", &trio[0]), ("B", &trio[1]), ("CI", &trio[2]), ("S", &s), ("CO", &co)],
                ));
                next[c].push(s);
                if c + 1 < WIDTH {
                    next[c + 1].push(co);
                }
            }
            next[c].extend(chunks.remainder().iter().cloned());
        }
        columns = next;
        stage += 1;
    }

    let outputs = bus("y", WIDTH);
    let mut carry = CONST0.to_string();
    for (c, bits) in columns.iter().enumerate() {
        let a = bits.first().map(String::as_str).unwrap_or(CONST0);
        let b = bits.get(1).map(String::as_str).unwrap_or(CONST0);
        let co = format!("cpa{c}.co");
        instances.push(Instance::new(
            format!("cpa{c}"),
            CellKind::FullAdder,
            &[("A", a), ("B", b), ("CI", &carry), ("S", &outputs[c]), ("CO", &co)],
        ));
        carry = co;
    }

    let inputs = w.into_iter().chain(x).chain(acc).collect();
    Netlist::new("mac32", inputs, outputs, instances).expect("mac32 is well-formed")
}

/// Built-in circuit by name: `stdcells`, `adder8`, `mac32`.
pub fn builtin(name: &str) -> Result<Netlist> {
    match name {
        "stdcells" => Ok(build_std_cells()),
        "adder8" => Ok(build_adder8()),
        "mac32" => Ok(build_mac32()),
        other => Err(Error::invalid(format!("unknown built-in netlist '{other}'"))),
    }
}

pub fn to_bits(value: u64, width: usize) -> Vec<bool> {
    (0..width).map(|i| value >> i & 1 == 1).collect()
}

pub fn from_bits(bits: &[bool]) -> u64 {
    bits.iter().enumerate().fold(0, |acc, (i, &b)| acc | (u64::from(b) << i))
}

/// Adds two bytes on the adder netlist; returns `(sum, carry)`.
pub fn run_adder8(nl: &Netlist, a: u8, b: u8) -> Result<(u8, bool)> {
    let mut input = to_bits(a.into(), 8);
    input.extend(to_bits(b.into(), 8));
    let out = nl.evaluate(&input)?;
    Ok((from_bits(&out[..8]) as u8, out[8]))
}

/// Computes `w · x + acc` on the MAC netlist.
pub fn run_mac32(nl: &Netlist, w: u8, x: u8, acc: u32) -> Result<u32> {
    let mut input = to_bits(w.into(), 8);
    input.extend(to_bits(x.into(), 8));
    input.extend(to_bits(acc.into(), 32));
    Ok(from_bits(&nl.evaluate(&input)?) as u32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adder_examples() {
        let nl = build_adder8();
        assert_eq!(run_adder8(&nl, 3, 5).unwrap(), (8, false));
        assert_eq!(run_adder8(&nl, 255, 1).unwrap(), (0, true));
        assert_eq!(nl.devices().len(), 96);
    }

    #[test]
    fn adder_exhaustive() {
        let nl = build_adder8();
        for a in 0..=255u8 {
            for b in (0..=255u8).step_by(7) {
                let (s, c) = run_adder8(&nl, a, b).unwrap();
                let want = a as u16 + b as u16;
                assert_eq!((s as u16) | (u16::from(c) << 8), want);
            }
        }
    }

    #[test]
    fn mac_examples() {
        let nl = build_mac32();
        assert_eq!(run_mac32(&nl, 7, 9, 100).unwrap(), 163);
        assert_eq!(run_mac32(&nl, 255, 255, u32::MAX).unwrap(), 255u32 * 255 - 1);
        assert_eq!(run_mac32(&nl, 0, 0, 0).unwrap(), 0);
    }

    #[test]
    fn std_cells_cover_library() {
        let nl = build_std_cells();
        assert_eq!(nl.instances().len(), ALL_CELLS.len());
        assert_eq!(nl.devices().len(), 79);
    }

    #[test]
    fn json_round_trip_preserves_function() {
        let nl = build_adder8();
        let text = serde_json::to_string(&nl.to_json()).unwrap();
        let back = Netlist::from_json(serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(run_adder8(&back, 200, 100).unwrap(), (44, true));
        assert_eq!(back.devices(), nl.devices());
    }

    #[test]
    fn builtin_names() {
        assert!(builtin("adder8").is_ok());
        assert!(builtin("nope").is_err());
    }
}
