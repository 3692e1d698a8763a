//! Standard-cell library with canonical static-CMOS pull-up networks.
//!
//! pMOS device lists per cell (gate net in parentheses):
//!
//! | cell   | pMOS | pull-up |
//! |--------|------|---------|
//! | INV    | 1  | (A) |
//! | BUF    | 2  | inverter (A) driving inverter (n) |
//! | NANDk  | k  | k in parallel |
//! | NORk   | k  | k in series |
//! | ANDk   | k+1| NANDk followed by inverter (n) |
//! | ORk    | k+1| NORk followed by inverter (n) |
//! | XOR2   | 6  | input inverters (A, B); paths (an·B) ∥ (A·bn) |
//! | XNOR2  | 6  | input inverters (A, B); paths (an·bn) ∥ (A·B) |
//! | AOI21  | 3  | (A ∥ B) in series with C |
//! | OAI21  | 3  | (A · B) in parallel with C |
//! | AOI22  | 4  | (A ∥ B) in series with (C ∥ D) |
//! | OAI22  | 4  | (A · B) in parallel with (C · D) |
//! | MUX2   | 6  | select inverter (S); AOI22 on (A, sn, B, S); output inverter (yn) |
//! | FA     | 12 | mirror adder: carry stage (A ∥ B)·CI ∥ (A·B), sum stage (A ∥ B ∥ CI)·con ∥ (A·B·CI) |
//!
//! The full adder counts only the 24-transistor mirror core; its output
//! inverters are treated as part of the driven load.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CellKind {
    Inv,
    Buf,
    Nand2,
    Nand3,
    Nand4,
    Nor2,
    Nor3,
    Nor4,
    And2,
    And3,
    Or2,
    Or3,
    Xor2,
    Xnor2,
    Aoi21,
    Oai21,
    Aoi22,
    Oai22,
    Mux2,
    #[serde(rename = "FA")]
    FullAdder,
}

pub const ALL_CELLS: [CellKind; 20] = [
    CellKind::Inv,
    CellKind::Buf,
    CellKind::Nand2,
    CellKind::Nand3,
    CellKind::Nand4,
    CellKind::Nor2,
    CellKind::Nor3,
    CellKind::Nor4,
    CellKind::And2,
    CellKind::And3,
    CellKind::Or2,
    CellKind::Or3,
    CellKind::Xor2,
    CellKind::Xnor2,
    CellKind::Aoi21,
    CellKind::Oai21,
    CellKind::Aoi22,
    CellKind::Oai22,
    CellKind::Mux2,
    CellKind::FullAdder,
];

/// Interface of a library cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub name: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    /// Internal nodes that drive pMOS gates.
    pub internals: Vec<String>,
    /// `(device, gate net)`; gate nets name an input pin or an internal node.
    pub pmos_devices: Vec<(String, String)>,
}

fn strs(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

impl CellKind {
    pub fn name(self) -> &'static str {
        match self {
            CellKind::Inv => "INV",
            CellKind::Buf => "BUF",
            CellKind::Nand2 => "NAND2",
            CellKind::Nand3 => "NAND3",
            CellKind::Nand4 => "NAND4",
            CellKind::Nor2 => "NOR2",
            CellKind::Nor3 => "NOR3",
            CellKind::Nor4 => "NOR4",
            CellKind::And2 => "AND2",
            CellKind::And3 => "AND3",
            CellKind::Or2 => "OR2",
            CellKind::Or3 => "OR3",
            CellKind::Xor2 => "XOR2",
            CellKind::Xnor2 => "XNOR2",
            CellKind::Aoi21 => "AOI21",
            CellKind::Oai21 => "OAI21",
            CellKind::Aoi22 => "AOI22",
            CellKind::Oai22 => "OAI22",
            CellKind::Mux2 => "MUX2",
            CellKind::FullAdder => "FA",
        }
    }

    pub fn from_name(name: &str) -> Option<CellKind> {
        ALL_CELLS.iter().copied().find(|c| c.name() == name)
    }

    pub fn inputs(self) -> &'static [&'static str] {
        use CellKind::*;
        match self {
            Inv | Buf => &["A"],
            Nand2 | Nor2 | And2 | Or2 | Xor2 | Xnor2 => &["A", "B"],
            Nand3 | Nor3 | And3 | Or3 | Aoi21 | Oai21 => &["A", "B", "C"],
            Nand4 | Nor4 | Aoi22 | Oai22 => &["A", "B", "C", "D"],
            Mux2 => &["A", "B", "S"],
            FullAdder => &["A", "B", "CI"],
        }
    }

    pub fn outputs(self) -> &'static [&'static str] {
        match self {
            CellKind::FullAdder => &["S", "CO"],
            _ => &["Y"],
        }
    }

    pub fn internals(self) -> &'static [&'static str] {
        use CellKind::*;
        match self {
            Buf | And2 | And3 | Or2 | Or3 => &["n"],
            Xor2 | Xnor2 => &["an", "bn"],
            Mux2 => &["sn", "yn"],
            FullAdder => &["con"],
            _ => &[],
        }
    }

    /// Gate nets of the pMOS devices, in device order.
    pub fn pmos_gates(self) -> &'static [&'static str] {
        use CellKind::*;
        match self {
            Inv => &["A"],
            Buf => &["A", "n"],
            Nand2 | Nor2 => &["A", "B"],
            Nand3 | Nor3 | Aoi21 | Oai21 => &["A", "B", "C"],
            Nand4 | Nor4 | Aoi22 | Oai22 => &["A", "B", "C", "D"],
            And2 | Or2 => &["A", "B", "n"],
            And3 | Or3 => &["A", "B", "C", "n"],
            Xor2 => &["A", "B", "an", "B", "A", "bn"],
            Xnor2 => &["A", "B", "an", "bn", "A", "B"],
            Mux2 => &["S", "A", "sn", "B", "S", "yn"],
            FullAdder => &["A", "B", "CI", "A", "B", "A", "B", "CI", "con", "A", "B", "CI"],
        }
    }

    pub fn pmos_count(self) -> usize {
        self.pmos_gates().len()
    }

    /// Values of outputs followed by internal nodes.
    pub fn eval(self, x: &[bool]) -> Vec<bool> {
        use CellKind::*;
        match self {
            Inv => vec![!x[0]],
            Buf => vec![x[0], !x[0]],
            Nand2 | Nand3 | Nand4 => vec![!x.iter().all(|&b| b)],
            Nor2 | Nor3 | Nor4 => vec![!x.iter().any(|&b| b)],
            And2 | And3 => {
                let y = x.iter().all(|&b| b);
                vec![y, !y]
            }
            Or2 | Or3 => {
                let y = x.iter().any(|&b| b);
                vec![y, !y]
            }
            Xor2 => vec![x[0] ^ x[1], !x[0], !x[1]],
            Xnor2 => vec![!(x[0] ^ x[1]), !x[0], !x[1]],
            Aoi21 => vec![!((x[0] && x[1]) || x[2])],
            Oai21 => vec![!((x[0] || x[1]) && x[2])],
            Aoi22 => vec![!((x[0] && x[1]) || (x[2] && x[3]))],
            Oai22 => vec![!((x[0] || x[1]) && (x[2] || x[3]))],
            Mux2 => {
                let (a, b, s) = (x[0], x[1], x[2]);
                let y = if s { b } else { a };
                vec![y, !s, !y]
            }
            FullAdder => {
                let (a, b, c) = (x[0], x[1], x[2]);
                let co = (a && b) || (c && (a || b));
                vec![a ^ b ^ c, co, !co]
            }
        }
    }

    pub fn describe(self) -> Cell {
        let pmos = self
            .pmos_gates()
            .iter()
            .enumerate()
            .map(|(i, g)| (format!("MP{i}"), g.to_string()))
            .collect();
        Cell {
            name: self.name().to_string(),
            inputs: strs(self.inputs()),
            outputs: strs(self.outputs()),
            internals: strs(self.internals()),
            pmos_devices: pmos,
        }
    }
}

/// Every cell in the library.
pub fn std_cell_library() -> Vec<Cell> {
    ALL_CELLS.iter().map(|c| c.describe()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn library_shape() {
        let lib = std_cell_library();
        assert!(lib.len() >= 16);
        for cell in &lib {
            assert!((1..=5).contains(&cell.inputs.len()), "{}", cell.name);
            assert!((1..=27).contains(&cell.pmos_devices.len()), "{}", cell.name);
            for (_, gate) in &cell.pmos_devices {
                assert!(
                    cell.inputs.contains(gate) || cell.internals.contains(gate),
                    "{}: gate {gate} not a pin or internal node",
                    cell.name
                );
            }
        }
        assert_eq!(lib.iter().map(|c| c.pmos_devices.len()).sum::<usize>(), 79);
    }

    #[test]
    fn canonical_counts() {
        assert_eq!(CellKind::Inv.describe().pmos_devices, vec![("MP0".into(), "A".into())]);
        assert_eq!(CellKind::Nand2.pmos_gates(), &["A", "B"]);
        // mirror adder: 5 devices in the carry stage, 7 in the sum stage
        assert_eq!(CellKind::FullAdder.pmos_count(), 12);
    }

    #[test]
    fn eval_is_total_and_correct() {
        for kind in ALL_CELLS {
            let n = kind.inputs().len();
            for v in 0..(1u32 << n) {
                let x: Vec<bool> = (0..n).map(|i| v >> i & 1 == 1).collect();
                let out = kind.eval(&x);
                assert_eq!(out.len(), kind.outputs().len() + kind.internals().len());
            }
        }
        assert_eq!(CellKind::FullAdder.eval(&[true, true, false]), vec![false, true, false]);
        assert_eq!(CellKind::FullAdder.eval(&[true, true, true]), vec![true, true, false]);
        assert_eq!(CellKind::Mux2.eval(&[false, true, true])[0], true);
        assert_eq!(CellKind::Aoi21.eval(&[true, true, false]), vec![false]);
        assert_eq!(CellKind::Oai22.eval(&[false, false, true, true]), vec![true]);
    }

    #[test]
    fn xor_pullup_conducts_exactly_when_output_high() {
        // pMOS conducts on a low gate; each series pair must be on together
        for a in [false, true] {
            for b in [false, true] {
                let out = CellKind::Xor2.eval(&[a, b]);
                let (an, bn) = (out[1], out[2]);
                let path1 = !an && !b;
                let path2 = !a && !bn;
                assert_eq!(path1 || path2, out[0]);
            }
        }
    }

    #[test]
    fn names_round_trip() {
        for kind in ALL_CELLS {
            assert_eq!(CellKind::from_name(kind.name()), Some(kind));
        }
        assert_eq!(CellKind::from_name("NAND9"), None);
    }
}
