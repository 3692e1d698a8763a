//! Gate-level netlists, zero-delay logic simulation and per-pMOS waveform extraction.

mod builders;
mod cells;
mod netlist;
mod sim;

pub use builders::{
    build_adder8, build_mac32, build_std_cells, builtin, from_bits, run_adder8, run_mac32, to_bits,
};
pub use cells::{std_cell_library, Cell, CellKind, ALL_CELLS};
pub use netlist::{Device, Instance, Netlist, NetlistJson, CONST0, CONST1};
pub use sim::{prefix_ids, simulate, simulate_vectors, StimulusPlan};
