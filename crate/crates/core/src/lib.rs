//! Design-time transistor aging toolkit.
//!
//! Gate-level circuits produce per-pMOS gate waveforms, an analytical BTI
//! oracle turns them into ΔVth traces, and machine-learning surrogates
//! (hyperdimensional computing, SVM/SVR, MLP, LSTM) learn to reproduce those
//! traces without access to the oracle's parameters. The predictor layer ties
//! the surrogates to trace reconstruction, end-of-life extrapolation and
//! guardband reporting.

pub mod circuit;
pub mod dataset;
pub mod error;
pub mod hdc;
pub mod io;
pub mod model;
pub mod nn;
pub mod oracle;
pub mod pipeline;
pub mod predictor;
pub mod svm;

pub use error::{Error, Result};
pub use model::{QuantizerSpec, RunConfig, Trace, VoltageLevel, Waveform};
