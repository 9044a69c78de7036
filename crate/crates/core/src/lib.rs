//! Exact enumeration of self-avoiding polygons on the square lattice.
//!
//! The engine sweeps a transfer matrix over `W x L` rectangles with
//! boundary signatures that record how loop ends must connect on the
//! unprocessed side. Counts are kept modulo word-size primes and
//! reconstructed with the Chinese remainder theorem.

pub mod analysis;
pub mod engine;
pub mod modular;
pub mod oracle;
pub mod pruning;
pub mod series_io;
pub mod signature;

pub use engine::{enumerate, EngineError, EnumerateOptions, Enumeration, SweepConfig};
pub use modular::{crt_reconstruct, Moduli, Modulus, TruncatedPoly};
pub use series_io::{ExactSeries, ResidueSeries};
pub use signature::{EdgeState, PackedSignature, Signature};
