//! Manufactured solutions, benchmark problems, rate studies, and the
//! barrier, mollifier and seminorm utilities.

pub mod barrier;
pub mod benchmarks;
pub mod decomposition_check;
pub mod manufactured;
pub mod mollifier;
pub mod rates;
pub mod seminorm;
