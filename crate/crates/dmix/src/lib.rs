//! File formats and command-line front end for `dmix-core`.
//!
//! ```text
//! dmix solve   --preset gauss1d --L 6 --seed 0 --output-dir out
//! dmix moments --input density.json --order 4
//! dmix eval    --solution out/solution.json --preset gauss1d
//! ```

pub mod cli;
pub mod format;
pub mod schema;

pub use cli::{run, Cli, CliError};
