//! Library side of the `rpitrack` command line: problem files, run manifests
//! and the four verbs. The binary only parses flags and forwards here, so the
//! verbs can be driven from tests exactly as from a shell.
//!
//! Exit codes:
//!
//! | code | meaning                                                     |
//! |------|-------------------------------------------------------------|
//! | 0    | success                                                     |
//! | 1    | certificate check or simulation monitor failed              |
//! | 2    | unreadable or malformed input, inconsistent dimensions      |
//! | 3    | synthesis found no certified point                          |
//! | 4    | numerical failure, unbounded projection, unwritable output  |
//! | 5    | reference outside the certified set (with `--strict`)       |

pub mod commands;
pub mod manifest;
pub mod problem;
pub mod signal;

pub use commands::{cmd_certify, cmd_project, cmd_simulate, cmd_synthesize, exit_for, Exit, GlobalOpts};
pub use manifest::RunManifest;
pub use problem::{ProblemFile, SimulationSpec};
