//! Yaw stability simulator speaking the runner's line protocol on stdin/stdout.

use std::io;

use hse_core::exemplars::{yaw_space, YawSimulator};
use hse_core::runner::serve_line_protocol;

fn main() -> io::Result<()> {
    serve_line_protocol(&yaw_space(), &YawSimulator::default(), io::stdin().lock(), io::stdout().lock())
}
