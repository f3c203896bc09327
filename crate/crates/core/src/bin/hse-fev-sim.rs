//! FEV drivetrain simulator speaking the runner's line protocol on stdin/stdout.

use std::io;

use hse_core::exemplars::{fev_space, FevSimulator};
use hse_core::runner::serve_line_protocol;

fn main() -> io::Result<()> {
    serve_line_protocol(&fev_space(), &FevSimulator::default(), io::stdin().lock(), io::stdout().lock())
}
