//! Fixtures shared by the benchmarks.

use cosparse_core::frames::{tight_frame, Frame};
use cosparse_core::model::{gaussian_instance, synth_cosparse, SensingInstance};
use cosparse_core::rng::stream;

/// Tight frame with `p` rows in `R^d` and a noiseless instance of a signal
/// with sparsity `s` measured `m` times.
pub fn instance(d: usize, p: usize, s: usize, m: usize, seed: u64) -> (Frame, SensingInstance) {
    let frame = tight_frame(p, d, &mut stream(seed)).expect("valid dimensions");
    let mut rng = stream(seed + 1);
    let signal = synth_cosparse(&frame, p - s, &mut rng).expect("nonempty kernel");
    let inst = gaussian_instance(&frame, &signal, m, 0.0, &mut rng).expect("valid instance");
    (frame, inst)
}
