//! Experiment front end for `hzreach`: configuration, simulation, and the
//! identify / reach / estimate / bench runners behind the `hzreach` binary.

pub mod commands;
pub mod config;
pub mod output;
pub mod simulate;
pub mod stats;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const IDENTIFICATION: i32 = 2;
    pub const INFEASIBLE: i32 = 3;
}

/// Independent random stream `stream` of the experiment seed.
pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Exit code for a failed command, found by walking the error chain.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    use hzreach::Error;
    for cause in err.chain() {
        match cause.downcast_ref::<Error>() {
            Some(Error::RankDeficient { .. }) | Some(Error::EmptyMode { .. }) => return exit::IDENTIFICATION,
            Some(Error::InfeasibleEstimate { .. }) => return exit::INFEASIBLE,
            _ => {}
        }
    }
    exit::OTHER
}
