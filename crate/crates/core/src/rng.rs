//! Seeded random streams. Every consumer of randomness in an episode draws
//! from its own ChaCha stream so that changing one consumer (e.g. a policy)
//! never perturbs another (e.g. scenario placement or goal resets).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Scenario = 1,
    GoalReset = 2,
    Policy = 3,
}

pub fn stream(seed: u64, purpose: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose as u64);
    rng
}
