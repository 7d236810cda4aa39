//! Counter-based random substreams.
//!
//! Every random draw in the simulator comes from a ChaCha8 keystream addressed
//! by `(seed, domain, grid index, item index)`:
//!
//! * the 256-bit key is expanded from `seed` and the [`Domain`] tag with
//!   SplitMix64,
//! * the ChaCha stream id is the grid index (one Γ point, one λ point, ...),
//! * the item index (trial, subframe) selects a window of 2^32 words inside
//!   that stream via the block counter.
//!
//! A worker can therefore jump straight to any trial without touching the
//! others, which makes results independent of how work is split across
//! threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RNG type handed to every sampling routine.
pub type SimRng = ChaCha8Rng;

/// Words reserved for each item inside a stream.
const ITEM_WINDOW_BITS: u32 = 32;
/// ChaCha8's word counter is 68 bits wide.
const MAX_ITEM_INDEX: u64 = 1 << (68 - ITEM_WINDOW_BITS);

/// Independent random domains. The discriminant is part of the key
/// derivation and must never be renumbered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Domain {
    CellTrial = 1,
    NetworkDrop = 2,
    NetworkTb = 3,
    LayoutSynthesis = 4,
    Validation = 5,
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn key_for(seed: u64, domain: Domain) -> [u8; 32] {
    let mut state = seed ^ (domain as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// Factory for the substreams of one `(seed, domain)` pair.
#[derive(Debug, Clone)]
pub struct StreamFamily {
    base: ChaCha8Rng,
}

impl StreamFamily {
    pub fn new(seed: u64, domain: Domain) -> Self {
        Self {
            base: ChaCha8Rng::from_seed(key_for(seed, domain)),
        }
    }

    /// RNG positioned at the start of item `item` of stream `grid`.
    pub fn stream(&self, grid: u64, item: u64) -> SimRng {
        assert!(
            item < MAX_ITEM_INDEX,
            "item index {item} exceeds the substream address space"
        );
        let mut rng = self.base.clone();
        rng.set_stream(grid);
        rng.set_word_pos(u128::from(item) << ITEM_WINDOW_BITS);
        rng
    }
}

/// Shorthand for `StreamFamily::new(seed, domain).stream(grid, item)`.
pub fn substream(seed: u64, domain: Domain, grid: u64, item: u64) -> SimRng {
    StreamFamily::new(seed, domain).stream(grid, item)
}
