//! Counter-based random streams.
//!
//! Every stream is a ChaCha8 generator keyed by the tuple
//! `(master_seed, experiment, phase, index)`. Two streams with different
//! tuples are independent, and a stream never depends on which other streams
//! were consumed before it, so results do not depend on scheduling.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Which part of a simulated experiment a stream feeds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u32)]
pub enum Phase {
    Tune = 1,
    Subset = 2,
    Eval = 3,
    Report = 4,
    Generate = 5,
    Bootstrap = 6,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub phase: Phase,
    pub index: u64,
}

impl StreamKey {
    pub fn new(phase: Phase, index: u64) -> Self {
        Self { phase, index }
    }
}

/// Builds the generator for one stream.
pub fn stream_rng(master_seed: u64, experiment: u64, key: StreamKey) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&experiment.to_le_bytes());
    seed[16..20].copy_from_slice(&(key.phase as u32).to_le_bytes());
    seed[20..28].copy_from_slice(&key.index.to_le_bytes());
    // bytes 28..32 stay zero; reserved as a format tag
    ChaCha8Rng::from_seed(seed)
}

/// Source of uniform indices for the simulation engine.
///
/// Monte Carlo runs draw from keyed streams; exact enumeration replaces the
/// source with one that walks every possible draw sequence.
pub trait DrawSource {
    /// Returns an index uniformly distributed on `0..upper`.
    fn draw(&mut self, key: StreamKey, upper: usize) -> usize;
}

/// Monte Carlo draw source for one experiment.
pub struct KeyedStreams {
    master_seed: u64,
    experiment: u64,
    open: HashMap<StreamKey, ChaCha8Rng>,
}

impl KeyedStreams {
    pub fn new(master_seed: u64, experiment: u64) -> Self {
        Self {
            master_seed,
            experiment,
            open: HashMap::new(),
        }
    }

    pub fn rng(&mut self, key: StreamKey) -> &mut ChaCha8Rng {
        let (seed, exp) = (self.master_seed, self.experiment);
        self.open
            .entry(key)
            .or_insert_with(|| stream_rng(seed, exp, key))
    }
}

impl DrawSource for KeyedStreams {
    fn draw(&mut self, key: StreamKey, upper: usize) -> usize {
        debug_assert!(upper > 0);
        self.rng(key).random_range(0..upper)
    }
}

/// Walks every draw sequence of a randomized procedure in depth-first order.
///
/// Call [`Enumerator::begin`] before each replay and [`Enumerator::advance`]
/// after it; the probability of the path just replayed is
/// [`Enumerator::path_probability`]. Later draw ranges may depend on earlier
/// draws.
#[derive(Debug, Default)]
pub struct Enumerator {
    choices: Vec<usize>,
    ranges: Vec<usize>,
    cursor: usize,
}

impl Enumerator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn begin(&mut self) {
        self.cursor = 0;
    }

    pub fn path_probability(&self) -> f64 {
        self.ranges[..self.cursor]
            .iter()
            .fold(1.0, |p, &r| p / r as f64)
    }

    /// Moves to the next path. Returns false once every path was visited.
    pub fn advance(&mut self) -> bool {
        self.choices.truncate(self.cursor);
        self.ranges.truncate(self.cursor);
        while let Some(last) = self.choices.last_mut() {
            let range = *self.ranges.last().unwrap();
            if *last + 1 < range {
                *last += 1;
                return true;
            }
            self.choices.pop();
            self.ranges.pop();
        }
        false
    }
}

impl DrawSource for Enumerator {
    fn draw(&mut self, _key: StreamKey, upper: usize) -> usize {
        let i = self.cursor;
        self.cursor += 1;
        if i < self.choices.len() {
            assert_eq!(
                self.ranges[i], upper,
                "draw range changed while replaying a fixed prefix"
            );
            self.choices[i]
        } else {
            self.choices.push(0);
            self.ranges.push(upper);
            0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_order_independent() {
        let mut a = KeyedStreams::new(7, 3);
        let mut b = KeyedStreams::new(7, 3);
        let k1 = StreamKey::new(Phase::Tune, 0);
        let k2 = StreamKey::new(Phase::Tune, 1);
        let a1: Vec<_> = (0..5).map(|_| a.draw(k1, 100)).collect();
        let a2: Vec<_> = (0..5).map(|_| a.draw(k2, 100)).collect();
        let b2: Vec<_> = (0..5).map(|_| b.draw(k2, 100)).collect();
        let b1: Vec<_> = (0..5).map(|_| b.draw(k1, 100)).collect();
        assert_eq!(a1, b1);
        assert_eq!(a2, b2);
        assert_ne!(a1, a2);
    }

    #[test]
    fn enumerator_covers_dependent_ranges() {
        // first draw in 0..2 decides whether a second draw in 0..3 happens
        let mut e = Enumerator::new();
        let mut paths = Vec::new();
        let mut total = 0.0;
        loop {
            e.begin();
            let first = e.draw(StreamKey::new(Phase::Tune, 0), 2);
            let second = if first == 1 {
                Some(e.draw(StreamKey::new(Phase::Tune, 1), 3))
            } else {
                None
            };
            total += e.path_probability();
            paths.push((first, second));
            if !e.advance() {
                break;
            }
        }
        assert_eq!(
            paths,
            vec![(0, None), (1, Some(0)), (1, Some(1)), (1, Some(2))]
        );
        assert!((total - 1.0).abs() < 1e-15);
    }
}
