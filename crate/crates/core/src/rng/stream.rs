use super::{State, NORM};
use crate::error::{Error, Result};

/// One stream: its current state and the seed it was created with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamState {
    current: State,
    initial: State,
}

impl StreamState {
    /// A fresh stream positioned at its seed.
    pub fn new(seed: State) -> Self {
        StreamState { current: seed, initial: seed }
    }

    pub fn from_parts(current: State, initial: State) -> Self {
        StreamState { current, initial }
    }

    pub fn current(&self) -> State {
        self.current
    }

    pub fn initial(&self) -> State {
        self.initial
    }

    /// Next integer in `[1, 2147483647]`.
    #[inline]
    pub fn next_int(&mut self) -> u32 {
        self.current.next_int()
    }

    /// Next uniform in `(0, 1)`.
    #[inline]
    pub fn next_uniform(&mut self) -> f64 {
        self.current.next_int() as f64 * NORM
    }

    /// Rewinds the stream to its seed.
    pub fn reset(&mut self) {
        self.current = self.initial;
    }
}

/// Ordered collection of streams, in creation order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StreamSet {
    streams: Vec<StreamState>,
}

impl StreamSet {
    pub fn from_streams(streams: Vec<StreamState>) -> Result<Self> {
        if streams.is_empty() {
            return Err(Error::InvalidArgument("a stream set needs at least one stream".into()));
        }
        Ok(StreamSet { streams })
    }

    pub fn count(&self) -> usize {
        self.streams.len()
    }

    pub fn streams(&self) -> &[StreamState] {
        &self.streams
    }

    pub fn streams_mut(&mut self) -> &mut [StreamState] {
        &mut self.streams
    }

    pub fn get(&self, index: usize) -> Option<&StreamState> {
        self.streams.get(index)
    }

    pub fn iter(&self) -> impl Iterator<Item = &StreamState> {
        self.streams.iter()
    }

    /// Appends the streams of `other`, keeping order.
    pub fn extend(&mut self, other: StreamSet) {
        self.streams.extend(other.streams);
    }

    pub fn into_streams(self) -> Vec<StreamState> {
        self.streams
    }
}

/// Holds the seed the next created stream will receive.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Creator {
    next_seed: State,
}

impl Creator {
    /// Creator whose first stream starts at `seed`.
    pub fn with_seed(seed: [u32; 6]) -> Result<Self> {
        Ok(Creator { next_seed: State::new(seed)? })
    }

    pub fn next_seed(&self) -> State {
        self.next_seed
    }

    /// Resets the seed of the next created stream.
    pub fn set_base_creator(&mut self, seed: [u32; 6]) -> Result<()> {
        self.next_seed = State::new(seed)?;
        Ok(())
    }

    /// Creates `n` consecutive streams, each 2^134 steps after the previous one.
    pub fn create_streams(&mut self, n: usize) -> Result<StreamSet> {
        if n == 0 {
            return Err(Error::InvalidArgument("stream count must be at least 1".into()));
        }
        let mut streams = Vec::with_capacity(n);
        for _ in 0..n {
            streams.push(StreamState::new(self.next_seed));
            self.next_seed = self.next_seed.next_stream();
        }
        Ok(StreamSet { streams })
    }
}
