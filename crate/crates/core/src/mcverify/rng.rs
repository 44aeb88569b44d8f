//! Keyed random streams. A stream is a ChaCha8 keystream selected by
//! `(seed, stream index)`; draws are consumed in counter order, so a chunk
//! of work sees the same numbers no matter which thread runs it.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;

pub type StreamRng = ChaCha8Rng;

/// Samples per stream when work is split into chunks.
pub const CHUNK: usize = 4096;

pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream index for chunk `chunk` of simulation purpose `tag`.
pub fn stream_id(tag: u64, chunk: u64) -> u64 {
    (tag << 40) | chunk
}

/// Uniform on the open interval `(0, 1)`.
pub fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// A uniform on `(0, 1)` and an independent fair sign from one draw.
pub fn signed_open_unit<R: RngCore + ?Sized>(rng: &mut R) -> (f64, f64) {
    let x = rng.next_u64();
    let u = (((x >> 11) & ((1 << 52) - 1)) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64);
    let sign = if x >> 63 == 1 { -1.0 } else { 1.0 };
    (u, sign)
}

/// Evaluates `f(rng, i)` for `i in 0..n`, chunk `c` drawing from stream
/// `stream_id(tag, c)`. Output order is the index order.
pub fn chunked_map<T, F>(seed: u64, tag: u64, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut StreamRng, usize) -> T + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Vec<T>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, stream_id(tag, c as u64));
            let end = ((c + 1) * CHUNK).min(n);
            (c * CHUNK..end).map(|i| f(&mut rng, i)).collect()
        })
        .collect();
    parts.into_iter().flatten().collect()
}
