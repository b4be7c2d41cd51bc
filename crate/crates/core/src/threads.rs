use std::ops::Range;

pub const THREADS_ENV: &str = "INPAINT_THREADS";

/// Worker count: explicit request, else the INPAINT_THREADS variable,
/// else 1. Unparseable or zero values fall back to 1.
pub fn resolve_threads(requested: Option<usize>) -> usize {
    requested
        .or_else(|| {
            std::env::var(THREADS_ENV)
                .ok()
                .and_then(|v| v.trim().parse().ok())
        })
        .filter(|&t| t >= 1)
        .unwrap_or(1)
}

/// Contiguous ceil-division split of 0..n. The split depends only on
/// `n` and `threads`, never on runtime load.
pub fn chunk_ranges(n: usize, threads: usize) -> Vec<Range<usize>> {
    if n == 0 {
        return Vec::new();
    }
    let size = n.div_ceil(threads.max(1));
    (0..n).step_by(size).map(|s| s..(s + size).min(n)).collect()
}

/// Runs `f` over each chunk in a scoped thread and returns results in
/// chunk order, so downstream merges are order-deterministic.
pub fn map_chunks<T, F>(n: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync,
{
    let ranges = chunk_ranges(n, threads);
    if ranges.len() <= 1 {
        return ranges.into_iter().map(f).collect();
    }
    std::thread::scope(|scope| {
        let f = &f;
        let handles: Vec<_> = ranges
            .into_iter()
            .map(|r| scope.spawn(move || f(r)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}
