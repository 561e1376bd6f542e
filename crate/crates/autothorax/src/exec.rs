use std::num::NonZeroUsize;
use std::thread;

use autothorax_core::exec::Executor;

/// Scoped-thread executor. Task `i` runs on worker `i % workers`; results
/// are returned in index order regardless of the worker count.
#[derive(Debug, Clone, Copy)]
pub struct Threads {
    workers: NonZeroUsize,
}

impl Threads {
    pub fn new(workers: usize) -> Self {
        Self {
            workers: NonZeroUsize::new(workers).unwrap_or(NonZeroUsize::MIN),
        }
    }

    /// One worker per available core.
    pub fn available() -> Self {
        Self::new(thread::available_parallelism().map_or(1, NonZeroUsize::get))
    }
}

impl Executor for Threads {
    fn map<R: Send, F: Fn(usize) -> R + Sync>(&self, n: usize, f: F) -> Vec<R> {
        let workers = self.workers.get().min(n);
        if workers <= 1 {
            return (0..n).map(f).collect();
        }
        let f = &f;
        let mut parts: Vec<Vec<R>> = thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|w| s.spawn(move || (w..n).step_by(workers).map(f).collect::<Vec<R>>()))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|p| std::panic::resume_unwind(p)))
                .collect()
        });
        let mut iters: Vec<_> = parts.iter_mut().map(|p| p.drain(..)).collect();
        (0..n)
            .map(|i| iters[i % workers].next().expect("one result per task"))
            .collect()
    }

    fn workers(&self) -> usize {
        self.workers.get()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_order() {
        for w in [1, 2, 3, 8, 20] {
            let out = Threads::new(w).map(13, |i| i * i);
            assert_eq!(out, (0..13).map(|i| i * i).collect::<Vec<_>>());
        }
        assert!(Threads::new(4).map(0, |i| i).is_empty());
    }
}
