//! Parallel trajectory ensembles with scheduling-independent results.

use qflock_core::observables::ObservableSeries;
use qflock_core::trajectory::TrajectoryRunner;
use rayon::prelude::*;
use std::ops::Range;

/// Trajectories per work unit. Fixed so that the merge tree, and therefore
/// every floating-point sum, is the same for any thread count.
pub const CHUNK: u64 = 8;

pub fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn chunks(range: Range<u64>) -> Vec<Range<u64>> {
    let mut out = Vec::new();
    let mut lo = range.start;
    while lo < range.end {
        let hi = (lo + CHUNK).min(range.end);
        out.push(lo..hi);
        lo = hi;
    }
    out
}

/// Run trajectories `range` on `threads` workers and merge in index order.
pub fn run_ensemble(
    runner: &TrajectoryRunner,
    range: Range<u64>,
    threads: usize,
) -> anyhow::Result<ObservableSeries> {
    let parts = chunks(range);
    let partial: Vec<qflock_core::Result<ObservableSeries>> = if threads <= 1 {
        parts.into_iter().map(|r| runner.run_range(r)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
        pool.install(|| parts.into_par_iter().map(|r| runner.run_range(r)).collect())
    };
    let mut acc = runner.empty_series();
    for p in partial {
        acc = acc.merge(p?)?;
    }
    Ok(acc)
}

/// Independent jobs mapped on `threads` workers, results in input order.
pub fn map_jobs<T, R, F>(jobs: Vec<T>, threads: usize, f: F) -> anyhow::Result<Vec<R>>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    if threads <= 1 {
        return Ok(jobs.into_iter().map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    Ok(pool.install(|| jobs.into_par_iter().map(f).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use qflock_core::model::ModelParams;
    use qflock_core::trajectory::TrajectoryConfig;

    #[test]
    fn chunk_partition_covers_range() {
        let c = chunks(3..21);
        assert_eq!(c.first().unwrap().start, 3);
        assert_eq!(c.last().unwrap().end, 21);
        assert!(c.windows(2).all(|w| w[0].end == w[1].start));
        assert!(chunks(5..5).is_empty());
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let p = ModelParams::new(4).with_particles(2).with_h(0.5).with_alignment(2.0);
        let mut cfg = TrajectoryConfig::new(2.0, 9);
        cfg.coherence_times = vec![1.0, 2.0];
        cfg.snapshot_times = vec![2.0];
        cfg.density_times = vec![2.0];
        let runner = TrajectoryRunner::new(&p, &cfg).unwrap();
        let a = run_ensemble(&runner, 0..21, 1).unwrap();
        let b = run_ensemble(&runner, 0..21, 3).unwrap();
        assert_eq!(a.rows(), b.rows());
        assert_eq!(a.snapshots(), b.snapshots());
        assert_eq!(a.coherence_series(), b.coherence_series());
        assert_eq!(a.density_mean(0).as_slice(), b.density_mean(0).as_slice());
    }
}
