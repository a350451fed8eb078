//! Parallel sweeps. Jobs run on a rayon pool; cells are reduced by the core
//! aggregators, which sort them first, so results do not depend on the
//! thread count.

use rayon::prelude::*;
use rssi_cell_core::classify::KnnParams;
use rssi_cell_core::dataset::{NodeMask, SplitPlan};
use rssi_cell_core::eval::{
    aggregate_l, aggregate_masks, masks_or_all, plan_jobs, run_job, FilterSpec, MaskSweep, SetCollection, SweepCell,
    SweepTable,
};

use crate::{Error, Result};

/// Runs `f` on a pool with `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::Usage("--jobs must be >= 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn run_cells(
    sets: &SetCollection,
    splits: &[SplitPlan],
    l_values: &[usize],
    masks: &[NodeMask],
    filters: &[FilterSpec],
    knn: KnnParams,
) -> Result<Vec<SweepCell>> {
    let jobs = plan_jobs(splits, l_values, masks)?;
    log::info!("{} jobs ({} splits, {} L values, {} masks)", jobs.len(), splits.len(), l_values.len(), masks.len());
    let per_job: Vec<Vec<SweepCell>> =
        jobs.par_iter().map(|job| run_job(sets, job, knn, filters)).collect::<rssi_cell_core::Result<_>>()?;
    Ok(per_job.into_iter().flatten().collect())
}

pub fn sweep_l(
    sets: &SetCollection,
    splits: &[SplitPlan],
    l_values: &[usize],
    masks: &[NodeMask],
    filters: &[FilterSpec],
    knn: KnnParams,
    threads: Option<usize>,
) -> Result<SweepTable> {
    if filters.is_empty() {
        return Err(Error::Usage("empty filter list".into()));
    }
    let cells = with_threads(threads, || run_cells(sets, splits, l_values, masks, filters, knn))??;
    Ok(aggregate_l(l_values, filters, cells))
}

#[allow(clippy::too_many_arguments)]
pub fn sweep_node_masks(
    sets: &SetCollection,
    splits: &[SplitPlan],
    moment_l: usize,
    filter: FilterSpec,
    knn: KnnParams,
    masks: Option<&[NodeMask]>,
    bin_width: f64,
    threads: Option<usize>,
) -> Result<MaskSweep> {
    let masks = masks_or_all(sets.n_nodes(), masks)?;
    let cells = with_threads(threads, || run_cells(sets, splits, &[moment_l], &masks, &[filter], knn))??;
    Ok(aggregate_masks(&masks, cells, bin_width)?)
}
