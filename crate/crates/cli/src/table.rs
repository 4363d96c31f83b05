//! Shrinking-disk error tables over grid resolution and time subdivision.

use std::fmt::Write as _;

use curveflow::driver::Mode;
use curveflow::scenarios::{circle_run, CircleRun, CIRCLE_RADIUS};
use rayon::prelude::*;

pub const DESK_GRIDS: [usize; 3] = [20, 40, 80];
pub const DESK_SUBDIVISIONS: [usize; 5] = [2, 4, 8, 16, 32];
pub const FULL_GRIDS: [usize; 6] = [5, 10, 20, 40, 80, 160];
pub const FULL_SUBDIVISIONS: [usize; 8] = [2, 4, 8, 16, 32, 64, 128, 256];

/// Worker cap from `CURVEFLOW_THREADS`, defaulting to the available cores.
pub fn worker_count() -> usize {
    std::env::var("CURVEFLOW_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs every (grid, subdivision) pair; rows follow `grids`, columns follow `subdivisions`.
pub fn sweep(mode: Mode, grids: &[usize], subdivisions: &[usize], workers: usize) -> curveflow::Result<Vec<Vec<CircleRun>>> {
    let jobs: Vec<(usize, usize)> = grids.iter().flat_map(|&g| subdivisions.iter().map(move |&s| (g, s))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    let runs: Vec<CircleRun> = pool.install(|| {
        jobs.par_iter()
            .map(|&(g, s)| circle_run(g, s, mode))
            .collect::<curveflow::Result<Vec<_>>>()
    })?;
    Ok(runs.chunks(subdivisions.len()).map(<[CircleRun]>::to_vec).collect())
}

pub fn render(mode: Mode, table: &[Vec<CircleRun>]) -> String {
    let name = match mode {
        Mode::Bmo => "BMO",
        Mode::BmoStar => "BMO*",
    };
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{name}: time-averaged radius error, shrinking disk r0 = {CIRCLE_RADIUS} (\"–\" where the scheme stalls)"
    );
    let _ = write!(s, "{:<16}", "res(space\\time)");
    if let Some(row) = table.first() {
        for r in row {
            let _ = write!(s, "{:>8}", r.subdivision);
        }
    }
    s.push('\n');
    for row in table {
        let cells = row.first().map_or(0, |r| r.cells);
        let _ = write!(s, "{:<16}", format!("{cells} x {cells}"));
        for r in row {
            let entry = r.error.map_or("–".to_string(), |e| format!("{e:.4}"));
            let _ = write!(s, "{entry:>8}");
        }
        s.push('\n');
    }
    s
}

pub fn cmd_table(mode: Mode, full: bool) -> curveflow::Result<String> {
    let (grids, subs): (&[usize], &[usize]) = if full {
        (&FULL_GRIDS, &FULL_SUBDIVISIONS)
    } else {
        (&DESK_GRIDS, &DESK_SUBDIVISIONS)
    };
    Ok(render(mode, &sweep(mode, grids, subs, worker_count())?))
}
