//! The harness commands. Each takes its typed configuration, a seed and an
//! output directory, writes its files plus `manifest.json`, and returns the
//! manifest.

pub mod baseline;
pub mod eval;
pub mod gen_data;
pub mod kyoto_phase;
pub mod scarf;
pub mod train;

use std::path::Path;
use std::time::Instant;

use pseudeq_core::solvers::{Clock, ExchangeProblem, GaesModel, KyotoProblem, NullClock};

use crate::dataset::{self, Dataset};
use crate::dto::{InstanceRecord, ModelRecord, ProblemKind};
use crate::error::{HarnessError, Result};
use crate::io;

pub use baseline::BaselineConfig;
pub use eval::EvalConfig;
pub use gen_data::run as gen_data;
pub use kyoto_phase::KyotoPhaseConfig;
pub use scarf::ScarfConfig;
pub use train::TrainCommandConfig;

/// Milliseconds since construction.
#[derive(Clone, Copy, Debug)]
pub struct WallClock(Instant);

impl WallClock {
    pub fn start() -> Self {
        WallClock(Instant::now())
    }
}

impl Clock for WallClock {
    fn now_ms(&self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1e3
    }
}

/// A wall clock when `record` is set, the zero clock otherwise.
pub fn clock(record: bool) -> Box<dyn Clock + Sync> {
    if record {
        Box::new(WallClock::start())
    } else {
        Box::new(NullClock)
    }
}

/// Runs `f` and reports its wall time, or zero when not recording.
pub fn timed<T>(record: bool, f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let value = f();
    let ms = if record { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
    (value, ms)
}

/// Problems of one kind built from dataset records.
pub enum Problems {
    Exchange(Vec<ExchangeProblem>),
    Kyoto(Vec<KyotoProblem>),
}

impl Problems {
    pub fn len(&self) -> usize {
        match self {
            Problems::Exchange(p) => p.len(),
            Problems::Kyoto(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `rows` is the Kyoto vertex padding and is ignored for exchange records.
pub fn problems(kind: ProblemKind, records: &[InstanceRecord], rows: usize) -> Result<Problems> {
    Ok(match kind {
        ProblemKind::Exchange => Problems::Exchange(dataset::economies(records)?.into_iter().map(ExchangeProblem::new).collect()),
        ProblemKind::Kyoto => Problems::Kyoto(
            dataset::kyoto_games(records)?
                .iter()
                .map(|g| KyotoProblem::new(g, rows))
                .collect::<pseudeq_core::Result<Vec<_>>>()?,
        ),
    })
}

/// Largest vertex count over every split, the padding a Kyoto model is
/// built with.
pub fn kyoto_rows(data: &Dataset) -> Result<usize> {
    let all: Vec<InstanceRecord> = data.train.iter().chain(&data.valid).chain(&data.test).cloned().collect();
    Ok(dataset::kyoto_games(&all)?.iter().map(|g| g.vertices().len()).max().unwrap_or(0))
}

pub fn load_model(path: &Path, kind: ProblemKind) -> Result<GaesModel> {
    let rec: ModelRecord = io::read_json(path)?;
    if rec.problem != kind {
        return Err(HarnessError::validation(format!(
            "{}: model was trained on {:?} instances, dataset holds {:?}",
            path.display(),
            rec.problem,
            kind
        )));
    }
    rec.to_model()
}

/// Linear-interpolation quantile of sorted values, `q` in `[0, 1]`.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub const SUMMARY_ROWS: [&str; 4] = ["mean", "median", "p05", "p95"];

/// Aggregates of one column in [`SUMMARY_ROWS`] order.
pub fn summarize(values: &[f64]) -> [f64; 4] {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    [mean, quantile(&sorted, 0.5), quantile(&sorted, 0.05), quantile(&sorted, 0.95)]
}

/// Writes per-row metrics with a leading `row` index column, followed by
/// one summary row per entry of [`SUMMARY_ROWS`].
pub fn write_metrics(path: &Path, columns: &[&str], detail: &[Vec<f64>]) -> Result<()> {
    let mut header = vec!["row"];
    header.extend_from_slice(columns);
    let mut rows: Vec<Vec<String>> = detail
        .iter()
        .enumerate()
        .map(|(k, r)| std::iter::once(k.to_string()).chain(r.iter().map(|x| io::fmt17(*x))).collect())
        .collect();
    if !detail.is_empty() {
        let per_column: Vec<[f64; 4]> = (0..columns.len())
            .map(|c| summarize(&detail.iter().map(|r| r[c]).collect::<Vec<_>>()))
            .collect();
        for (s, name) in SUMMARY_ROWS.iter().enumerate() {
            rows.push(std::iter::once(name.to_string()).chain(per_column.iter().map(|a| io::fmt17(a[s]))).collect());
        }
    }
    io::write_csv(path, &header, &rows)
}

/// Detail rows of a metrics file written by [`write_metrics`], keyed by
/// column, followed by its summary rows.
pub fn read_metrics(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>, Vec<(String, Vec<f64>)>)> {
    let (header, rows) = io::read_csv(path)?;
    let mut detail = Vec::new();
    let mut summary = Vec::new();
    for row in rows {
        let values = row[1..].iter().map(|s| io::parse_f64(s)).collect::<Result<Vec<_>>>()?;
        if row[0].parse::<usize>().is_ok() {
            detail.push(values);
        } else {
            summary.push((row[0].clone(), values));
        }
    }
    Ok((header[1..].to_vec(), detail, summary))
}
