//! CSV writers for results, ADMM traces and channel dumps.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use slicebench_core::allocator::TraceRow;
use slicebench_core::channel::ChannelSample;

pub const RESULTS_HEADER: &str =
    "algo,seed,lambda_mult,slice_id,kind,blocks,bandwidth_hz,utility,power_w,satisfied_frac,total_utility";

/// One slice of one run. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub algo: String,
    pub seed: u64,
    /// TI per-robot arrival rate of the run; empty when TI slices disagree.
    pub lambda_mult: Option<f64>,
    pub slice_id: usize,
    pub kind: String,
    pub blocks: usize,
    pub bandwidth_hz: f64,
    /// SAA-mean slice utility.
    pub utility: f64,
    pub power_w: f64,
    pub satisfied_frac: f64,
    pub total_utility: f64,
}

#[derive(Debug, Serialize)]
struct ChannelRow {
    t: u64,
    ru: usize,
    terminal: usize,
    antenna: usize,
    re: f64,
    im: f64,
}

#[derive(Debug, Serialize)]
struct TraceCsvRow {
    iter: usize,
    primal_residual: f64,
    dual_residual: f64,
    objective: f64,
}

fn csv_err(e: csv::Error) -> io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::other(format!("{other:?}")),
    }
}

/// Incremental results writer; flushes after every batch.
pub struct ResultsWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> ResultsWriter<W> {
    pub fn new(w: W) -> Self {
        Self {
            inner: csv::WriterBuilder::new().has_headers(true).from_writer(w),
        }
    }

    pub fn write_rows(&mut self, rows: &[ResultRow]) -> io::Result<()> {
        for r in rows {
            self.inner.serialize(r).map_err(csv_err)?;
        }
        self.inner.flush()
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.inner.flush()?;
        self.inner.into_inner().map_err(|e| e.into_error())
    }
}

pub fn write_results<W: Write>(mut w: W, rows: &[ResultRow]) -> io::Result<()> {
    // csv emits the header lazily with the first record
    if rows.is_empty() {
        writeln!(w, "{RESULTS_HEADER}")?;
        return w.flush();
    }
    let mut rw = ResultsWriter::new(w);
    rw.write_rows(rows)?;
    rw.finish().map(|_| ())
}

pub fn read_results(path: &Path) -> io::Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err)?;
    rdr.deserialize().map(|r| r.map_err(csv_err)).collect()
}

pub fn write_trace<W: Write>(w: W, rows: &[TraceRow]) -> io::Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wr.write_record(["iter", "primal_residual", "dual_residual", "objective"])
        .map_err(csv_err)?;
    for r in rows {
        wr.serialize(TraceCsvRow {
            iter: r.iter,
            primal_residual: r.primal_residual,
            dual_residual: r.dual_residual,
            objective: r.objective,
        })
        .map_err(csv_err)?;
    }
    wr.flush()
}

pub fn write_channels<W: Write>(w: W, samples: &[&ChannelSample]) -> io::Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wr.write_record(["t", "ru", "terminal", "antenna", "re", "im"])
        .map_err(csv_err)?;
    for cs in samples {
        for (terminal, ru, antenna, h) in cs.entries() {
            wr.serialize(ChannelRow {
                t: cs.sample_index,
                ru,
                terminal,
                antenna,
                re: h.re,
                im: h.im,
            })
            .map_err(csv_err)?;
        }
    }
    wr.flush()
}

pub fn create(path: &Path) -> io::Result<File> {
    File::create(path)
}
