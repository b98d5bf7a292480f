use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::FORMAT_VERSION;

pub fn write_metrics_json<W: Write, T: Serialize>(mut w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

/// A `#` version line, then one `name<TAB>value` row per metric in the given order.
/// Missing values are written as `NA`.
pub fn write_metrics_tsv<W: Write>(mut w: W, rows: &[(&str, Option<f64>)]) -> Result<()> {
    writeln!(w, "# kgraph-metrics {FORMAT_VERSION}")?;
    writeln!(w, "metric\tvalue")?;
    for (name, v) in rows {
        match v {
            Some(v) => writeln!(w, "{name}\t{v}")?,
            None => writeln!(w, "{name}\tNA")?,
        }
    }
    Ok(())
}

/// A `#` version line, then `epoch,loss` with 1-based epochs.
pub fn write_trace_csv<W: Write>(mut w: W, trace: &[f64]) -> Result<()> {
    writeln!(w, "# kgraph-trace {FORMAT_VERSION}")?;
    writeln!(w, "epoch,loss")?;
    for (i, l) in trace.iter().enumerate() {
        writeln!(w, "{},{l}", i + 1)?;
    }
    Ok(())
}
