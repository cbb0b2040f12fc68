//! Result emission: histories and stability tables as CSV, fields as CSV
//! and compact binary, the record (config + metrics) as JSON.
//!
//! File contents are deterministic for a fixed (config, seed, build);
//! wall-clock time lives only in the JSON record.

use super::run::ResultRecord;
use super::stability::StabilityRow;
use crate::error::Result;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy)]
pub struct EmitFormats {
    pub csv: bool,
    pub json: bool,
}

impl Default for EmitFormats {
    fn default() -> Self {
        Self {
            csv: true,
            json: true,
        }
    }
}

fn file_stem(record: &ResultRecord) -> String {
    format!("{}-seed{}", record.config.id.label(), record.config.seed)
}

/// Write every artifact of a run into `dir` (created if missing); returns
/// the written paths.
pub fn emit_results(
    record: &ResultRecord,
    dir: &Path,
    formats: EmitFormats,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let stem = file_stem(record);
    let mut written = Vec::new();

    if formats.csv {
        let history_path = dir.join(format!("{stem}-history.csv"));
        let mut f = std::io::BufWriter::new(std::fs::File::create(&history_path)?);
        writeln!(f, "iteration,phase,loss,rel_error")?;
        for row in &record.history {
            match row.rel_error {
                Some(err) => writeln!(f, "{},{},{:.16e},{:.16e}", row.iter, row.phase, row.loss, err)?,
                None => writeln!(f, "{},{},{:.16e},", row.iter, row.phase, row.loss)?,
            }
        }
        drop(f);
        written.push(history_path);

        if let Some(pred) = &record.predicted {
            let p = dir.join(format!("{stem}-predicted.csv"));
            pred.write_csv(&p)?;
            written.push(p);
            let b = dir.join(format!("{stem}-predicted.bin"));
            pred.write_binary(&b)?;
            written.push(b);
        }
        if let Some(reference) = &record.reference {
            let p = dir.join(format!("{stem}-reference.csv"));
            reference.write_csv(&p)?;
            written.push(p);
            let b = dir.join(format!("{stem}-reference.bin"));
            reference.write_binary(&b)?;
            written.push(b);
        }
    }

    if formats.json {
        let json_path = dir.join(format!("{stem}-record.json"));
        let payload = serde_json::json!({
            "config": record.config,
            "final_loss": record.final_loss,
            "metrics": record.metrics.iter().map(|(k, v)| (k.clone(), *v)).collect::<std::collections::BTreeMap<_, _>>(),
            "statuses": record.statuses,
            "wall_seconds": record.wall_seconds,
            "history_len": record.history.len(),
        });
        std::fs::write(&json_path, serde_json::to_string_pretty(&payload).expect("serializable"))?;
        written.push(json_path);
    }
    Ok(written)
}

/// Stability table as CSV.
pub fn emit_stability(rows: &[StabilityRow], path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        f,
        "candidate,description,delta,epsilon,ratio_macro_micro,ratio_vanilla,velocity_independent"
    )?;
    for r in rows {
        writeln!(
            f,
            "{},{},{:.3e},{:.3e},{:.16e},{:.16e},{}",
            r.candidate,
            r.description,
            r.delta,
            r.epsilon,
            r.ratio_macro_micro,
            r.ratio_vanilla,
            r.velocity_independent
        )?;
    }
    Ok(())
}
