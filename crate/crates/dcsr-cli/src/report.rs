//! Report model shared by `encode`, `footprint`, and `bench`. JSON is the
//! canonical schema; CSV is a flattened projection of the same data, one
//! row per format entry, with kernel and input fields repeated on every
//! row so each line stands alone.

use anyhow::Context;
use dcsr_core::engine::Counters;
use dcsr_core::footprint::FootprintBreakdown;
use serde::Serialize;

#[derive(Copy, Clone, PartialEq, Eq, clap::ValueEnum)]
pub enum ReportFormat {
    Json,
    Csv,
}

#[derive(Serialize)]
pub struct Report {
    pub tool_version: &'static str,
    pub command: &'static str,
    pub input: InputDescriptor,
    pub footprints: Vec<FormatFootprint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelReport>,
}

/// Where the matrix came from and its measured shape.
#[derive(Serialize)]
pub struct InputDescriptor {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    pub rows: usize,
    pub cols: usize,
    pub nnz: usize,
    /// Measured zero fraction, `1 - nnz / (rows * cols)`.
    pub sparsity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// One storage row. Either the byte fields or `error` is populated,
/// never both.
#[derive(Serialize)]
pub struct FormatFootprint {
    pub format: String,
    pub total_bytes: Option<u64>,
    pub values_bytes: Option<u64>,
    pub padding_bytes: Option<u64>,
    pub metadata_bytes: Option<u64>,
    /// Dense bytes (`rows * cols`) divided by `total_bytes`; above 1 means
    /// the encoding is smaller than dense.
    pub compression_ratio: Option<f64>,
    pub error: Option<String>,
}

impl FormatFootprint {
    pub fn ok(format: impl Into<String>, fp: &FootprintBreakdown) -> Self {
        Self {
            format: format.into(),
            total_bytes: Some(fp.total_bytes),
            values_bytes: Some(fp.values_bytes),
            padding_bytes: Some(fp.padding_bytes),
            metadata_bytes: Some(fp.metadata_bytes),
            compression_ratio: Some(fp.compression_ratio),
            error: None,
        }
    }

    pub fn err(format: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            format: format.into(),
            total_bytes: None,
            values_bytes: None,
            padding_bytes: None,
            metadata_bytes: None,
            compression_ratio: None,
            error: Some(message.into()),
        }
    }
}

#[derive(Serialize)]
pub struct KernelReport {
    pub kernel: &'static str,
    /// Engine lane-group size; absent for the dense reference kernel.
    pub group_size: Option<usize>,
    pub pixels: usize,
    pub repeats: usize,
    pub contiguous_loads: u64,
    pub gather_loads: u64,
    pub scatter_stores: u64,
    pub mac_lanes: u64,
    pub vector_ops: u64,
    /// Total across repeats. Informational only: every other field is
    /// deterministic, this one is not.
    pub wall_clock_us: u128,
}

impl KernelReport {
    pub fn new(
        kernel: &'static str,
        group_size: Option<usize>,
        pixels: usize,
        repeats: usize,
        counters: Counters,
        wall_clock_us: u128,
    ) -> Self {
        Self {
            kernel,
            group_size,
            pixels,
            repeats,
            contiguous_loads: counters.contiguous_loads,
            gather_loads: counters.gather_loads,
            scatter_stores: counters.scatter_stores,
            mac_lanes: counters.mac_lanes,
            vector_ops: counters.vector_ops,
            wall_clock_us,
        }
    }
}

const CSV_COLUMNS: [&str; 25] = [
    "tool_version",
    "command",
    "path",
    "rows",
    "cols",
    "nnz",
    "sparsity",
    "seed",
    "format",
    "total_bytes",
    "values_bytes",
    "padding_bytes",
    "metadata_bytes",
    "compression_ratio",
    "error",
    "kernel",
    "group_size",
    "pixels",
    "repeats",
    "contiguous_loads",
    "gather_loads",
    "scatter_stores",
    "mac_lanes",
    "vector_ops",
    "wall_clock_us",
];

pub fn render(report: &Report, format: ReportFormat) -> anyhow::Result<String> {
    match format {
        ReportFormat::Json => {
            Ok(serde_json::to_string_pretty(report).context("serializing report to JSON")?)
        }
        ReportFormat::Csv => to_csv(report),
    }
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

fn to_csv(report: &Report) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS)?;

    let kernel_fields = |k: &Option<KernelReport>| -> [String; 10] {
        match k {
            Some(k) => [
                k.kernel.to_string(),
                opt(&k.group_size),
                k.pixels.to_string(),
                k.repeats.to_string(),
                k.contiguous_loads.to_string(),
                k.gather_loads.to_string(),
                k.scatter_stores.to_string(),
                k.mac_lanes.to_string(),
                k.vector_ops.to_string(),
                k.wall_clock_us.to_string(),
            ],
            None => Default::default(),
        }
    };

    let format_fields = |f: Option<&FormatFootprint>| -> [String; 7] {
        match f {
            Some(f) => [
                f.format.clone(),
                opt(&f.total_bytes),
                opt(&f.values_bytes),
                opt(&f.padding_bytes),
                opt(&f.metadata_bytes),
                opt(&f.compression_ratio),
                opt(&f.error),
            ],
            None => Default::default(),
        }
    };

    let rows: Vec<Option<&FormatFootprint>> = if report.footprints.is_empty() {
        vec![None]
    } else {
        report.footprints.iter().map(Some).collect()
    };
    for row in rows {
        let mut record: Vec<String> = vec![
            report.tool_version.to_string(),
            report.command.to_string(),
            opt(&report.input.path),
            report.input.rows.to_string(),
            report.input.cols.to_string(),
            report.input.nnz.to_string(),
            report.input.sparsity.to_string(),
            opt(&report.input.seed),
        ];
        record.extend(format_fields(row));
        record.extend(kernel_fields(&report.kernel));
        w.write_record(&record)?;
    }

    let bytes = w.into_inner().context("flushing CSV writer")?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_fp() -> FootprintBreakdown {
        FootprintBreakdown::new(6, 0, 26, 1, 16)
    }

    fn sample_report(footprints: Vec<FormatFootprint>, kernel: Option<KernelReport>) -> Report {
        Report {
            tool_version: "0.1.0",
            command: "footprint",
            input: InputDescriptor {
                path: Some("m.mtx".into()),
                rows: 1,
                cols: 16,
                nnz: 6,
                sparsity: 0.625,
                seed: None,
            },
            footprints,
            kernel,
        }
    }

    #[test]
    fn csv_emits_one_row_per_format_plus_header() {
        let report = sample_report(
            vec![
                FormatFootprint::ok("dcsr", &sample_fp()),
                FormatFootprint::err("csr", "format limit exceeded"),
            ],
            None,
        );
        let csv = render(&report, ReportFormat::Csv).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("tool_version,command,path,"));
        assert!(lines[1].contains("dcsr,32,6,0,26,0.5,"));
        assert!(lines[2].contains("csr,,,,,,format limit exceeded"));
    }

    #[test]
    fn csv_without_footprints_still_emits_one_row() {
        let kernel = KernelReport::new("dense", None, 49, 1, Counters::default(), 1234);
        let report = sample_report(Vec::new(), Some(kernel));
        let csv = render(&report, ReportFormat::Csv).unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.lines().nth(1).unwrap().contains("dense,,49,1,"));
    }

    #[test]
    fn json_round_trips_the_byte_counts() {
        let report = sample_report(vec![FormatFootprint::ok("dcsr", &sample_fp())], None);
        let json = render(&report, ReportFormat::Json).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["footprints"][0]["total_bytes"], 32);
        assert_eq!(v["footprints"][0]["compression_ratio"], 0.5);
        assert_eq!(v["footprints"][0]["error"], serde_json::Value::Null);
    }
}
