use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use panoptic::metrics::{panoptic_quality, parsing_covering, PqSummary, SegmentKind};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::files::{load_panoptic, load_spec, manifest_path_for, timed, write_json, RunManifest};

/// Scores a predicted panoptic map against the ground truth.
#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    /// Dataset spec JSON.
    #[arg(long)]
    pub spec: PathBuf,
    /// JSON report path; defaults to `<pred>.eval.json`.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// One row per class present in either map, ascending id.
#[derive(Debug, Serialize)]
pub struct ClassRow {
    pub class_id: i32,
    pub name: String,
    pub kind: SegmentKind,
    pub pq: f64,
    pub sq: f64,
    pub rq: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub iou_sum: f64,
    /// `None` for classes absent from the ground truth.
    pub coverage: Option<f64>,
    pub gt_area: u64,
}

#[derive(Debug, Serialize)]
pub struct EvalReport {
    pub pq: f64,
    pub sq: f64,
    pub rq: f64,
    pub pc: f64,
    pub thing: PqSummary,
    pub stuff: PqSummary,
    pub classes: Vec<ClassRow>,
}

pub fn run(args: &EvalArgs) -> CliResult<()> {
    let spec = load_spec(&args.spec)?;
    let gt = load_panoptic("ground truth", &args.gt)?;
    let pred = load_panoptic("prediction", &args.pred)?;
    let mut manifest = RunManifest::new("eval");
    manifest.input("gt", &args.gt);
    manifest.input("pred", &args.pred);
    manifest.input("spec", &args.spec);

    let (pq, ms) = timed(|| panoptic_quality(&gt, &pred, &spec));
    let pq = pq.map_err(|e| CliError::from_lib("panoptic quality", e))?;
    manifest.time("pq", ms);
    let (pc, ms) = timed(|| parsing_covering(&gt, &pred, &spec));
    let pc = pc.map_err(|e| CliError::from_lib("parsing covering", e))?;
    manifest.time("pc", ms);

    let classes = pq
        .per_class
        .into_iter()
        .map(|c| {
            let cov = pc.per_class.iter().find(|v| v.class_id == c.class_id);
            ClassRow {
                class_id: c.class_id,
                name: c.name,
                kind: c.kind,
                pq: c.pq,
                sq: c.sq,
                rq: c.rq,
                tp: c.tp,
                fp: c.fp,
                fn_: c.fn_,
                iou_sum: c.iou_sum,
                coverage: cov.map(|v| v.coverage),
                gt_area: cov.map_or(0, |v| v.gt_area),
            }
        })
        .collect();
    let report = EvalReport {
        pq: pq.pq,
        sq: pq.sq,
        rq: pq.rq,
        pc: pc.pc,
        thing: pq.thing,
        stuff: pq.stuff,
        classes,
    };

    let path = args.report.clone().unwrap_or_else(|| args.pred.with_extension("eval.json"));
    write_json(&path, &report)?;
    manifest.output("report", &path);
    manifest.write(&manifest_path_for(&path))?;
    print!("{}", table(&report));
    Ok(())
}

/// Fixed-order text table: class, PQ, SQ, RQ, Cov.
pub fn table(r: &EvalReport) -> String {
    let pct = |v: f64| format!("{:>8.2}", 100.0 * v);
    let mut out = format!("{:<24}{:>8}{:>8}{:>8}{:>8}\n", "class", "PQ", "SQ", "RQ", "Cov");
    for c in &r.classes {
        let label = format!("{} ({})", c.name, c.class_id);
        let cov = c.coverage.map_or_else(|| format!("{:>8}", "-"), pct);
        let _ = writeln!(out, "{label:<24}{}{}{}{cov}", pct(c.pq), pct(c.sq), pct(c.rq));
    }
    let _ = writeln!(out, "{:<24}{}{}{}{}", "all", pct(r.pq), pct(r.sq), pct(r.rq), pct(r.pc));
    for (name, s) in [("things", &r.thing), ("stuff", &r.stuff)] {
        let _ = writeln!(out, "{name:<24}{}{}{}{:>8}", pct(s.pq), pct(s.sq), pct(s.rq), "-");
    }
    out
}
