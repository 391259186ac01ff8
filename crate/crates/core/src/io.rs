//! CSV and JSON formats.
//!
//! Samples are read from CSV with header `y,x,z,d`, where `x` and `z` are
//! labels mapped to levels in order of first appearance (unless the levels
//! are given) and `d` is a 1-based treatment number. Outputs are CSV tables
//! for paths and simulations and JSON documents for fitted arrays, rules and
//! selections. Floats are written in shortest round-trip form.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::distributions::{StepCdf, SupportInterval};
use crate::error::{Error, Result};
use crate::estimation::{PropensityModel, TrainingRecord, TrainingSample};
use crate::objective::{CondCdfArray, CovariateSpace, DecisionRule};
use crate::selection::{BudgetSelection, LambdaGrid, LambdaPath, PathEntry};
use crate::simharness::SimResult;

pub const SAMPLE_HEADER: [&str; 4] = ["y", "x", "z", "d"];

/// Shortest representation that parses back to the same value.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn csv_error(e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Io(e.to_string()),
        _ => Error::Parse { row: e.position().map_or(0, |p| p.record() as usize), reason: e.to_string() },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleCsvOptions {
    pub support: SupportInterval,
    /// Number of treatments; the largest observed `d` when absent.
    pub k: Option<usize>,
    pub x_levels: Option<Vec<String>>,
    pub z_levels: Option<Vec<String>>,
    /// Remove covariate levels without observations.
    pub drop_empty_x: bool,
    /// Min-max rescale outcomes to `[0, 1]` (the support becomes `[0, 1]`).
    pub rescale: bool,
}

impl Default for SampleCsvOptions {
    fn default() -> Self {
        Self {
            support: SupportInterval::unit(),
            k: None,
            x_levels: None,
            z_levels: None,
            drop_empty_x: false,
            rescale: false,
        }
    }
}

struct Levels {
    labels: Vec<String>,
    index: HashMap<String, usize>,
    fixed: bool,
}

impl Levels {
    fn new(given: &Option<Vec<String>>) -> Self {
        let labels = given.clone().unwrap_or_default();
        let index = labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        Self { labels, index, fixed: given.is_some() }
    }

    fn get(&mut self, label: &str, row: usize, what: &str) -> Result<usize> {
        if let Some(&i) = self.index.get(label) {
            return Ok(i);
        }
        if self.fixed {
            return Err(Error::Schema(format!("row {row}: unknown {what} level {label:?}")));
        }
        self.labels.push(label.to_owned());
        self.index.insert(label.to_owned(), self.labels.len() - 1);
        Ok(self.labels.len() - 1)
    }
}

/// Reads a training sample. Malformed rows give [`Error::Parse`]; well-formed
/// rows that violate the schema (header, support, treatment range, levels)
/// give [`Error::Schema`]. Rows are numbered from 1 after the header.
pub fn read_sample_csv<R: Read>(reader: R, opts: &SampleCsvOptions) -> Result<TrainingSample> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.iter().ne(SAMPLE_HEADER) {
        return Err(Error::Schema(format!("header must be y,x,z,d, found {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut xs = Levels::new(&opts.x_levels);
    let mut zs = Levels::new(&opts.z_levels);
    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| match csv_error(e) {
            Error::Parse { reason, .. } => Error::Parse { row, reason },
            other => other,
        })?;
        let parse_err = |reason: String| Error::Parse { row, reason };
        let y: f64 = rec[0].parse().map_err(|_| parse_err(format!("outcome {:?} is not a number", &rec[0])))?;
        let d: usize = rec[3].parse().map_err(|_| parse_err(format!("treatment {:?} is not an integer", &rec[3])))?;
        if !y.is_finite() {
            return Err(Error::Schema(format!("row {row}: outcome {y} is not finite")));
        }
        if d == 0 {
            return Err(Error::Schema(format!("row {row}: treatments are numbered from 1")));
        }
        if let Some(k) = opts.k {
            if d > k {
                return Err(Error::Schema(format!("row {row}: treatment {d} exceeds K = {k}")));
            }
        }
        let support = opts.support;
        if !opts.rescale && !support.contains(y) {
            return Err(Error::Schema(format!(
                "row {row}: outcome {y} lies outside the support [{}, {}]",
                support.a(),
                support.b()
            )));
        }
        let x = xs.get(&rec[1], row, "x")?;
        let z = zs.get(&rec[2], row, "z")?;
        records.push(TrainingRecord { y, x, z, d: d - 1 });
    }
    if records.is_empty() {
        return Err(Error::Schema("no data rows".into()));
    }

    let mut support = opts.support;
    if opts.rescale {
        let lo = records.iter().map(|r| r.y).fold(f64::INFINITY, f64::min);
        let hi = records.iter().map(|r| r.y).fold(f64::NEG_INFINITY, f64::max);
        for r in &mut records {
            r.y = if hi > lo { ((r.y - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 };
        }
        support = SupportInterval::unit();
    }

    let mut x_labels = xs.labels;
    if opts.drop_empty_x {
        let mut seen = vec![false; x_labels.len()];
        for r in &records {
            seen[r.x] = true;
        }
        let mut remap = vec![usize::MAX; x_labels.len()];
        let mut kept = Vec::new();
        for (i, label) in x_labels.into_iter().enumerate() {
            if seen[i] {
                remap[i] = kept.len();
                kept.push(label);
            }
        }
        for r in &mut records {
            r.x = remap[r.x];
        }
        x_labels = kept;
    }

    let k = opts.k.unwrap_or_else(|| records.iter().map(|r| r.d + 1).max().unwrap_or(0));
    let space = CovariateSpace::new(x_labels, zs.labels, k).map_err(|e| Error::Schema(e.to_string()))?;
    TrainingSample::new(Arc::new(space), support, records)
}

pub fn write_sample_csv<W: Write>(sample: &TrainingSample, writer: W) -> Result<()> {
    let space = sample.space();
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SAMPLE_HEADER).map_err(csv_error)?;
    for r in sample.records() {
        w.write_record([
            fmt_f64(r.y),
            space.x_levels()[r.x].clone(),
            space.z_levels()[r.z].clone(),
            (r.d + 1).to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub const PROPENSITY_HEADER: [&str; 4] = ["x", "z", "d", "e"];

/// Reads known propensities `e_d(x, z)` from CSV with header `x,z,d,e`
/// (`d` 1-based). Missing combinations are 0. Group masses come from `pz`.
pub fn read_propensity_csv<R: Read>(reader: R, space: &CovariateSpace, pz: Vec<f64>) -> Result<PropensityModel> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.iter().ne(PROPENSITY_HEADER) {
        return Err(Error::Schema("propensity header must be x,z,d,e".into()));
    }
    let mut e = vec![0.0; space.n_cells()];
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|err| Error::Parse { row, reason: err.to_string() })?;
        let x =
            space.x_index(&rec[0]).ok_or_else(|| Error::Schema(format!("row {row}: unknown x level {:?}", &rec[0])))?;
        let z =
            space.z_index(&rec[1]).ok_or_else(|| Error::Schema(format!("row {row}: unknown z level {:?}", &rec[1])))?;
        let d: usize = rec[2]
            .parse()
            .map_err(|_| Error::Parse { row, reason: format!("treatment {:?} is not an integer", &rec[2]) })?;
        if d == 0 || d > space.k() {
            return Err(Error::Schema(format!("row {row}: treatment {d} is not in 1..={}", space.k())));
        }
        let p: f64 =
            rec[3].parse().map_err(|_| Error::Parse { row, reason: format!("{:?} is not a number", &rec[3]) })?;
        e[space.cell(d - 1, x, z)] = p;
    }
    PropensityModel::new(space, e, pz).map_err(|err| Error::Schema(err.to_string()))
}

/// One conditional cdf in a fitted-array document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDoc {
    /// 1-based.
    pub treatment: usize,
    pub x: String,
    pub z: String,
    /// Observations in the cell.
    pub count: usize,
    /// No observations: the cdf is the point mass at `b`.
    pub empty: bool,
    /// `[location, mass]` pairs.
    pub atoms: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedArrayDoc {
    pub support: [f64; 2],
    pub x_levels: Vec<String>,
    pub z_levels: Vec<String>,
    pub k: usize,
    pub n: usize,
    /// `p(x, z)`, one row per `x` level.
    pub pxz: Vec<Vec<f64>>,
    /// Ordered by treatment, then `x`, then `z`.
    pub cells: Vec<CellDoc>,
}

impl FittedArrayDoc {
    pub fn new(sample: &TrainingSample, arr: &CondCdfArray) -> Self {
        let space = arr.space();
        let counts = sample.cell_counts();
        let mut cells = Vec::with_capacity(space.n_cells());
        for i in 0..space.k() {
            for x in 0..space.nx() {
                for z in 0..space.nz() {
                    let count = counts[space.cell(i, x, z)];
                    cells.push(CellDoc {
                        treatment: i + 1,
                        x: space.x_levels()[x].clone(),
                        z: space.z_levels()[z].clone(),
                        count,
                        empty: count == 0,
                        atoms: arr.cdf(i, x, z).atoms().map(|(y, m)| [y, m]).collect(),
                    });
                }
            }
        }
        let support = arr.support();
        Self {
            support: [support.a(), support.b()],
            x_levels: space.x_levels().to_vec(),
            z_levels: space.z_levels().to_vec(),
            k: space.k(),
            n: sample.len(),
            pxz: (0..space.nx()).map(|x| (0..space.nz()).map(|z| arr.pxz(x, z)).collect()).collect(),
            cells,
        }
    }

    pub fn to_array(&self) -> Result<CondCdfArray> {
        let space = Arc::new(CovariateSpace::new(self.x_levels.clone(), self.z_levels.clone(), self.k)?);
        let support = SupportInterval::new(self.support[0], self.support[1])?;
        if self.cells.len() != space.n_cells() {
            return Err(Error::Schema(format!("expected {} cells, found {}", space.n_cells(), self.cells.len())));
        }
        let mut cells: Vec<Option<StepCdf>> = vec![None; space.n_cells()];
        for c in &self.cells {
            let (x, z) = match (space.x_index(&c.x), space.z_index(&c.z)) {
                (Some(x), Some(z)) if (1..=space.k()).contains(&c.treatment) => (x, z),
                _ => {
                    return Err(Error::Schema(format!(
                        "cell ({}, {:?}, {:?}) is not in the space",
                        c.treatment, c.x, c.z
                    )))
                }
            };
            let cdf = StepCdf::from_atoms(support, c.atoms.iter().map(|a| (a[0], a[1])))?;
            cells[space.cell(c.treatment - 1, x, z)] = Some(cdf);
        }
        let cells =
            cells.into_iter().collect::<Option<Vec<_>>>().ok_or_else(|| Error::Schema("duplicate cells".into()))?;
        CondCdfArray::new(space, cells, self.pxz.concat())
    }
}

/// Column names of the path table.
pub fn path_csv_header(z_levels: &[String]) -> Vec<String> {
    let mut h = vec!["lambda".to_owned(), "obj_value".to_owned(), "target_value".to_owned()];
    h.extend(z_levels.iter().map(|z| format!("unfair_{z}")));
    h.push("max_unfairness".to_owned());
    h
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn write_path_csv<W: Write>(path: &LambdaPath, writer: W) -> Result<()> {
    let space = path.entries.first().map(|e| e.rule.space().clone()).ok_or(Error::EmptySet)?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(path_csv_header(space.z_levels())).map_err(csv_error)?;
    for e in &path.entries {
        let mut rec = vec![fmt_f64(e.lambda), fmt_f64(e.obj_value), fmt_f64(e.target_value)];
        rec.extend(e.unfairness.iter().map(|&u| fmt_opt(u)));
        rec.push(fmt_f64(e.max_unfairness));
        w.write_record(rec).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Contents of a path table.
#[derive(Debug, Clone, PartialEq)]
pub struct PathTable {
    pub z_levels: Vec<String>,
    pub lambdas: Vec<f64>,
    pub obj_values: Vec<f64>,
    pub target_values: Vec<f64>,
    pub unfairness: Vec<Vec<Option<f64>>>,
    pub max_unfairness: Vec<f64>,
}

pub fn read_path_csv<R: Read>(reader: R) -> Result<PathTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers().map_err(csv_error)?.iter().map(str::to_owned).collect();
    let nz = header.len().checked_sub(4).ok_or_else(|| Error::Schema("too few columns".into()))?;
    let z_levels: Vec<String> = header[3..3 + nz]
        .iter()
        .map(|h| h.strip_prefix("unfair_").map(str::to_owned))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::Schema("unfairness columns must be named unfair_<z>".into()))?;
    if header != path_csv_header(&z_levels) {
        return Err(Error::Schema(format!("unexpected path header {header:?}")));
    }
    let mut t = PathTable {
        z_levels,
        lambdas: vec![],
        obj_values: vec![],
        target_values: vec![],
        unfairness: vec![],
        max_unfairness: vec![],
    };
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Parse { row, reason: e.to_string() })?;
        let num = |j: usize| -> Result<f64> {
            rec[j].parse().map_err(|_| Error::Parse { row, reason: format!("{:?} is not a number", &rec[j]) })
        };
        t.lambdas.push(num(0)?);
        t.obj_values.push(num(1)?);
        t.target_values.push(num(2)?);
        t.unfairness.push(
            (3..3 + nz).map(|j| if rec[j].is_empty() { Ok(None) } else { num(j).map(Some) }).collect::<Result<_>>()?,
        );
        t.max_unfairness.push(num(3 + nz)?);
    }
    LambdaGrid::new(t.lambdas.clone()).map_err(|e| Error::Schema(e.to_string()))?;
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleEntryDoc {
    pub lambda: f64,
    pub obj_value: f64,
    pub target_value: f64,
    /// Aligned with `z_levels`; `null` for groups without mass.
    pub unfairness: Vec<Option<f64>>,
    pub max_unfairness: f64,
    /// One row per `x` level, one column per treatment.
    pub rule: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RulesDoc {
    pub n: usize,
    pub target: String,
    pub similarity: String,
    pub x_levels: Vec<String>,
    pub z_levels: Vec<String>,
    pub k: usize,
    pub entries: Vec<RuleEntryDoc>,
}

impl RulesDoc {
    pub fn new(path: &LambdaPath, target: &str, similarity: &str) -> Result<Self> {
        let space = path.entries.first().map(|e| e.rule.space().clone()).ok_or(Error::EmptySet)?;
        Ok(Self {
            n: path.n,
            target: target.to_owned(),
            similarity: similarity.to_owned(),
            x_levels: space.x_levels().to_vec(),
            z_levels: space.z_levels().to_vec(),
            k: space.k(),
            entries: path
                .entries
                .iter()
                .map(|e| RuleEntryDoc {
                    lambda: e.lambda,
                    obj_value: e.obj_value,
                    target_value: e.target_value,
                    unfairness: e.unfairness.clone(),
                    max_unfairness: e.max_unfairness,
                    rule: e.rule.to_rows(),
                })
                .collect(),
        })
    }

    pub fn to_path(&self) -> Result<LambdaPath> {
        let space = Arc::new(CovariateSpace::new(self.x_levels.clone(), self.z_levels.clone(), self.k)?);
        let grid = LambdaGrid::new(self.entries.iter().map(|e| e.lambda).collect())?;
        let entries = self
            .entries
            .iter()
            .map(|e| {
                Ok(PathEntry {
                    lambda: e.lambda,
                    rule: DecisionRule::new(space.clone(), e.rule.clone())?,
                    obj_value: e.obj_value,
                    target_value: e.target_value,
                    unfairness: e.unfairness.clone(),
                    max_unfairness: e.max_unfairness,
                })
            })
            .collect::<Result<_>>()?;
        Ok(LambdaPath { grid, entries, n: self.n })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaDoc {
    pub lambda: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionDoc {
    pub n: usize,
    pub beta: f64,
    pub c_n: f64,
    pub threshold: f64,
    pub chosen_lambda: f64,
    /// Present when the rules are known.
    pub chosen_rule: Option<Vec<Vec<f64>>>,
    pub deltas: Vec<DeltaDoc>,
}

impl SelectionDoc {
    pub fn new(sel: &BudgetSelection, n: usize, chosen_rule: Option<&DecisionRule>) -> Self {
        Self {
            n,
            beta: sel.beta,
            c_n: sel.c_n,
            threshold: sel.threshold,
            chosen_lambda: sel.chosen_lambda,
            chosen_rule: chosen_rule.map(DecisionRule::to_rows),
            deltas: sel.deltas.iter().map(|&(lambda, delta)| DeltaDoc { lambda, delta }).collect(),
        }
    }
}

pub const SIM_ROWS_HEADER: [&str; 7] = ["n", "mechanism", "lambda", "replication", "delta_hat", "emp_value", "regret"];

pub const SIM_AGGREGATE_HEADER: [&str; 13] = [
    "n",
    "mechanism",
    "lambda",
    "replications",
    "mean_delta_hat",
    "sd_delta_hat",
    "median_delta_hat",
    "mean_emp_value",
    "sd_emp_value",
    "median_emp_value",
    "mean_regret",
    "sd_regret",
    "median_regret",
];

/// Long format, one row per replication and grid point.
pub fn write_sim_rows_csv<W: Write>(result: &SimResult, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SIM_ROWS_HEADER).map_err(csv_error)?;
    for r in &result.rows {
        w.write_record([
            r.n.to_string(),
            r.mechanism.to_string(),
            fmt_f64(r.lambda),
            r.replication.to_string(),
            fmt_f64(r.delta_hat),
            fmt_f64(r.emp_value),
            fmt_f64(r.regret),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sim_aggregates_csv<W: Write>(result: &SimResult, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SIM_AGGREGATE_HEADER).map_err(csv_error)?;
    for a in &result.aggregates {
        let mut rec = vec![a.n.to_string(), a.mechanism.to_string(), fmt_f64(a.lambda), a.replications.to_string()];
        for s in [a.delta_hat, a.emp_value, a.regret] {
            rec.extend([fmt_f64(s.mean), fmt_f64(s.sd), fmt_f64(s.median)]);
        }
        w.write_record(rec).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}
