//! Plain text formats for moments, measures, lattice fields, pole pools and
//! experiment summaries.

use std::io::{BufRead, BufReader, Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::EstimationResult;
use crate::harness::{ErrorComparison, ParamStats, Summary};
use crate::lattice::{GridField, Lattice};
use crate::model::{ComplexMeasure, MomentSequence};
use crate::pencil::PencilSolution;
use crate::ptransform::PseudosamplePool;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Cx {
    re: f64,
    im: f64,
}

impl From<Complex64> for Cx {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

impl From<Cx> for Complex64 {
    fn from(z: Cx) -> Self {
        Complex64::new(z.re, z.im)
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

#[derive(Serialize, Deserialize)]
struct MomentRow {
    k: usize,
    re: f64,
    im: f64,
}

/// CSV with header `k,re,im`.
pub fn write_moments<W: Write>(w: W, moments: &MomentSequence) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for (k, a) in moments.values().iter().enumerate() {
        out.serialize(MomentRow { k, re: a.re, im: a.im }).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads moments written by [`write_moments`]; rows must be `k = 0, 1, …`.
pub fn read_moments<R: Read>(r: R, sigma: f64) -> Result<MomentSequence> {
    let mut values = Vec::new();
    for (expected, row) in csv::Reader::from_reader(r).deserialize::<MomentRow>().enumerate() {
        let row = row.map_err(csv_err)?;
        if row.k != expected {
            return Err(Error::Parse(format!("moment index {} where {expected} was expected", row.k)));
        }
        values.push(Complex64::new(row.re, row.im));
    }
    MomentSequence::new(values, sigma)
}

#[derive(Serialize, Deserialize)]
struct MeasureJson {
    nodes: Vec<Cx>,
    weights: Vec<Cx>,
}

pub fn write_measure<W: Write>(w: W, measure: &ComplexMeasure) -> Result<()> {
    let json = MeasureJson {
        nodes: measure.nodes().iter().map(|&z| z.into()).collect(),
        weights: measure.weights().iter().map(|&z| z.into()).collect(),
    };
    serde_json::to_writer_pretty(w, &json)?;
    Ok(())
}

pub fn read_measure<R: Read>(r: R) -> Result<ComplexMeasure> {
    let json: MeasureJson = serde_json::from_reader(r)?;
    ComplexMeasure::new(
        json.nodes.into_iter().map(Into::into).collect(),
        json.weights.into_iter().map(Into::into).collect(),
    )
}

/// `# x_min x_max y_min y_max nx ny`, then one comma separated row per `y`,
/// ascending. Masked cells are written as `nan`.
pub fn write_grid<W: Write>(mut w: W, field: &GridField) -> Result<()> {
    let l = field.lattice;
    writeln!(w, "# {} {} {} {} {} {}", l.x_min, l.x_max, l.y_min, l.y_max, l.nx, l.ny)?;
    for j in 0..l.ny {
        let row: Vec<String> = (0..l.nx)
            .map(|i| if field.is_valid(i, j) { field.get(i, j).to_string() } else { "nan".into() })
            .collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Reads a field written by [`write_grid`]. Non-finite values are masked.
pub fn read_grid<R: Read>(r: R) -> Result<GridField> {
    let mut reader = BufReader::new(r);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let parts: Vec<&str> = header
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| Error::Parse("grid header must start with '#'".into()))?
        .split_whitespace()
        .collect();
    if parts.len() != 6 {
        return Err(Error::Parse(format!("grid header has {} fields, expected 6", parts.len())));
    }
    let float = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s}: {e}")));
    let int = |s: &str| s.parse::<usize>().map_err(|e| Error::Parse(format!("{s}: {e}")));
    let lattice = Lattice::new(
        float(parts[0])?,
        float(parts[1])?,
        float(parts[2])?,
        float(parts[3])?,
        int(parts[4])?,
        int(parts[5])?,
    )?;
    let mut values = Vec::with_capacity(lattice.len());
    let mut rows = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
    for record in rows.records() {
        let record = record.map_err(csv_err)?;
        if record.len() != lattice.nx {
            return Err(Error::DimensionMismatch {
                expected: lattice.nx,
                got: record.len(),
            });
        }
        for v in record.iter() {
            values.push(float(v.trim())?);
        }
    }
    let mut field = GridField::new(lattice, values)?;
    for (m, v) in field.mask.iter_mut().zip(&field.values) {
        *m = v.is_finite();
    }
    Ok(field)
}

#[derive(Serialize, Deserialize)]
struct PoolRow {
    r: usize,
    re_pole: f64,
    im_pole: f64,
    re_res: f64,
    im_res: f64,
}

/// CSV `r,re_pole,im_pole,re_res,im_res`, `r` counted from zero.
pub fn write_pool<W: Write>(w: W, pool: &PseudosamplePool) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for (r, pole, res) in pool.iter_poles() {
        out.serialize(PoolRow {
            r,
            re_pole: pole.re,
            im_pole: pole.im,
            re_res: res.re,
            im_res: res.im,
        })
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a pool written by [`write_pool`]. Rows of one pseudosample must be
/// contiguous and indices must run `0..R`.
pub fn read_pool<R: Read>(r: R, sigma_prime: f64) -> Result<PseudosamplePool> {
    let mut solutions: Vec<PencilSolution> = Vec::new();
    for row in csv::Reader::from_reader(r).deserialize::<PoolRow>() {
        let row = row.map_err(csv_err)?;
        if row.r == solutions.len() {
            solutions.push(PencilSolution {
                poles: Vec::new(),
                residues: Vec::new(),
                condition: f64::NAN,
            });
        } else if row.r + 1 != solutions.len() {
            return Err(Error::Parse(format!("pseudosample index {} out of sequence", row.r)));
        }
        let sol = solutions.last_mut().expect("pushed above");
        sol.poles.push(Complex64::new(row.re_pole, row.im_pole));
        sol.residues.push(Complex64::new(row.re_res, row.im_res));
    }
    Ok(PseudosamplePool::from_solutions(sigma_prime, solutions))
}

#[derive(Serialize, Deserialize)]
struct SolutionRow {
    re_pole: f64,
    im_pole: f64,
    re_res: f64,
    im_res: f64,
}

/// CSV `re_pole,im_pole,re_res,im_res`.
pub fn write_solution<W: Write>(w: W, sol: &PencilSolution) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for (p, c) in sol.poles.iter().zip(&sol.residues) {
        out.serialize(SolutionRow {
            re_pole: p.re,
            im_pole: p.im,
            re_res: c.re,
            im_res: c.im,
        })
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ClusterJson {
    candidate: Cx,
    fraction: f64,
    size: usize,
}

#[derive(Serialize)]
struct EstimationJson {
    p_hat: usize,
    nodes: Vec<Cx>,
    weights: Vec<Cx>,
    clusters: Vec<ClusterJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    residual_amplitude: Option<f64>,
}

pub fn write_estimation<W: Write>(w: W, est: &EstimationResult) -> Result<()> {
    let json = EstimationJson {
        p_hat: est.p_hat,
        nodes: est.nodes_hat.iter().map(|&z| z.into()).collect(),
        weights: est.weights_hat.iter().map(|&z| z.into()).collect(),
        clusters: est
            .clusters
            .iter()
            .map(|c| ClusterJson {
                candidate: c.candidate.into(),
                fraction: c.cardinality_fraction,
                size: c.len(),
            })
            .collect(),
        residual_amplitude: est.residual_amplitude,
    };
    serde_json::to_writer_pretty(w, &json)?;
    Ok(())
}

fn summary_record(name: &str, s: &Summary) -> Vec<String> {
    [s.truth.re, s.truth.im, s.bias.re, s.bias.im, s.sd, s.mse]
        .iter()
        .map(|v| v.to_string())
        .fold(vec![name.to_string()], |mut acc, v| {
            acc.push(v);
            acc
        })
}

/// One row per parameter (`xi1…`, `c1…`, `p`) with columns
/// `parameter,true_re,true_im,bias_re,bias_im,sd,mse`, followed by
/// two-field `acceptance_rate` and `a_res` rows.
pub fn write_table1<W: Write>(w: W, stats: &ParamStats) -> Result<()> {
    let mut out = csv::WriterBuilder::new().flexible(true).from_writer(w);
    out.write_record(["parameter", "true_re", "true_im", "bias_re", "bias_im", "sd", "mse"])
        .map_err(csv_err)?;
    for (k, s) in stats.nodes.iter().enumerate() {
        out.write_record(summary_record(&format!("xi{}", k + 1), s)).map_err(csv_err)?;
    }
    for (k, s) in stats.weights.iter().enumerate() {
        out.write_record(summary_record(&format!("c{}", k + 1), s)).map_err(csv_err)?;
    }
    out.write_record(summary_record("p", &stats.order)).map_err(csv_err)?;
    out.write_record(["acceptance_rate".to_string(), stats.acceptance_rate.to_string()])
        .map_err(csv_err)?;
    let a_res = stats.a_res.map_or("nan".to_string(), |a| a.to_string());
    out.write_record(["a_res".to_string(), a_res]).map_err(csv_err)?;
    out.flush()?;
    Ok(())
}

/// CSV `m,e0,eR`, `m` counted from one.
pub fn write_error_comparison<W: Write>(w: W, cmp: &ErrorComparison) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["m", "e0", "eR"]).map_err(csv_err)?;
    for p in &cmp.pairs {
        out.write_record([(p.m + 1).to_string(), p.e0.to_string(), p.e_r.to_string()])
            .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}
