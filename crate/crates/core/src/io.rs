//! File formats: problem JSON, trajectory CSV and run reports.
//!
//! Matrices are stored as arrays of rows. Infinite box bounds are written as `null`.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{FlagError, Result};
use crate::flag::{Mode, Record, RunMeta, Trajectory};
use crate::maps::MapKind;
use crate::problem::{BlockProblem, ConstrainedProblem, LinearMap, ObjectiveTerm, SmoothTerm, TermKind};

pub const PROBLEM_FORMAT: &str = "flagopt-problem/1";

/// Trajectory CSV columns, in order.
pub const CSV_COLUMNS: [&str; 11] = [
    "k", "t", "rho_k", "psi_x", "feas_x", "psi_z", "feas_z", "y_norm", "s_k", "bound_fn", "bound_feas",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TermJson {
    Zero {
        dim: usize,
    },
    Quadratic {
        h: Vec<Vec<f64>>,
        q: Vec<f64>,
        #[serde(default)]
        r: f64,
        #[serde(default)]
        sigma: f64,
    },
    L1 {
        dim: usize,
        weight: f64,
    },
    Box {
        lo: Vec<Option<f64>>,
        hi: Vec<Option<f64>>,
    },
    Sum {
        terms: Vec<TermJson>,
    },
    Stacked {
        blocks: Vec<TermJson>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothJson {
    pub h: Vec<Vec<f64>>,
    pub q: Vec<f64>,
    #[serde(default)]
    pub r: f64,
    pub lipschitz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockJson {
    pub u_dim: usize,
    pub v_dim: usize,
    pub sigma_f: f64,
    pub sigma_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemJson {
    pub format: String,
    pub n: usize,
    pub m: usize,
    pub objective: TermJson,
    #[serde(default)]
    pub smooth: Option<SmoothJson>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    /// Declared strong-convexity modulus; checked against the objective on load.
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub block: Option<BlockJson>,
    #[serde(default)]
    pub feasible_point: Option<Vec<f64>>,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn matrix_of(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let n = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != n) {
        return Err(FlagError::InvalidData(format!("{what}: ragged rows")));
    }
    let data: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), n, &data))
}

fn bound_to_json(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

pub fn term_to_json(t: &ObjectiveTerm) -> TermJson {
    match t.kind() {
        TermKind::Zero => TermJson::Zero { dim: t.dim() },
        TermKind::Quadratic { h, q, r } => TermJson::Quadratic {
            h: rows_of(h),
            q: q.iter().copied().collect(),
            r: *r,
            sigma: t.strong_convexity(),
        },
        TermKind::L1 { weight } => TermJson::L1 {
            dim: t.dim(),
            weight: *weight,
        },
        TermKind::Box { lo, hi } => TermJson::Box {
            lo: lo.iter().map(|&v| bound_to_json(v)).collect(),
            hi: hi.iter().map(|&v| bound_to_json(v)).collect(),
        },
        TermKind::Sum(terms) => TermJson::Sum {
            terms: terms.iter().map(term_to_json).collect(),
        },
        TermKind::Stacked(blocks) => TermJson::Stacked {
            blocks: blocks.iter().map(term_to_json).collect(),
        },
    }
}

pub fn term_from_json(t: &TermJson) -> Result<ObjectiveTerm> {
    match t {
        TermJson::Zero { dim } => {
            if *dim == 0 {
                return Err(FlagError::InvalidData("zero term needs a positive dimension".into()));
            }
            Ok(ObjectiveTerm::zero(*dim))
        }
        TermJson::Quadratic { h, q, r, sigma } => {
            let term = ObjectiveTerm::quadratic(matrix_of(h, "quadratic h")?, DVector::from_vec(q.clone()), *r)?;
            if *sigma != 0.0 {
                term.with_strong_convexity(*sigma)
            } else {
                Ok(term)
            }
        }
        TermJson::L1 { dim, weight } => ObjectiveTerm::l1(*dim, *weight),
        TermJson::Box { lo, hi } => ObjectiveTerm::box_indicator(
            DVector::from_iterator(lo.len(), lo.iter().map(|v| v.unwrap_or(f64::NEG_INFINITY))),
            DVector::from_iterator(hi.len(), hi.iter().map(|v| v.unwrap_or(f64::INFINITY))),
        ),
        TermJson::Sum { terms } => ObjectiveTerm::sum(terms.iter().map(term_from_json).collect::<Result<_>>()?),
        TermJson::Stacked { blocks } => {
            ObjectiveTerm::stacked(blocks.iter().map(term_from_json).collect::<Result<_>>()?)
        }
    }
}

pub fn problem_to_json(p: &ConstrainedProblem) -> ProblemJson {
    ProblemJson {
        format: PROBLEM_FORMAT.into(),
        n: p.n(),
        m: p.m(),
        objective: term_to_json(p.objective()),
        smooth: p.smooth().map(|h| SmoothJson {
            h: rows_of(&h.h),
            q: h.q.iter().copied().collect(),
            r: h.r,
            lipschitz: h.lipschitz_grad,
        }),
        a: rows_of(p.constraint_map().matrix()),
        b: p.rhs().iter().copied().collect(),
        sigma: Some(p.sigma()),
        block: p.block().map(|s| BlockJson {
            u_dim: s.u_dim,
            v_dim: s.v_dim,
            sigma_f: s.sigma_f,
            sigma_g: s.sigma_g,
        }),
        feasible_point: p.feasible_point().map(|x| x.iter().copied().collect()),
    }
}

pub fn problem_from_json(j: &ProblemJson) -> Result<ConstrainedProblem> {
    if j.format != PROBLEM_FORMAT {
        return Err(FlagError::InvalidData(format!(
            "unknown problem format '{}' (expected '{PROBLEM_FORMAT}')",
            j.format
        )));
    }
    if j.m == 0 || j.a.is_empty() {
        return Err(FlagError::InvalidData("at least one constraint row is required (m ≥ 1)".into()));
    }
    let objective = term_from_json(&j.objective)?;
    let a = matrix_of(&j.a, "constraint matrix")?;
    if a.nrows() != j.m || a.ncols() != j.n {
        return Err(FlagError::InvalidData(format!(
            "constraint matrix is {}x{}, header says {}x{}",
            a.nrows(),
            a.ncols(),
            j.m,
            j.n
        )));
    }
    if objective.dim() != j.n {
        return Err(FlagError::dim("objective", j.n, objective.dim()));
    }
    let b = DVector::from_vec(j.b.clone());
    let declared = objective.strong_convexity();
    if let Some(s) = j.sigma {
        if (s - declared).abs() > 1e-12 * (1.0 + declared.abs()) {
            return Err(FlagError::InvalidData(format!(
                "sigma {s} does not match the objective's declared modulus {declared}"
            )));
        }
    }
    let prob = match &j.block {
        Some(blk) => {
            if j.smooth.is_some() {
                return Err(FlagError::InvalidData("a two-block problem cannot carry a smooth term".into()));
            }
            let TermKind::Stacked(blocks) = objective.kind() else {
                return Err(FlagError::InvalidData("a two-block problem needs a stacked objective".into()));
            };
            if blocks.len() != 2 || blocks[0].dim() != blk.u_dim || blocks[1].dim() != blk.v_dim {
                return Err(FlagError::InvalidData(format!(
                    "block sizes ({}, {}) do not match the stacked objective",
                    blk.u_dim, blk.v_dim
                )));
            }
            let bp = BlockProblem::new(
                blocks[0].clone(),
                blocks[1].clone(),
                LinearMap::new(a.columns(0, blk.u_dim).into_owned())?,
                LinearMap::new(a.columns(blk.u_dim, blk.v_dim).into_owned())?,
                b,
            );
            bp.flatten_block()?
        }
        None => {
            let smooth = match &j.smooth {
                Some(s) => Some(SmoothTerm::new(
                    matrix_of(&s.h, "smooth h")?,
                    DVector::from_vec(s.q.clone()),
                    s.r,
                    s.lipschitz,
                )?),
                None => None,
            };
            ConstrainedProblem::new(objective, smooth, LinearMap::new(a)?, b, declared)?
        }
    };
    match &j.feasible_point {
        Some(x) => prob.with_feasible_point(DVector::from_vec(x.clone())),
        None => Ok(prob),
    }
}

pub fn write_problem(path: &Path, p: &ConstrainedProblem) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&problem_to_json(p))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| FlagError::Io(format!("{}: {e}", path.display())))
}

pub fn read_problem(path: &Path) -> Result<ConstrainedProblem> {
    let text = fs::read_to_string(path).map_err(|e| FlagError::Io(format!("{}: {e}", path.display())))?;
    let j: ProblemJson =
        serde_json::from_str(&text).map_err(|e| FlagError::InvalidData(format!("{}: {e}", path.display())))?;
    problem_from_json(&j)
}

/// Run parameters written as `# key=value` lines ahead of the CSV header.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvHeader {
    pub map: MapKind,
    pub policy: String,
    pub mode: Mode,
    pub rho: f64,
    pub mu: f64,
    pub p: u8,
    pub delta: f64,
    pub iters: usize,
    pub z0: DVector<f64>,
    pub y0: DVector<f64>,
}

impl CsvHeader {
    pub fn from_meta(meta: &RunMeta, policy: &str, iters: usize) -> Self {
        CsvHeader {
            map: meta.map,
            policy: policy.into(),
            mode: meta.mode,
            rho: meta.rho,
            mu: meta.mu,
            p: meta.p,
            delta: meta.delta,
            iters,
            z0: meta.z0.clone(),
            y0: meta.y0.clone(),
        }
    }
}

fn vec_json(v: &DVector<f64>) -> String {
    serde_json::to_string(&v.iter().copied().collect::<Vec<f64>>()).expect("finite vector")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_trajectory<W: Write>(out: W, header: &CsvHeader, traj: &Trajectory) -> Result<()> {
    let mut out = out;
    writeln!(out, "# flagopt trajectory")?;
    writeln!(out, "# map={}", header.map)?;
    writeln!(out, "# policy={}", header.policy)?;
    writeln!(out, "# mode={}", header.mode)?;
    writeln!(out, "# rho={}", header.rho)?;
    writeln!(out, "# mu={}", header.mu)?;
    writeln!(out, "# p={}", header.p)?;
    writeln!(out, "# delta={}", header.delta)?;
    writeln!(out, "# iters={}", header.iters)?;
    writeln!(out, "# z0={}", vec_json(&header.z0))?;
    writeln!(out, "# y0={}", vec_json(&header.y0))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in &traj.records {
        w.write_record([
            r.k.to_string(),
            r.t.to_string(),
            r.rho_k.to_string(),
            r.psi_x.to_string(),
            r.feas_x.to_string(),
            r.psi_z.to_string(),
            r.feas_z.to_string(),
            r.y_norm.to_string(),
            opt(r.s_k),
            opt(r.bound_fn),
            opt(r.bound_feas),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_trajectory(path: &Path, header: &CsvHeader, traj: &Trajectory) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| FlagError::Io(format!("{}: {e}", path.display())))?;
    write_trajectory(std::io::BufWriter::new(f), header, traj)
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| FlagError::InvalidData(format!("trajectory header: bad value for {key}: '{v}'")))
}

fn parse_vec(key: &str, v: &str) -> Result<DVector<f64>> {
    let xs: Vec<f64> = serde_json::from_str(v.trim())
        .map_err(|e| FlagError::InvalidData(format!("trajectory header: bad {key}: {e}")))?;
    Ok(DVector::from_vec(xs))
}

/// Reads a trajectory CSV written by [`write_trajectory`].
///
/// Fails with an I/O error when fewer rows than the header's `iters + 1` are present.
pub fn read_trajectory<R: Read>(input: R) -> Result<(CsvHeader, Vec<Record>)> {
    let mut reader = BufReader::new(input);
    let mut kv = std::collections::HashMap::new();
    let mut body = String::new();
    let mut line = String::new();
    while reader.read_line(&mut line)? > 0 {
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.trim().split_once('=') {
                kv.insert(k.trim().to_string(), v.trim().to_string());
            }
        } else {
            body.push_str(&line);
        }
        line.clear();
    }
    let get = |k: &str| {
        kv.get(k)
            .cloned()
            .ok_or_else(|| FlagError::InvalidData(format!("trajectory header misses '{k}'")))
    };
    let header = CsvHeader {
        map: get("map")?.parse()?,
        policy: get("policy")?,
        mode: get("mode")?.parse()?,
        rho: parse("rho", &get("rho")?)?,
        mu: parse("mu", &get("mu")?)?,
        p: parse("p", &get("p")?)?,
        delta: parse("delta", &get("delta")?)?,
        iters: parse("iters", &get("iters")?)?,
        z0: parse_vec("z0", &get("z0")?)?,
        y0: parse_vec("y0", &get("y0")?)?,
    };
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let cols: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if cols != CSV_COLUMNS {
        return Err(FlagError::InvalidData(format!("unexpected CSV columns {cols:?}")));
    }
    let num = |s: &str, col: &str, row: usize| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| FlagError::InvalidData(format!("row {row}: bad {col} value '{s}'")))
    };
    let optional = |s: &str, col: &str, row: usize| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            num(s, col, row).map(Some)
        }
    };
    let mut records = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| FlagError::Io(format!("trajectory row {row}: {e}")))?;
        let f = |i: usize| rec.get(i).unwrap_or("");
        records.push(Record {
            k: parse("k", f(0))?,
            t: num(f(1), "t", row)?,
            rho_k: num(f(2), "rho_k", row)?,
            psi_x: num(f(3), "psi_x", row)?,
            feas_x: num(f(4), "feas_x", row)?,
            psi_z: num(f(5), "psi_z", row)?,
            feas_z: num(f(6), "feas_z", row)?,
            y_norm: num(f(7), "y_norm", row)?,
            s_k: optional(f(8), "s_k", row)?,
            bound_fn: optional(f(9), "bound_fn", row)?,
            bound_feas: optional(f(10), "bound_feas", row)?,
        });
    }
    if records.len() != header.iters + 1 {
        return Err(FlagError::Io(format!(
            "trajectory is truncated: {} data rows, expected {}",
            records.len(),
            header.iters + 1
        )));
    }
    Ok((header, records))
}

pub fn load_trajectory(path: &Path) -> Result<(CsvHeader, Vec<Record>)> {
    let f = fs::File::open(path).map_err(|e| FlagError::Io(format!("{}: {e}", path.display())))?;
    read_trajectory(f)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| FlagError::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate, Family, GenSpec};

    #[test]
    fn problem_roundtrip_is_exact() {
        for family in Family::ALL {
            let p = generate(&GenSpec::new(family, 7, 3, 0.5, 4)).unwrap();
            let j = problem_to_json(&p);
            let text = serde_json::to_string(&j).unwrap();
            let back = problem_from_json(&serde_json::from_str(&text).unwrap()).unwrap();
            assert_eq!(problem_to_json(&back), j, "{family}");
        }
    }

    #[test]
    fn box_bounds_use_null_for_infinity() {
        let t = ObjectiveTerm::box_indicator(
            DVector::from_column_slice(&[f64::NEG_INFINITY, 0.0]),
            DVector::from_column_slice(&[1.0, f64::INFINITY]),
        )
        .unwrap();
        let s = serde_json::to_string(&term_to_json(&t)).unwrap();
        assert_eq!(s, r#"{"type":"box","lo":[null,0.0],"hi":[1.0,null]}"#);
        assert_eq!(term_from_json(&serde_json::from_str(&s).unwrap()).unwrap(), t);
    }

    #[test]
    fn problem_without_rows_is_rejected() {
        let p = generate(&GenSpec::new(Family::EqQp, 3, 1, 1.0, 0)).unwrap();
        let mut j = problem_to_json(&p);
        j.m = 0;
        j.a.clear();
        j.b.clear();
        assert!(problem_from_json(&j).is_err());
    }
}
